"""Exact-match evaluation plus the post-hoc analyses: accuracy by output
length, a whole-word vowel-harmony check, and embedding export."""

from dataclasses import dataclass

from .errors import DataError
from .reranker import rerank as rerank_pick
from .search import beam_decode, greedy_decode

__all__ = [
    "EvalReport",
    "evaluate_accuracy",
    "LENGTH_BIN_LABELS",
    "bin_of_length",
    "accuracy_by_length",
    "FRONT_VOWELS",
    "BACK_VOWELS",
    "NEUTRAL_VOWELS",
    "is_harmonic",
    "vowel_harmony_check",
    "export_embeddings",
    "read_embeddings",
]


@dataclass(frozen=True)
class EvalReport:
    per_tag: dict      # tag -> exact-match accuracy
    counts: dict       # tag -> number of test examples
    macro: float       # mean of per-tag accuracies
    predictions: tuple  # (lemma, tag, gold, predicted) per example


def _as_ensemble(value):
    return list(value) if isinstance(value, (list, tuple)) else [value]


def predict_one(models, lemma, *, beam_width=None, lm=None, lam=1.0,
                rerank_model=None, max_len_slack=10):
    """Decode one lemma: greedy, beam top-1, or beam + reranker."""
    vocab = models[0].vocab
    x_ids = vocab.encode(lemma)
    max_len = len(x_ids) + max_len_slack
    if rerank_model is not None:
        if lm is None:
            raise DataError("reranking needs a language model for its features")
        results = beam_decode(models, x_ids, beam_width or 20, max_len)
        nbest = [(r.text(vocab), r.logprob) for r in results]
        return rerank_pick(nbest, rerank_model, lm, lemma)
    if beam_width is not None:
        results = beam_decode(models, x_ids, beam_width, max_len, lm=lm, lam=lam)
        return results[0].text(vocab)
    return greedy_decode(models, x_ids, max_len, lm=lm, lam=lam).text(vocab)


def evaluate_accuracy(models_by_tag, examples, *, beam_width=None, lm=None,
                      lam=1.0, rerank_model=None, max_len_slack=10):
    """Per-tag and macro exact-match accuracy over labelled examples.

    models_by_tag maps each tag to a model or ensemble list. Decoding is
    greedy unless beam_width is given; a reranker implies beam decoding.
    """
    if not examples:
        raise DataError("evaluate_accuracy: no examples given")
    missing = {ex.tag for ex in examples} - set(models_by_tag)
    if missing:
        raise DataError(f"no model for tags: {sorted(missing)}")
    hits, counts, predictions = {}, {}, []
    for ex in examples:
        models = _as_ensemble(models_by_tag[ex.tag])
        pred = predict_one(models, ex.lemma, beam_width=beam_width, lm=lm, lam=lam,
                           rerank_model=rerank_model, max_len_slack=max_len_slack)
        predictions.append((ex.lemma, ex.tag, ex.inflected, pred))
        counts[ex.tag] = counts.get(ex.tag, 0) + 1
        hits[ex.tag] = hits.get(ex.tag, 0) + (pred == ex.inflected)
    per_tag = {tag: hits[tag] / counts[tag] for tag in counts}
    macro = sum(per_tag.values()) / len(per_tag)
    return EvalReport(per_tag=per_tag, counts=counts, macro=macro,
                      predictions=tuple(predictions))


LENGTH_BIN_LABELS = ("<5", "[5,10)", "[10,15)", ">=15")


def bin_of_length(n):
    if n < 5:
        return LENGTH_BIN_LABELS[0]
    if n < 10:
        return LENGTH_BIN_LABELS[1]
    if n < 15:
        return LENGTH_BIN_LABELS[2]
    return LENGTH_BIN_LABELS[3]


def accuracy_by_length(predictions, golds):
    """Exact-match accuracy grouped by gold-form length; empty bins omitted."""
    if len(predictions) != len(golds):
        raise DataError(
            f"accuracy_by_length: {len(predictions)} predictions vs {len(golds)} golds")
    hits, counts = {}, {}
    for pred, gold in zip(predictions, golds):
        label = bin_of_length(len(gold))
        counts[label] = counts.get(label, 0) + 1
        hits[label] = hits.get(label, 0) + (pred == gold)
    return {label: hits[label] / counts[label]
            for label in LENGTH_BIN_LABELS if label in counts}


FRONT_VOWELS = "äöy"
BACK_VOWELS = "aou"
NEUTRAL_VOWELS = "ei"


def is_harmonic(word):
    """Whole-word harmony: front and back vowels never co-occur."""
    has_front = any(ch in FRONT_VOWELS for ch in word)
    has_back = any(ch in BACK_VOWELS for ch in word)
    return not (has_front and has_back)


def vowel_harmony_check(words):
    """(fraction of harmonic words, per-word verdicts); vacuously 1.0 if empty.

    No segmentation is attempted, so compounds mixing harmony classes across
    constituent words count as violations; the verdict list lets callers
    filter those out.
    """
    verdicts = [is_harmonic(w) for w in words]
    fraction = sum(verdicts) / len(verdicts) if verdicts else 1.0
    return fraction, verdicts


def export_embeddings(model, chars, path):
    """Write one `char TAB components...` line per char, floats via repr."""
    vocab = model.vocab
    known = set(vocab.data_chars)
    rows = []
    for ch in chars:
        if ch not in known:
            raise DataError(f"character {ch!r} is not in the model vocabulary")
        vec = model.embed.value[vocab.id_of(ch)]
        rows.append(ch + "\t" + "\t".join(repr(float(v)) for v in vec))
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(rows) + "\n")


def read_embeddings(path):
    out = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            parts = line.rstrip("\n").split("\t")
            if len(parts) < 2:
                raise DataError(f"embedding file {path}: malformed line {line!r}")
            out[parts[0]] = [float(v) for v in parts[1:]]
    return out
