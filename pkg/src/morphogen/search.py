"""Greedy and beam decoding over one model or an ensemble.

Ensembles combine per-step distributions as a product of experts,
p(i) proportional to prod_j p_j(i)**(1/k). An optional character LM joins in
as p_model(i) * p_lm(i)**lambda, renormalized each step. Beam search retires
EOS-terminated hypotheses into an n-best pool and breaks score ties by
lexicographic output ids, so decoding is fully deterministic.
"""

from dataclasses import dataclass

import numpy as np

from .charlm import BOW, EOW
from .errors import DataError, SearchError
from .model import DecodeSession
from .vocab import BOS, EOS, N_SPECIAL, UNK

__all__ = [
    "Hypothesis",
    "DecodeResult",
    "ensemble_next_dist",
    "interpolated_next_dist",
    "lm_next_dist",
    "lm_history",
    "greedy_decode",
    "beam_decode",
    "write_nbest",
    "read_nbest",
]


@dataclass(frozen=True)
class Hypothesis:
    ids: tuple
    logprob: float
    states: tuple
    terminated: bool


@dataclass(frozen=True)
class DecodeResult:
    ids: tuple
    logprob: float
    truncated: bool

    def text(self, vocab):
        return vocab.decode(self.ids)


def ensemble_next_dist(dists):
    """Product of experts: geometric mean of the member distributions."""
    k = len(dists)
    if k == 0:
        raise SearchError("ensemble_next_dist needs at least one distribution")
    if k == 1:
        return np.array(dists[0], dtype=np.float64)
    stacked = np.stack([np.asarray(d, dtype=np.float64) for d in dists])
    combined = np.exp(np.log(np.maximum(stacked, 1e-300)).mean(axis=0))
    combined[np.any(stacked == 0.0, axis=0)] = 0.0
    z = combined.sum()
    if z <= 0.0:
        raise SearchError("ensemble distributions have disjoint support")
    return combined / z


def interpolated_next_dist(model_dist, lm_dist, lam):
    """p(i) proportional to p_model(i) * p_lm(i)**lam, renormalized."""
    if lam < 0:
        raise SearchError(f"interpolation weight must be >= 0, got {lam}")
    model_dist = np.asarray(model_dist, dtype=np.float64)
    if lam == 0:
        return model_dist.copy()
    combined = model_dist * np.asarray(lm_dist, dtype=np.float64) ** lam
    z = combined.sum()
    if z <= 0.0:
        raise SearchError("interpolated distribution has zero mass")
    return combined / z


def lm_history(vocab, order, prefix_ids):
    """LM conditioning window for a partial output (start-padded)."""
    surface = "".join(vocab.token_of(i) if i >= N_SPECIAL else "\x00"
                      for i in prefix_ids)
    return (BOW * (order - 1) + surface)[-(order - 1):] if order > 1 else ""


def lm_next_dist(lm, vocab, prefix_ids):
    """LM next-char probabilities mapped onto vocab ids (EOS carries EOW).

    BOS and EPS get zero; the vector is a scoring bridge, not normalized
    over the vocab, and is meant for the renormalizing combiners above.
    """
    history = lm_history(vocab, lm.order, prefix_ids)
    dist = np.zeros(len(vocab))
    dist[EOS] = lm.prob(history, EOW)
    dist[UNK] = lm.prob(history, "\x00")
    for i in vocab.data_ids():
        dist[i] = lm.prob(history, vocab.token_of(i))
    return dist


def _check_models(models):
    if not models:
        raise SearchError("decoding needs at least one model")
    vocab = models[0].vocab
    for m in models[1:]:
        if m.vocab != vocab:
            raise SearchError("ensemble members must share one vocabulary")
    return vocab


def _combined_dist(sessions, states, prefix, t, lm, vocab, lam):
    stepped, dists = [], []
    for sess, state in zip(sessions, states):
        y_prev = prefix[-1] if prefix else BOS
        new_state, dist = sess.step(state, y_prev, t)
        stepped.append(new_state)
        dists.append(dist)
    combined = ensemble_next_dist(dists)
    if lm is not None:
        combined = interpolated_next_dist(combined, lm_next_dist(lm, vocab, prefix), lam)
    return tuple(stepped), combined


def greedy_decode(models, x_ids, max_len, lm=None, lam=1.0):
    """Pick the argmax at every step; lowest id wins exact ties."""
    if max_len < 1:
        raise SearchError(f"max_len must be >= 1, got {max_len}")
    vocab = _check_models(models)
    sessions = [DecodeSession(m, x_ids) for m in models]
    states = tuple(s.initial_state() for s in sessions)
    ids, logprob = (), 0.0
    for t in range(max_len + 1):
        states, dist = _combined_dist(sessions, states, ids, t, lm, vocab, lam)
        choice = int(np.argmax(dist))
        logprob += float(np.log(dist[choice]))
        if choice == EOS:
            return DecodeResult(ids, logprob, truncated=False)
        ids += (choice,)
        if len(ids) == max_len:
            return DecodeResult(ids, logprob, truncated=True)
    raise SearchError("unreachable: greedy loop exceeded max_len")


def beam_decode(models, x_ids, width, max_len, lm=None, lam=1.0):
    """Up to `width` results sorted by log-prob, ties by output ids."""
    if width < 1:
        raise SearchError(f"beam width must be >= 1, got {width}")
    if max_len < 1:
        raise SearchError(f"max_len must be >= 1, got {max_len}")
    vocab = _check_models(models)
    sessions = [DecodeSession(m, x_ids) for m in models]
    live = [Hypothesis((), 0.0, tuple(s.initial_state() for s in sessions), False)]
    pool = []
    for t in range(max_len):
        # EOS expansions compete with content expansions for the width slots;
        # surviving EOS branches retire, so width 1 walks the greedy path.
        cands = []
        for hyp in live:
            states, dist = _combined_dist(sessions, hyp.states, hyp.ids, t, lm, vocab, lam)
            for i in np.flatnonzero(dist > 0.0):
                i = int(i)
                lp = hyp.logprob + float(np.log(dist[i]))
                cands.append((-lp, hyp.ids + (i,), i, lp, hyp.ids, states))
        cands.sort(key=lambda c: (c[0], c[1]))
        live = []
        for _, grown_ids, i, lp, base_ids, states in cands[:width]:
            if i == EOS:
                pool.append(DecodeResult(base_ids, lp, truncated=False))
            else:
                live.append(Hypothesis(grown_ids, lp, states, False))
        if not live:
            break
    for hyp in live:
        pool.append(DecodeResult(hyp.ids, hyp.logprob, truncated=True))
    pool.sort(key=lambda r: (-r.logprob, r.ids))
    return pool[:width]


def write_nbest(path, rows):
    """Rows of (source, tag, candidate, model_logprob), pre-grouped by source."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for source, tag, candidate, logprob in rows:
            f.write(f"{source}\t{tag}\t{candidate}\t{logprob!r}\n")


def read_nbest(path):
    rows = []
    try:
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 4:
                    raise DataError(
                        f"{path}:{lineno}: expected 4 tab-separated fields, got {len(parts)}")
                try:
                    lp = float(parts[3])
                except ValueError as exc:
                    raise DataError(f"{path}:{lineno}: bad log-probability {parts[3]!r}") from exc
                rows.append((parts[0], parts[1], parts[2], lp))
    except OSError as exc:
        raise DataError(f"cannot read n-best file {path}: {exc}") from exc
    return rows
