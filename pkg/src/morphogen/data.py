"""Dataset ingestion, inflection tables, splits, and the synthetic language.

The on-disk format is a UTF-8 TSV of `lemma TAB tag TAB inflected` lines;
`#` comments and blank lines are skipped and all text is NFC-normalized.
"""

import random
import unicodedata
from dataclasses import dataclass, field

from .errors import DataError
from .vocab import CharVocab

__all__ = [
    "Example",
    "InflectionTable",
    "DatasetSplit",
    "parse_dataset",
    "parse_dataset_lines",
    "serialize_examples",
    "write_dataset",
    "build_vocab",
    "group_tables",
    "split_tables",
    "tables_to_examples",
    "read_wordlist",
    "write_wordlist",
    "SynthSpec",
    "default_synth_spec",
    "synth_language",
    "synth_wordlist",
    "apply_harmony_rule",
]


@dataclass(frozen=True)
class Example:
    lemma: str
    tag: str
    inflected: str

    def __post_init__(self):
        if not self.lemma or not self.tag or not self.inflected:
            raise DataError(f"example with empty field: {self!r}")


@dataclass
class InflectionTable:
    lemma: str
    forms: dict  # tag -> inflected form

    def examples(self):
        return [Example(self.lemma, tag, form) for tag, form in self.forms.items()]


@dataclass
class DatasetSplit:
    train: list
    dev: list
    test: list


def parse_dataset(path):
    try:
        with open(path, encoding="utf-8") as f:
            return parse_dataset_lines(f, source=str(path))
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: not valid UTF-8 ({exc})") from exc
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from exc


def parse_dataset_lines(lines, source="<input>"):
    examples = []
    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 3:
            raise DataError(f"{source}:{lineno}: expected 3 tab-separated columns, got {len(cols)}")
        lemma, tag, inflected = (unicodedata.normalize("NFC", c) for c in cols)
        try:
            examples.append(Example(lemma, tag, inflected))
        except DataError as exc:
            raise DataError(f"{source}:{lineno}: {exc}") from exc
    return examples


def serialize_examples(examples):
    return "".join(f"{e.lemma}\t{e.tag}\t{e.inflected}\n" for e in examples)


def write_dataset(examples, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write(serialize_examples(examples))


def build_vocab(examples):
    """Characters of every lemma and inflected form, behind the specials."""
    if not examples:
        raise DataError("build_vocab: no examples")
    chars = set()
    for e in examples:
        chars.update(e.lemma)
        chars.update(e.inflected)
    return CharVocab(chars)


def group_tables(examples):
    """Group examples into per-lemma tables, preserving first-seen order."""
    tables = {}
    for e in examples:
        table = tables.setdefault(e.lemma, InflectionTable(e.lemma, {}))
        if e.tag in table.forms and table.forms[e.tag] != e.inflected:
            raise DataError(f"lemma {e.lemma!r} has conflicting forms for tag {e.tag!r}")
        table.forms[e.tag] = e.inflected
    return list(tables.values())


def split_tables(tables, ratios=(0.8, 0.1, 0.1), seed=0):
    """Seeded shuffle and three-way split at whole-table granularity."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise DataError(f"split ratios must sum to 1, got {ratios}")
    lemmas = [t.lemma for t in tables]
    if len(set(lemmas)) != len(lemmas):
        raise DataError("split_tables: duplicate lemmas across tables")
    shuffled = list(tables)
    random.Random(seed).shuffle(shuffled)
    n = len(shuffled)
    n_dev = int(n * ratios[1])
    n_test = int(n * ratios[2])
    n_train = n - n_dev - n_test
    for count, ratio, name in ((n_train, ratios[0], "train"),
                               (n_dev, ratios[1], "dev"),
                               (n_test, ratios[2], "test")):
        if ratio > 0 and count == 0:
            raise DataError(f"split_tables: {n} tables leave the {name} split empty")
    return DatasetSplit(train=shuffled[:n_train],
                        dev=shuffled[n_train:n_train + n_dev],
                        test=shuffled[n_train + n_dev:])


def tables_to_examples(tables):
    out = []
    for t in tables:
        out.extend(t.examples())
    return out


def read_wordlist(path):
    try:
        with open(path, encoding="utf-8") as f:
            return [line.strip() for line in f if line.strip()]
    except OSError as exc:
        raise DataError(f"cannot read wordlist {path}: {exc}") from exc


def write_wordlist(words, path):
    with open(path, "w", encoding="utf-8") as f:
        for w in words:
            f.write(w + "\n")


# --- synthetic vowel-harmony language -------------------------------------
#
# Finnish-flavoured toy language used for desk-scale end-to-end checks:
# random CV stems whose vowels are drawn from one harmony class, inflected by
# appending the suffix variant selected by the stem's vowels (back wins if
# any back vowel is present, front otherwise).


@dataclass
class SynthSpec:
    consonants: str = "klnst"
    back_vowels: str = "aou"
    front_vowels: str = "äö"
    neutral_vowels: str = "ei"
    stem_len: tuple = (3, 7)
    # tag -> (front variant, back variant)
    suffixes: dict = field(default_factory=dict)

    def alphabet(self):
        return set(self.consonants + self.back_vowels + self.front_vowels
                   + self.neutral_vowels)

    def validate(self):
        if not self.consonants or not self.back_vowels or not self.front_vowels:
            raise DataError("synth spec: consonants, back and front vowels are required")
        if not self.suffixes:
            raise DataError("synth spec: no suffix pairs")
        if self.stem_len[0] < 1 or self.stem_len[1] < self.stem_len[0]:
            raise DataError(f"synth spec: bad stem length range {self.stem_len}")
        alpha = self.alphabet()
        for tag, pair in self.suffixes.items():
            if len(pair) != 2:
                raise DataError(f"synth spec: tag {tag!r} needs (front, back) variants")
            for suffix in pair:
                if not set(suffix) <= alpha:
                    raise DataError(f"synth spec: suffix {suffix!r} uses characters "
                                    "outside the alphabet")


def default_synth_spec():
    """12-character alphabet, 4 locative-style cases."""
    return SynthSpec(suffixes={
        "case=inessive": ("ssä", "ssa"),
        "case=elative": ("stä", "sta"),
        "case=adessive": ("llä", "lla"),
        "case=ablative": ("ltä", "lta"),
    })


def apply_harmony_rule(spec, stem, tag):
    """Back suffix variant iff the stem contains a back vowel, front otherwise."""
    front, back = spec.suffixes[tag]
    if any(ch in spec.back_vowels for ch in stem):
        return stem + back
    return stem + front


def synth_language(spec, size, seed=0):
    """`size` tables: unique stems, each inflected for every tag in the spec."""
    spec.validate()
    rng = random.Random(seed)
    stems = set()
    tables = []
    vowel_classes = (spec.back_vowels + spec.neutral_vowels,
                     spec.front_vowels + spec.neutral_vowels,
                     spec.neutral_vowels)
    attempts = 0
    while len(stems) < size:
        attempts += 1
        if attempts > 100 * size + 1000:
            raise DataError(f"synth_language: cannot draw {size} unique stems")
        vowels = vowel_classes[rng.randrange(len(vowel_classes))]
        length = rng.randint(*spec.stem_len)
        stem = "".join(rng.choice(spec.consonants) if i % 2 == 0 else rng.choice(vowels)
                       for i in range(length))
        if stem in stems:
            continue
        stems.add(stem)
        tables.append(InflectionTable(
            stem, {tag: apply_harmony_rule(spec, stem, tag) for tag in spec.suffixes}))
    return tables


def synth_wordlist(spec, size, seed=0):
    """Unlabeled inflected forms from fresh stems (for language-model training)."""
    seen = dict.fromkeys(ex.inflected
                         for t in synth_language(spec, size, seed=seed)
                         for ex in t.examples())
    return list(seen)
