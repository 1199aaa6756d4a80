"""Shared fixtures-in-code for the test suite."""

import random

import numpy as np

from morphogen.charlm import train_lm
from morphogen.reranker import RerankGroup


def randomize_params(model, seed, scale=0.5):
    """Overwrite every parameter with seeded N(0, scale) values.

    Fresh-init models sit at a point where several LSTM gradient paths are
    structurally attenuated (forget gates at t=1 see c0=0), leaving true
    gradients near 1e-9 where central differences are pure float noise. A
    generic random point keeps all paths live, so finite-difference checks
    measure the differentiation code rather than the noise floor.
    """
    rng = np.random.default_rng(seed)
    for p in sorted(model.parameters(), key=lambda p: p.name):
        p.value = rng.normal(0.0, scale, size=p.value.shape)
    return model


def _cv_word(rng):
    return "".join(rng.choice("klnst") + rng.choice("aou")
                   for _ in range(rng.randint(3, 6)))


def separable_rerank_fixture():
    """Groups where only the LM separates gold from a systematic corruption.

    The corruption permutes vowels and consonants, preserving length, edit
    profile and (non-)affix overlap with the source, so every feature except
    the LM score is identical across the pair.
    """
    rng = random.Random(3)
    vmap = {"a": "o", "o": "u", "u": "a"}
    cmap = {"k": "n", "n": "s", "s": "t", "t": "l", "l": "k"}
    groups = []
    golds = []
    for _ in range(12):
        gold = _cv_word(rng)
        golds.append(gold)
        alt = "".join(vmap[ch] if ch in vmap else cmap[ch] for ch in gold)
        source = "x" * len(gold)
        groups.append(RerankGroup(source, gold, ((alt, -1.0), (gold, -1.0))))
    lm = train_lm(golds + ["kata", "nolu", "sotu"], order=3)
    return groups, lm


def levenshtein_matrix_oracle(a, b):
    """Full-matrix edit distance, independent of the package's two-row DP."""
    m = np.zeros((len(a) + 1, len(b) + 1), dtype=int)
    m[:, 0] = np.arange(len(a) + 1)
    m[0, :] = np.arange(len(b) + 1)
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            m[i, j] = min(m[i - 1, j] + 1,
                          m[i, j - 1] + 1,
                          m[i - 1, j - 1] + (a[i - 1] != b[j - 1]))
    return int(m[len(a), len(b)])
