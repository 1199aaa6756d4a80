"""Bidirectional character/id mapping with reserved control symbols."""

from .errors import DataError

__all__ = ["CharVocab", "BOS", "EOS", "EPS", "UNK", "N_SPECIAL"]

BOS = 0  # start-of-sequence, decoder's first previous-output
EOS = 1  # end-of-sequence, terminates generation
EPS = 2  # null input once the source characters run out
UNK = 3  # characters unseen in training

SPECIAL_TOKENS = ("<s>", "</s>", "<eps>", "<unk>")
N_SPECIAL = len(SPECIAL_TOKENS)


class CharVocab:
    """Specials at ids 0..3, then data characters sorted by codepoint."""

    def __init__(self, chars):
        data_chars = sorted(set(chars))
        for ch in data_chars:
            if len(ch) != 1:
                raise DataError(f"vocab: {ch!r} is not a single character")
        self.data_chars = tuple(data_chars)
        self._tokens = SPECIAL_TOKENS + self.data_chars
        self._ids = {ch: N_SPECIAL + i for i, ch in enumerate(self.data_chars)}

    def __len__(self):
        return len(self._tokens)

    def __eq__(self, other):
        return isinstance(other, CharVocab) and self.data_chars == other.data_chars

    def id_of(self, ch):
        """Id of a data character; unseen characters map to UNK."""
        return self._ids.get(ch, UNK)

    def token_of(self, i):
        return self._tokens[i]

    def encode(self, text):
        return [self.id_of(ch) for ch in text]

    def decode(self, ids):
        """Data characters only; specials render as their token names."""
        return "".join(self._tokens[i] for i in ids)

    def data_ids(self):
        return range(N_SPECIAL, len(self._tokens))
