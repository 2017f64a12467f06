"""Character-level vocabulary with reserved control tokens."""

from typing import Iterable, List, Sequence

from config.constants import BOS, DEFAULT_CHARSET, EOS, PAD, RESERVED_TOKENS, SEP, SEP_GLYPH
from utils.errors import VocabularyError

MAX_VOCAB_SIZE = 256


class Vocab:
    """
    Bijection between symbols and ids.

    Ids 0-3 are PAD, BOS, EOS and SEP; every other symbol is a single character.
    SEP_GLYPH in text encodes to the SEP id.
    """

    def __init__(self, charset: Iterable[str] = DEFAULT_CHARSET):
        chars = [c for c in dict.fromkeys(charset) if c != SEP_GLYPH]
        for char in chars:
            if len(char) != 1:
                raise VocabularyError(f"vocabulary symbols must be single characters, got {char!r}")
        self.tokens: List[str] = list(RESERVED_TOKENS) + chars
        if len(self.tokens) > MAX_VOCAB_SIZE:
            raise VocabularyError(f"vocabulary of {len(self.tokens)} symbols exceeds {MAX_VOCAB_SIZE}")
        self._ids = {token: index for index, token in enumerate(self.tokens)}
        self._ids[SEP_GLYPH] = self._ids[SEP]

    @classmethod
    def from_texts(cls, texts: Iterable[str], base: str = DEFAULT_CHARSET) -> "Vocab":
        """Default charset plus every other character seen in `texts`, sorted."""
        extra = sorted({c for text in texts for c in text} - set(base) - {SEP_GLYPH})
        return cls(base + ''.join(extra))

    @property
    def charset(self) -> str:
        """Non-reserved symbols in id order (what a checkpoint stores)."""
        return ''.join(self.tokens[len(RESERVED_TOKENS):])

    @property
    def pad_id(self) -> int:
        return self._ids[PAD]

    @property
    def bos_id(self) -> int:
        return self._ids[BOS]

    @property
    def eos_id(self) -> int:
        return self._ids[EOS]

    @property
    def sep_id(self) -> int:
        return self._ids[SEP]

    def __len__(self):
        return len(self.tokens)

    def __eq__(self, other):
        return isinstance(other, Vocab) and self.tokens == other.tokens

    def encode(self, text: str) -> List[int]:
        try:
            return [self._ids[char] for char in text]
        except KeyError as e:
            raise VocabularyError.from_key('unknown_token', symbol=e.args[0])

    def encode_target(self, text: str) -> List[int]:
        """Target token sequence: characters followed by EOS."""
        return self.encode(text) + [self.eos_id]

    def decode(self, ids: Sequence[int]) -> str:
        """Text for `ids`, dropping PAD/BOS/EOS and rendering SEP as SEP_GLYPH."""
        chars = []
        for token_id in ids:
            if not 0 <= token_id < len(self.tokens):
                raise VocabularyError.from_key('unknown_token', symbol=token_id)
            if token_id == self.sep_id:
                chars.append(SEP_GLYPH)
            elif token_id >= len(RESERVED_TOKENS):
                chars.append(self.tokens[token_id])
        return ''.join(chars)
