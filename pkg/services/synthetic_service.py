"""
Synthetic Service

Seeded toy "languages" (letter ciphers of English-like word strings) so the
whole recipe runs on a desk: parallel and monolingual corpora, plus two
preference populations with very different reward-difference spreads.
"""

import logging
import string
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.constants import ENGLISH, Direction, Origin
from storage.models import MonoRecord, ParallelPair, PreferenceTriple
from utils.errors import ConfigurationError

logger = logging.getLogger(__name__)

LETTERS = string.ascii_lowercase

# Cipher tables for the toy languages registered in config/toy_groups.txt.
# Both are involutions: one letter map serves both translation directions.
CIPHERS: Dict[str, Dict[str, str]] = {
    'xc': {c: LETTERS[(i + 13) % 26] for i, c in enumerate(LETTERS)},
    'xr': {c: LETTERS[25 - i] for i, c in enumerate(LETTERS)},
}

SYNTHETIC_DEFAULTS = {
    'lexicon_size': 40,
    'word_length': 4,
    'min_words': 1,
    'max_words': 3,
}


def encipher(text: str, lang: str) -> str:
    """Map English-side text into a toy language; 'en' is the identity."""
    if lang == ENGLISH:
        return text
    try:
        table = CIPHERS[lang]
    except KeyError:
        raise ConfigurationError(f"no synthetic cipher for language {lang!r}")
    return ''.join(table.get(ch, ch) for ch in text)


def make_lexicon(seed: int, size: int = SYNTHETIC_DEFAULTS['lexicon_size'],
                 word_length: int = SYNTHETIC_DEFAULTS['word_length']) -> List[str]:
    """Distinct fixed-length lowercase words."""
    if size > 26 ** word_length:
        raise ConfigurationError(f"cannot draw {size} distinct words of length {word_length}")
    rng = np.random.default_rng(seed)
    words: List[str] = []
    seen = set()
    while len(words) < size:
        word = ''.join(rng.choice(list(LETTERS), size=word_length))
        if word not in seen:
            seen.add(word)
            words.append(word)
    return words


def word_range(words: Optional[int] = None) -> Tuple[int, int]:
    """(min_words, max_words): the default spread, or exactly `words`."""
    if words is None:
        return SYNTHETIC_DEFAULTS['min_words'], SYNTHETIC_DEFAULTS['max_words']
    if words < 1:
        raise ConfigurationError(f"sentences need at least one word, got {words}")
    return words, words


def make_sentences(count: int, seed: int, lexicon: Sequence[str],
                   min_words: int = SYNTHETIC_DEFAULTS['min_words'],
                   max_words: int = SYNTHETIC_DEFAULTS['max_words']) -> List[str]:
    rng = np.random.default_rng(seed)
    sentences = []
    for _ in range(count):
        n_words = int(rng.integers(min_words, max_words + 1))
        sentences.append(' '.join(lexicon[int(i)] for i in rng.integers(len(lexicon), size=n_words)))
    return sentences


def make_parallel(lang: str, count: int, seed: int, direction: Direction = Direction.FROM_EN,
                  lexicon: Optional[Sequence[str]] = None, words: Optional[int] = None) -> List[ParallelPair]:
    """
    English sentences paired with their cipher rendering.

    Args:
        lang: Toy language code ('xc' or 'xr')
        count: Number of pairs
        seed: Sampling seed
        direction: FROM_EN gives en -> lang, INTO_EN gives lang -> en
        lexicon: Word list; a seeded default when omitted
        words: Fixed words per sentence; 1 to 3 when omitted

    Returns:
        Parallel pairs
    """
    lexicon = lexicon if lexicon is not None else make_lexicon(seed)
    pairs = []
    for sentence in make_sentences(count, seed + 1, lexicon, *word_range(words)):
        foreign = encipher(sentence, lang)
        if Direction(direction) == Direction.FROM_EN:
            pairs.append(ParallelPair(src_lang=ENGLISH, tgt_lang=lang, src=sentence, tgt=foreign))
        else:
            pairs.append(ParallelPair(src_lang=lang, tgt_lang=ENGLISH, src=foreign, tgt=sentence))
    return pairs


def make_monolingual(langs: Sequence[str], counts: Sequence[int], seed: int,
                     lexicon: Optional[Sequence[str]] = None,
                     words: Optional[int] = None) -> Dict[str, List[MonoRecord]]:
    """Per-language monolingual corpora of the requested record counts."""
    lexicon = lexicon if lexicon is not None else make_lexicon(seed)
    corpora = {}
    for offset, (lang, count) in enumerate(zip(langs, counts)):
        sentences = make_sentences(count, seed + 10 + offset, lexicon, *word_range(words))
        corpora[lang] = [MonoRecord(lang=lang, text=encipher(s, lang)) for s in sentences]
    return corpora


def _substitute_one(text: str, rng: np.random.Generator) -> str:
    positions = [i for i, ch in enumerate(text) if ch in LETTERS]
    pos = positions[int(rng.integers(len(positions)))]
    choices = [c for c in LETTERS if c != text[pos]]
    return text[:pos] + choices[int(rng.integers(len(choices)))] + text[pos + 1:]


def near_duplicate_triples(count: int, seed: int, lang: str = 'xc',
                           lexicon: Optional[Sequence[str]] = None,
                           words: Optional[int] = None) -> List[PreferenceTriple]:
    """MT-like population: y_l differs from y_w by one substituted letter."""
    rng = np.random.default_rng(seed)
    triples = []
    for pair in make_parallel(lang, count, seed, lexicon=lexicon, words=words):
        triples.append(PreferenceTriple(src_lang=pair.src_lang, tgt_lang=pair.tgt_lang, x=pair.src,
                                        y_w=pair.tgt, y_l=_substitute_one(pair.tgt, rng),
                                        origin=Origin.REFERENCE))
    return triples


def open_ended_triples(count: int, seed: int, lang: str = 'xc',
                       lexicon: Optional[Sequence[str]] = None) -> List[PreferenceTriple]:
    """Open-ended population: y_w and y_l are unrelated sentences."""
    lexicon = lexicon if lexicon is not None else make_lexicon(seed)
    prompts = make_sentences(count, seed + 1, lexicon)
    chosen = make_sentences(count, seed + 2, lexicon)
    rejected = make_sentences(count, seed + 3, lexicon)
    triples = []
    for x, y_w, y_l in zip(prompts, chosen, rejected):
        if y_w == y_l:
            continue
        triples.append(PreferenceTriple(src_lang=ENGLISH, tgt_lang=lang, x=x,
                                        y_w=encipher(y_w, lang), y_l=encipher(y_l, lang)))
    return triples


def toy_task(langs: Sequence[str], count: int, seed: int,
             words: Optional[int] = None) -> Tuple[List[ParallelPair], List[ParallelPair]]:
    """Train and held-out pairs for every toy language in both directions."""
    lexicon = make_lexicon(seed)
    train, held_out = [], []
    for offset, lang in enumerate(langs):
        for d_offset, direction in enumerate((Direction.FROM_EN, Direction.INTO_EN)):
            pair_seed = seed + 100 * (offset + 1) + 10 * d_offset
            train.extend(make_parallel(lang, count, pair_seed, direction, lexicon, words))
            held_out.extend(make_parallel(lang, max(count // 4, 1), pair_seed + 5, direction, lexicon, words))
    logger.info(f"Toy task: {len(train)} train / {len(held_out)} held-out pairs over {list(langs)}")
    return train, held_out
