"""
Corpus Service

Pseudo-monolingual construction and proportional monolingual sampling.
"""

import logging
from typing import Dict, List, Optional, Sequence

import numpy as np

from config.constants import ENGLISH, SEP_GLYPH
from storage.models import MonoRecord, ParallelPair
from utils.errors import ContractError, DataError

logger = logging.getLogger(__name__)


def token_count(record: MonoRecord) -> int:
    """Character-level tokens in a record's text."""
    return len(record.text)


def pair_language(pair: ParallelPair, english: str = ENGLISH) -> str:
    """The non-English side of a pair (the grouping key)."""
    return pair.src_lang if pair.tgt_lang == english else pair.tgt_lang


def build_pseudo_mono(pairs: Sequence[ParallelPair], seed: int, separator: str = SEP_GLYPH,
                      src_first: Optional[bool] = None) -> List[MonoRecord]:
    """
    Join each parallel pair into one pseudo-monolingual text.

    Args:
        pairs: Parallel pairs
        seed: Seed for the per-pair order coin
        separator: Glyph placed between the two sides
        src_first: Force the order instead of flipping the coin

    Returns:
        One MonoRecord per pair, tagged with the non-English language
    """
    if not pairs:
        raise ContractError.from_key('empty_input', what='build_pseudo_mono')
    rng = np.random.default_rng(seed)
    # One coin per pair whether or not the order is forced.
    coins = rng.random(len(pairs)) < 0.5

    records = []
    for pair, coin in zip(pairs, coins):
        first = coin if src_first is None else src_first
        a, b = (pair.src, pair.tgt) if first else (pair.tgt, pair.src)
        records.append(MonoRecord(lang=pair_language(pair), text=f"{a}{separator}{b}"))

    src_first_count = int(coins.sum()) if src_first is None else (len(pairs) if src_first else 0)
    logger.info(f"Built {len(records)} pseudo-monolingual records ({src_first_count} source-first)")
    return records


def corpus_tokens(corpora: Dict[str, Sequence[MonoRecord]]) -> Dict[str, int]:
    return {lang: sum(token_count(r) for r in records) for lang, records in sorted(corpora.items())}


def sample_monolingual(corpora: Dict[str, Sequence[MonoRecord]], budget: int, seed: int) -> List[MonoRecord]:
    """
    Draw records until the token budget is met.

    Each draw picks a language with probability proportional to its corpus
    token count, then a record uniformly within it. The last record may
    overshoot the budget.

    Args:
        corpora: Language code to records
        budget: Token budget (>= 1)
        seed: Sampling seed

    Returns:
        Sampled records in draw order
    """
    if budget < 1:
        raise ContractError.from_key('bad_budget', budget=budget)
    sizes = corpus_tokens(corpora)
    languages = [lang for lang, size in sizes.items() if size > 0]
    if not languages:
        raise DataError.from_key('no_corpora')

    weights = np.array([sizes[lang] for lang in languages], dtype=np.float64)
    weights /= weights.sum()
    rng = np.random.default_rng(seed)

    sample: List[MonoRecord] = []
    total = 0
    while total < budget:
        lang = languages[int(rng.choice(len(languages), p=weights))]
        pool = corpora[lang]
        record = pool[int(rng.integers(len(pool)))]
        sample.append(record)
        total += token_count(record)

    logger.info(f"Sampled {len(sample)} records ({total} tokens, budget {budget}) from {len(languages)} languages")
    return sample


def language_shares(records: Sequence[MonoRecord]) -> Dict[str, float]:
    """Token share per language in a sample."""
    counts: Dict[str, int] = {}
    for record in records:
        counts[record.lang] = counts.get(record.lang, 0) + token_count(record)
    total = sum(counts.values())
    return {lang: count / total for lang, count in sorted(counts.items())} if total else {}
