"""
Preference Service

Builds the preference dataset: D1 pairs the reference (preferred) with the
model's own translation (dis-preferred); D2 pairs a post-edit of the model
output (preferred) with that output, for eligible languages only.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

from config.constants import DecodeMode, Origin
from config.settings import settings
from model.adapters import route_pair
from model.groups import GroupMap
from model.policy import DEFAULT_PROMPT, PolicyModel, generate
from services.corpus_service import pair_language
from services.editor_service import PostEditor
from storage.models import ParallelPair, PreferenceDataset, PreferenceTriple
from utils.errors import ContractError, LabError

logger = logging.getLogger(__name__)

GENERATION_MAX_LEN = 48


@dataclass
class Generation:
    """Model output for one pair, or the reason it is missing."""

    index: int
    pair: ParallelPair
    output: Optional[str] = None
    error: Optional[str] = None


def _group_for(pair: ParallelPair, model: PolicyModel, groups: Optional[GroupMap]) -> Optional[int]:
    if groups is None or not model.adapters:
        return None
    return route_pair(pair.src_lang, pair.tgt_lang, groups)


def translate_pair(model: PolicyModel, pair: ParallelPair, index: int, groups: Optional[GroupMap] = None,
                   mode: DecodeMode = DecodeMode.GREEDY, seed: Optional[int] = None,
                   max_len: int = GENERATION_MAX_LEN, temperature: float = 1.0) -> Generation:
    """Generate y_model for one pair; failures are reported, not raised."""
    prompt = DEFAULT_PROMPT.render(pair.src_lang, pair.tgt_lang, pair.src)
    try:
        ids = generate(model, prompt, mode=mode, max_len=max_len, temperature=temperature,
                       seed=None if seed is None else seed + index,
                       group=_group_for(pair, model, groups))
    except LabError as e:
        return Generation(index, pair, error=f"{e.error_class}: {e.message}")
    output = model.vocab.decode(ids)
    if not output:
        return Generation(index, pair, error="empty generation")
    return Generation(index, pair, output=output)


def build_preference(parallel: Sequence[ParallelPair], model: PolicyModel,
                     editor: Optional[PostEditor] = None, seed: int = 0,
                     groups: Optional[GroupMap] = None, workers: Optional[int] = None,
                     mode: DecodeMode = DecodeMode.GREEDY, temperature: float = 1.0) -> PreferenceDataset:
    """
    Build D = D1 + D2.

    Args:
        parallel: Parallel pairs (reference translations)
        model: Frozen policy used for generation
        editor: Optional post-editor for D2
        seed: Base sampling seed (record i uses seed + i in temperature mode)
        groups: Registry used to route pairs and to decide D2 eligibility
        workers: Generation fan-out width; defaults to XALMA_LAB_WORKERS
        mode: Decoding mode for y_model
        temperature: Sampling temperature in TEMPERATURE mode

    Returns:
        PreferenceDataset with D1 records first, then D2, each in input order
    """
    if not parallel:
        raise ContractError.from_key('empty_input', what='build_preference')
    if not model.frozen:
        raise ContractError("build_preference: model must be frozen for generation")
    workers = max(1, workers or settings.WORKERS)
    sampling_seed = seed if DecodeMode(mode) == DecodeMode.TEMPERATURE else None

    def run(index: int) -> Generation:
        return translate_pair(model, parallel[index], index, groups, mode, sampling_seed, temperature=temperature)

    if workers == 1:
        generations = [run(i) for i in range(len(parallel))]
    else:
        # map() yields in submission order.
        with ThreadPoolExecutor(max_workers=workers) as pool:
            generations = list(pool.map(run, range(len(parallel))))

    d1: List[PreferenceTriple] = []
    d2: List[PreferenceTriple] = []
    dropped = skipped = 0

    for gen in generations:
        pair = gen.pair
        if gen.error is not None:
            skipped += 1
            logger.warning(f"⚠️ Skipping pair {gen.index} ({pair.src_lang}->{pair.tgt_lang}): {gen.error}")
            continue

        if gen.output == pair.tgt:
            dropped += 1
        else:
            d1.append(PreferenceTriple(src_lang=pair.src_lang, tgt_lang=pair.tgt_lang, x=pair.src,
                                       y_w=pair.tgt, y_l=gen.output, origin=Origin.REFERENCE))

        if editor is None or not _postedit_eligible(pair, groups):
            continue
        try:
            y_edit = editor.edit(pair.src, gen.output)
        except LabError as e:
            skipped += 1
            logger.warning(f"⚠️ Skipping post-edit of pair {gen.index} ({pair.src_lang}->{pair.tgt_lang}): "
                           f"{e.error_class}: {e.message}")
            continue
        if not y_edit or y_edit == gen.output:
            dropped += 1
            continue
        d2.append(PreferenceTriple(src_lang=pair.src_lang, tgt_lang=pair.tgt_lang, x=pair.src,
                                   y_w=y_edit, y_l=gen.output, origin=Origin.POSTEDIT))

    logger.info(f"Preference data: d1={len(d1)} d2={len(d2)} dropped={dropped} skipped={skipped}")
    return PreferenceDataset(records=d1 + d2, d1=len(d1), d2=len(d2), dropped=dropped, skipped=skipped)


def _postedit_eligible(pair: ParallelPair, groups: Optional[GroupMap]) -> bool:
    if groups is None:
        return True
    return groups.is_postedit_eligible(pair_language(pair, groups.english_code))
