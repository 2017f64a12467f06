"""
Eval Service

Lexical-match scoring, per-direction evaluation, the likelihood-based proxy
reward and the over-rejection report.
"""

import logging
import math
from collections import Counter
from typing import Dict, List, Optional, Sequence

from pydantic import BaseModel, Field, computed_field

from config.constants import BLEU_MAX_N, OVER_REJECTION_BLEU_DROP, DecodeMode
from model.adapters import route_pair
from model.groups import GroupMap
from model.policy import DEFAULT_PROMPT, PolicyModel, generate, prompt_ids, sequence_logprob
from storage.models import ParallelPair
from utils.errors import ContractError, RoutingError
from utils.helpers import mean_or_zero

logger = logging.getLogger(__name__)

EVAL_MAX_LEN = 48


# ==================== BLEU ====================

def tokenize(text: str, unit: str = 'word') -> List[str]:
    """Whitespace-split words, or characters for the cipher tasks."""
    if unit == 'word':
        return text.split()
    if unit == 'char':
        return list(text)
    raise ContractError(f"unknown BLEU unit {unit!r} (expected 'word' or 'char')")


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def lexical_bleu(hypotheses: Sequence[str], references: Sequence[str], max_n: int = BLEU_MAX_N,
                 unit: str = 'word') -> float:
    """
    Corpus-level BLEU in [0, 1].

    Clipped n-gram matches and candidate n-gram totals are summed over the
    corpus before the geometric mean; orders no hypothesis is long enough to
    contain are left out. Brevity penalty exp(1 - r/c) when c <= r.

    Args:
        hypotheses: System outputs
        references: One reference per hypothesis
        max_n: Highest n-gram order
        unit: 'word' or 'char'

    Returns:
        Corpus BLEU
    """
    if len(hypotheses) != len(references):
        raise ContractError.from_key('length_mismatch', what='lexical_bleu',
                                     left=len(hypotheses), right=len(references))
    if not references:
        raise ContractError.from_key('empty_input', what='lexical_bleu')

    hyp_tokens = [tokenize(h, unit) for h in hypotheses]
    ref_tokens = [tokenize(r, unit) for r in references]
    hyp_len = sum(len(t) for t in hyp_tokens)
    ref_len = sum(len(t) for t in ref_tokens)
    if hyp_len == 0:
        return 0.0

    log_precisions = []
    for n in range(1, max_n + 1):
        matches = total = 0
        for hyp, ref in zip(hyp_tokens, ref_tokens):
            counts = _ngrams(hyp, n)
            ref_counts = _ngrams(ref, n)
            matches += sum(min(count, ref_counts[gram]) for gram, count in counts.items())
            total += sum(counts.values())
        if total == 0:
            break
        if matches == 0:
            return 0.0
        log_precisions.append(math.log(matches / total))

    brevity = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
    return min(1.0, brevity * math.exp(math.fsum(log_precisions) / len(log_precisions)))


# ==================== EVALUATION ====================

class DirectionScores(BaseModel):
    """Scores for one translation direction."""

    lexical_bleu: float = Field(ge=0.0, le=1.0)
    exact_match: float = Field(ge=0.0, le=1.0)
    avg_ref_logprob: float
    count: int = Field(ge=1)


class EvalResult(BaseModel):
    """Per-direction scores keyed 'src-tgt', plus their arithmetic means."""

    directions: Dict[str, DirectionScores]
    hypotheses: Dict[str, List[str]] = Field(default_factory=dict, exclude=True)

    @computed_field
    @property
    def aggregate(self) -> Dict[str, float]:
        rows = list(self.directions.values())
        return {
            'lexical_bleu': mean_or_zero([r.lexical_bleu for r in rows]),
            'exact_match': mean_or_zero([r.exact_match for r in rows]),
            'avg_ref_logprob': mean_or_zero([r.avg_ref_logprob for r in rows]),
        }


def direction_key(src_lang: str, tgt_lang: str) -> str:
    return f"{src_lang}-{tgt_lang}"


def grouped_by_direction(pairs: Sequence[ParallelPair]) -> Dict[str, List[ParallelPair]]:
    """Pairs keyed by direction, keys sorted, input order kept within a key."""
    by_direction: Dict[str, List[ParallelPair]] = {}
    for pair in pairs:
        by_direction.setdefault(direction_key(pair.src_lang, pair.tgt_lang), []).append(pair)
    return {key: by_direction[key] for key in sorted(by_direction)}


def _group_for(model: PolicyModel, src: str, tgt: str, groups: Optional[GroupMap]) -> Optional[int]:
    if groups is None or not model.adapters:
        return None
    try:
        return route_pair(src, tgt, groups)
    except RoutingError:
        return None


def translate(model: PolicyModel, pair: ParallelPair, groups: Optional[GroupMap] = None,
              max_len: int = EVAL_MAX_LEN) -> str:
    """Greedy translation of one pair's source, short enough to be rescored."""
    prompt = DEFAULT_PROMPT.render(pair.src_lang, pair.tgt_lang, pair.src)
    room = model.max_len - len(prompt_ids(model, prompt)) - 1
    ids = generate(model, prompt, mode=DecodeMode.GREEDY, max_len=max(1, min(max_len, room)),
                   group=_group_for(model, pair.src_lang, pair.tgt_lang, groups))
    return model.vocab.decode(ids)


def evaluate(model: PolicyModel, pairs: Sequence[ParallelPair], groups: Optional[GroupMap] = None,
             unit: str = 'char', max_n: int = BLEU_MAX_N) -> EvalResult:
    """
    Translate every pair greedily and score it per direction.

    avg_ref_logprob is the mean per-token log-likelihood of the references
    under the evaluated model.
    """
    if not pairs:
        raise ContractError.from_key('empty_input', what='evaluate')

    by_direction = grouped_by_direction(pairs)
    directions: Dict[str, DirectionScores] = {}
    hypotheses: Dict[str, List[str]] = {}
    for key, group_pairs in by_direction.items():
        hyps = [translate(model, pair, groups) for pair in group_pairs]
        refs = [pair.tgt for pair in group_pairs]
        ref_logps = []
        for pair in group_pairs:
            prompt = DEFAULT_PROMPT.render(pair.src_lang, pair.tgt_lang, pair.src)
            group = _group_for(model, pair.src_lang, pair.tgt_lang, groups)
            ref_logps.append(sequence_logprob(model, prompt, model.vocab.encode_target(pair.tgt), group=group)['avg'])
        directions[key] = DirectionScores(
            lexical_bleu=lexical_bleu(hyps, refs, max_n=max_n, unit=unit),
            exact_match=sum(h == r for h, r in zip(hyps, refs)) / len(refs),
            avg_ref_logprob=mean_or_zero(ref_logps),
            count=len(refs),
        )
        hypotheses[key] = hyps
        logger.debug(f"eval {key}: bleu={directions[key].lexical_bleu:.4f} exact={directions[key].exact_match:.3f}")
    return EvalResult(directions=directions, hypotheses=hypotheses)


def proxy_reward(scorer: PolicyModel, pairs: Sequence[ParallelPair], hypotheses: Sequence[str],
                 groups: Optional[GroupMap] = None) -> float:
    """
    Mean per-token log-likelihood of hypotheses under a frozen held-out scorer.

    A stand-in for a learned quality metric at desk scale. Empty hypotheses
    score as the EOS-only sequence.
    """
    if len(pairs) != len(hypotheses):
        raise ContractError.from_key('length_mismatch', what='proxy_reward', left=len(hypotheses), right=len(pairs))
    if not pairs:
        raise ContractError.from_key('empty_input', what='proxy_reward')
    scores = []
    for pair, hyp in zip(pairs, hypotheses):
        prompt = DEFAULT_PROMPT.render(pair.src_lang, pair.tgt_lang, pair.src)
        group = _group_for(scorer, pair.src_lang, pair.tgt_lang, groups)
        scores.append(sequence_logprob(scorer, prompt, scorer.vocab.encode_target(hyp), group=group)['avg'])
    return mean_or_zero(scores)


# ==================== OVER-REJECTION ====================

class DirectionDelta(BaseModel):
    lexical_bleu: float
    exact_match: float
    avg_ref_logprob: float
    relative_bleu_change: float


class OverRejectionReport(BaseModel):
    """after - before per direction, the y_w-likelihood trajectory and the flag."""

    deltas: Dict[str, DirectionDelta]
    aggregate: DirectionDelta
    likelihood_track: List[float]
    likelihood_trend: float
    flagged: bool
    flagged_directions: List[str]


def _delta(before: Dict[str, float], after: Dict[str, float]) -> DirectionDelta:
    relative = 0.0
    if before['lexical_bleu'] > 0:
        relative = (after['lexical_bleu'] - before['lexical_bleu']) / before['lexical_bleu']
    return DirectionDelta(
        lexical_bleu=after['lexical_bleu'] - before['lexical_bleu'],
        exact_match=after['exact_match'] - before['exact_match'],
        avg_ref_logprob=after['avg_ref_logprob'] - before['avg_ref_logprob'],
        relative_bleu_change=relative,
    )


def _suspected(delta: DirectionDelta, threshold: float) -> bool:
    return delta.relative_bleu_change < -threshold and delta.avg_ref_logprob < 0


def track_trend(track: Sequence[float]) -> float:
    """Mean of the last quarter minus mean of the first quarter (0 for short tracks)."""
    if len(track) < 2:
        return 0.0
    quarter = max(1, len(track) // 4)
    return mean_or_zero(track[-quarter:]) - mean_or_zero(track[:quarter])


def over_rejection_report(before: EvalResult, after: EvalResult, likelihood_track: Sequence[float] = (),
                          threshold: float = OVER_REJECTION_BLEU_DROP) -> OverRejectionReport:
    """
    Compare two evaluations of the same directions.

    Over-rejection is suspected when lexical BLEU falls by more than
    `threshold` (relative) while the reference log-likelihood also falls.
    """
    if set(before.directions) != set(after.directions):
        detail = f"before {sorted(before.directions)}, after {sorted(after.directions)}"
        raise ContractError.from_key('direction_mismatch', detail=detail)

    deltas = {
        key: _delta(before.directions[key].model_dump(), after.directions[key].model_dump())
        for key in sorted(before.directions)
    }
    aggregate = _delta(before.aggregate, after.aggregate)
    flagged_directions = [key for key, delta in deltas.items() if _suspected(delta, threshold)]
    return OverRejectionReport(
        deltas=deltas,
        aggregate=aggregate,
        likelihood_track=list(likelihood_track),
        likelihood_trend=track_trend(likelihood_track),
        flagged=_suspected(aggregate, threshold),
        flagged_directions=flagged_directions,
    )

