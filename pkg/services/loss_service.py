"""
Loss family: SFT, DPO, CPO, ARPO (adaptive rejection), SimPO, KTO and ORPO.

Every preference loss is built from per-sequence log-likelihoods under the
policy. CPO and ARPO share one code path; CPO is the case tau == 1.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from autodiff import (
    Tensor,
    abs_,
    as_tensor,
    clamp_max,
    exp,
    expm1,
    log,
    log_sigmoid,
    mul,
    neg,
    no_grad,
    sigmoid,
    sub,
)
from config.constants import (
    LN2,
    LOG_ODDS_CEILING,
    REFERENCE_METHODS,
    TAU_EXPONENT_CAP,
    LossMethod,
    TauGrad,
)
from config.schemas import LossConfig
from model.policy import DEFAULT_PROMPT, PolicyModel, SequenceScore, sequence_logprob_tensor
from storage.models import PreferenceTriple
from utils.errors import ConfigurationError, ContractError

logger = logging.getLogger(__name__)


@dataclass
class LossResult:
    """Differentiable loss plus float diagnostics (pref, bc, tau, z, ...)."""

    loss: Tensor
    parts: Dict[str, float] = field(default_factory=dict)


# ==================== SCORING HELPERS ====================

def score_pair(model: PolicyModel, triple: PreferenceTriple,
               group: Optional[int] = None) -> Tuple[SequenceScore, SequenceScore]:
    """log π(y_w | x) and log π(y_l | x) as differentiable scores."""
    prompt = DEFAULT_PROMPT.render(triple.src_lang, triple.tgt_lang, triple.x)
    vocab = model.vocab
    chosen = sequence_logprob_tensor(model, prompt, vocab.encode_target(triple.y_w), group=group)
    rejected = sequence_logprob_tensor(model, prompt, vocab.encode_target(triple.y_l), group=group)
    return chosen, rejected


def _reference_logps(config: LossConfig, triple: PreferenceTriple,
                     group: Optional[int]) -> Tuple[float, float]:
    if config.reference_model is None:
        raise ConfigurationError.from_key('missing_reference', method=config.method.value)
    with no_grad():
        chosen, rejected = score_pair(config.reference_model, triple, group=group)
    return chosen.total.item(), rejected.total.item()


# ==================== SFT ====================

def sft_nll(model: PolicyModel, batch: Sequence[Tuple[str, Sequence[int]]],
            group: Optional[int] = None) -> Tensor:
    """
    Negated mean sequence log-likelihood.

    Args:
        model: Policy
        batch: (rendered prompt, EOS-terminated target ids) pairs
        group: Language group routing the whole batch

    Returns:
        Scalar loss tensor
    """
    if not batch:
        raise ContractError.from_key('empty_batch', what='sft_nll')
    total = None
    for prompt, target in batch:
        score = sequence_logprob_tensor(model, prompt, target, group=group).total
        total = score if total is None else total + score
    return neg(total) / len(batch)


# ==================== GENERIC FRAME ====================

def default_link(margin):
    """f(m) = -log σ(m)."""
    return neg(log_sigmoid(margin))


def preference_frame(f: Optional[Callable], r_w, r_l):
    """
    f(r_w - r_l); with the default link the value at zero margin is ln 2.

    Floats in, float out; Tensors in, Tensor out.
    """
    link = default_link if f is None else f
    if isinstance(r_w, Tensor) or isinstance(r_l, Tensor):
        return link(sub(r_w, r_l))
    value = link(Tensor(float(r_w) - float(r_l)))
    return value.item() if isinstance(value, Tensor) else float(value)


def dpo_reward(config: LossConfig, logp_policy: float, logp_ref: float) -> float:
    """r = β (log π_θ - log π_ref)."""
    return config.beta * (logp_policy - logp_ref)


# ==================== CPO / ARPO ====================

def arpo_tau(config: LossConfig, logp_w: float, len_w: int, logp_l: float, len_l: int) -> Dict[str, float]:
    """
    Adaptive rejection weight.

    z = |logp_w / len_w - logp_l / len_l|, tau = min(e^{η z} - 1, 1), and
    tau is exactly 1 once z reaches ln 2 / η.
    """
    if len_w < 1 or len_l < 1:
        raise ContractError(f"arpo_tau: lengths must be >= 1, got {len_w} and {len_l}")
    z = abs(logp_w / len_w - logp_l / len_l)
    if z >= LN2 / config.eta:
        return {'tau': 1.0, 'z': z}
    tau = min(math.exp(min(config.eta * z, TAU_EXPONENT_CAP)) - 1.0, 1.0)
    return {'tau': max(tau, 0.0), 'z': z}


def _tau_through(config: LossConfig, chosen: SequenceScore, rejected: SequenceScore) -> Tensor:
    z = abs_(sub(chosen.avg, rejected.avg))
    if z.item() >= LN2 / config.eta:
        return Tensor(1.0)
    exponent = clamp_max(mul(config.eta, z), TAU_EXPONENT_CAP)
    return clamp_max(sub(exp(exponent), 1.0), 1.0)


def contrastive_loss(config: LossConfig, logp_w: Tensor, logp_l: Tensor,
                     tau: Tensor) -> Tuple[Tensor, Tensor, Tensor]:
    """
    -log σ(β logπ_w - τ β logπ_l) - logπ_w.

    Returns:
        (loss, preference term, behavior-cloning term)
    """
    logp_w, logp_l, tau = as_tensor(logp_w), as_tensor(logp_l), as_tensor(tau)
    margin = sub(mul(config.beta, logp_w), mul(tau, mul(config.beta, logp_l)))
    pref = neg(log_sigmoid(margin))
    bc = neg(logp_w)
    return pref + bc, pref, bc


def cpo_loss(config: LossConfig, model: PolicyModel, triple: PreferenceTriple,
             group: Optional[int] = None) -> LossResult:
    """Contrastive preference loss with its behavior-cloning term."""
    chosen, rejected = score_pair(model, triple, group=group)
    loss, pref, bc = contrastive_loss(config, chosen.total, rejected.total, Tensor(1.0))
    return LossResult(loss, {'pref': pref.item(), 'bc': bc.item()})


def arpo_loss(config: LossConfig, model: PolicyModel, triple: PreferenceTriple,
              group: Optional[int] = None, tau: Optional[float] = None) -> LossResult:
    """
    CPO with the dis-preferred term scaled by the adaptive weight tau.

    Args:
        config: Loss constants; tau_grad selects detached or differentiable tau
        model: Live policy (z is measured on it)
        triple: Preference triple
        group: Language group routing the triple
        tau: Fixed tau; bypasses z (finite-difference checks hold tau constant this way)

    Returns:
        LossResult with parts pref, bc, tau, z
    """
    chosen, rejected = score_pair(model, triple, group=group)
    stats = arpo_tau(config, chosen.total.item(), chosen.length, rejected.total.item(), rejected.length)

    if tau is not None:
        tau_tensor = Tensor(float(tau))
    elif config.tau_grad == TauGrad.THROUGH:
        tau_tensor = _tau_through(config, chosen, rejected)
    else:
        tau_tensor = Tensor(stats['tau'])

    loss, pref, bc = contrastive_loss(config, chosen.total, rejected.total, tau_tensor)
    return LossResult(loss, {
        'pref': pref.item(),
        'bc': bc.item(),
        'tau': tau_tensor.item(),
        'z': stats['z'],
    })


# ==================== BASELINES ====================

def kto_reference_point(config: LossConfig, model: PolicyModel,
                        triples: Sequence[PreferenceTriple], group: Optional[int] = None) -> float:
    """
    Batch reference point max(0, mean((ρ_w + ρ_l) / 2)) with ρ = logπ_θ - logπ_ref.

    Computed without gradient; it is a constant inside the KTO loss.
    """
    if not triples:
        raise ContractError.from_key('empty_batch', what='kto_reference_point')
    ratios = []
    for triple in triples:
        ref_w, ref_l = _reference_logps(config, triple, group)
        with no_grad():
            chosen, rejected = score_pair(model, triple, group=group)
        ratios.append(((chosen.total.item() - ref_w) + (rejected.total.item() - ref_l)) / 2.0)
    return max(0.0, float(np.mean(ratios)))


def _log_odds(avg: Tensor) -> Tensor:
    """log(p / (1 - p)) for p = exp(avg); finite for a saturated avg of 0."""
    capped = clamp_max(avg, LOG_ODDS_CEILING)
    return sub(capped, log(neg(expm1(capped))))


def baseline_loss(config: LossConfig, model: PolicyModel, triple: PreferenceTriple,
                  group: Optional[int] = None, reference_point: Optional[float] = None) -> LossResult:
    """
    Comparison baselines, each in its published form.

    DPO:   -log σ(r_w - r_l), r = β (logπ_θ - logπ_ref)
    SimPO: -log σ(β (avg_w - avg_l) - γ), avg = length-normalized log-likelihood
    KTO:   λ_D (1 - σ(β (ρ_w - z_ref))) + λ_U (1 - σ(β (z_ref - ρ_l))),
           ρ = logπ_θ - logπ_ref, z_ref the batch reference point
    ORPO:  -logπ_w + λ (-log σ(logodds_w - logodds_l)), odds on avg likelihoods

    With config.bc the behavior-cloning term -logπ_w is added to DPO, SimPO and
    KTO; ORPO already contains it.
    """
    method = config.method
    if method not in (LossMethod.DPO, LossMethod.SIMPO, LossMethod.KTO, LossMethod.ORPO):
        raise ConfigurationError(f"baseline_loss does not handle {method.value}")
    if method in REFERENCE_METHODS and config.reference_model is None:
        raise ConfigurationError.from_key('missing_reference', method=method.value)

    chosen, rejected = score_pair(model, triple, group=group)
    parts: Dict[str, float] = {}

    if method == LossMethod.DPO:
        ref_w, ref_l = _reference_logps(config, triple, group)
        r_w = mul(config.beta, sub(chosen.total, ref_w))
        r_l = mul(config.beta, sub(rejected.total, ref_l))
        pref = preference_frame(None, r_w, r_l)
        parts.update(reward_w=r_w.item(), reward_l=r_l.item())

    elif method == LossMethod.SIMPO:
        margin = sub(mul(config.beta, sub(chosen.avg, rejected.avg)), config.simpo_gamma)
        pref = neg(log_sigmoid(margin))

    elif method == LossMethod.KTO:
        ref_w, ref_l = _reference_logps(config, triple, group)
        if reference_point is None:
            reference_point = kto_reference_point(config, model, [triple], group)
        rho_w = sub(chosen.total, ref_w)
        rho_l = sub(rejected.total, ref_l)
        desirable = sub(1.0, sigmoid(mul(config.beta, sub(rho_w, reference_point))))
        undesirable = sub(1.0, sigmoid(mul(config.beta, sub(reference_point, rho_l))))
        pref = mul(config.kto_desirable_weight, desirable) + mul(config.kto_undesirable_weight, undesirable)
        parts['reference_point'] = reference_point

    else:
        ratio = neg(log_sigmoid(sub(_log_odds(chosen.avg), _log_odds(rejected.avg))))
        nll = neg(chosen.total)
        loss = nll + mul(config.orpo_lambda, ratio)
        parts.update(pref=ratio.item(), bc=nll.item())
        return LossResult(loss, parts)

    parts['pref'] = pref.item()
    loss = pref
    if config.bc:
        bc = neg(chosen.total)
        loss = loss + bc
        parts['bc'] = bc.item()
    return LossResult(loss, parts)


# ==================== DISPATCH ====================

def triple_loss(config: LossConfig, model: PolicyModel, triple: PreferenceTriple,
                group: Optional[int] = None, tau: Optional[float] = None,
                reference_point: Optional[float] = None) -> LossResult:
    """Route one triple to the configured preference loss."""
    if config.method == LossMethod.CPO:
        return cpo_loss(config, model, triple, group=group)
    if config.method == LossMethod.ARPO:
        return arpo_loss(config, model, triple, group=group, tau=tau)
    if config.method == LossMethod.SFT:
        raise ConfigurationError("sft is not a preference loss; use sft_nll")
    return baseline_loss(config, model, triple, group=group, reference_point=reference_point)


def batch_loss(config: LossConfig, model: PolicyModel, triples: Sequence[PreferenceTriple],
               group: Optional[int] = None,
               tau: Optional[Union[float, Sequence[float]]] = None,
               reference_point: Optional[float] = None) -> LossResult:
    """
    Mean preference loss over a batch.

    KTO's reference point is computed once per batch unless given. A fixed tau
    may be one value or one per triple. Parts are averaged across triples.
    """
    if not triples:
        raise ContractError.from_key('empty_batch', what='batch_loss')
    if tau is None or isinstance(tau, (int, float)):
        taus = [tau] * len(triples)
    else:
        taus = list(tau)
        if len(taus) != len(triples):
            raise ContractError(f"batch_loss: {len(taus)} tau values for {len(triples)} triples")
    if config.method == LossMethod.KTO and reference_point is None:
        if config.reference_model is None:
            raise ConfigurationError.from_key('missing_reference', method=config.method.value)
        reference_point = kto_reference_point(config, model, triples, group)

    total = None
    parts: Dict[str, List[float]] = {}
    for triple, fixed_tau in zip(triples, taus):
        result = triple_loss(config, model, triple, group=group, tau=fixed_tau,
                             reference_point=reference_point)
        total = result.loss if total is None else total + result.loss
        for key, value in result.parts.items():
            parts.setdefault(key, []).append(value)

    return LossResult(total / len(triples), {key: float(np.mean(values)) for key, values in parts.items()})


# ==================== REWARD-DIFFERENCE ANALYTICS ====================

def reward_differences(model: PolicyModel, triples: Sequence[PreferenceTriple],
                       group: Optional[int] = None) -> List[float]:
    """logπ(y_w | x) - logπ(y_l | x) per triple."""
    diffs = []
    with no_grad():
        for triple in triples:
            chosen, rejected = score_pair(model, triple, group=group)
            diffs.append(chosen.total.item() - rejected.total.item())
    return diffs


def reward_diff_cdf(diffs: Sequence[float]) -> List[Tuple[float, float]]:
    """Empirical CDF: ascending values, point k at probability (k + 1) / N."""
    if len(diffs) == 0:
        raise ContractError.from_key('empty_input', what='reward_diff_cdf')
    values = np.sort(np.asarray(diffs, dtype=np.float64), kind='stable')
    if not np.all(np.isfinite(values)):
        raise ContractError("reward_diff_cdf: differences must be finite")
    n = len(values)
    return [(float(value), (k + 1) / n) for k, value in enumerate(values)]
