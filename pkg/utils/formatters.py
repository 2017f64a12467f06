"""Report formatting utilities."""

from typing import List, Optional, Sequence, Tuple

from utils.helpers import truncate_text

RULE = "=" * 60


def _num(value: float, digits: int = 4) -> str:
    return f"{value:+.{digits}f}" if value < 0 or value > 0 else f"{0.0:.{digits}f}"


def _fixed(value: float, digits: int = 4) -> str:
    return f"{value:.{digits}f}"


def format_eval_result(result, title: str = "Evaluation") -> str:
    """
    Format an EvalResult as an aligned text table.

    Args:
        result: EvalResult
        title: Heading line

    Returns:
        Multi-line report text
    """
    lines = [title, "-" * len(title),
             f"{'direction':<12} {'n':>5} {'bleu':>8} {'exact':>8} {'ref_logp':>10}"]
    for key, row in result.directions.items():
        lines.append(f"{key:<12} {row.count:>5} {_fixed(row.lexical_bleu):>8} "
                     f"{_fixed(row.exact_match):>8} {_fixed(row.avg_ref_logprob):>10}")
    agg = result.aggregate
    lines.append(f"{'mean':<12} {'':>5} {_fixed(agg['lexical_bleu']):>8} "
                 f"{_fixed(agg['exact_match']):>8} {_fixed(agg['avg_ref_logprob']):>10}")
    return "\n".join(lines)


def format_track(track: Sequence[float], points: int = 6) -> str:
    """A few evenly spaced samples of a per-step trajectory."""
    if not track:
        return "(empty)"
    if len(track) <= points:
        picked = list(range(len(track)))
    else:
        picked = sorted({round(i * (len(track) - 1) / (points - 1)) for i in range(points)})
    return "  ".join(f"{i + 1}:{_fixed(track[i])}" for i in picked)


def format_over_rejection_report(report, title: str = "Over-rejection report") -> str:
    """Deltas (after - before) per direction, the likelihood trajectory and the flag."""
    lines = [title, "-" * len(title),
             f"{'direction':<12} {'d_bleu':>9} {'rel_bleu':>9} {'d_exact':>9} {'d_ref_logp':>11}"]
    rows: List[Tuple[str, object]] = list(report.deltas.items()) + [("mean", report.aggregate)]
    for key, delta in rows:
        lines.append(f"{key:<12} {_num(delta.lexical_bleu):>9} {_num(delta.relative_bleu_change):>9} "
                     f"{_num(delta.exact_match):>9} {_num(delta.avg_ref_logprob):>11}")
    lines.append(f"y_w log-likelihood track: {format_track(report.likelihood_track)}")
    lines.append(f"y_w log-likelihood trend: {_num(report.likelihood_trend)}")
    if report.flagged:
        lines.append("⚠️ over-rejection suspected")
    else:
        lines.append("✅ no over-rejection")
    if report.flagged_directions:
        lines.append(f"flagged directions: {', '.join(report.flagged_directions)}")
    return "\n".join(lines)


def format_comparison_report(report) -> str:
    """Full compare-losses report: setup, SFT baseline, summary table, then one block per method."""
    config = report.config
    lines = [
        RULE,
        "Preference loss comparison (synthetic cipher task)",
        RULE,
        f"seed: {report.seed}",
        f"languages: {', '.join(config.langs)}",
        f"train pairs: {report.train_pairs}  held-out pairs: {report.held_out_pairs}",
        f"preference records: {report.preference_records}",
        f"steps: pretrain {config.pretrain_steps}, sft {config.sft_steps}, preference {config.preference_steps}",
        f"adapter stages: {_stage_list(config.adapter_stages)}",
        f"beta: {config.beta}  eta: {config.eta}  bleu unit: {config.bleu_unit}",
        "",
        format_eval_result(report.sft, "SFT baseline"),
        f"proxy reward: {_fixed(report.sft_proxy_reward)}",
        "",
        "Summary",
        "-------",
        f"{'method':<8} {'bleu':>8} {'rel_bleu':>9} {'proxy':>9} {'final_loss':>11} {'flag':>5}",
        f"{'sft':<8} {_fixed(report.sft.aggregate['lexical_bleu']):>8} {_fixed(0.0):>9} "
        f"{_fixed(report.sft_proxy_reward):>9} {'':>11} {'':>5}",
    ]
    for name, outcome in report.outcomes.items():
        rel = outcome.over_rejection.aggregate.relative_bleu_change
        lines.append(f"{name:<8} {_fixed(outcome.evaluation.aggregate['lexical_bleu']):>8} {_num(rel):>9} "
                     f"{_fixed(outcome.proxy_reward):>9} {_fixed(outcome.final_loss):>11} "
                     f"{'yes' if outcome.over_rejection.flagged else 'no':>5}")
    for name, outcome in report.outcomes.items():
        lines.extend(["", RULE, f"method: {name}", RULE,
                      format_eval_result(outcome.evaluation, f"{name} evaluation"),
                      f"proxy reward: {_fixed(outcome.proxy_reward)}",
                      "",
                      format_over_rejection_report(outcome.over_rejection, f"{name} vs SFT")])
    return "\n".join(lines) + "\n"


def _stage_list(stages) -> str:
    return ' -> '.join(stage.value for stage in stages) if stages else '(none)'


def format_ablation_report(report) -> str:
    """compare-losses --ablate report: one held-out BLEU row per recipe variant, then each evaluation."""
    config = report.config
    lines = [
        RULE,
        "Stage ablation (synthetic cipher task)",
        RULE,
        f"seed: {report.seed}",
        f"languages: {', '.join(config.langs)}",
        f"train pairs: {report.train_pairs}  held-out pairs: {report.held_out_pairs}",
        f"steps: pretrain {config.pretrain_steps}, adapter stages {config.adapter_pretrain_steps} each, "
        f"sft {config.sft_steps}",
        "",
        f"{'variant':<14} {'bleu':>8} {'exact':>8} {'ref_logp':>10}  adapter stages",
    ]
    for row in report.rows:
        agg = row.evaluation.aggregate
        lines.append(f"{row.variant:<14} {_fixed(agg['lexical_bleu']):>8} {_fixed(agg['exact_match']):>8} "
                     f"{_fixed(agg['avg_ref_logprob']):>10}  {_stage_list(row.stages)}")
    for row in report.rows:
        lines.extend(["", format_eval_result(row.evaluation, f"variant: {row.variant}")])
    return "\n".join(lines) + "\n"


def format_preference_summary(dataset, path: Optional[str] = None) -> str:
    """One-line summary of a built preference dataset."""
    where = f" -> {path}" if path else ""
    return (f"preference records: {len(dataset.records)} (d1={dataset.d1}, d2={dataset.d2}, "
            f"dropped={dataset.dropped}, skipped={dataset.skipped}){where}")


def format_stage_summary(run) -> str:
    """One line per finished stage run."""
    first, last = run.losses[0], run.losses[-1]
    group = f" group {run.group}" if run.group is not None else ""
    return (f"{run.stage.value}{group}: {run.steps} steps, {run.method.value} loss "
            f"{_fixed(first)} -> {_fixed(last)}")


def format_example(source: str, hypothesis: str, reference: str, width: int = 50) -> str:
    """Three-line example block for eval output."""
    return (f"  src: {truncate_text(source, width)}\n"
            f"  hyp: {truncate_text(hypothesis, width)}\n"
            f"  ref: {truncate_text(reference, width)}")
