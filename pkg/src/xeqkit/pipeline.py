"""End-to-end analysis run: ingest, content validity, reliability, construct
validity, discriminant validity, scoring/benchmark.

Outputs in ``out_dir``:

``report.json``
    every computed statistic, unrounded.  Contains no timestamps or paths, so
    identical inputs and seed give a byte-identical file.
``metadata.json``
    run time, toolkit version, input paths.
``report.txt``
    human-readable summary (rounded).
``item_table.txt`` / ``item_table.json``
    the per-item summary, when content validity and reliability both ran.
``scree.svg`` / ``scree.json``
    when construct validity ran.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional


from . import __version__
from .construct import (
    CfaModel,
    correlation_matrix,
    covariance_matrix,
    cfa_fit,
    efa_eigenvalues,
    one_factor_loadings,
)
from .content_validity import (
    CLARITY_LABELS,
    CVI_SELECTION_THRESHOLD,
    content_validity,
    load_expert_ratings,
)
from .discriminant import TrialConfig, group_comparison, run_discriminant_trials
from .errors import ConfigError, UnidentifiedModel, ValidationError, XeqError
from .ingest import PatternRule, apply_attention_filters, load_responses, pair_retest
from .reliability import (
    ALPHA_MIN,
    INTER_ITEM_HIGH,
    INTER_ITEM_LOW,
    ITEM_TOTAL_MIN,
    internal_consistency,
    retest_reliability,
)
from .report import emit_item_table, emit_scree, write_json, write_text
from .scale import load_scale, xeq_scale
from .scoring import benchmark_load, classify_system, dimension_totals, xeq_scores

log = logging.getLogger(__name__)

ANALYSES = ("ingest", "content_validity", "reliability", "construct", "discriminant", "scoring")


@dataclass
class PipelineConfig:
    responses: Optional[Path] = None
    scale: Optional[Path] = None
    expert_ratings: Optional[Path] = None
    clarity_ratings: Optional[Path] = None
    retest: Optional[Path] = None
    benchmark: Optional[Path] = None
    benchmark_exclude: Optional[str] = None
    analyses: tuple = ANALYSES
    threshold_cvi: float = CVI_SELECTION_THRESHOLD
    item_total_min: float = ITEM_TOTAL_MIN
    alpha_min: float = ALPHA_MIN
    inter_item_band: tuple = (INTER_ITEM_LOW, INTER_ITEM_HIGH)
    corrected_item_total: bool = False
    min_time_fraction: float = 0.5
    pattern_rule: PatternRule = field(default_factory=PatternRule)
    seed: Optional[int] = None
    n_trials: int = 100
    train_fraction: float = 0.7
    shrinkage: float = 0.1
    n_jobs: int = 1
    weights: Optional[dict] = None
    out_dir: Optional[Path] = None
    rounding: int = 4

    def validate(self) -> None:
        if not self.analyses:
            raise ConfigError("enable at least one analysis")
        unknown = set(self.analyses) - set(ANALYSES)
        if unknown:
            raise ConfigError(f"unknown analyses {sorted(unknown)}; choose from {list(ANALYSES)}")
        if "discriminant" in self.analyses and self.seed is None:
            raise ConfigError("discriminant trials need an explicit --seed")
        needs_responses = set(self.analyses) - {"content_validity"}
        if needs_responses and self.responses is None:
            raise ConfigError(f"analyses {sorted(needs_responses)} need a responses file")
        if set(self.analyses) == {"content_validity"} and self.expert_ratings is None:
            raise ConfigError("content validity needs an expert ratings file")
        for name in ("responses", "scale", "expert_ratings", "clarity_ratings", "retest", "benchmark"):
            p = getattr(self, name)
            if p is not None and not Path(p).is_file():
                raise ConfigError(f"{name.replace('_', ' ')} file not found: {p}")
        if not 0 < self.threshold_cvi < 1:
            raise ConfigError("threshold_cvi must be in (0, 1)")
        if self.rounding < 0:
            raise ConfigError("rounding must be non-negative")

    def enabled(self, name: str) -> bool:
        return name in self.analyses


class _Stage:
    """Tags errors raised inside a stage with its name."""

    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, XeqError) and not hasattr(exc, "stage"):
            exc.stage = self.name
        return False


def _construct(matrix) -> dict:
    corr = correlation_matrix(matrix)
    efa = efa_eigenvalues(corr)
    cov = covariance_matrix(matrix)
    out = {"efa": efa.to_dict(), "n_obs": matrix.n_respondents}
    out["one_factor"] = one_factor_loadings(cov, matrix.scale.item_ids, n_obs=matrix.n_respondents).to_dict()
    model = CfaModel.from_scale(matrix.scale)
    if len(model.factors) > 1:
        try:
            out["dimension_model"] = cfa_fit(cov, model, n_obs=matrix.n_respondents).to_dict()
        except UnidentifiedModel as exc:
            out["dimension_model"] = {"skipped": str(exc)}
    return out, efa


def run_pipeline(config: PipelineConfig) -> dict:
    """Run the enabled analyses in fixed order and write the outputs.

    Returns ``{"results": ..., "metadata": ...}``; ``results`` is exactly the
    content of ``report.json``.
    """
    config.validate()
    started = datetime.now(timezone.utc)
    scale = load_scale(config.scale) if config.scale else xeq_scale()
    results: dict = {}
    efa = None

    matrix = pairs = None
    if config.responses is not None:
        with _Stage("ingest"):
            raw, rejected = load_responses(config.responses, scale)
            screened = apply_attention_filters(raw, config.min_time_fraction, config.pattern_rule)
            if screened.retained is None:
                raise ValidationError("every respondent failed the attention checks")
            matrix = screened.retained
            ingest = {
                "scale_id": scale.scale_id,
                "scale_version": scale.version,
                "n_items": scale.n_items,
                "rejected_rows": [{"line": r.line, "respondent_id": r.respondent_id, "reason": r.reason}
                                  for r in rejected],
                "attention": screened.to_dict(),
            }
            if config.retest is not None:
                retest_raw, retest_rejected = load_responses(config.retest, scale, wave="Retest")
                pairs = pair_retest(matrix, retest_raw)
                ingest["retest"] = {
                    "n_pairs": len(pairs),
                    "rejected_rows": [{"line": r.line, "respondent_id": r.respondent_id, "reason": r.reason}
                                      for r in retest_rejected],
                    "unmatched_test": list(pairs.unmatched_test),
                    "unmatched_retest": list(pairs.unmatched_retest),
                }
        if config.enabled("ingest"):
            results["ingest"] = ingest

    if config.enabled("content_validity"):
        with _Stage("content_validity"):
            if config.expert_ratings is None:
                results["content_validity"] = {"skipped": "no expert ratings supplied"}
            else:
                ratings = load_expert_ratings(config.expert_ratings, scale.n_items, item_ids=scale.item_ids)
                clarity = None
                if config.clarity_ratings is not None:
                    clarity = load_expert_ratings(config.clarity_ratings, scale.n_items,
                                                  CLARITY_LABELS, scale.item_ids)
                results["content_validity"] = content_validity(ratings, config.threshold_cvi, clarity).to_dict()

    if config.enabled("reliability"):
        with _Stage("reliability"):
            rel = internal_consistency(matrix, config.corrected_item_total)
            section = {"internal_consistency": rel.to_dict(config.item_total_min, config.inter_item_band,
                                                           config.alpha_min)}
            if pairs is not None:
                section["test_retest"] = retest_reliability(pairs).to_dict()
            results["reliability"] = section

    if config.enabled("construct"):
        with _Stage("construct"):
            results["construct"], efa = _construct(matrix)

    if config.enabled("discriminant"):
        with _Stage("discriminant"):
            groups = matrix.groups
            labels = sorted({g for g in groups if g is not None})
            if any(g is None for g in groups) or len(labels) != 2:
                results["discriminant"] = {
                    "skipped": f"needs exactly two labelled groups, found {labels or 'none'}"
                }
            else:
                tc = TrialConfig(config.n_trials, config.train_fraction, config.seed, config.shrinkage)
                trials = run_discriminant_trials(matrix, config=tc, n_jobs=config.n_jobs)
                domains = [m.domain for m in matrix.respondents]
                blocking = domains if all(d is not None for d in domains) else None
                comparison = group_comparison(matrix.participant_totals(), groups, blocking)
                results["discriminant"] = {
                    "trials": trials.to_dict(),
                    "group_comparison": comparison.to_dict(),
                }

    if config.enabled("scoring"):
        with _Stage("scoring"):
            section = xeq_scores(matrix, config.weights).to_dict()
            if config.benchmark is not None:
                store = benchmark_load(config.benchmark, scale)
                totals = dimension_totals(matrix)
                section["benchmark"] = {
                    "dimension_totals": totals,
                    **classify_system(store, totals, exclude=config.benchmark_exclude).to_dict(),
                }
            results["scoring"] = section

    metadata = {
        "toolkit_version": __version__,
        "started_utc": started.isoformat(),
        "finished_utc": datetime.now(timezone.utc).isoformat(),
        "inputs": {k: (str(getattr(config, k)) if getattr(config, k) is not None else None)
                   for k in ("scale", "responses", "expert_ratings", "clarity_ratings", "retest", "benchmark")},
        "analyses": list(config.analyses),
        "seed": config.seed,
    }

    if config.out_dir is not None:
        out = Path(config.out_dir)
        write_json(out / "report.json", results)
        write_json(out / "metadata.json", metadata)
        write_text(out / "report.txt", render_text(results, scale, config.rounding))
        if "content_validity" in results and "items" in results["content_validity"] and "reliability" in results:
            emit_item_table(results, scale, config.rounding, out / "item_table.txt")
        if efa is not None:
            emit_scree(efa, out / "scree.svg")
    return {"results": results, "metadata": metadata}


def _r(v, d):
    return "-" if v is None else f"{v:.{d}f}"


def render_text(results: dict, scale, digits: int = 4) -> str:
    """Human-readable summary; every number here is also in ``report.json``."""
    lines = [f"XEQ analysis report  (scale {scale.scale_id} v{scale.version}, {scale.n_items} items)", ""]
    if "ingest" in results:
        a = results["ingest"]["attention"]
        lines += ["[ingest]",
                  f"  respondents: {a['n_input']} read, {a['n_retained']} retained, {len(a['excluded'])} excluded"]
        for e in a["excluded"]:
            lines.append(f"    excluded {e['respondent_id']}: {e['reason']}")
        lines.append("")
    cv = results.get("content_validity")
    if cv and "items" in cv:
        lines += ["[content_validity]",
                  f"  experts: {cv['n_experts']}, threshold: I-CVI > {cv['threshold']}",
                  f"  retained items: {len(cv['retained_item_ids'])} of {len(cv['items'])}",
                  f"  S-CVI(a): {_r(cv['s_cvi_a'], digits)}  S-CVI(b): {_r(cv['s_cvi_b'], digits)}", ""]
    elif cv:
        lines += ["[content_validity]", f"  skipped: {cv['skipped']}", ""]
    rel = results.get("reliability")
    if rel:
        ic = rel["internal_consistency"]
        lines += ["[reliability]", f"  Cronbach's alpha: {_r(ic['alpha'], digits)}"]
        weak = [d["item_id"] for d in ic["items"] if not d["meets_baseline"]]
        lines.append(f"  items below item-total baseline: {weak or 'none'}")
        lines.append(f"  mean inter-item correlation: {_r(ic['inter_item_mean'], digits)}")
        tr = rel.get("test_retest")
        if tr:
            lines.append(f"  test-retest pairs: {tr['n_pairs']}, Pearson rho: {_r(tr['pearson_rho'], digits)}")
            for name, icc in tr["icc"].items():
                lines.append(f"  ICC [{name}]: {_r(icc['value'], digits)} ({icc['band']})")
        lines.append("")
    con = results.get("construct")
    if con:
        ev = con["efa"]["eigenvalues"]
        lines += ["[construct]",
                  "  eigenvalues: " + ", ".join(_r(v, digits) for v in ev),
                  f"  Kaiser factors: {con['efa']['suggested_factors']}, "
                  f"scree elbow factors: {con['efa']['scree_elbow_factors']}"]
        for key in ("one_factor", "dimension_model"):
            fit = con.get(key)
            if fit and "items" in fit:
                lines.append(f"  {key}: discrepancy {_r(fit['discrepancy'], digits)}, "
                             f"converged {fit['converged']}, weak items "
                             f"{[d['item_id'] for d in fit['items'] if d['weak']] or 'none'}")
        lines.append("")
    dis = results.get("discriminant")
    if dis and "trials" in dis:
        t, g = dis["trials"], dis["group_comparison"]
        lines += ["[discriminant]",
                  f"  accuracy: {_r(t['accuracy_mean'], digits)} +/- {_r(t['accuracy_sd'], digits)}"
                  f"  macro-F1: {_r(t['macro_f1_mean'], digits)} +/- {_r(t['macro_f1_sd'], digits)}"
                  f"  (baseline {t['baseline_accuracy']})"]
        for grp in g["groups"]:
            lines.append(f"  {grp['group']}: mean total {_r(grp['mean'], digits)} +/- {_r(grp['se'], digits)} (n={grp['n']})")
        lines.append(f"  one-way ANOVA F: {_r(g['one_way_anova']['f'], digits)}, p: {g['one_way_anova']['p']:.3e}")
        lines.append(f"  Welch t: {_r(g['welch_t']['t'], digits)}, p: {g['welch_t']['p']:.3e}")
        lines.append(f"  Cohen's d: {_r(g['cohens_d'], digits)}")
        lines.append("")
    elif dis:
        lines += ["[discriminant]", f"  skipped: {dis['skipped']}", ""]
    sc = results.get("scoring")
    if sc:
        lines += ["[scoring]"]
        for d, v in sc["factor_scores"].items():
            lines.append(f"  {d}: {_r(v, digits)}")
        lines.append(f"  system score: {_r(sc['system_score'], digits)}")
        lines.append(f"  lowest dimension: {sc['deficiency_ranking'][0]}")
        if "benchmark" in sc:
            for d, c in sc["benchmark"]["categories"].items():
                lines.append(f"  benchmark {d}: {c} (percentile {_r(sc['benchmark']['percentiles'][d], digits)})")
        lines.append("")
    return "\n".join(lines)
