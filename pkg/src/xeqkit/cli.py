"""``xeq`` command-line front end.

Exit codes: 0 success, 2 invalid input or configuration (including missing
files), 3 analysis failure (degenerate data, non-convergence under
``--strict``), 1 any other toolkit error such as an unwritable output path.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .content_validity import CLARITY_LABELS, CVI_SELECTION_THRESHOLD, content_validity, load_expert_ratings
from .errors import AnalysisError, ConfigError, ValidationError, XeqError
from .ingest import apply_attention_filters, load_responses, pair_retest, write_responses
from .pipeline import ANALYSES, PipelineConfig, render_text, run_pipeline
from .reliability import retest_reliability
from .report import dumps, emit_item_table, emit_scree, write_json, write_text
from .scale import ResponseMatrix, load_scale, xeq_scale
from .scoring import (
    BenchmarkStore,
    benchmark_add,
    benchmark_load,
    benchmark_save,
    classify_system,
    dimension_totals,
    xeq_scores,
)
from .simulation import GeneratorSpec, generate_factor_data, generate_retest, generate_two_group

log = logging.getLogger("xeqkit")


def _scale(args):
    return load_scale(args.scale) if getattr(args, "scale", None) else xeq_scale()


def _require_file(path, what):
    if path is None:
        raise ConfigError(f"--{what} is required")
    if not Path(path).is_file():
        raise ValidationError(f"{what.replace('-', ' ')} file not found: {path}")
    return Path(path)


def _emit(obj, out):
    """Write ``obj`` as JSON to ``out`` or print it."""
    if out:
        write_json(out, obj)
        print(f"wrote {out}")
    else:
        sys.stdout.write(dumps(obj))


def _screened(args, scale):
    raw, _ = load_responses(_require_file(args.responses, "responses"), scale)
    retained = apply_attention_filters(raw, args.min_time_fraction).retained
    if retained is None:
        raise ValidationError("every respondent failed the attention checks")
    return retained


def _weights(text):
    if text is None:
        return None
    try:
        return {k.strip(): float(v) for k, v in (pair.split("=") for pair in text.split(","))}
    except ValueError:
        raise ConfigError(f"--weights expects Dimension=value pairs separated by commas, got {text!r}") from None


# -- subcommands -------------------------------------------------------------


def cmd_validate_content(args) -> int:
    scale = _scale(args)
    path = _require_file(args.expert_ratings, "expert-ratings")
    ratings = load_expert_ratings(path, scale.n_items, item_ids=scale.item_ids)
    clarity = None
    if args.clarity_ratings:
        clarity = load_expert_ratings(_require_file(args.clarity_ratings, "clarity-ratings"),
                                      scale.n_items, CLARITY_LABELS, scale.item_ids)
    rep = content_validity(ratings, args.threshold_cvi, clarity).to_dict()
    print(f"experts: {rep['n_experts']}  retained: {len(rep['retained_item_ids'])}/{len(rep['items'])}")
    print(f"S-CVI(a) = {rep['s_cvi_a']:.4f}  S-CVI(b) = {rep['s_cvi_b']:.4f}")
    low = [d["item_id"] for d in rep["items"] if d["low"]]
    if low:
        print(f"items at or below I-CVI {args.threshold_cvi}: {low}")
    if args.out:
        write_json(args.out, rep)
        print(f"wrote {args.out}")
    return 0


def cmd_analyze(args) -> int:
    analyses = tuple(a.strip() for a in args.analyses.split(",")) if args.analyses else ANALYSES
    cfg = PipelineConfig(
        responses=args.responses,
        scale=args.scale,
        expert_ratings=args.expert_ratings,
        clarity_ratings=args.clarity_ratings,
        retest=args.retest,
        benchmark=args.benchmark,
        benchmark_exclude=args.benchmark_exclude,
        analyses=tuple(a for a in ANALYSES if a in analyses) + tuple(a for a in analyses if a not in ANALYSES),
        threshold_cvi=args.threshold_cvi,
        corrected_item_total=args.corrected,
        min_time_fraction=args.min_time_fraction,
        seed=args.seed,
        n_trials=args.trials,
        train_fraction=args.train_fraction,
        n_jobs=args.jobs,
        weights=_weights(args.weights),
        out_dir=args.out,
        rounding=args.rounding,
    )
    for name in ("responses", "expert_ratings", "retest", "benchmark", "scale"):
        p = getattr(cfg, name)
        if p is not None and not Path(p).is_file():
            raise ValidationError(f"{name.replace('_', ' ')} file not found: {p}")
    bundle = run_pipeline(cfg)
    scale = _scale(args)
    sys.stdout.write(render_text(bundle["results"], scale, args.rounding))
    print(f"wrote {Path(args.out) / 'report.json'}")
    return 0


def cmd_retest(args) -> int:
    scale = _scale(args)
    test, _ = load_responses(_require_file(args.responses, "responses"), scale)
    retest, _ = load_responses(_require_file(args.retest, "retest"), scale, wave="Retest")
    rep = retest_reliability(pair_retest(test, retest)).to_dict()
    print(f"pairs: {rep['n_pairs']}  Pearson rho = {rep['pearson_rho']:.4f} (p = {rep['pearson_p']:.3e})")
    for name, icc in rep["icc"].items():
        print(f"ICC [{name}] = {icc['value']:.4f}  {icc['band']}  (p = {icc['p_value']:.3e})")
    if args.out:
        write_json(args.out, rep)
        print(f"wrote {args.out}")
    return 0


def cmd_score(args) -> int:
    scale = _scale(args)
    rep = xeq_scores(_screened(args, scale), _weights(args.weights)).to_dict()
    for d, v in rep["factor_scores"].items():
        print(f"{d:<12} {v:.4f}")
    print(f"{'System':<12} {rep['system_score']:.4f}")
    print(f"lowest dimension: {rep['deficiency_ranking'][0]}")
    if args.out:
        write_json(args.out, rep)
        print(f"wrote {args.out}")
    return 0


def cmd_benchmark(args) -> int:
    scale = _scale(args)
    path = Path(args.benchmark)
    if args.action == "list":
        store = benchmark_load(_require_file(path, "benchmark"), scale)
        print(f"{store.scale_id} v{store.scale_version}, revision {store.version}, {len(store.entries)} systems")
        for e in store.entries:
            print(f"  {e.system_id}: " + ", ".join(f"{d}={e.totals[d]:g}" for d in store.dimensions))
        return 0
    totals = dimension_totals(_screened(args, scale))
    if args.action == "add":
        if not args.system_id:
            raise ConfigError("benchmark add needs --system-id")
        store = benchmark_load(path, scale) if path.is_file() else BenchmarkStore.empty(scale)
        store = benchmark_add(store, args.system_id, totals)
        benchmark_save(store, path)
        print(f"added {args.system_id} to {path} (revision {store.version})")
        return 0
    store = benchmark_load(_require_file(path, "benchmark"), scale)
    rep = classify_system(store, totals, exclude=args.system_id).to_dict()
    for d in store.dimensions:
        print(f"{d:<12} total {totals[d]:8.4f}  percentile {rep['percentiles'][d]:6.2f}  {rep['categories'][d]}")
    if args.out:
        write_json(args.out, {"dimension_totals": totals, **rep})
        print(f"wrote {args.out}")
    return 0


def cmd_simulate(args) -> int:
    scale = _scale(args)
    spec = GeneratorSpec.for_scale(scale, args.loading, args.factor_correlation, n=args.n, seed=args.seed)
    if args.delta is not None:
        m = generate_two_group(spec, args.delta, args.n, scale)
    else:
        m = generate_factor_data(spec, scale)
    if args.domains:
        metas = tuple(replace(r, domain=f"D{k % args.domains + 1}") for k, r in enumerate(m.respondents))
        m = ResponseMatrix(m.scale, metas, m.values, m.wave)
    write_responses(m, args.out)
    print(f"wrote {m.n_respondents} respondents to {args.out}")
    if args.retest_out:
        retest = generate_retest(m, args.retest_noise, args.seed + 1, spec.thresholds)
        write_responses(retest, args.retest_out)
        print(f"wrote retest wave to {args.retest_out}")
    return 0


def cmd_report(args) -> int:
    path = _require_file(args.report, "report")
    try:
        results = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})") from exc
    scale = _scale(args)
    out = Path(args.out) if args.out else path.parent
    write_text(out / "report.txt", render_text(results, scale, args.rounding))
    written = ["report.txt"]
    if "items" in results.get("content_validity", {}) and "reliability" in results:
        emit_item_table(results, scale, args.rounding, out / "item_table.txt")
        written.append("item_table.txt")
    if "construct" in results:
        emit_scree(results["construct"]["efa"]["eigenvalues"], out / "scree.svg")
        written.append("scree.svg")
    print(f"wrote {', '.join(written)} to {out}")
    return 0


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="xeq", description="Validate, score and benchmark XEQ questionnaire data.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log warnings and progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--scale", help="scale definition JSON (default: built-in 18-item XEQ)")
        sp.add_argument("--out", help="output path")

    def responses(sp, required=True):
        sp.add_argument("--responses", required=required, help="response CSV")
        sp.add_argument("--min-time-fraction", type=float, default=0.5,
                        help="exclude respondents faster than this share of the allocated time")

    sp = sub.add_parser("validate-content", help="content validity index from an expert panel")
    common(sp)
    sp.add_argument("--expert-ratings", required=True)
    sp.add_argument("--clarity-ratings")
    sp.add_argument("--threshold-cvi", type=float, default=CVI_SELECTION_THRESHOLD)
    sp.set_defaults(func=cmd_validate_content)

    sp = sub.add_parser("analyze", help="run the full validation pipeline")
    sp.add_argument("--scale")
    sp.add_argument("--out", required=True, help="output directory")
    responses(sp, required=False)
    sp.add_argument("--expert-ratings")
    sp.add_argument("--clarity-ratings")
    sp.add_argument("--retest")
    sp.add_argument("--benchmark")
    sp.add_argument("--benchmark-exclude", help="system id to leave out of the benchmark reference set")
    sp.add_argument("--analyses", help=f"comma-separated subset of {','.join(ANALYSES)}")
    sp.add_argument("--seed", type=int, help="master seed for discriminant trials (required when they run)")
    sp.add_argument("--threshold-cvi", type=float, default=CVI_SELECTION_THRESHOLD)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--train-fraction", type=float, default=0.7)
    sp.add_argument("--jobs", type=int, default=1, help="threads for discriminant trials")
    sp.add_argument("--corrected", action="store_true", help="exclude each item from its own total")
    sp.add_argument("--weights", help="dimension weights, e.g. Learning=0.4,Utility=0.2,...")
    sp.add_argument("--rounding", type=int, default=4)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("retest", help="test-retest reliability of participant totals")
    common(sp)
    sp.add_argument("--responses", required=True)
    sp.add_argument("--retest", required=True)
    sp.set_defaults(func=cmd_retest)

    sp = sub.add_parser("score", help="stakeholder, factor and system scores")
    common(sp)
    responses(sp)
    sp.add_argument("--weights")
    sp.set_defaults(func=cmd_score)

    sp = sub.add_parser("benchmark", help="manage and query a benchmark of evaluated systems")
    sp.add_argument("action", choices=("add", "classify", "list"))
    common(sp)
    sp.add_argument("--benchmark", required=True, help="benchmark JSON file")
    sp.add_argument("--system-id", help="id to store (add) or to exclude from the reference set (classify)")
    responses(sp, required=False)
    sp.set_defaults(func=cmd_benchmark)

    sp = sub.add_parser("simulate", help="write synthetic responses with planted factor structure")
    sp.add_argument("--scale")
    sp.add_argument("--out", required=True, help="response CSV to write")
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--n", type=int, default=200, help="respondents (per group with --delta)")
    sp.add_argument("--loading", type=float, default=0.7)
    sp.add_argument("--factor-correlation", type=float, default=0.5)
    sp.add_argument("--delta", type=float, help="latent shift of a second, Negative group")
    sp.add_argument("--domains", type=int, default=0, help="assign respondents round-robin to this many domains")
    sp.add_argument("--retest-out", help="also write a retest wave here")
    sp.add_argument("--retest-noise", type=float, default=0.5)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("report", help="re-render text tables and the scree plot from a report.json")
    sp.add_argument("--report", required=True)
    sp.add_argument("--scale")
    sp.add_argument("--out", help="output directory (default: beside the report)")
    sp.add_argument("--rounding", type=int, default=4)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except XeqError as exc:
        stage = getattr(exc, "stage", None)
        where = f"{stage}: " if stage else ""
        print(f"xeq: {type(exc).__name__}: {where}{exc}", file=sys.stderr)
        if isinstance(exc, ValidationError):
            return 2
        if isinstance(exc, AnalysisError):
            return 3
        return 1
    except FileNotFoundError as exc:
        print(f"xeq: file not found: {exc.filename}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
