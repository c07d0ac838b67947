"""Regenerate the committed test fixtures in tests/fixtures/.

    python3 scripts/make_fixtures.py [--out tests/fixtures]

Writes
  responses.csv       two groups of simulated XEQ respondents, three domains,
                      plus three rows that fail the attention checks
  retest.csv          a retest wave for the attentive respondents
  expert_ratings.csv  a 13-expert panel matching the published relevance counts
  benchmark.json      a 20-system benchmark with a tie and extreme entries
  scoring_small.csv   two respondents, for scoring-only runs
"""

from __future__ import annotations

import argparse
from dataclasses import replace
from pathlib import Path

import numpy as np

from xeqkit.content_validity import panel_from_counts, write_expert_ratings
from xeqkit.ingest import write_responses
from xeqkit.scale import ResponseMatrix, RespondentMeta, xeq_published_results, xeq_scale
from xeqkit.scoring import BenchmarkStore, benchmark_add, benchmark_save
from xeqkit.simulation import GeneratorSpec, generate_retest, generate_two_group

SEED = 20240611
FIXED_TIME = "2024-01-01T00:00:00+00:00"

# 20 benchmark systems.  Learning totals run 1..20 except that two systems
# share the value 10; the other dimensions are affine in the same ranks.
BENCHMARK_LEARNING = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 10, 12, 13, 14, 15, 16, 17, 18, 19, 20]


def benchmark_fixture(scale) -> BenchmarkStore:
    store = BenchmarkStore.empty(scale)
    for k, v in enumerate(BENCHMARK_LEARNING):
        totals = {"Learning": float(v), "Utility": 2.0 * v, "Fulfilment": v + 100.0, "Engagement": 0.5 * v}
        store = benchmark_add(store, f"sys{k + 1:02d}", totals, timestamp=FIXED_TIME)
    return store


def responses_fixture(scale) -> ResponseMatrix:
    spec = GeneratorSpec.for_scale(scale, loading=0.7, factor_correlation=0.5, seed=SEED)
    m = generate_two_group(spec, delta=0.8, n_per_group=60, scale=scale)
    metas = [replace(r, domain=f"D{k % 3 + 1}") for k, r in enumerate(m.respondents)]
    values = [list(row) for row in m.values]
    # attention-check failures: two fast respondents and one straight-liner
    metas += [
        RespondentMeta("fast01", "Positive", 120.0, 600.0, "D1"),
        RespondentMeta("fast02", "Negative", 200.0, 600.0, "D2"),
        RespondentMeta("flat01", "Positive", 600.0, 600.0, "D3"),
    ]
    values += [values[0], values[-1], [3] * scale.n_items]
    return ResponseMatrix(scale, tuple(metas), np.asarray(values))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "tests" / "fixtures"))
    args = ap.parse_args(argv)
    out = Path(args.out)
    scale = xeq_scale()

    responses = responses_fixture(scale)
    write_responses(responses, out / "responses.csv")
    attentive = responses.subset(range(120))
    write_responses(generate_retest(attentive, 0.3, SEED + 1), out / "retest.csv")

    published = xeq_published_results()
    counts = [it["relevant_count"] for it in published["items"]]
    write_expert_ratings(panel_from_counts(counts, published["n_experts"]), out / "expert_ratings.csv")

    benchmark_save(benchmark_fixture(scale), out / "benchmark.json")

    small = ResponseMatrix(
        scale,
        (RespondentMeta("a", None, 600.0, 600.0), RespondentMeta("b", None, 600.0, 600.0)),
        np.array([[5, 4] * 9, [2, 3] * 9]),
    )
    write_responses(small, out / "scoring_small.csv")
    print(f"fixtures written to {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
