"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they
are also collected into an "acceptance criteria" section of the pytest
summary.
"""

from __future__ import annotations

import time
from fractions import Fraction

import numpy as np
import pytest

import oracles
from xeqkit import rng
from xeqkit.cli import main as cli_main
from xeqkit.construct import (
    CfaModel,
    cfa_fit,
    correlation_matrix,
    discrepancy_and_gradient,
    efa_eigenvalues,
    one_factor_loadings,
)
from xeqkit.content_validity import item_cvi, scale_cvi_average, scale_cvi_universal
from xeqkit.discriminant import (
    TrialConfig,
    cohens_d,
    group_comparison,
    run_discriminant_trials,
)
from xeqkit.ingest import pair_retest
from xeqkit.reliability import (
    PAPER_FORMULA,
    SHROUT_FLEISS_3_1,
    cronbach_alpha,
    icc_two_way_mixed,
    inter_item_matrix,
    item_total_correlation,
    pearson,
    retest_reliability,
)
from xeqkit.scale import ResponseMatrix, xeq_published_results
from xeqkit.scoring import (
    BenchmarkCategory,
    benchmark_load,
    classify_system,
    factor_scores,
    system_score,
)
from xeqkit.simulation import (
    GeneratorSpec,
    generate_factor_data,
    generate_retest,
    generate_two_group,
)


def _rel(a, b):
    """Relative error against the oracle value ``b``; absolute when ``b`` is exactly 0."""
    return abs(a - b) / abs(b) if b != 0 else abs(a)


# -- 1 -----------------------------------------------------------------------


def test_criterion_1_cvi_fixture(criterion):
    start = time.perf_counter()
    pub = xeq_published_results()
    n = pub["n_experts"]
    icvi = [Fraction(it["relevant_count"], n) for it in pub["items"]]
    s_a = scale_cvi_average(icvi)
    s_b = scale_cvi_universal(icvi)
    per_count = [round(float(item_cvi([1] * c + [0] * (n - c))), 4) for c in (10, 11, 12, 13)]
    elapsed = time.perf_counter() - start
    ok = (
        round(float(s_a), 4) == 0.8846
        and round(float(s_b), 4) == 0.2222
        and per_count == [0.7692, 0.8462, 0.9231, 1.0000]
        and elapsed < 1.0
    )
    criterion(1, ok, f"S-CVI(a)={float(s_a):.4f} S-CVI(b)={float(s_b):.4f} "
                     f"I-CVI{{10..13}}/13={per_count} in {elapsed:.3f}s (<1s)")


# -- 2 -----------------------------------------------------------------------


def _random_dataset(gen):
    while True:
        n = int(gen.integers(5, 201))
        m = int(gen.integers(2, 26))
        x = gen.integers(1, 6, size=(n, m))
        if np.all(x.std(axis=0) > 0):
            return x


def test_criterion_2_definitional_oracles(criterion):
    start = time.perf_counter()
    gen = np.random.default_rng(2024)
    worst = {k: 0.0 for k in ("pearson", "item_total", "inter_item", "alpha", "icc_ms_ratio", "icc_sf")}
    for _ in range(100):
        x = _random_dataset(gen)
        rows = x.tolist()
        n, m = x.shape
        worst["pearson"] = max(worst["pearson"], _rel(pearson(x[:, 0], x[:, 1]),
                                                      oracles.pearson(x[:, 0].tolist(), x[:, 1].tolist())))
        for j in range(m):
            for corrected in (False, True):
                got = item_total_correlation(x, j, corrected)
                worst["item_total"] = max(worst["item_total"], _rel(got, oracles.item_total(rows, j, corrected)))
        r, _ = inter_item_matrix(x)
        ref = oracles.inter_item(rows)
        worst["inter_item"] = max(worst["inter_item"],
                                  max(_rel(r[i, j], ref[i][j]) for i in range(m) for j in range(m)))
        if x.sum(axis=1).std() > 0:
            worst["alpha"] = max(worst["alpha"], _rel(cronbach_alpha(x), oracles.cronbach_alpha(rows)))
        # paired totals: the item sum and a perturbed copy of it
        test = x.sum(axis=1)
        retest = test + gen.integers(-3, 4, size=n)
        worst["icc_ms_ratio"] = max(worst["icc_ms_ratio"], _rel(icc_two_way_mixed(test, retest, PAPER_FORMULA).value,
                                                          oracles.icc_ms_ratio(test.tolist(), retest.tolist())))
        worst["icc_sf"] = max(worst["icc_sf"], _rel(icc_two_way_mixed(test, retest, SHROUT_FLEISS_3_1).value,
                                                    oracles.icc_shrout_fleiss_3_1(test.tolist(), retest.tolist())))
    elapsed = time.perf_counter() - start
    ok = max(worst.values()) <= 1e-10 and elapsed < 30
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    criterion(2, ok, f"max relative error over 100 datasets: {detail} (<=1e-10) in {elapsed:.1f}s (<30s)")


# -- 3 -----------------------------------------------------------------------


def _population_cov(lam, phi):
    common = lam @ phi @ lam.T
    return common + np.diag(1.0 - np.diag(common))


def test_criterion_3_cfa_recovery(criterion):
    start = time.perf_counter()
    # one factor
    lam1 = np.array([0.8, 0.7, 0.6, 0.5, 0.75, 0.65])
    s1 = _population_cov(lam1[:, None], np.eye(1))
    fit1 = one_factor_loadings(s1)
    err1 = np.abs(fit1.loading_vector() - lam1).max()

    # four correlated factors on the XEQ item layout
    from xeqkit.scale import xeq_scale

    scale = xeq_scale()
    model = CfaModel.from_scale(scale)
    dims = list(model.factors)
    load = np.linspace(0.55, 0.85, scale.n_items)
    lam4 = np.zeros((scale.n_items, 4))
    for i, it in enumerate(scale.items):
        lam4[i, dims.index(it.dimension)] = load[i]
    phi4 = np.array([[1.0, 0.5, 0.4, 0.3],
                     [0.5, 1.0, 0.45, 0.35],
                     [0.4, 0.45, 1.0, 0.25],
                     [0.3, 0.35, 0.25, 1.0]])
    s4 = _population_cov(lam4, phi4)
    fit4 = cfa_fit(s4, model)
    err4 = max(np.abs(fit4.loading_vector() - load).max(), np.abs(fit4.factor_correlations - phi4).max())

    # analytic gradient against central differences at 20 random points
    gen = np.random.default_rng(33)
    sample = s4 + 0.05 * np.diag(gen.uniform(0.5, 1.5, scale.n_items))
    worst_grad = 0.0
    n_par = model.n_parameters
    for _ in range(20):
        theta = np.concatenate([
            gen.uniform(0.3, 0.9, scale.n_items),
            np.log(gen.uniform(0.3, 0.8, scale.n_items)),
            gen.uniform(-0.3, 0.3, n_par - 2 * scale.n_items),
        ])
        _, g = discrepancy_and_gradient(sample, model, theta)
        fd = np.empty(n_par)
        h = 1e-6
        for p in range(n_par):
            e = np.zeros(n_par)
            e[p] = h
            fd[p] = (discrepancy_and_gradient(sample, model, theta + e)[0]
                     - discrepancy_and_gradient(sample, model, theta - e)[0]) / (2 * h)
        worst_grad = max(worst_grad, np.linalg.norm(g - fd) / np.linalg.norm(g))
    elapsed = time.perf_counter() - start
    ok = (err1 < 1e-3 and err4 < 1e-3 and fit1.discrepancy < 1e-6 and fit4.discrepancy < 1e-6
          and worst_grad < 1e-6 and elapsed < 60)
    criterion(3, ok, f"loading error 1F {err1:.1e}, 4F {err4:.1e} (<1e-3); discrepancy "
                     f"{fit1.discrepancy:.1e}/{fit4.discrepancy:.1e} (<1e-6); gradient rel. error "
                     f"{worst_grad:.1e} (<1e-6) in {elapsed:.1f}s (<60s)")


# -- 4 -----------------------------------------------------------------------


def test_criterion_4_efa_property(criterion, scale):
    one = generate_factor_data(GeneratorSpec.one_factor(18, 0.8, n=5000, seed=4), scale)
    efa1 = efa_eigenvalues(correlation_matrix(one))
    four = generate_factor_data(GeneratorSpec.for_scale(scale, 0.8, 0.0, n=5000, seed=5), scale)
    efa4 = efa_eigenvalues(correlation_matrix(four))
    sum_err = max(abs(efa1.eigenvalues.sum() - 18), abs(efa4.eigenvalues.sum() - 18))
    share = efa1.variance_proportion[0]
    ok = efa1.suggested_factors == 1 and share > 0.5 and efa4.suggested_factors == 4 and sum_err <= 1e-8
    criterion(4, ok, f"one-factor Kaiser={efa1.suggested_factors} first share={share:.3f} (>0.5); "
                     f"orthogonal four-factor Kaiser={efa4.suggested_factors}; |sum - M|={sum_err:.1e} (<=1e-8)")


# -- 5 -----------------------------------------------------------------------


def test_criterion_5_discriminant_suite(criterion, scale):
    start = time.perf_counter()
    spec = GeneratorSpec.for_scale(scale, 0.7, 0.5, seed=55)
    data = generate_two_group(spec, delta=3.0, n_per_group=100, scale=scale)
    cfg = TrialConfig(n_trials=100, train_fraction=0.7, seed=12345)
    rep = run_discriminant_trials(data, config=cfg)
    labels = np.asarray(data.groups)
    permuted = labels[rng.permutation(rng.derive_key(99), labels.size)]
    null = run_discriminant_trials(data.values, permuted, cfg)
    again = run_discriminant_trials(data, config=cfg, n_jobs=4)
    identical = again == rep and again.to_dict() == rep.to_dict()
    elapsed = time.perf_counter() - start
    ok = rep.accuracy_mean >= 0.95 and abs(null.accuracy_mean - 0.5) <= 0.1 and identical and elapsed < 60
    criterion(5, ok, f"separable accuracy {rep.accuracy_mean:.4f} (>=0.95); permuted {null.accuracy_mean:.4f} "
                     f"(0.5+/-0.1); rerun bit-identical={identical} in {elapsed:.1f}s (<60s)")


# -- 6 -----------------------------------------------------------------------


def test_criterion_6_group_comparison(criterion):
    z = rng.normals(rng.derive_key(6, 0), 4000)
    a, b = z[:2000] + 1.0, z[2000:]
    d, _ = cohens_d(a, b)

    gen = np.random.default_rng(66)
    worst = 0.0
    for _ in range(50):
        na, nb = gen.integers(2, 40, size=2)
        x = np.concatenate([gen.normal(0, gen.uniform(0.1, 5), na), gen.normal(gen.normal(), 1, nb)])
        g = ["A"] * na + ["B"] * nb
        rep = group_comparison(x, g)
        f, t = rep.anova["f"], rep.student_t["t"]
        worst = max(worst, abs(f - t * t) / max(f, 1.0))

    same = np.arange(20, dtype=float) % 7
    ident = group_comparison(np.concatenate([same, same]), ["A"] * 20 + ["B"] * 20)
    ok = (abs(d - 1.0) <= 0.1 and worst <= 1e-8 and ident.cohens_d == 0.0
          and ident.student_t["p"] == pytest.approx(1.0) and ident.anova["p"] == pytest.approx(1.0))
    criterion(6, ok, f"Cohen's d={d:.4f} (1+/-0.1); max |F - t^2| rel {worst:.1e} (<=1e-8); identical groups "
                     f"d={ident.cohens_d} p={ident.student_t['p']:.6f}")


# -- 7 -----------------------------------------------------------------------


def test_criterion_7_test_retest(criterion, scale):
    base = generate_factor_data(GeneratorSpec.for_scale(scale, 0.7, 0.5, n=80, seed=7), scale)
    rep = retest_reliability(pair_retest(base, generate_retest(base, 0.0, seed=8)))
    icc = {k: v.value for k, v in rep.icc.items()}
    shift_ms_ratio = icc_two_way_mixed([1, 3, 5], [2, 4, 6], PAPER_FORMULA).value
    shift_sf = icc_two_way_mixed([1, 3, 5], [2, 4, 6], SHROUT_FLEISS_3_1).value
    ok = (rep.pearson_rho == 1.0 and all(v == pytest.approx(1.0, abs=1e-12) for v in icc.values())
          and shift_ms_ratio == pytest.approx(7 / 9, abs=1e-12) and shift_sf == pytest.approx(1.0, abs=1e-12))
    criterion(7, ok, f"zero-noise rho={rep.pearson_rho} ICC={icc}; constant shift "
                     f"PaperFormula={shift_ms_ratio:.6f} (7/9) ShroutFleiss3_1={shift_sf:.6f} (1)")


# -- 8 -----------------------------------------------------------------------

# (candidate Learning total, exclude, expected percentile, expected category)
BENCHMARK_CASES = [
    (10.0, None, 50.0, BenchmarkCategory.ABOVE_AVERAGE),   # ties with two systems
    (10.0, "sys10", 50.0, BenchmarkCategory.ABOVE_AVERAGE),
    (0.0, None, 0.0, BenchmarkCategory.BAD),
    (5.0, None, 22.5, BenchmarkCategory.BAD),
    (5.5, None, 25.0, BenchmarkCategory.BELOW_AVERAGE),
    (9.5, None, 45.0, BenchmarkCategory.BELOW_AVERAGE),
    (15.5, None, 75.0, BenchmarkCategory.GOOD),
    (18.5, None, 90.0, BenchmarkCategory.EXCELLENT),
    (20.0, None, 97.5, BenchmarkCategory.EXCELLENT),
    (21.0, None, 100.0, BenchmarkCategory.EXCELLENT),
]


def _candidate(learning):
    return {"Learning": learning, "Utility": 2 * learning, "Fulfilment": learning + 100, "Engagement": learning / 2}


def test_criterion_8_scoring_benchmark(criterion, scale, fixtures_dir):
    gen = np.random.default_rng(8)
    worst = 0.0
    cols = scale.dimension_indices()
    for _ in range(50):
        x = gen.integers(1, 6, size=(int(gen.integers(1, 60)), scale.n_items))
        m = ResponseMatrix.from_codes(scale, x)
        fs = factor_scores(m)
        rows = x.tolist()
        for d, c in cols.items():
            worst = max(worst, abs(fs[d] - oracles.subset_mean(rows, c)))
        w = gen.dirichlet(np.ones(4))
        ref_sys = sum(wi * oracles.subset_mean(rows, c) for wi, c in zip(w, cols.values()))
        worst = max(worst, abs(system_score(fs, w) - ref_sys))

    store = benchmark_load(fixtures_dir / "benchmark.json", scale)
    mapping_ok = True
    for value, exclude, pct, cat in BENCHMARK_CASES:
        c = classify_system(store, _candidate(value), exclude=exclude)
        mapping_ok &= all(c.percentiles[d] == pct and c.categories[d] == cat for d in store.dimensions)

    order = list(BenchmarkCategory)[::-1]  # Bad .. Excellent
    grid = sorted({v + s for e in store.entries for v in e.totals.values() for s in (-0.5, 0.0, 0.5)})
    monotone = True
    for entry in store.entries:
        base = dict(entry.totals)
        base_cls = classify_system(store, base, exclude=entry.system_id)
        for d in store.dimensions:
            prev_p, prev_c = -1.0, -1
            for v in grid:
                cand = dict(base, **{d: v})
                cl = classify_system(store, cand, exclude=entry.system_id)
                p, rank = cl.percentiles[d], order.index(cl.categories[d])
                monotone &= p >= prev_p and rank >= prev_c
                monotone &= all(cl.percentiles[o] == base_cls.percentiles[o] for o in store.dimensions if o != d)
                prev_p, prev_c = p, rank
    ok = worst <= 1e-12 and mapping_ok and monotone
    criterion(8, ok, f"score oracle max error {worst:.1e} (<=1e-12); {len(BENCHMARK_CASES)} band cases "
                     f"match={mapping_ok}; single-dimension monotonicity={monotone}")


# -- 9 -----------------------------------------------------------------------


def test_criterion_9_pipeline_determinism(criterion, fixtures_dir, tmp_path, capsys):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        code = cli_main([
            "analyze",
            "--responses", str(fixtures_dir / "responses.csv"),
            "--expert-ratings", str(fixtures_dir / "expert_ratings.csv"),
            "--retest", str(fixtures_dir / "retest.csv"),
            "--benchmark", str(fixtures_dir / "benchmark.json"),
            "--seed", "2024",
            "--out", str(out),
        ])
        assert code == 0
        outs.append((out / "report.json").read_bytes())
    capsys.readouterr()
    ok = outs[0] == outs[1] and len(outs[0]) > 0
    criterion(9, ok, f"two analyze runs on committed fixtures byte-identical={outs[0] == outs[1]} "
                     f"({len(outs[0])} bytes)")
