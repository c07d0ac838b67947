"""Brute-force reference implementations used as test oracles.

Everything here is written from the textbook definitions with plain Python
loops.  Sums of squares and cross-products are accumulated in exact rational
arithmetic (``Fraction``) so that only the final square root or division is
rounded; the oracles never call into :mod:`xeqkit`.
"""

from __future__ import annotations

import math
from fractions import Fraction

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def _fr(values):
    return [Fraction(v) for v in values]


def mean(values):
    v = _fr(values)
    return sum(v) / len(v)


def centred_cross(x, y):
    mx, my = mean(x), mean(y)
    return sum((Fraction(a) - mx) * (Fraction(b) - my) for a, b in zip(x, y))


def _raw_cross(x, y):
    """``n * sum(xy) - sum(x) sum(y)``, which is n times the centred cross-product."""
    x = [int(v) for v in x]
    y = [int(v) for v in y]
    return len(x) * sum(a * b for a, b in zip(x, y)) - sum(x) * sum(y)


def pearson(x, y) -> float:
    """Exact for integer data: every sum is a Python int, only the final
    square root and division round."""
    if all(float(v).is_integer() for v in (*x, *y)):
        sxy, sxx, syy = _raw_cross(x, y), _raw_cross(x, x), _raw_cross(y, y)
    else:
        sxy, sxx, syy = centred_cross(x, y), centred_cross(x, x), centred_cross(y, y)
    return float(sxy) / math.sqrt(float(sxx * syy))


def sample_variance(x) -> Fraction:
    return centred_cross(x, x) / (len(x) - 1)


def columns(rows):
    return [list(col) for col in zip(*rows)]


def row_totals(rows):
    return [sum(int(v) for v in r) for r in rows]


def item_total(rows, j, corrected=False) -> float:
    totals = row_totals(rows)
    col = [int(r[j]) for r in rows]
    if corrected:
        totals = [t - c for t, c in zip(totals, col)]
    return pearson(col, totals)


def inter_item(rows):
    cols = columns(rows)
    m = len(cols)
    return [[1.0 if i == j else pearson(cols[i], cols[j]) for j in range(m)] for i in range(m)]


def cronbach_alpha(rows) -> float:
    cols = columns(rows)
    m = len(cols)
    item_var = sum(sample_variance(c) for c in cols)
    total_var = sample_variance(row_totals(rows))
    return float(Fraction(m, m - 1) * (1 - item_var / total_var))


def icc_ms_ratio(test, retest) -> float:
    """Per-participant mean m_j, grand mean g; ms over N - 1, ms_e over N(k - 1)."""
    n, k = len(test), 2
    pairs = [(Fraction(a), Fraction(b)) for a, b in zip(test, retest)]
    m = [(a + b) / 2 for a, b in pairs]
    g = sum(m) / n
    ms = sum((mj - g) ** 2 for mj in m) / (n - 1)
    ms_e = sum((a - mj) ** 2 + (b - mj) ** 2 for (a, b), mj in zip(pairs, m)) / (n * (k - 1))
    return float((ms - ms_e) / (ms + (k - 1) * ms_e))


def icc_shrout_fleiss_3_1(test, retest) -> float:
    """Two-way ANOVA: SS_error = SS_total - SS_subjects - SS_sessions."""
    n, k = len(test), 2
    cells = [[Fraction(a), Fraction(b)] for a, b in zip(test, retest)]
    g = sum(sum(r) for r in cells) / (n * k)
    ss_total = sum((v - g) ** 2 for r in cells for v in r)
    ss_rows = k * sum((sum(r) / k - g) ** 2 for r in cells)
    col_means = [sum(r[c] for r in cells) / n for c in range(k)]
    ss_cols = n * sum((cm - g) ** 2 for cm in col_means)
    bms = ss_rows / (n - 1)
    ems = (ss_total - ss_rows - ss_cols) / ((n - 1) * (k - 1))
    return float((bms - ems) / (bms + (k - 1) * ems))


def splitmix_mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def splitmix_key(seed: int, *path: int) -> int:
    key = splitmix_mix((seed + GOLDEN) & MASK64)
    for p in path:
        key = splitmix_mix(key ^ splitmix_mix((p + GOLDEN) & MASK64))
    return key


def splitmix_words(key: int, count: int) -> list[int]:
    """The reference SplitMix64 generator: state += G, output mix(state)."""
    out, state = [], key
    for _ in range(count):
        state = (state + GOLDEN) & MASK64
        out.append(splitmix_mix(state))
    return out


def subset_mean(rows, cols) -> float:
    vals = [Fraction(int(r[c])) for r in rows for c in cols]
    return float(sum(vals) / len(vals))


def percentile_by_counting(value, reference) -> float:
    below = sum(1 for r in reference if r < value)
    ties = sum(1 for r in reference if r == value)
    return 100.0 * (below + 0.5 * ties) / len(reference)
