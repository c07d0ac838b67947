"""Internal-consistency and test-retest statistics.

All variances use the unbiased ``N - 1`` denominator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from .errors import (
    ConstantInput,
    DegenerateData,
    LengthMismatch,
    TooFewItems,
    ValidationError,
    ZeroTotalVariance,
)

ITEM_TOTAL_MIN = 0.5
INTER_ITEM_LOW = 0.2
INTER_ITEM_HIGH = 0.8
ALPHA_MIN = 0.7
RHO_STRONG = 0.7
ICC_GOOD = 0.75
ICC_EXCELLENT = 0.90

PAPER_FORMULA = "PaperFormula"
SHROUT_FLEISS_3_1 = "ShroutFleiss3_1"
ICC_VARIANTS = (PAPER_FORMULA, SHROUT_FLEISS_3_1)

REDUNDANT = "Redundant"
POOR_HOMOGENEITY = "PoorHomogeneity"
UNDEFINED = "Undefined"


def _values(matrix) -> np.ndarray:
    return np.asarray(getattr(matrix, "values", matrix), dtype=np.float64)


def pearson(x, y) -> float:
    """Product-moment correlation of two equal-length vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"pearson needs equal-length vectors, got {x.shape} and {y.shape}")
    if x.size < 3:
        raise ValidationError("pearson needs at least 3 observations")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = dx @ dx
    syy = dy @ dy
    if sxx == 0 or syy == 0:
        raise ConstantInput("pearson is undefined for a constant vector")
    r = (dx @ dy) / np.sqrt(sxx * syy)
    return float(np.clip(r, -1.0, 1.0))


def pearson_pvalue(r: float, n: int) -> float:
    """Two-sided p-value of ``r`` from the t-transform with ``n - 2`` df."""
    df = n - 2
    if abs(r) >= 1.0:
        return 0.0
    t = r * np.sqrt(df / (1.0 - r * r))
    return float(2.0 * stats.t.sf(abs(t), df))


def item_total_correlation(matrix, item, corrected: bool = False) -> float:
    """Correlation of one item with the respondents' totals.

    ``item`` is a column index (0-based) for a plain array, or an item id for
    a :class:`~xeqkit.scale.ResponseMatrix`.  By default the total includes
    the item itself; ``corrected=True`` removes it first.
    """
    x = _values(matrix)
    col = matrix.scale.item_index(item) if hasattr(matrix, "scale") else int(item)
    total = x.sum(axis=1)
    if corrected:
        total = total - x[:, col]
    return pearson(x[:, col], total)


def item_total_correlations(matrix, corrected: bool = False) -> np.ndarray:
    x = _values(matrix)
    return np.array([item_total_correlation(x, k, corrected) for k in range(x.shape[1])])


def inter_item_matrix(matrix) -> tuple[np.ndarray, np.ndarray]:
    """Pairwise item correlations with band flags.

    Returns ``(r, flags)`` where ``flags`` is an object array holding
    ``"Redundant"`` (r >= 0.8), ``"PoorHomogeneity"`` (r <= 0.2),
    ``"Undefined"`` (a constant column; r is NaN) or ``None``.  Diagonal
    cells are never flagged.
    """
    x = _values(matrix)
    n, m = x.shape
    if n < 3:
        raise ValidationError("inter-item correlation needs at least 3 respondents")
    d = x - x.mean(axis=0)
    ss = np.einsum("ij,ij->j", d, d)
    r = np.full((m, m), np.nan)
    ok = ss > 0
    cross = d.T @ d
    denom = np.sqrt(np.outer(ss, ss))
    both = np.outer(ok, ok)
    r[both] = cross[both] / denom[both]
    r = np.clip((r + r.T) / 2.0, -1.0, 1.0)
    idx = np.flatnonzero(ok)
    r[idx, idx] = 1.0
    flags = np.full((m, m), None, dtype=object)
    for i in range(m):
        for j in range(m):
            if i != j:
                flags[i, j] = _band_flag(r[i, j])
    return r, flags


def _band_flag(v, low=INTER_ITEM_LOW, high=INTER_ITEM_HIGH):
    if np.isnan(v):
        return UNDEFINED
    if v >= high:
        return REDUNDANT
    if v <= low:
        return POOR_HOMOGENEITY
    return None


def cronbach_alpha(matrix) -> float:
    """Cronbach's alpha, ``M/(M-1) * (1 - sum(item variances) / total variance)``."""
    x = _values(matrix)
    n, m = x.shape
    if m < 2:
        raise TooFewItems("Cronbach's alpha needs at least 2 items")
    if n < 2:
        raise ValidationError("Cronbach's alpha needs at least 2 respondents")
    total_var = x.sum(axis=1).var(ddof=1)
    if total_var == 0:
        raise ZeroTotalVariance("total scores have zero variance")
    return float(m / (m - 1) * (1.0 - x.var(axis=0, ddof=1).sum() / total_var))


@dataclass(frozen=True)
class IccResult:
    value: float
    variant: str
    f_statistic: float
    df1: int
    df2: int
    p_value: float
    ms: float
    ms_error: float
    k: int = 2

    @property
    def band(self) -> str:
        return reliability_band(self.value)


def reliability_band(icc: float) -> str:
    if icc >= ICC_EXCELLENT:
        return "excellent"
    if icc >= ICC_GOOD:
        return "good"
    return "below good"


def _f_pvalue(f: float, df1: int, df2: int) -> float:
    if np.isinf(f):
        return 0.0
    return float(stats.f.sf(f, df1, df2))


def icc_two_way_mixed(test, retest, variant: str = PAPER_FORMULA) -> IccResult:
    """Test-retest ICC for ``k = 2`` sessions of participant scores.

    ``PaperFormula`` uses, with per-participant mean ``m_j`` and grand mean
    ``g``::

        ms   = sum_j (m_j - g)^2 / (N - 1)
        ms_e = sum_j [(r_j - m_j)^2 + (r'_j - m_j)^2] / (N (k - 1))
        ICC  = (ms - ms_e) / (ms + (k - 1) ms_e)

    ``ShroutFleiss3_1`` is the two-way mixed, consistency, single-measure
    coefficient ``(BMS - EMS) / (BMS + (k - 1) EMS)`` from the subjects x
    sessions ANOVA, where the session effect is removed from the error term.

    The p-value is the upper tail of ``ms / ms_e`` under the F distribution
    with the variant's degrees of freedom.
    """
    a = np.asarray(test, dtype=np.float64)
    b = np.asarray(retest, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatch("test and retest scores must be equal-length vectors")
    n = a.size
    if n < 3:
        raise ValidationError("ICC needs at least 3 pairs")
    k = 2
    x = np.column_stack([a, b])
    subj = x.mean(axis=1)
    grand = x.mean()
    if variant == PAPER_FORMULA:
        ms = ((subj - grand) ** 2).sum() / (n - 1)
        ms_e = (((x - subj[:, None]) ** 2).sum()) / (n * (k - 1))
        df1, df2 = n - 1, n * (k - 1)
    elif variant == SHROUT_FLEISS_3_1:
        ss_rows = k * ((subj - grand) ** 2).sum()
        resid = x - subj[:, None] - x.mean(axis=0)[None, :] + grand
        ss_err = (resid**2).sum()
        df1, df2 = n - 1, (n - 1) * (k - 1)
        ms = ss_rows / df1
        ms_e = ss_err / df2
    else:
        raise ValidationError(f"unknown ICC variant {variant!r}; expected one of {ICC_VARIANTS}")
    denom = ms + (k - 1) * ms_e
    if denom == 0:
        raise DegenerateData("ICC is undefined: no variance between or within participants")
    value = (ms - ms_e) / denom
    f = np.inf if ms_e == 0 else ms / ms_e
    return IccResult(float(value), variant, float(f), df1, df2, _f_pvalue(f, df1, df2),
                     float(ms), float(ms_e), k)


@dataclass(frozen=True)
class ReliabilityReport:
    item_ids: tuple[int, ...]
    item_total: np.ndarray
    corrected: bool
    inter_item: np.ndarray
    inter_item_flags: np.ndarray
    alpha: float

    @property
    def item_flags(self) -> list[bool]:
        return [bool(v >= ITEM_TOTAL_MIN) for v in self.item_total]

    def to_dict(self, item_total_min: float = ITEM_TOTAL_MIN,
                inter_item_band: tuple = (INTER_ITEM_LOW, INTER_ITEM_HIGH),
                alpha_min: float = ALPHA_MIN) -> dict:
        low, high = inter_item_band
        m = len(self.item_ids)
        off = [(i, j) for i in range(m) for j in range(i + 1, m)]
        flagged = []
        for i, j in off:
            v = self.inter_item[i, j]
            flag = _band_flag(v, low, high)
            if flag is not None:
                flagged.append({"item_a": self.item_ids[i], "item_b": self.item_ids[j],
                                "r": _num(v), "flag": flag})
        vals = [self.inter_item[i, j] for i, j in off if not np.isnan(self.inter_item[i, j])]
        return {
            "item_total_corrected": self.corrected,
            "items": [
                {"item_id": i, "item_total": float(v), "meets_baseline": bool(v >= item_total_min)}
                for i, v in zip(self.item_ids, self.item_total)
            ],
            "item_total_baseline": item_total_min,
            "inter_item": [[_num(v) for v in row] for row in self.inter_item],
            "inter_item_band": [low, high],
            "inter_item_mean": float(np.mean(vals)) if vals else None,
            "inter_item_flagged": flagged,
            "alpha": self.alpha,
            "alpha_baseline": alpha_min,
            "alpha_meets_baseline": self.alpha >= alpha_min,
        }


def _num(v):
    v = float(v)
    return None if np.isnan(v) else v


def internal_consistency(matrix, corrected: bool = False) -> ReliabilityReport:
    x = _values(matrix)
    ids = matrix.scale.item_ids if hasattr(matrix, "scale") else tuple(range(1, x.shape[1] + 1))
    r, flags = inter_item_matrix(x)
    return ReliabilityReport(
        item_ids=tuple(ids),
        item_total=item_total_correlations(x, corrected),
        corrected=corrected,
        inter_item=r,
        inter_item_flags=flags,
        alpha=cronbach_alpha(x),
    )


@dataclass(frozen=True)
class RetestReport:
    n_pairs: int
    pearson_rho: float
    pearson_p: float
    icc: dict
    unmatched_test: tuple[str, ...] = ()
    unmatched_retest: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "n_pairs": self.n_pairs,
            "k": 2,
            "pearson_rho": self.pearson_rho,
            "pearson_p": self.pearson_p,
            "pearson_p_method": "t-transform, N-2 df, two-sided",
            "pearson_strong": self.pearson_rho > RHO_STRONG,
            "icc": {
                name: {
                    "value": res.value,
                    "p_value": res.p_value,
                    "p_method": f"F({res.df1}, {res.df2}) on ms/ms_e",
                    "f": _num(res.f_statistic) if np.isfinite(res.f_statistic) else None,
                    "ms": res.ms,
                    "ms_error": res.ms_error,
                    "band": res.band,
                }
                for name, res in self.icc.items()
            },
            "unmatched_test": list(self.unmatched_test),
            "unmatched_retest": list(self.unmatched_retest),
        }


def retest_reliability(pairs) -> RetestReport:
    """Pearson rho and both ICC variants on paired participant totals."""
    a, b = pairs.totals()
    rho = pearson(a, b)
    return RetestReport(
        n_pairs=len(pairs),
        pearson_rho=rho,
        pearson_p=pearson_pvalue(rho, a.size),
        icc={v: icc_two_way_mixed(a, b, v) for v in ICC_VARIANTS},
        unmatched_test=tuple(pairs.unmatched_test),
        unmatched_retest=tuple(pairs.unmatched_retest),
    )
