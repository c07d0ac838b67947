"""Content Validity Index from an expert relevance panel.

I-CVIs are kept as exact :class:`~fractions.Fraction` values so that the
universal-agreement count (items with I-CVI equal to one) and threshold
comparisons are never disturbed by floating-point rounding.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyPanel, EmptyScale, MissingColumn, ParseError, ValidationError

RELEVANCE_LABELS = (
    "Not Relevant at All",
    "Somewhat Not Relevant",
    "Neutral",
    "Somewhat Relevant",
    "Extremely Relevant",
)
CLARITY_LABELS = (
    "Not Clear at All",
    "Somewhat Not Clear",
    "Neutral",
    "Somewhat Clear",
    "Extremely Clear",
)
# ratings at or above this code count as relevant (top two levels)
RELEVANT_FROM = 4

CVI_SELECTION_THRESHOLD = 0.75
CONVENTIONAL_I_CVI = 0.78
S_CVI_AVERAGE_TARGET = 0.90
S_CVI_UNIVERSAL_TARGET = 0.80


@dataclass(frozen=True)
class ExpertRatingMatrix:
    """Experts by items matrix of 1-5 ratings."""

    experts: tuple[str, ...]
    values: np.ndarray
    item_ids: tuple[int, ...] = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=np.int64, copy=True)
        if values.ndim != 2 or values.shape[0] == 0:
            raise EmptyPanel("expert panel has no ratings")
        if len(self.experts) != values.shape[0]:
            raise ValidationError(f"{values.shape[0]} rating rows but {len(self.experts)} experts")
        if np.any((values < 1) | (values > 5)):
            raise ValidationError("expert ratings must be codes 1-5")
        item_ids = tuple(self.item_ids) or tuple(range(1, values.shape[1] + 1))
        if len(item_ids) != values.shape[1]:
            raise ValidationError("item_ids length does not match the rating columns")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "experts", tuple(self.experts))
        object.__setattr__(self, "item_ids", item_ids)

    @property
    def n_experts(self) -> int:
        return self.values.shape[0]

    @property
    def n_items(self) -> int:
        return self.values.shape[1]


def _rating_code(cell: str, labels: Sequence[str]) -> int:
    cell = cell.strip()
    if cell.isdigit():
        code = int(cell)
        if 1 <= code <= 5:
            return code
        raise ValueError(f"rating {code} outside 1-5")
    key = " ".join(cell.split()).casefold()
    for k, lab in enumerate(labels, start=1):
        if " ".join(lab.split()).casefold() == key:
            return k
    raise ValueError(f"unknown rating label {cell!r}")


def load_expert_ratings(
    path, n_items: Optional[int] = None, labels: Sequence[str] = RELEVANCE_LABELS,
    item_ids: Sequence[int] = (),
) -> ExpertRatingMatrix:
    """Read ``expert_id,item_1..item_M`` with integer codes or rating labels."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"input file not found: {path}")
    with path.open(newline="", encoding="utf-8-sig") as fh:
        rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if "expert_id" not in header:
        raise MissingColumn(f"{path}: missing column 'expert_id'")
    present = sorted(
        (int(h[5:]) for h in header if h.startswith("item_") and h[5:].isdigit())
    )
    m = n_items if n_items is not None else len(present)
    cols = [f"item_{k}" for k in range(1, m + 1)]
    missing = [c for c in cols if c not in header]
    if missing or m == 0:
        raise MissingColumn(f"{path}: missing column(s) {missing or ['item_1']}")
    experts, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        experts.append(row[header.index("expert_id")].strip())
        rec = []
        for c in cols:
            try:
                rec.append(_rating_code(row[header.index(c)], labels))
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}, column {c}: {exc}") from None
        values.append(rec)
    if not values:
        raise EmptyPanel(f"{path}: no expert rows")
    return ExpertRatingMatrix(tuple(experts), np.asarray(values), tuple(item_ids))


def write_expert_ratings(ratings: ExpertRatingMatrix, path, labels: Sequence[str] = RELEVANCE_LABELS):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["expert_id"] + [f"item_{k}" for k in range(1, ratings.n_items + 1)])
        for expert, row in zip(ratings.experts, ratings.values):
            w.writerow([expert] + [labels[v - 1] for v in row])


def panel_from_counts(counts: Sequence[int], n_experts: int, item_ids: Sequence[int] = ()) -> ExpertRatingMatrix:
    """A panel whose per-item relevant counts equal ``counts``.

    The first ``counts[i]`` experts rate item ``i`` "Extremely Relevant" and
    the remainder "Neutral".  Useful for rebuilding a panel from published
    I-CVIs.
    """
    counts = np.asarray(counts, dtype=np.int64)
    if np.any((counts < 0) | (counts > n_experts)):
        raise ValidationError("counts must lie in [0, n_experts]")
    j = np.arange(n_experts)[:, None]
    values = np.where(j < counts[None, :], 5, 3)
    return ExpertRatingMatrix(tuple(f"E{k + 1}" for k in range(n_experts)), values, tuple(item_ids))


def dichotomize_relevance(ratings: ExpertRatingMatrix) -> np.ndarray:
    """1 where an expert rated the item Somewhat or Extremely Relevant, else 0."""
    return (ratings.values >= RELEVANT_FROM).astype(np.int64)


def item_cvi(column, n_experts: Optional[int] = None) -> Fraction:
    """Proportion of experts rating the item relevant, as an exact fraction."""
    column = np.asarray(column)
    n = column.size if n_experts is None else int(n_experts)
    if n == 0:
        raise EmptyPanel("I-CVI needs at least one expert")
    if column.size != n:
        raise ValidationError(f"column has {column.size} ratings, expected {n}")
    return Fraction(int(column.sum()), n)


def scale_cvi_average(i_cvi: Sequence) -> Fraction | float:
    """Mean I-CVI.  Exact when every input is a Fraction or int."""
    if len(i_cvi) == 0:
        raise EmptyScale("S-CVI needs at least one item")
    if all(isinstance(v, (Fraction, int)) for v in i_cvi):
        return sum(i_cvi, Fraction(0)) / len(i_cvi)
    return float(np.mean(np.asarray(i_cvi, dtype=float)))


def scale_cvi_universal(i_cvi: Sequence) -> Fraction:
    """Share of items every expert rated relevant."""
    if len(i_cvi) == 0:
        raise EmptyScale("S-CVI needs at least one item")
    return Fraction(sum(1 for v in i_cvi if v == 1), len(i_cvi))


def select_items(i_cvi: Sequence, threshold: float = CVI_SELECTION_THRESHOLD,
                 item_ids: Optional[Sequence[int]] = None) -> list[int]:
    """Ids of items whose I-CVI is strictly above ``threshold``, in input order.

    Items at exactly the threshold are dropped.  ``item_ids`` defaults to
    1-based positions.
    """
    if not 0 <= threshold < 1:
        raise ValidationError("threshold must be in [0, 1)")
    ids = list(item_ids) if item_ids is not None else list(range(1, len(i_cvi) + 1))
    if len(ids) != len(i_cvi):
        raise ValidationError("item_ids and i_cvi differ in length")
    # Fraction vs float comparison is exact
    return [i for i, v in zip(ids, i_cvi) if Fraction(v) > Fraction(threshold)]


@dataclass(frozen=True)
class CviReport:
    item_ids: tuple[int, ...]
    i_cvi: tuple[Fraction, ...]
    threshold: float
    retained_item_ids: tuple[int, ...]
    s_cvi_a: Fraction
    s_cvi_b: Fraction
    s_cvi_a_all: Fraction
    s_cvi_b_all: Fraction
    n_experts: int
    clarity_means: Optional[tuple[float, ...]] = None

    @property
    def low_items(self) -> tuple[int, ...]:
        return tuple(i for i, v in zip(self.item_ids, self.i_cvi) if Fraction(v) <= Fraction(self.threshold))

    def to_dict(self) -> dict:
        items = []
        for k, (i, v) in enumerate(zip(self.item_ids, self.i_cvi)):
            rec = {
                "item_id": i,
                "relevant": v.numerator * (self.n_experts // v.denominator),
                "n_experts": self.n_experts,
                "i_cvi": float(v),
                "low": Fraction(v) <= Fraction(self.threshold),
                "below_conventional": float(v) < CONVENTIONAL_I_CVI,
            }
            if self.clarity_means is not None:
                rec["clarity_mean"] = self.clarity_means[k]
            items.append(rec)
        return {
            "n_experts": self.n_experts,
            "threshold": self.threshold,
            "items": items,
            "retained_item_ids": list(self.retained_item_ids),
            "s_cvi_a": float(self.s_cvi_a),
            "s_cvi_b": float(self.s_cvi_b),
            "s_cvi_a_fraction": f"{self.s_cvi_a.numerator}/{self.s_cvi_a.denominator}",
            "s_cvi_b_fraction": f"{self.s_cvi_b.numerator}/{self.s_cvi_b.denominator}",
            "s_cvi_a_meets_target": float(self.s_cvi_a) >= S_CVI_AVERAGE_TARGET,
            "s_cvi_b_meets_target": float(self.s_cvi_b) >= S_CVI_UNIVERSAL_TARGET,
            "s_cvi_a_all_items": float(self.s_cvi_a_all),
            "s_cvi_b_all_items": float(self.s_cvi_b_all),
        }


def content_validity(
    ratings: ExpertRatingMatrix,
    threshold: float = CVI_SELECTION_THRESHOLD,
    clarity: Optional[ExpertRatingMatrix] = None,
) -> CviReport:
    """Full CVI pass: I-CVIs, item selection, and S-CVIs of the retained items.

    S-CVIs over the unfiltered item pool are reported as well.  ``clarity``
    ratings, if given, contribute only per-item descriptive means.
    """
    binary = dichotomize_relevance(ratings)
    icvi = tuple(item_cvi(binary[:, k]) for k in range(ratings.n_items))
    retained = select_items(icvi, threshold, ratings.item_ids)
    kept = [v for i, v in zip(ratings.item_ids, icvi) if i in set(retained)]
    if kept:
        s_a, s_b = scale_cvi_average(kept), scale_cvi_universal(kept)
    else:
        s_a = s_b = Fraction(0)
    clarity_means = None
    if clarity is not None:
        if clarity.n_items != ratings.n_items:
            raise ValidationError("clarity ratings cover a different number of items")
        clarity_means = tuple(float(x) for x in clarity.values.mean(axis=0))
    return CviReport(
        item_ids=ratings.item_ids,
        i_cvi=icvi,
        threshold=threshold,
        retained_item_ids=tuple(retained),
        s_cvi_a=s_a,
        s_cvi_b=s_b,
        s_cvi_a_all=scale_cvi_average(icvi),
        s_cvi_b_all=scale_cvi_universal(icvi),
        n_experts=ratings.n_experts,
        clarity_means=clarity_means,
    )
