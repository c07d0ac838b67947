"""XEQ scores and percentile benchmarking against stored systems.

Benchmark file format (JSON)::

    {
      "format": 1,
      "version": <revision, incremented on every mutation>,
      "scale_id": "XEQ",
      "scale_version": "1.0",
      "entries": [
        {"system_id": "...", "totals": {"Learning": ..., ...}, "timestamp": "..."}
      ]
    }

``totals`` are the mean participant totals per dimension, i.e. the average
over respondents of the sum of that dimension's item codes.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import (
    BadWeights,
    DimensionMismatch,
    DuplicateSystem,
    EmptyBenchmark,
    EmptyDimension,
    MissingValue,
    ParseError,
    ValidationError,
    VersionMismatch,
)

BENCHMARK_FORMAT = 1


def _values(matrix) -> np.ndarray:
    return np.asarray(getattr(matrix, "values", matrix), dtype=np.float64)


def stakeholder_score(row) -> float:
    """Mean of one respondent's item codes."""
    row = np.asarray(row, dtype=np.float64)
    if row.size == 0 or np.isnan(row).any():
        raise MissingValue("stakeholder score needs a complete response row")
    return float(row.mean())


def stakeholder_scores(matrix) -> np.ndarray:
    return _values(matrix).mean(axis=1)


def _dimension_columns(scale) -> dict[str, list[int]]:
    cols = scale.dimension_indices()
    empty = [d for d, c in cols.items() if not c]
    if empty:
        raise EmptyDimension(f"dimension(s) {empty} have no items")
    return cols


def factor_scores(matrix, scale=None) -> dict[str, float]:
    """Mean of all responses to each dimension's items, in scale dimension order."""
    scale = scale if scale is not None else matrix.scale
    x = _values(matrix)
    return {d: float(x[:, c].mean()) for d, c in _dimension_columns(scale).items()}


def dimension_totals(matrix, scale=None) -> dict[str, float]:
    """Mean participant total per dimension (the benchmark quantity)."""
    scale = scale if scale is not None else matrix.scale
    x = _values(matrix)
    return {d: float(x[:, c].sum(axis=1).mean()) for d, c in _dimension_columns(scale).items()}


def _check_weights(weights, dims: Sequence[str]) -> np.ndarray:
    if weights is None:
        return np.full(len(dims), 1.0 / len(dims))
    if isinstance(weights, Mapping):
        unknown = set(weights) - set(dims)
        if unknown:
            raise BadWeights(f"weights for unknown dimension(s) {sorted(unknown)}")
        w = np.array([float(weights.get(d, 0.0)) for d in dims])
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (len(dims),):
            raise BadWeights(f"expected {len(dims)} weights, got {w.shape}")
    if np.any(~np.isfinite(w)) or np.any(w < 0):
        raise BadWeights("weights must be finite and non-negative")
    if abs(w.sum() - 1.0) > 1e-9:
        raise BadWeights(f"weights must sum to 1, got {w.sum():.12g}")
    return w


def system_score(factor_scores: Mapping[str, float] | Sequence[float], weights=None) -> float:
    """Weighted mean of factor scores; uniform weights by default."""
    if isinstance(factor_scores, Mapping):
        dims = list(factor_scores)
        vals = np.array([factor_scores[d] for d in dims], dtype=np.float64)
    else:
        vals = np.asarray(factor_scores, dtype=np.float64)
        dims = [str(k) for k in range(vals.size)]
        if isinstance(weights, Mapping):
            raise BadWeights("named weights need named factor scores")
    if vals.size == 0:
        raise EmptyDimension("no factor scores")
    w = _check_weights(weights, dims)
    return float(w @ vals)


def deficiency_ranking(factor_scores: Mapping[str, float]) -> list[str]:
    """Dimensions from lowest to highest score; ties keep scale order."""
    return [d for d, _ in sorted(factor_scores.items(), key=lambda kv: kv[1])]


@dataclass(frozen=True)
class XeqScores:
    stakeholder_scores: dict
    factor_scores: dict
    system_score: float
    weights: dict

    def to_dict(self) -> dict:
        return {
            "stakeholder_scores": self.stakeholder_scores,
            "factor_scores": self.factor_scores,
            "system_score": self.system_score,
            "weights": self.weights,
            "deficiency_ranking": deficiency_ranking(self.factor_scores),
        }


def xeq_scores(matrix, weights=None) -> XeqScores:
    fs = factor_scores(matrix)
    w = _check_weights(weights, list(fs))
    return XeqScores(
        stakeholder_scores={rid: float(s) for rid, s in zip(matrix.respondent_ids, stakeholder_scores(matrix))},
        factor_scores=fs,
        system_score=system_score(fs, w),
        weights={d: float(v) for d, v in zip(fs, w)},
    )


# -- benchmark ---------------------------------------------------------------


class BenchmarkCategory(str, Enum):
    EXCELLENT = "Excellent"
    GOOD = "Good"
    ABOVE_AVERAGE = "AboveAverage"
    BELOW_AVERAGE = "BelowAverage"
    BAD = "Bad"

    def __str__(self):
        return self.value


def mean_rank_percentile(value: float, reference: Sequence[float]) -> float:
    """``100 * (count below + 0.5 * count equal) / n``."""
    ref = np.asarray(reference, dtype=np.float64)
    if ref.size == 0:
        raise EmptyBenchmark("no reference values")
    below = np.sum(ref < value)
    equal = np.sum(ref == value)
    return float(100.0 * (below + 0.5 * equal) / ref.size)


def category_for_percentile(pct: float) -> BenchmarkCategory:
    """Bands: >=90 Excellent, [75,90) Good, [50,75) AboveAverage,
    [25,50) BelowAverage, <25 Bad."""
    if pct >= 90:
        return BenchmarkCategory.EXCELLENT
    if pct >= 75:
        return BenchmarkCategory.GOOD
    if pct >= 50:
        return BenchmarkCategory.ABOVE_AVERAGE
    if pct >= 25:
        return BenchmarkCategory.BELOW_AVERAGE
    return BenchmarkCategory.BAD


@dataclass(frozen=True)
class BenchmarkEntry:
    system_id: str
    totals: dict
    timestamp: str

    def to_dict(self) -> dict:
        return {"system_id": self.system_id, "totals": dict(self.totals), "timestamp": self.timestamp}


@dataclass(frozen=True)
class BenchmarkStore:
    """An immutable snapshot; mutations return a new store."""

    scale_id: str
    scale_version: str
    dimensions: tuple[str, ...]
    entries: tuple[BenchmarkEntry, ...] = ()
    version: int = 0

    def __post_init__(self):
        ids = [e.system_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise DuplicateSystem(f"duplicate system ids {sorted({i for i in ids if ids.count(i) > 1})}")
        for e in self.entries:
            if set(e.totals) != set(self.dimensions):
                raise DimensionMismatch(
                    f"entry {e.system_id!r} has dimensions {sorted(e.totals)}, store uses {list(self.dimensions)}"
                )

    @classmethod
    def empty(cls, scale) -> "BenchmarkStore":
        return cls(scale.scale_id, scale.version, tuple(scale.dimensions))

    def system_ids(self) -> list[str]:
        return [e.system_id for e in self.entries]

    def reference(self, dimension: str) -> np.ndarray:
        return np.array([e.totals[dimension] for e in self.entries], dtype=np.float64)

    def to_dict(self) -> dict:
        return {
            "format": BENCHMARK_FORMAT,
            "version": self.version,
            "scale_id": self.scale_id,
            "scale_version": self.scale_version,
            "dimensions": list(self.dimensions),
            "entries": [e.to_dict() for e in self.entries],
        }


def _now() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


def benchmark_add(store: BenchmarkStore, system_id: str, totals: Mapping[str, float],
                  timestamp: Optional[str] = None) -> BenchmarkStore:
    if system_id in store.system_ids():
        raise DuplicateSystem(f"system {system_id!r} is already in the benchmark")
    if set(totals) != set(store.dimensions):
        raise DimensionMismatch(f"totals cover {sorted(totals)}, benchmark uses {list(store.dimensions)}")
    entry = BenchmarkEntry(
        system_id, {d: float(totals[d]) for d in store.dimensions}, timestamp or _now()
    )
    return replace(store, entries=store.entries + (entry,), version=store.version + 1)


def benchmark_save(store: BenchmarkStore, path) -> None:
    """Write atomically (temp file then rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(store.to_dict(), indent=2) + "\n"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def benchmark_load(path, scale=None) -> BenchmarkStore:
    """Read a benchmark file; ``scale`` (optional) must match its scale id/version."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"benchmark file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from exc
    fmt = doc.get("format", BENCHMARK_FORMAT) if isinstance(doc, dict) else None
    if not isinstance(fmt, int):
        raise ParseError(f"{path}: not a benchmark file")
    if fmt > BENCHMARK_FORMAT:
        raise VersionMismatch(
            f"{path} uses benchmark format {fmt}; this toolkit reads format {BENCHMARK_FORMAT}. "
            "Upgrade xeqkit to read it."
        )
    try:
        entries = tuple(
            BenchmarkEntry(str(e["system_id"]), {k: float(v) for k, v in e["totals"].items()},
                           str(e.get("timestamp", "")))
            for e in doc["entries"]
        )
        dims = tuple(doc.get("dimensions") or (entries[0].totals if entries else ()))
        store = BenchmarkStore(str(doc["scale_id"]), str(doc["scale_version"]), dims, entries,
                               int(doc["version"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: malformed benchmark ({exc!r})") from exc
    if scale is not None and (store.scale_id != scale.scale_id or store.scale_version != scale.version):
        raise VersionMismatch(
            f"{path} holds {store.scale_id} v{store.scale_version} results; the scale in use is "
            f"{scale.scale_id} v{scale.version}. Benchmarks only compare results from the same scale version."
        )
    return store


@dataclass(frozen=True)
class Classification:
    percentiles: dict
    categories: dict
    n_reference: int

    def to_dict(self) -> dict:
        return {
            "percentiles": self.percentiles,
            "categories": {d: str(c) for d, c in self.categories.items()},
            "n_reference": self.n_reference,
            "percentile_convention": "mean rank: (below + 0.5 * ties) / n * 100, candidate excluded",
        }


def classify_system(store: BenchmarkStore, candidate: Mapping[str, float],
                    exclude: Optional[str] = None) -> Classification:
    """Place a candidate's per-dimension totals among the stored systems.

    The candidate is not part of the reference set; if it is stored under
    ``exclude`` that entry is left out.
    """
    entries = [e for e in store.entries if e.system_id != exclude]
    if not entries:
        raise EmptyBenchmark("the benchmark has no reference systems")
    if set(candidate) != set(store.dimensions):
        raise DimensionMismatch(f"candidate covers {sorted(candidate)}, benchmark uses {list(store.dimensions)}")
    pct, cat = {}, {}
    for d in store.dimensions:
        ref = [e.totals[d] for e in entries]
        pct[d] = mean_rank_percentile(float(candidate[d]), ref)
        cat[d] = category_for_percentile(pct[d])
    return Classification(pct, cat, len(entries))
