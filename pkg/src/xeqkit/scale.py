"""Instrument definitions, Likert encoding and respondent totals."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateRespondent,
    EmptyDataset,
    ParseError,
    UnknownItem,
    UnknownLabel,
    ValidationError,
)

XEQ_DIMENSIONS = ("Learning", "Utility", "Fulfilment", "Engagement")
XEQ_LABELS = (
    "Strongly Disagree",
    "Somewhat Disagree",
    "Neutral",
    "Somewhat Agree",
    "Strongly Agree",
)
WAVES = ("Test", "Retest")


def _norm_label(label: str) -> str:
    return " ".join(str(label).split()).casefold()


@dataclass(frozen=True)
class Item:
    item_id: int
    text: str
    dimension: str


@dataclass(frozen=True)
class ScaleDefinition:
    """An ordered set of Likert items, each assigned to one dimension.

    ``dimensions`` defaults to the order in which dimensions first appear
    among the items.  Reverse-scored items are not supported.
    """

    scale_id: str
    version: str
    items: tuple[Item, ...]
    likert_labels: tuple[str, ...] = XEQ_LABELS
    likert_codes: tuple[int, ...] = (1, 2, 3, 4, 5)
    dimensions: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        object.__setattr__(self, "likert_labels", tuple(self.likert_labels))
        object.__setattr__(self, "likert_codes", tuple(int(c) for c in self.likert_codes))
        if len(self.items) < 2:
            raise ValidationError(f"scale {self.scale_id!r} needs at least 2 items")
        ids = [it.item_id for it in self.items]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"scale {self.scale_id!r} has duplicate item ids")
        if len(self.likert_labels) != len(self.likert_codes):
            raise ValidationError("likert_labels and likert_codes differ in length")
        if len({_norm_label(lab) for lab in self.likert_labels}) != len(self.likert_labels):
            raise ValidationError("likert labels must be distinct")
        if any(b <= a for a, b in zip(self.likert_codes, self.likert_codes[1:])):
            raise ValidationError("likert_codes must be strictly increasing")
        if not self.dimensions:
            seen = []
            for it in self.items:
                if it.dimension not in seen:
                    seen.append(it.dimension)
            object.__setattr__(self, "dimensions", tuple(seen))
        else:
            object.__setattr__(self, "dimensions", tuple(self.dimensions))
            unknown = {it.dimension for it in self.items} - set(self.dimensions)
            if unknown:
                raise ValidationError(f"items reference undefined dimensions {sorted(unknown)}")

    @property
    def n_items(self) -> int:
        return len(self.items)

    @property
    def item_ids(self) -> tuple[int, ...]:
        return tuple(it.item_id for it in self.items)

    def item_index(self, item_id: int) -> int:
        for k, it in enumerate(self.items):
            if it.item_id == item_id:
                return k
        raise UnknownItem(f"item {item_id!r} is not part of scale {self.scale_id!r}")

    def dimension_indices(self) -> dict[str, list[int]]:
        """Column indices of the items in each dimension, in scale order."""
        out = {d: [] for d in self.dimensions}
        for k, it in enumerate(self.items):
            out[it.dimension].append(k)
        return out

    def to_dict(self) -> dict:
        return {
            "scale_id": self.scale_id,
            "version": self.version,
            "likert_labels": list(self.likert_labels),
            "likert_codes": list(self.likert_codes),
            "dimensions": list(self.dimensions),
            "items": [
                {"id": it.item_id, "text": it.text, "dimension": it.dimension}
                for it in self.items
            ],
        }


def scale_from_dict(doc: dict) -> ScaleDefinition:
    try:
        items = tuple(
            Item(int(d["id"]), str(d.get("text", "")), str(d["dimension"]))
            for d in doc["items"]
        )
        labels = tuple(doc["likert_labels"])
        codes = tuple(doc.get("likert_codes", range(1, len(labels) + 1)))
        return ScaleDefinition(
            scale_id=str(doc["scale_id"]),
            version=str(doc["version"]),
            items=items,
            likert_labels=labels,
            likert_codes=codes,
            dimensions=tuple(doc.get("dimensions", ())),
        )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed scale definition: missing or invalid {exc}") from exc


def load_scale(path) -> ScaleDefinition:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"scale file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from exc
    return scale_from_dict(doc)


def xeq_scale() -> ScaleDefinition:
    """The built-in 18-item XEQ scale."""
    text = resources.files("xeqkit").joinpath("data/xeq_scale.json").read_text("utf-8")
    return scale_from_dict(json.loads(text))


def xeq_published_results() -> dict:
    """Published per-item results shipped with the XEQ scale (see the JSON note)."""
    text = resources.files("xeqkit").joinpath("data/xeq_published_results.json").read_text("utf-8")
    return json.loads(text)


def encode_response(label, scale: ScaleDefinition) -> int:
    """Map a Likert label to its code.

    Matching ignores case and collapses surrounding/inner whitespace.

    >>> encode_response("  strongly agree", xeq_scale())
    5
    """
    key = _norm_label(label)
    for lab, code in zip(scale.likert_labels, scale.likert_codes):
        if _norm_label(lab) == key:
            return code
    raise UnknownLabel(f"{label!r} is not one of {list(scale.likert_labels)}")


def decode_code(code: int, scale: ScaleDefinition) -> str:
    try:
        return scale.likert_labels[scale.likert_codes.index(int(code))]
    except ValueError:
        raise UnknownLabel(f"code {code!r} is not one of {list(scale.likert_codes)}") from None


def participant_total(row: Sequence[int], scale: Optional[ScaleDefinition] = None) -> int:
    """Sum of one respondent's item codes."""
    row = np.asarray(row)
    if row.ndim != 1:
        raise DimensionMismatch("a response row must be one-dimensional")
    if scale is not None:
        if row.size != scale.n_items:
            raise DimensionMismatch(f"row has {row.size} entries, scale has {scale.n_items} items")
        bad = ~np.isin(row, scale.likert_codes)
        if bad.any():
            raise ValidationError(f"invalid codes {row[bad].tolist()}")
    return int(row.sum())


@dataclass(frozen=True)
class RespondentMeta:
    """Per-respondent metadata.

    ``duration`` and ``allocated_duration`` are in seconds; ``None`` means not
    recorded, which disables the time-based attention check for that row.
    """

    respondent_id: str
    group: Optional[str] = None
    duration: Optional[float] = None
    allocated_duration: Optional[float] = None
    domain: Optional[str] = None

    def __post_init__(self):
        if self.duration is not None and self.duration < 0:
            raise ValidationError(f"{self.respondent_id}: negative duration")
        if self.allocated_duration is not None and self.allocated_duration <= 0:
            raise ValidationError(f"{self.respondent_id}: allocated duration must be positive")


@dataclass(frozen=True)
class ResponseMatrix:
    """N respondents by M items of Likert codes, in scale item order."""

    scale: ScaleDefinition
    respondents: tuple[RespondentMeta, ...]
    values: np.ndarray
    wave: str = "Test"

    def __post_init__(self):
        values = np.array(self.values, dtype=np.int64, copy=True)
        if values.ndim != 2:
            raise DimensionMismatch("response values must be a 2-D array")
        respondents = tuple(self.respondents)
        if values.shape[0] == 0 or not respondents:
            raise EmptyDataset("response matrix has no respondents")
        if values.shape[0] != len(respondents):
            raise DimensionMismatch(f"{values.shape[0]} rows but {len(respondents)} respondents")
        if values.shape[1] != self.scale.n_items:
            raise DimensionMismatch(
                f"{values.shape[1]} columns but scale {self.scale.scale_id!r} has {self.scale.n_items} items"
            )
        bad = ~np.isin(values, self.scale.likert_codes)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise ValidationError(
                f"respondent {respondents[r].respondent_id!r}, item {self.scale.items[c].item_id}: "
                f"code {values[r, c]} not in {list(self.scale.likert_codes)}"
            )
        ids = [m.respondent_id for m in respondents]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise DuplicateRespondent(f"duplicate respondent ids in {self.wave} wave: {dup}")
        if self.wave not in WAVES:
            raise ValidationError(f"wave must be one of {WAVES}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "respondents", respondents)

    @classmethod
    def from_codes(cls, scale, values, ids=None, groups=None, wave="Test"):
        """Convenience constructor for in-memory data with default metadata."""
        values = np.asarray(values)
        n = values.shape[0] if values.ndim == 2 else 0
        ids = ids if ids is not None else [f"r{k + 1}" for k in range(n)]
        groups = groups if groups is not None else [None] * n
        meta = tuple(RespondentMeta(str(i), None if g is None else str(g)) for i, g in zip(ids, groups))
        return cls(scale, meta, values, wave)

    @property
    def scale_id(self) -> str:
        return self.scale.scale_id

    @property
    def n_respondents(self) -> int:
        return self.values.shape[0]

    @property
    def n_items(self) -> int:
        return self.values.shape[1]

    @property
    def respondent_ids(self) -> list[str]:
        return [m.respondent_id for m in self.respondents]

    @property
    def groups(self) -> list[Optional[str]]:
        return [m.group for m in self.respondents]

    def participant_totals(self) -> np.ndarray:
        return self.values.sum(axis=1)

    def subset(self, rows) -> "ResponseMatrix":
        rows = list(rows)
        return ResponseMatrix(
            self.scale, tuple(self.respondents[k] for k in rows), self.values[rows], self.wave
        )


def item_total(matrix: ResponseMatrix, item_id: int) -> int:
    """Column sum of one item over all respondents."""
    return int(matrix.values[:, matrix.scale.item_index(item_id)].sum())
