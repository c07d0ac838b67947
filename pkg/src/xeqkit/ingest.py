"""Loading, validating and cleaning response and expert-rating files.

Response CSV layout (header row required)::

    respondent_id,group,duration_seconds,allocated_seconds,[domain,]item_1,...,item_M

Item cells hold either integer codes or the scale's Likert labels.  The
optional ``domain`` column names the application domain and is used as a
blocking factor in group comparisons.  Any other extra column is ignored.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    DimensionMismatch,
    MissingColumn,
    MissingValue,
    ParseError,
    UnknownLabel,
    ValidationError,
)
from .scale import ResponseMatrix, RespondentMeta, ScaleDefinition, encode_response

log = logging.getLogger(__name__)

META_COLUMNS = ("respondent_id", "group", "duration_seconds", "allocated_seconds")

UNDER_TIME = "UnderTime"
PATTERN_RESPONSE = "PatternResponse"


def item_column(k: int) -> str:
    return f"item_{k}"


def _read_csv(path):
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"input file not found: {path}")
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        rows = [row for row in reader if any(cell.strip() for cell in row)]
    return path, header, rows


def _parse_code(cell: str, scale: ScaleDefinition) -> int:
    cell = cell.strip()
    try:
        code = int(cell)
    except ValueError:
        try:
            float(cell)
        except ValueError:
            return encode_response(cell, scale)
        raise ValueError(f"non-integer code {cell!r}") from None
    if code not in scale.likert_codes:
        raise ValueError(f"code {code} outside {list(scale.likert_codes)}")
    return code


def _parse_seconds(cell: str) -> float:
    value = float(cell)
    if not np.isfinite(value):
        raise ValueError(f"non-finite duration {cell!r}")
    return value


@dataclass(frozen=True)
class RejectedRow:
    line: int
    respondent_id: str
    reason: str


def load_responses(
    path, scale: ScaleDefinition, *, wave: str = "Test", strict_missing: bool = False
) -> tuple[ResponseMatrix, list[RejectedRow]]:
    """Read a response CSV into a :class:`ResponseMatrix`.

    Rows with a blank required cell are dropped (listwise deletion) and
    returned alongside the matrix with the reason; ``strict_missing=True``
    raises :class:`MissingValue` instead.  Out-of-range codes, unparsable
    cells and unknown labels always raise, naming the row and column.
    """
    path, header, rows = _read_csv(path)
    items = [item_column(k + 1) for k in range(scale.n_items)]
    missing = [c for c in (*META_COLUMNS, *items) if c not in header]
    if missing:
        raise MissingColumn(f"{path}: missing column(s) {missing}")
    extra_items = [h for h in header if h.startswith("item_") and h not in items]
    if extra_items:
        raise DimensionMismatch(
            f"{path}: columns {extra_items} exceed the {scale.n_items} items of scale {scale.scale_id!r}"
        )
    col = {name: header.index(name) for name in header}
    has_domain = "domain" in col

    metas, values, rejected = [], [], []
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        rid = row[col["respondent_id"]].strip()
        blanks = [c for c in ("respondent_id", "duration_seconds", "allocated_seconds", *items)
                  if not row[col[c]].strip()]
        if blanks:
            reason = f"blank cell(s) {blanks}"
            if strict_missing:
                raise MissingValue(f"{path}:{lineno}: {reason}")
            rejected.append(RejectedRow(lineno, rid, reason))
            log.warning("%s:%d: row rejected, %s", path, lineno, reason)
            continue
        codes = []
        for c in items:
            try:
                codes.append(_parse_code(row[col[c]], scale))
            except UnknownLabel as exc:
                raise UnknownLabel(f"{path}:{lineno}, column {c}: {exc}") from None
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}, column {c}: {exc}") from None
        try:
            duration = _parse_seconds(row[col["duration_seconds"]])
            allocated = _parse_seconds(row[col["allocated_seconds"]])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: bad duration ({exc})") from None
        group = row[col["group"]].strip() or None
        domain = (row[col["domain"]].strip() or None) if has_domain else None
        try:
            metas.append(RespondentMeta(rid, group, duration, allocated, domain))
        except ValidationError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None
        values.append(codes)

    if not values:
        values = np.empty((0, scale.n_items), dtype=np.int64)
    matrix = ResponseMatrix(scale, tuple(metas), np.asarray(values), wave)
    return matrix, rejected


def write_responses(matrix: ResponseMatrix, path) -> None:
    """Write a response matrix in the CSV layout read by :func:`load_responses`."""
    has_domain = any(m.domain is not None for m in matrix.respondents)
    header = list(META_COLUMNS) + (["domain"] if has_domain else [])
    header += [item_column(k + 1) for k in range(matrix.n_items)]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for meta, row in zip(matrix.respondents, matrix.values):
            rec = [
                meta.respondent_id,
                meta.group or "",
                "" if meta.duration is None else repr(float(meta.duration)),
                "" if meta.allocated_duration is None else repr(float(meta.allocated_duration)),
            ]
            if has_domain:
                rec.append(meta.domain or "")
            w.writerow(rec + [int(v) for v in row])


# -- attention checks --------------------------------------------------------


@dataclass(frozen=True)
class PatternRule:
    """Which response patterns count as inattentive.

    A row is flagged when ``straight_line`` is on and every answer is the
    same, or when its longest run of identical consecutive answers covers at
    least ``max_run_fraction`` of the items.  ``max_run_fraction=None``
    disables the run check.
    """

    straight_line: bool = True
    max_run_fraction: Optional[float] = 0.8

    def __post_init__(self):
        if self.max_run_fraction is not None and not 0 < self.max_run_fraction <= 1:
            raise ValidationError("max_run_fraction must be in (0, 1]")

    def to_dict(self) -> dict:
        return {"straight_line": self.straight_line, "max_run_fraction": self.max_run_fraction}


def longest_run(row) -> int:
    row = np.asarray(row)
    best = cur = 1
    for a, b in zip(row[:-1], row[1:]):
        cur = cur + 1 if a == b else 1
        best = max(best, cur)
    return best


def is_pattern_response(row, rule: PatternRule) -> bool:
    row = np.asarray(row)
    if rule.straight_line and np.all(row == row[0]):
        return True
    if rule.max_run_fraction is not None:
        return longest_run(row) >= rule.max_run_fraction * row.size
    return False


@dataclass(frozen=True)
class ExclusionReport:
    retained: Optional[ResponseMatrix]
    excluded: tuple[tuple[str, str], ...]
    min_time_fraction: float
    pattern_rule: PatternRule

    def to_dict(self) -> dict:
        return {
            "n_input": (0 if self.retained is None else self.retained.n_respondents) + len(self.excluded),
            "n_retained": 0 if self.retained is None else self.retained.n_respondents,
            "excluded": [{"respondent_id": r, "reason": why} for r, why in self.excluded],
            "min_time_fraction": self.min_time_fraction,
            "pattern_rule": self.pattern_rule.to_dict(),
        }


def apply_attention_filters(
    matrix: ResponseMatrix,
    min_time_fraction: float = 0.5,
    pattern_rule: PatternRule = PatternRule(),
) -> ExclusionReport:
    """Drop respondents who answered too fast or in a fixed pattern.

    A respondent is excluded as ``UnderTime`` when
    ``duration < min_time_fraction * allocated_duration``, otherwise as
    ``PatternResponse`` when :func:`is_pattern_response` holds.  Each
    excluded respondent is listed once, with the first failing check.
    ``retained`` is ``None`` when everybody is excluded.
    """
    if not 0 < min_time_fraction <= 1:
        raise ValidationError("min_time_fraction must be in (0, 1]")
    keep, excluded = [], []
    for k, (meta, row) in enumerate(zip(matrix.respondents, matrix.values)):
        if (
            meta.duration is not None
            and meta.allocated_duration is not None
            and meta.duration < min_time_fraction * meta.allocated_duration
        ):
            excluded.append((meta.respondent_id, UNDER_TIME))
        elif is_pattern_response(row, pattern_rule):
            excluded.append((meta.respondent_id, PATTERN_RESPONSE))
        else:
            keep.append(k)
    retained = matrix.subset(keep) if keep else None
    return ExclusionReport(retained, tuple(excluded), min_time_fraction, pattern_rule)


# -- test/retest pairing -----------------------------------------------------


@dataclass(frozen=True)
class RetestPairs:
    ids: tuple[str, ...]
    test: np.ndarray
    retest: np.ndarray
    unmatched_test: tuple[str, ...] = ()
    unmatched_retest: tuple[str, ...] = ()

    def __len__(self):
        return len(self.ids)

    def totals(self) -> tuple[np.ndarray, np.ndarray]:
        return self.test.sum(axis=1), self.retest.sum(axis=1)


def pair_retest(test: ResponseMatrix, retest: ResponseMatrix) -> RetestPairs:
    """Inner-join two waves on respondent id, keeping test-wave order.

    Ids present in only one wave are reported in ``unmatched_test`` /
    ``unmatched_retest``.  Duplicate ids are rejected when the matrices are
    built.
    """
    if test.scale.scale_id != retest.scale.scale_id or test.n_items != retest.n_items:
        raise DimensionMismatch("test and retest waves use different scales")
    ridx = {rid: k for k, rid in enumerate(retest.respondent_ids)}
    tids = test.respondent_ids
    both = [(k, ridx[rid]) for k, rid in enumerate(tids) if rid in ridx]
    tset = set(tids)
    pairs = RetestPairs(
        ids=tuple(tids[k] for k, _ in both),
        test=test.values[[k for k, _ in both]],
        retest=retest.values[[j for _, j in both]],
        unmatched_test=tuple(rid for rid in tids if rid not in ridx),
        unmatched_retest=tuple(rid for rid in retest.respondent_ids if rid not in tset),
    )
    if pairs.unmatched_test or pairs.unmatched_retest:
        log.info(
            "retest pairing: %d matched, unmatched test %s, unmatched retest %s",
            len(pairs), list(pairs.unmatched_test), list(pairs.unmatched_retest),
        )
    return pairs
