"""Report serialisation: canonical JSON, the scree plot, and the per-item table."""

from __future__ import annotations

import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .errors import MissingSection, ValidationError, WriteError


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays, Fractions and non-finite floats."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating, Fraction)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, Path):
        return str(obj)
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, allow_nan=False) + "\n"


def write_text(path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise WriteError(f"cannot write {path}: {exc}") from exc
    return path


def write_json(path, obj) -> Path:
    return write_text(path, dumps(obj))


# -- scree plot --------------------------------------------------------------

_W, _H = 480, 320
_LEFT, _RIGHT, _TOP, _BOTTOM = 56, 16, 24, 44


def _nice_max(v: float) -> float:
    if v <= 0:
        return 1.0
    mag = 10 ** math.floor(math.log10(v))
    for step in (1, 2, 2.5, 5, 10):
        if v <= step * mag:
            return step * mag
    return 10 * mag


def scree_svg(eigenvalues: Sequence[float], title: str = "Scree plot") -> str:
    """Static SVG line plot: component index (1-based) against eigenvalue.

    The data pairs are embedded as JSON inside ``<metadata>``.
    """
    ev = [float(v) for v in eigenvalues]
    if not ev:
        raise ValidationError("scree plot needs at least one eigenvalue")
    n = len(ev)
    ymax = _nice_max(max(max(ev), 1.0))
    ymin = min(0.0, min(ev))
    pw, ph = _W - _LEFT - _RIGHT, _H - _TOP - _BOTTOM

    def sx(k):
        return _LEFT + (pw * (k - 1) / (n - 1) if n > 1 else pw / 2)

    def sy(v):
        return _TOP + ph * (ymax - v) / (ymax - ymin)

    pts = [(sx(k + 1), sy(v)) for k, v in enumerate(ev)]
    data = json.dumps([[k + 1, v] for k, v in enumerate(ev)])
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f"<title>{escape(title)}</title>",
        f'<metadata id="scree-data">{escape(data)}</metadata>',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<line x1="{_LEFT}" y1="{_TOP + ph}" x2="{_LEFT + pw}" y2="{_TOP + ph}" stroke="black"/>',
        f'<line x1="{_LEFT}" y1="{_TOP}" x2="{_LEFT}" y2="{_TOP + ph}" stroke="black"/>',
    ]
    if ymin <= 1.0 <= ymax:
        out.append(
            f'<line class="kaiser" x1="{_LEFT}" y1="{sy(1.0):.3f}" x2="{_LEFT + pw}" y2="{sy(1.0):.3f}" '
            'stroke="grey" stroke-dasharray="4 3"/>'
        )
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        v = ymin + frac * (ymax - ymin)
        out.append(
            f'<text x="{_LEFT - 6}" y="{sy(v) + 4:.3f}" font-size="11" text-anchor="end">{v:g}</text>'
        )
    step = max(1, math.ceil(n / 18))
    for k in range(1, n + 1, step):
        out.append(
            f'<text x="{sx(k):.3f}" y="{_TOP + ph + 16}" font-size="11" text-anchor="middle">{k}</text>'
        )
    out.append(
        f'<text x="{_LEFT + pw / 2}" y="{_H - 8}" font-size="12" text-anchor="middle">Component</text>'
    )
    out.append(
        f'<text x="14" y="{_TOP + ph / 2}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 14 {_TOP + ph / 2})">Eigenvalue</text>'
    )
    poly = " ".join(f"{x:.3f},{y:.3f}" for x, y in pts)
    out.append(f'<polyline class="scree" points="{poly}" fill="none" stroke="steelblue" stroke-width="2"/>')
    for x, y in pts:
        out.append(f'<circle class="marker" cx="{x:.3f}" cy="{y:.3f}" r="3.5" fill="steelblue"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_scree(efa, path) -> Path:
    """Write the scree SVG to ``path`` and its (index, eigenvalue) pairs next to
    it as ``<stem>.json``."""
    ev = getattr(efa, "eigenvalues", efa)
    path = Path(path)
    write_text(path, scree_svg(ev))
    write_json(path.with_suffix(".json"),
               {"points": [[k + 1, float(v)] for k, v in enumerate(ev)]})
    return path


# -- per-item table ----------------------------------------------------------

ITEM_TABLE_COLUMNS = ("Item", "I-CVI", "iT", "One-Factor Loading", "Dimension", "CFA Loading")


def item_table_rows(results: dict, scale) -> list[dict]:
    """Rows of the per-item summary in scale order, unrounded.

    Needs the ``content_validity`` and ``reliability`` sections; factor
    loadings are filled from ``construct`` when present.
    """
    cv = results.get("content_validity")
    rel = results.get("reliability")
    if not cv or "items" not in cv:
        raise MissingSection("item table needs the content_validity section")
    if not rel or not rel.get("internal_consistency"):
        raise MissingSection("item table needs the reliability section")
    icvi = {d["item_id"]: d["i_cvi"] for d in cv["items"]}
    it = {d["item_id"]: d["item_total"] for d in rel["internal_consistency"]["items"]}
    construct = results.get("construct") or {}
    one = {d["item_id"]: d["loading"] for d in (construct.get("one_factor") or {}).get("items", [])}
    cfa = {d["item_id"]: d["loading"] for d in (construct.get("dimension_model") or {}).get("items", [])}
    return [
        {
            "item_id": item.item_id,
            "text": item.text,
            "i_cvi": icvi.get(item.item_id),
            "item_total": it.get(item.item_id),
            "one_factor_loading": one.get(item.item_id),
            "dimension": item.dimension,
            "cfa_loading": cfa.get(item.item_id),
        }
        for item in scale.items
    ]


def _fmt(v, digits: int) -> str:
    return "-" if v is None else f"{v:.{digits}f}"


def format_item_table(rows: list[dict], digits: int = 4) -> str:
    """Aligned text table, numbers rounded to ``digits`` decimals."""
    body = [
        (str(r["item_id"]), _fmt(r["i_cvi"], digits), _fmt(r["item_total"], digits),
         _fmt(r["one_factor_loading"], digits), r["dimension"], _fmt(r["cfa_loading"], digits))
        for r in rows
    ]
    widths = [max(len(h), *(len(b[k]) for b in body)) for k, h in enumerate(ITEM_TABLE_COLUMNS)]
    line = lambda cells: "  ".join(  # noqa: E731
        c.ljust(w) if k == 4 else c.rjust(w) for k, (c, w) in enumerate(zip(cells, widths))
    )
    out = [line(ITEM_TABLE_COLUMNS), line(["-" * w for w in widths])]
    out += [line(b) for b in body]
    return "\n".join(out) + "\n"


def emit_item_table(results: dict, scale, digits: int = 4, path=None) -> str:
    """Render the per-item table; write it (plus a JSON copy) when ``path`` is set."""
    rows = item_table_rows(results, scale)
    text = format_item_table(rows, digits)
    if path is not None:
        path = Path(path)
        write_text(path, text)
        write_json(path.with_suffix(".json"), {"columns": list(ITEM_TABLE_COLUMNS), "rows": rows})
    return text
