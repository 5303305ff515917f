"""Effect-curve figures from the estimator CLI's curve artifacts.

Input is the four-column curve CSV (v, estimate, ci_lo, ci_hi) written by
`dynmte curve`, optionally joined by the JSON written by
`dynmte oracle --kind curve` for a truth overlay. Output is a PNG or SVG,
byte-identical across runs for identical inputs.
"""

import csv
import json
import pathlib
from dataclasses import dataclass
from typing import List, Optional, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .errors import InputError

CURVE_COLUMNS = ("v", "estimate", "ci_lo", "ci_hi")

# SVG ids are derived from a salt; pin it so reruns hash identically
matplotlib.rcParams["svg.hashsalt"] = "plotkit"


@dataclass(frozen=True)
class CurvePlotSpec:
    """One figure: curve CSV in, image out, truth overlay optional."""

    csv_path: str
    out_path: str
    oracle_path: Optional[str] = None
    axis_label: str = "resistance"


@dataclass(frozen=True)
class CurveData:
    v: Tuple[float, ...]
    estimate: Tuple[float, ...]
    ci_lo: Tuple[float, ...]
    ci_hi: Tuple[float, ...]


def _parse_cell(row_index: int, column: str, text: str) -> float:
    try:
        return float(text)
    except (TypeError, ValueError):
        raise InputError(
            f"column {column!r} has a non-numeric value {text!r} in row {row_index}"
        ) from None


def load_curve(path) -> CurveData:
    """Read and validate a curve CSV; errors name the offending column."""
    p = pathlib.Path(path)
    if not p.exists():
        raise InputError(f"file not found: {p}")
    with open(p, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{p}: empty file, expected header {','.join(CURVE_COLUMNS)}")
    header = tuple(rows[0])
    if header != CURVE_COLUMNS:
        missing = [c for c in CURVE_COLUMNS if c not in header]
        extra = [c for c in header if c not in CURVE_COLUMNS]
        detail = []
        if missing:
            detail.append(f"missing column(s): {', '.join(missing)}")
        if extra:
            detail.append(f"unexpected column(s): {', '.join(extra)}")
        if not detail:
            detail.append(f"column order must be {','.join(CURVE_COLUMNS)}")
        raise InputError(f"{p}: " + "; ".join(detail))
    body = rows[1:]
    if not body:
        raise InputError(f"{p}: no data rows")
    cols: List[List[float]] = [[], [], [], []]
    for i, row in enumerate(body, start=1):
        if len(row) != 4:
            raise InputError(f"{p}: row {i} has {len(row)} cells, expected 4")
        for j, name in enumerate(CURVE_COLUMNS):
            cols[j].append(_parse_cell(i, name, row[j]))
    return CurveData(*(tuple(c) for c in cols))


def load_oracle_curve(path) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
    """Read the truth-curve JSON; returns the (v, value) arrays."""
    p = pathlib.Path(path)
    if not p.exists():
        raise InputError(f"file not found: {p}")
    try:
        payload = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{p}: not valid JSON ({exc})") from None
    if not isinstance(payload, dict):
        raise InputError(f"{p}: expected a JSON object")
    kind = payload.get("kind", "curve")
    if kind != "curve":
        raise InputError(f"{p}: kind must be 'curve', got {kind!r}")
    for key in ("v", "value"):
        if not isinstance(payload.get(key), list):
            raise InputError(f"{p}: missing or non-array field {key!r}")
    v, value = payload["v"], payload["value"]
    if len(v) != len(value):
        raise InputError(f"{p}: v has {len(v)} entries but value has {len(value)}")
    return tuple(float(t) for t in v), tuple(float(t) for t in value)


def plot_curve(spec: CurvePlotSpec) -> str:
    """Render the curve with its shaded band; returns the output path."""
    data = load_curve(spec.csv_path)
    overlay = load_oracle_curve(spec.oracle_path) if spec.oracle_path else None

    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=150)
    try:
        ax.fill_between(
            data.v, data.ci_lo, data.ci_hi, alpha=0.25, color="C0", linewidth=0,
            label="95% band",
        )
        ax.plot(data.v, data.estimate, color="C0", label="estimate")
        if overlay is not None:
            ax.plot(overlay[0], overlay[1], "--", color="C1", label="truth")
        ax.axhline(0.0, color="0.6", linewidth=0.8)
        ax.set_xlabel(spec.axis_label)
        ax.set_ylabel("effect")
        ax.legend(loc="upper left", frameon=False)
        fig.tight_layout()
        out = pathlib.Path(spec.out_path)
        if out.suffix == ".svg":
            # the SVG writer stamps a creation date unless told not to
            fig.savefig(out, metadata={"Date": None})
        else:
            fig.savefig(out)
    finally:
        plt.close(fig)
    return str(out)
