"""Markdown metric tables from the Monte Carlo harness report CSV."""

import csv
import pathlib
from decimal import Decimal, InvalidOperation, ROUND_HALF_UP

from .errors import InputError

REPORT_HEADER = ("target", "avg_bias", "med_bias", "rmse", "coverage", "ci_length")


def _round3(column: str, row_index: int, text: str) -> str:
    # ties round away from zero: 0.0005 -> "0.001", -0.0005 -> "-0.001";
    # parsing the CSV text directly keeps the tie exact
    try:
        return str(Decimal(text).quantize(Decimal("0.001"), rounding=ROUND_HALF_UP))
    except InvalidOperation:
        raise InputError(
            f"column {column!r} has a non-numeric value {text!r} in row {row_index}"
        ) from None


def render_table(mc_csv, out) -> str:
    """Typeset the report as a markdown table; returns the output path.

    Metric cells carry three decimals; an empty report renders as the
    header-only table.
    """
    p = pathlib.Path(mc_csv)
    if not p.exists():
        raise InputError(f"file not found: {p}")
    with open(p, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != REPORT_HEADER:
        got = ",".join(rows[0]) if rows else "<empty file>"
        raise InputError(
            f"{p}: header mismatch, expected {','.join(REPORT_HEADER)}, got {got}"
        )

    lines = [
        "| " + " | ".join(REPORT_HEADER) + " |",
        "|" + "---|" * len(REPORT_HEADER),
    ]
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != len(REPORT_HEADER):
            raise InputError(f"{p}: row {i} has {len(row)} cells, expected {len(REPORT_HEADER)}")
        cells = [row[0]] + [
            _round3(name, i, cell) for name, cell in zip(REPORT_HEADER[1:], row[1:])
        ]
        lines.append("| " + " | ".join(cells) + " |")

    out_path = pathlib.Path(out)
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(out_path)
