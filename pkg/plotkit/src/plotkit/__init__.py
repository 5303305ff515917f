"""Publication artifacts from dynmte CLI outputs: curve figures, metric tables."""

from .curves import CurveData, CurvePlotSpec, load_curve, load_oracle_curve, plot_curve
from .errors import InputError
from .tables import REPORT_HEADER, render_table

__all__ = [
    "CurveData",
    "CurvePlotSpec",
    "InputError",
    "REPORT_HEADER",
    "load_curve",
    "load_oracle_curve",
    "plot_curve",
    "render_table",
]
