"""Dynamic marginal treatment effects for sequential treatment regimes.

Estimates marginal treatment response (MTR) surfaces for binary treatment
sequences from panel data with period-specific instruments, by regressing
arm-masked outcomes on an integrated polynomial basis in the fitted
propensity scores and mixing out the intermediary outcome with a g-formula
step. MTEs are differences of MTR surfaces, ATEs their integrals over the
unit square of resistance quantiles.
"""

from .data import EstimationConfig, PanelDataset, load_panel, save_panel
from .dgp import DgpSpec, simulate
from .streams import RandomStream, substream

__version__ = "0.1.0"

__all__ = [
    "DgpSpec",
    "EstimationConfig",
    "PanelDataset",
    "RandomStream",
    "load_panel",
    "save_panel",
    "simulate",
    "substream",
    "__version__",
]
