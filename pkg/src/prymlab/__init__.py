"""prymlab: Prym varieties, theta functions and Baker-Akhiezer functions for
2D Schrodinger operators built from double covers of hyperelliptic curves."""
from .curve import Curve, CurveSpec, SurfacePoint, build_curve
from .errors import (
    ConfigError,
    DegenerateCurve,
    NumericalBreakdown,
    PrymlabError,
)
from .numerics import Tolerances
from .periods import PeriodData, compute_periods
from .prym import Divisor, PrymGeometry, zeros_of_F_e
from .theta import ThetaContext

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "Curve",
    "CurveSpec",
    "DegenerateCurve",
    "Divisor",
    "NumericalBreakdown",
    "PeriodData",
    "PrymGeometry",
    "PrymlabError",
    "SurfacePoint",
    "ThetaContext",
    "Tolerances",
    "build_curve",
    "compute_periods",
    "zeros_of_F_e",
]
