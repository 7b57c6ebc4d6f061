"""Inhomogeneous weighted simultaneous approximation on planar curves.

Modules
-------
funcs
    Approximating and dimension function families.
series
    Convergence verdicts for the governing series.
curves
    Planar curves and their non-degenerate pieces.
resonant
    Enumeration and counting of shifted rational points near a curve.
ubiquity
    Ubiquity wiring and empirical coverage.
limsup
    Covers, Hausdorff tail bounds and membership tests.
estimators
    Scikit-learn style wrappers.
"""

__version__ = "0.1.0"

from .curves import Cubic, Parabola, parse_curve
from .funcs import DimPower, Power, PowerLog, parse_dimension, parse_function
from .resonant import ShiftedQuery, brute_force_oracle, count_N, enumerate_AQ
from .series import classify, classify_weighted_hausdorff, dimension_s0

__all__ = [
    "Cubic",
    "DimPower",
    "Parabola",
    "Power",
    "PowerLog",
    "ShiftedQuery",
    "brute_force_oracle",
    "classify",
    "classify_weighted_hausdorff",
    "count_N",
    "dimension_s0",
    "enumerate_AQ",
    "parse_curve",
    "parse_dimension",
    "parse_function",
]
