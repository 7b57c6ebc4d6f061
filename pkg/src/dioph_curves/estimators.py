"""Scikit-learn style wrappers around the counting, cover and membership tools.

Hyperparameters are plain strings or numbers, so ``get_params``,
``set_params`` and ``clone`` work and the objects drop into grid searches.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .curves import Curve, parse_curve
from .funcs import (
    ApproximatingFunction,
    DimensionFunction,
    Power,
    parse_dimension,
    parse_function,
)
from .limsup import (
    hausdorff_upper_estimate,
    level_counts,
    membership_test,
    multiplicative_membership,
    slope_dimension_estimate,
)
from .resonant import count_N
from .series import dimension_s0

__all__ = [
    "ResonantCounter",
    "ApproximableSetClassifier",
    "MultiplicativeClassifier",
    "CoverDimensionEstimator",
    "HausdorffTailEstimator",
]


def _curve(spec, interval=None) -> Curve:
    return spec if isinstance(spec, Curve) else parse_curve(str(spec), interval)


def _psi(spec) -> ApproximatingFunction:
    return spec if isinstance(spec, ApproximatingFunction) else parse_function(str(spec))


def _dim(spec) -> DimensionFunction:
    return spec if isinstance(spec, DimensionFunction) else parse_dimension(str(spec))


def _column(X, dtype=float):
    X = check_array(X, ensure_2d=False, dtype=dtype)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected one column, got {X.shape[1]}")
        X = X[:, 0]
    return X


class ResonantCounter(TransformerMixin, BaseEstimator):
    """Maps a column of Q values to ``N(Q, delta, theta)``.

    Parameters
    ----------
    curve : str or Curve
    interval : pair or None
        Counting window; defaults to the curve's interval.
    delta : float
        Cut-off in ``(0, 1/2)``.
    theta : pair or str
    policy : str
        ``"strict"``, ``"strict:<tau>"`` or ``"exact"``.
    threads : int or None
    """

    def __init__(self, curve="parabola", interval=None, delta=0.1, theta=(0, 0),
                 policy="strict", threads=None):
        self.curve = curve
        self.interval = interval
        self.delta = delta
        self.theta = theta
        self.policy = policy
        self.threads = threads

    def fit(self, X=None, y=None):
        self.curve_ = _curve(self.curve, self.interval)
        self.window_ = self.curve_.interval if self.interval is None else tuple(self.interval)
        # validates delta, theta and policy once
        count_N(self.curve_, self.window_, 1, self.delta, self.theta, self.policy, 1)
        return self

    def transform(self, X):
        check_is_fitted(self, "curve_")
        Qs = _column(X, dtype=np.int64)
        counts = [count_N(self.curve_, self.window_, int(Q), self.delta, self.theta,
                          self.policy, self.threads) for Q in Qs]
        return np.asarray(counts, dtype=np.int64).reshape(-1, 1)


class ApproximableSetClassifier(ClassifierMixin, BaseEstimator):
    """Predicts 1 for x with a witness q in ``q_window`` and 0 otherwise.

    Fitting only checks the hyperparameters; ``classes_`` is ``[0, 1]``.
    ``fraction(X)`` is the share of points predicted 1.
    """

    def __init__(self, curve="parabola", psi1="pow(v=0.5)", psi2="pow(v=0.5)",
                 theta=(0, 0), q_window=(1, 2**13)):
        self.curve = curve
        self.psi1 = psi1
        self.psi2 = psi2
        self.theta = theta
        self.q_window = q_window

    def fit(self, X=None, y=None):
        self.curve_ = _curve(self.curve)
        self.psi1_, self.psi2_ = _psi(self.psi1), _psi(self.psi2)
        self.classes_ = np.array([0, 1])
        return self

    def witnesses(self, X) -> list:
        check_is_fitted(self, "curve_")
        lo, hi = (int(v) for v in self.q_window)
        return [membership_test(float(x), self.curve_, self.psi1_, self.psi2_, self.theta,
                                Q_max=hi, q_min=lo) for x in _column(X)]

    def predict(self, X):
        return np.array([w is not None for w in self.witnesses(X)], dtype=int)

    def fraction(self, X) -> float:
        return float(self.predict(X).mean())


class MultiplicativeClassifier(ClassifierMixin, BaseEstimator):
    """Predicts 1 for x with ``||q x - theta1|| ||q f(x) - theta2|| < psi(q)``
    for some q in ``q_window``."""

    def __init__(self, curve="parabola", psi="powlog(v=1,a=3)", theta=(0, 0),
                 q_window=(1, 2**13)):
        self.curve = curve
        self.psi = psi
        self.theta = theta
        self.q_window = q_window

    def fit(self, X=None, y=None):
        self.curve_ = _curve(self.curve)
        self.psi_ = _psi(self.psi)
        self.classes_ = np.array([0, 1])
        return self

    def predict(self, X):
        check_is_fitted(self, "curve_")
        lo, hi = (int(v) for v in self.q_window)
        x = _column(X)
        fx = self.curve_.f(x)
        return np.array([multiplicative_membership(float(a), float(b), self.psi_, self.theta,
                                                   Q_max=hi, q_min=lo) is not None
                         for a, b in zip(x, fx)], dtype=int)


class CoverDimensionEstimator(BaseEstimator):
    """Fits the growth of exact cover counts and reports a dimension slope.

    Attributes
    ----------
    level_counts_ : dict
    dimension_ : float
    stderr_ : float
    s0_ : float
        Critical exponent of the power pair, for comparison.
    """

    def __init__(self, curve="parabola", v1=0.8, v2=0.6, theta=(0, 0), levels=(6, 13),
                 burn_in=2, mode="exact", threads=None):
        self.curve = curve
        self.v1 = v1
        self.v2 = v2
        self.theta = theta
        self.levels = levels
        self.burn_in = burn_in
        self.mode = mode
        self.threads = threads

    def fit(self, X=None, y=None):
        curve = _curve(self.curve)
        small, big = sorted((self.v1, self.v2), reverse=True)
        lo, hi = self.levels
        # (min, max) ordering: first function decays faster
        self.level_counts_ = level_counts(curve, range(lo, hi + 1), Power(small), Power(big),
                                          self.theta, self.mode, threads=self.threads)
        est = slope_dimension_estimate(self.level_counts_, max(self.v1, self.v2), self.burn_in)
        self.estimate_ = est
        self.dimension_ = est.slope
        self.stderr_ = est.stderr
        self.s0_ = float(dimension_s0(self.v1, self.v2).s0)
        return self


class HausdorffTailEstimator(BaseEstimator):
    """Tail sums of the finite-level h-measure bound over both orderings."""

    def __init__(self, curve="parabola", psi1="pow(v=0.6)", psi2="pow(v=0.8)", h="pow(s=0.9)",
                 theta=(0, 0), ls=tuple(range(6, 13)), L=13, mode="exact", threads=None):
        self.curve = curve
        self.psi1 = psi1
        self.psi2 = psi2
        self.h = h
        self.theta = theta
        self.ls = ls
        self.L = L
        self.mode = mode
        self.threads = threads

    def fit(self, X=None, y=None):
        est = hausdorff_upper_estimate(_curve(self.curve), _psi(self.psi1), _psi(self.psi2),
                                       _dim(self.h), self.theta, self.ls, self.L, self.mode,
                                       self.threads)
        self.estimate_ = est
        self.tails_ = est.tails
        self.contributions_ = est.contributions
        return self
