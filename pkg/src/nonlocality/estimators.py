"""scikit-learn compatible wrappers.

Behaviors enter as arrays of shape ``(n_samples, nx, ny, na, nb)``, as flat
``(n_samples, nx*ny*na*nb)`` arrays together with ``dims``, or as sequences
of :class:`BehaviorTable`. Everything composes with ``Pipeline``,
``clone`` and ``get_params``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .behavior import BehaviorTable, Dims, normalize_signal
from .bell import fit_mixing_parameter, i3_theory
from .exceptions import InvalidParameter, ShapeMismatch
from .pipeline import measure_behavior, parse_measures
from .polytope import project_nonsignaling


def _as_dims(dims) -> Dims | None:
    if dims is None or isinstance(dims, Dims):
        return dims
    if isinstance(dims, str):
        return Dims.parse(dims)
    return Dims(*dims)


def check_behaviors(X, dims=None) -> np.ndarray:
    """Validate behaviors and return them stacked as ``(n, nx, ny, na, nb)``."""
    dims = _as_dims(dims)
    if isinstance(X, BehaviorTable):
        X = [X]
    if isinstance(X, (list, tuple)) and X and isinstance(X[0], BehaviorTable):
        if len({b.dims for b in X}) != 1:
            raise ShapeMismatch("behaviors have differing dims")
        arr = np.stack([b.p for b in X])
    else:
        arr = np.asarray(X, dtype=float)
        if arr.ndim == 2:
            if dims is None:
                raise InvalidParameter("flat input needs dims")
            arr = check_array(arr, ensure_min_features=dims.size)
            if arr.shape[1] != dims.size:
                raise ShapeMismatch(f"expected {dims.size} features, got {arr.shape[1]}")
            arr = arr.reshape((-1,) + dims.shape)
        elif arr.ndim != 5:
            raise ShapeMismatch("expected 2-d flat or 5-d (n, x, y, a, b) input")
    if dims is not None and arr.shape[1:] != dims.shape:
        raise ShapeMismatch(f"behaviors have shape {arr.shape[1:]}, expected {dims.shape}")
    for p in arr:
        BehaviorTable.from_array(p)  # raises on invalid entries
    return arr


def _tables(arr: np.ndarray) -> list[BehaviorTable]:
    return [BehaviorTable.from_array(p) for p in arr]


class CountsNormalizer(TransformerMixin, BaseEstimator):
    """Background-subtract (clamping at zero) and normalize count arrays per setting block."""

    def __init__(self, background=None):
        self.background = background

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        if X.ndim != 5:
            raise ShapeMismatch("counts must be shaped (n, x, y, a, b)")
        self.dims_ = Dims(*X.shape[1:])
        return self

    def transform(self, X):
        check_is_fitted(self, "dims_")
        X = np.asarray(X, dtype=float)
        if X.shape[1:] != self.dims_.shape:
            raise ShapeMismatch(f"counts have shape {X.shape[1:]}, fitted on {self.dims_.shape}")
        signal = X if self.background is None else np.clip(X - np.asarray(self.background), 0.0, None)
        return normalize_signal(signal)


class NonSignalingProjector(TransformerMixin, BaseEstimator):
    """Replace each behavior by its closest non-signaling behavior in L1.

    After ``transform`` the L1 distances moved are in ``distances_``.
    """

    def __init__(self, dims=None):
        self.dims = dims

    def fit(self, X, y=None):
        arr = check_behaviors(X, self.dims)
        self.dims_ = Dims(*arr.shape[1:])
        self.n_features_in_ = self.dims_.size
        return self

    def transform(self, X):
        check_is_fitted(self, "dims_")
        arr = check_behaviors(X, self.dims_)
        results = [project_nonsignaling(p) for p in _tables(arr)]
        self.distances_ = np.array([r.distance for r in results])
        out = np.stack([r.nearest.p for r in results])
        if isinstance(X, np.ndarray) and X.ndim == 2:
            return out.reshape(len(out), -1)
        return out


class NonlocalityProfiler(TransformerMixin, BaseEstimator):
    """Map behaviors to a feature matrix of non-locality measures.

    Columns follow :func:`nonlocality.pipeline.measure_behavior`; see
    ``get_feature_names_out``.
    """

    def __init__(self, measures=("i3", "dist_local", "capacity"), dims=None, tol=1e-6):
        self.measures = measures
        self.dims = dims
        self.tol = tol

    def fit(self, X, y=None):
        arr = check_behaviors(X, self.dims)
        self.dims_ = Dims(*arr.shape[1:])
        self.n_features_in_ = self.dims_.size
        measured = measure_behavior(BehaviorTable.from_array(arr[0]), self.measures, self.tol)
        self.feature_names_ = [k for k in measured if k not in ("signaling_deficit", "capacity_gap")]
        return self

    def transform(self, X):
        check_is_fitted(self, "feature_names_")
        arr = check_behaviors(X, self.dims_)
        rows = [measure_behavior(p, parse_measures(self.measures), self.tol) for p in _tables(arr)]
        return np.array([[row[k] for k in self.feature_names_] for row in rows])

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "feature_names_")
        return np.array(self.feature_names_, dtype=object)


class MixingParameterRegressor(RegressorMixin, BaseEstimator):
    """Fit ``I3_measured = lambda * I3_theory(gamma)``.

    ``X`` holds gamma values (one column), ``y`` the measured signed I3 and
    ``sample_weight`` inverse variances.
    """

    def __init__(self, clip=True):
        self.clip = clip

    def fit(self, X, y, sample_weight=None):
        X = check_array(X, ensure_2d=False).reshape(-1)
        y = np.asarray(y, dtype=float).reshape(-1)
        if X.shape != y.shape:
            raise ShapeMismatch("X and y lengths differ")
        w = np.ones_like(y) if sample_weight is None else np.asarray(sample_weight, dtype=float)
        self.lambda_, self.lambda_stderr_ = fit_mixing_parameter(zip(X, y, w), clip=self.clip)
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "lambda_")
        X = check_array(X, ensure_2d=False).reshape(-1)
        return self.lambda_ * np.array([i3_theory(float(g)) for g in X])
