"""CHSH and CGLMP (d = 3) Bell functionals, and the mixing-parameter fit."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Literal

import numpy as np

from .behavior import BehaviorTable, Dims
from .exceptions import DegenerateFit, EmptyInput, InvalidParameter, ShapeMismatch
from .quantum import QutritModel, born_behavior

LOCAL_BOUND = 2.0

CHSH_DIMS = Dims(2, 2, 2, 2)
CGLMP_DIMS = Dims(2, 2, 3, 3)


@dataclass(frozen=True)
class BellValue:
    value: float
    functional: Literal["I2", "I3"]
    signed: float
    local_bound: float = LOCAL_BOUND

    @property
    def violation(self) -> float:
        return self.value - self.local_bound


def _chsh_coefficients() -> np.ndarray:
    # +P(=) - P(!=) for every setting pair except (x, y) = (1, 0), which is flipped
    corr = np.array([[1.0, -1.0], [-1.0, 1.0]])
    sign = np.array([[1.0, 1.0], [-1.0, 1.0]])
    return sign[:, :, None, None] * corr[None, None, :, :]


def _cglmp_coefficients() -> np.ndarray:
    # by_difference[x, y, k] weights the event (a - b) mod 3 == k
    by_difference = np.zeros((2, 2, 3))
    by_difference[0, 0, 0], by_difference[0, 0, 2] = 1.0, -1.0  # P(A1=B1) - P(A1=B1-1)
    by_difference[1, 0, 2], by_difference[1, 0, 0] = 1.0, -1.0  # P(B1=A2+1) - P(B1=A2)
    by_difference[1, 1, 0], by_difference[1, 1, 2] = 1.0, -1.0  # P(A2=B2) - P(A2=B2-1)
    by_difference[0, 1, 0], by_difference[0, 1, 1] = 1.0, -1.0  # P(B2=A1) - P(B2=A1-1)
    a = np.arange(3)[:, None]
    b = np.arange(3)[None, :]
    return by_difference[:, :, (a - b) % 3]


CHSH_COEFFICIENTS = _chsh_coefficients()
CGLMP_COEFFICIENTS = _cglmp_coefficients()


def _check_dims(p: BehaviorTable, expected: Dims, name: str) -> None:
    if p.dims != expected:
        raise ShapeMismatch(f"{name} needs dims {expected.shape}, got {p.dims.shape}")


def i2_signed(p: BehaviorTable) -> float:
    _check_dims(p, CHSH_DIMS, "I2")
    return float(np.sum(CHSH_COEFFICIENTS * p.p))


def i3_signed(p: BehaviorTable) -> float:
    _check_dims(p, CGLMP_DIMS, "I3")
    return float(np.sum(CGLMP_COEFFICIENTS * p.p))


def i2(p: BehaviorTable) -> BellValue:
    s = i2_signed(p)
    return BellValue(abs(s), "I2", s)


def i3(p: BehaviorTable) -> BellValue:
    s = i3_signed(p)
    return BellValue(abs(s), "I3", s)


def i3_signed_batch(p: np.ndarray) -> np.ndarray:
    """Signed I3 over stacked behavior arrays of shape ``(..., 2, 2, 3, 3)``."""
    return np.tensordot(p, CGLMP_COEFFICIENTS, axes=4)


@lru_cache(maxsize=4096)
def i3_theory(gamma: float, alpha=None, beta=None) -> float:
    """Signed I3 of the noiseless state at entanglement ``gamma``."""
    kwargs = {}
    if alpha is not None:
        kwargs["alpha"] = alpha
    if beta is not None:
        kwargs["beta"] = beta
    return i3_signed(born_behavior(QutritModel(float(gamma), 1.0, **kwargs)))


def fit_mixing_parameter(
    points: Iterable[tuple[float, float, float]], clip: bool = True
) -> tuple[float, float]:
    """Weighted least-squares fit of ``measured_I3 = lam * I3_theory(gamma)``.

    ``points`` holds ``(gamma, measured_I3, weight)`` triples. Weights are
    treated as inverse variances, so the returned standard error is
    ``1 / sqrt(sum(w * t^2))`` with ``t`` the theory value. Estimates
    outside [0, 1] are clipped with a warning unless ``clip=False``.
    """
    pts = [tuple(float(v) for v in pt) for pt in points]
    if not pts:
        raise EmptyInput("no points to fit")
    gamma, measured, weight = (np.array(col) for col in zip(*pts))
    if np.any(weight <= 0) or not np.all(np.isfinite(weight)):
        raise InvalidParameter("weights must be finite and > 0")
    theory = np.array([i3_theory(g) for g in gamma])
    info = float(np.sum(weight * theory**2))
    if info == 0.0:
        raise DegenerateFit("theory I3 vanishes at every gamma")
    lam = float(np.sum(weight * theory * measured) / info)
    stderr = float(1.0 / np.sqrt(info))
    if clip and not 0.0 <= lam <= 1.0:
        warnings.warn(f"fitted lambda {lam:.4f} clipped to [0, 1]", RuntimeWarning, stacklevel=2)
        lam = min(max(lam, 0.0), 1.0)
    return lam, stderr
