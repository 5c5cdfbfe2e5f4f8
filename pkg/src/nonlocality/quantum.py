"""Born-rule behaviors of the two-qutrit family (|00> + g|11> + |22>)/sqrt(2 + g^2).

Measurements are the Fourier-type bases with phase offsets ``alpha`` (Alice)
and ``beta`` (Bob); white noise enters through the isotropic mixture
``lam * |psi><psi| + (1 - lam) * I / 9``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .behavior import BehaviorTable, Dims
from .exceptions import InvalidParameter

D = 3
QUTRIT_DIMS = Dims(2, 2, D, D)

DEFAULT_ALPHA = (0.0, 0.5)
DEFAULT_BETA = (0.25, -0.25)


@dataclass(frozen=True)
class QutritModel:
    gamma: float
    lam: float = 1.0
    alpha: tuple[float, float] = DEFAULT_ALPHA
    beta: tuple[float, float] = DEFAULT_BETA
    d: int = field(default=D, init=False)

    def __post_init__(self):
        if not np.isfinite(self.gamma) or self.gamma < 0:
            raise InvalidParameter(f"gamma must be a finite value >= 0, got {self.gamma}")
        if not 0.0 <= self.lam <= 1.0:
            raise InvalidParameter(f"lambda must lie in [0, 1], got {self.lam}")
        if len(self.alpha) != 2 or len(self.beta) != 2:
            raise InvalidParameter("alpha and beta must each hold two phase offsets")
        object.__setattr__(self, "alpha", tuple(float(v) for v in self.alpha))
        object.__setattr__(self, "beta", tuple(float(v) for v in self.beta))


@dataclass(frozen=True, eq=False)
class StateVector:
    """Amplitudes over the product basis, index ``3 * j + j'`` for |j>_A |j'>_B."""

    amps: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amps, dtype=complex)
        if abs(np.vdot(amps, amps).real - 1.0) > 1e-12:
            raise InvalidParameter("state vector is not normalized")
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @property
    def schmidt(self) -> np.ndarray:
        """Diagonal amplitudes <jj|psi>."""
        return self.amps.reshape(D, D).diagonal().copy()


def qutrit_state(gamma: float) -> StateVector:
    if not np.isfinite(gamma) or gamma < 0:
        raise InvalidParameter(f"gamma must be a finite value >= 0, got {gamma}")
    coeffs = np.array([1.0, gamma, 1.0]) / np.sqrt(2.0 + gamma * gamma)
    return StateVector(np.diag(coeffs).astype(complex).ravel())


def measurement_vector(side: str, setting: int, outcome: int, model: QutritModel) -> np.ndarray:
    """Basis vector for outcome ``outcome`` of measurement ``setting`` (both 0-based).

    Alice: ``exp(2 pi i j (a + alpha_x) / 3) / sqrt(3)``;
    Bob: ``exp(2 pi i j (-b + beta_y) / 3) / sqrt(3)``.
    """
    if setting not in (0, 1):
        raise InvalidParameter(f"setting must be 0 or 1, got {setting}")
    if outcome not in range(D):
        raise InvalidParameter(f"outcome must be in 0..{D - 1}, got {outcome}")
    j = np.arange(D)
    if side == "A":
        phase = outcome + model.alpha[setting]
    elif side == "B":
        phase = -outcome + model.beta[setting]
    else:
        raise InvalidParameter(f"side must be 'A' or 'B', got {side!r}")
    return np.exp(2j * np.pi * j * phase / D) / np.sqrt(D)


def _bases(model: QutritModel) -> tuple[np.ndarray, np.ndarray]:
    # [setting, outcome, component]
    A = np.array([[measurement_vector("A", x, a, model) for a in range(D)] for x in range(2)])
    B = np.array([[measurement_vector("B", y, b, model) for b in range(D)] for y in range(2)])
    return A, B


def born_behavior(model: QutritModel) -> BehaviorTable:
    psi = qutrit_state(model.gamma).schmidt
    A, B = _bases(model)
    # <chi_ab|psi> with |chi_ab> = |a>_A |b>_B; psi only has |jj> components
    amp = np.einsum("xaj,ybj,j->xyab", A.conj(), B.conj(), psi)
    pure = np.abs(amp) ** 2
    # completeness makes this 1; recomputed to catch phase-convention slips
    pure = pure / pure.sum(axis=(2, 3), keepdims=True)
    p = model.lam * pure + (1.0 - model.lam) / (D * D)
    return BehaviorTable(QUTRIT_DIMS, p)
