"""Bipartite behaviors P(ab|xy): storage, normalization from counts, and basic metrics.

Arrays are indexed ``(x, y, a, b)`` with 0-based settings and outcomes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidParameter, ShapeMismatch, ZeroBlock

#: Per-block normalization tolerance of a valid behavior.
NORMALIZATION_TOL = 1e-12

#: Negative entries above this magnitude are rejected rather than clipped.
NEGATIVE_TOL = 1e-12


@dataclass(frozen=True)
class Dims:
    """Sizes of the setting and outcome ranges of a two-party system."""

    nx: int
    ny: int
    na: int
    nb: int

    def __post_init__(self):
        for name, minimum in (("nx", 1), ("ny", 1), ("na", 2), ("nb", 2)):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise InvalidParameter(f"{name} must be an integer, got {value!r}")
            if value < minimum:
                raise InvalidParameter(f"{name} must be >= {minimum}, got {value}")
            object.__setattr__(self, name, int(value))

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (self.nx, self.ny, self.na, self.nb)

    @property
    def size(self) -> int:
        return self.nx * self.ny * self.na * self.nb

    @classmethod
    def parse(cls, text: str) -> "Dims":
        """Parse ``"NX,NY,NA,NB"``."""
        parts = [s.strip() for s in text.split(",")]
        if len(parts) != 4:
            raise InvalidParameter(f"expected NX,NY,NA,NB, got {text!r}")
        try:
            return cls(*(int(s) for s in parts))
        except ValueError as exc:
            raise InvalidParameter(f"non-integer dimension in {text!r}") from exc

    def as_dict(self) -> dict[str, int]:
        return {"nx": self.nx, "ny": self.ny, "na": self.na, "nb": self.nb}


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class BehaviorTable:
    """Conditional distribution P(ab|xy) stored densely as ``p[x, y, a, b]``."""

    dims: Dims
    p: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.shape != self.dims.shape:
            raise ShapeMismatch(f"array shape {p.shape} does not match dims {self.dims.shape}")
        if not np.all(np.isfinite(p)):
            raise InvalidParameter("behavior contains non-finite entries")
        if p.min() < -NEGATIVE_TOL:
            idx = np.unravel_index(np.argmin(p), p.shape)
            raise InvalidParameter(f"negative probability {p[idx]:.3g} at (x,y,a,b)={idx}")
        p = np.clip(p, 0.0, None)
        sums = p.sum(axis=(2, 3))
        bad = np.abs(sums - 1.0) > NORMALIZATION_TOL
        if bad.any():
            x, y = np.argwhere(bad)[0]
            raise InvalidParameter(f"block (x={x}, y={y}) sums to {sums[x, y]!r}, not 1")
        object.__setattr__(self, "p", _frozen(p))

    @classmethod
    def from_array(cls, p, renormalize: bool = False) -> "BehaviorTable":
        """Build from a 4-d array, inferring dims.

        With ``renormalize=True`` tiny negative values are clipped and every
        block is rescaled to sum to one; use it for solver output.
        """
        p = np.asarray(p, dtype=float)
        if p.ndim != 4:
            raise ShapeMismatch(f"expected a 4-d (x, y, a, b) array, got ndim={p.ndim}")
        if renormalize:
            p = np.clip(p, 0.0, None)
            p = p / p.sum(axis=(2, 3), keepdims=True)
        return cls(Dims(*p.shape), p)

    def __eq__(self, other):
        if not isinstance(other, BehaviorTable):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.p, other.p)

    def __hash__(self):
        return hash((self.dims, self.p.tobytes()))

    def alice_marginals(self) -> np.ndarray:
        """P(a|x,y) as an array ``[x, y, a]``."""
        return self.p.sum(axis=3)

    def bob_marginals(self) -> np.ndarray:
        """P(b|x,y) as an array ``[x, y, b]``."""
        return self.p.sum(axis=2)

    def ravel(self) -> np.ndarray:
        return self.p.ravel()


@dataclass(frozen=True, eq=False)
class CountsRecord:
    """Raw coincidence counts per setting pair, with optional background."""

    dims: Dims
    counts: np.ndarray = field(repr=False)
    background: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.shape != self.dims.shape:
            raise ShapeMismatch(f"counts shape {counts.shape} does not match dims {self.dims.shape}")
        if not np.all(np.isfinite(counts)) or np.any(counts != np.round(counts)):
            raise InvalidParameter("counts must be integers")
        if counts.min() < 0:
            idx = tuple(int(i) for i in np.unravel_index(np.argmin(counts), counts.shape))
            raise InvalidParameter(f"negative count at (x,y,a,b)={idx}")
        counts = counts.astype(np.int64)
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        if self.background is not None:
            bg = np.asarray(self.background, dtype=float)
            if bg.shape != self.dims.shape:
                raise ShapeMismatch(
                    f"background shape {bg.shape} does not match dims {self.dims.shape}"
                )
            if not np.all(np.isfinite(bg)) or bg.min() < 0:
                raise InvalidParameter("background entries must be finite and >= 0")
            object.__setattr__(self, "background", _frozen(bg))

    def __eq__(self, other):
        if not isinstance(other, CountsRecord):
            return NotImplemented
        if self.dims != other.dims or not np.array_equal(self.counts, other.counts):
            return False
        if self.background is None or other.background is None:
            return self.background is None and other.background is None
        return np.array_equal(self.background, other.background)

    __hash__ = None

    def signal(self) -> np.ndarray:
        """Background-subtracted counts, clamped at zero."""
        if self.background is None:
            return self.counts.astype(float)
        return np.clip(self.counts - self.background, 0.0, None)


def normalize_signal(signal: np.ndarray) -> np.ndarray:
    """Normalize non-negative signal per (x, y) block; works on stacked arrays ``(..., x, y, a, b)``."""
    totals = signal.sum(axis=(-2, -1), keepdims=True)
    if np.any(totals <= 0):
        zero = np.argwhere(totals[..., 0, 0] <= 0)[0]
        x, y = int(zero[-2]), int(zero[-1])
        raise ZeroBlock(f"setting pair (x={x}, y={y}) has zero total signal")
    return signal / totals


def normalize_counts(c: CountsRecord) -> BehaviorTable:
    """Turn coincidence counts into a behavior by per-block normalization.

    Background is subtracted first and negative results are clamped to zero.
    """
    return BehaviorTable(c.dims, normalize_signal(c.signal()))


def _max_pairwise_tv(marginals: np.ndarray) -> float:
    # marginals[k, j, o]: distribution over o, for fixed own setting k and far setting j
    nfar = marginals.shape[1]
    worst = 0.0
    for j1, j2 in itertools.combinations(range(nfar), 2):
        tv = 0.5 * np.abs(marginals[:, j1] - marginals[:, j2]).sum(axis=-1)
        worst = max(worst, float(tv.max()))
    return worst


def signaling_deficit(p: BehaviorTable) -> float:
    """Largest total-variation change of one party's marginal caused by the other's setting.

    Zero exactly when the behavior is non-signaling.
    """
    alice = p.alice_marginals()  # [x, y, a]
    bob = p.bob_marginals().transpose(1, 0, 2)  # [y, x, b]
    return max(_max_pairwise_tv(alice), _max_pairwise_tv(bob))


def l1_distance(p: BehaviorTable, q: BehaviorTable) -> float:
    if p.dims != q.dims:
        raise ShapeMismatch(f"dims differ: {p.dims} vs {q.dims}")
    return float(np.abs(p.p - q.p).sum())


def uniform_behavior(dims: Dims) -> BehaviorTable:
    return BehaviorTable(dims, np.full(dims.shape, 1.0 / (dims.na * dims.nb)))


def deterministic_behavior(dims: Dims, f, g) -> BehaviorTable:
    """Local deterministic box with ``a = f[x]`` and ``b = g[y]``."""
    f, g = tuple(f), tuple(g)
    if len(f) != dims.nx or len(g) != dims.ny:
        raise ShapeMismatch("strategy lengths must equal nx and ny")
    p = np.zeros(dims.shape)
    for x, y in itertools.product(range(dims.nx), range(dims.ny)):
        p[x, y, f[x], g[y]] = 1.0
    return BehaviorTable(dims, p)


def pr_box(anticorrelated: tuple[int, int] = (1, 1)) -> BehaviorTable:
    """Popescu-Rohrlich box: perfectly correlated uniform bits except in one setting block.

    The default anti-correlates ``(x, y) = (1, 1)``, i.e. ``a XOR b = x AND y``.
    """
    dims = Dims(2, 2, 2, 2)
    p = np.zeros(dims.shape)
    for x, y, a in itertools.product(range(2), range(2), range(2)):
        b = a ^ int((x, y) == tuple(anticorrelated))
        p[x, y, a, b] = 0.5
    return BehaviorTable(dims, p)


def mix(p: BehaviorTable, q: BehaviorTable, weight: float) -> BehaviorTable:
    """Convex combination ``weight * p + (1 - weight) * q``."""
    if p.dims != q.dims:
        raise ShapeMismatch(f"dims differ: {p.dims} vs {q.dims}")
    if not 0.0 <= weight <= 1.0:
        raise InvalidParameter(f"mixing weight must lie in [0, 1], got {weight}")
    return BehaviorTable(p.dims, weight * p.p + (1.0 - weight) * q.p)


def random_behavior(dims: Dims, rng: np.random.Generator, concentration: float = 1.0) -> BehaviorTable:
    """Dirichlet-distributed behavior, independent per block. Generally signaling."""
    blocks = rng.dirichlet(np.full(dims.na * dims.nb, concentration), size=(dims.nx, dims.ny))
    p = blocks.reshape(dims.shape)
    return BehaviorTable.from_array(p, renormalize=True)
