"""End-to-end analysis: counts -> behavior -> signaling removal -> non-locality measures.

Also hosts the Poisson bootstrap and the gamma sweep used to regenerate
model curves.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np

from . import __version__
from .behavior import BehaviorTable, CountsRecord, normalize_counts, normalize_signal, signaling_deficit
from .bell import CGLMP_DIMS, CHSH_DIMS, i2, i3, i3_signed_batch
from .capacity import LOG_FLOOR, nonlocal_capacity_asym
from .exceptions import BootstrapFailure, InvalidParameter, NonlocalityError
from .io import RESULT_COLUMNS
from .polytope import LP_TOL, distance_to_local_polytope, project_nonsignaling
from .quantum import QutritModel, born_behavior

logger = logging.getLogger(__name__)

MEASURES = ("i3", "dist_local", "dist_ns", "capacity")
BOOTSTRAP_STATISTICS = ("i2", "i3", "dist_local", "dist_ns", "capacity")
DEFAULT_COUNTS_PER_BLOCK = 1000

#: Share of failed bootstrap resamples above which the interval is refused.
MAX_FAILURE_RATE = 0.01


def parse_measures(measures: Iterable[str] | str) -> tuple[str, ...]:
    if isinstance(measures, str):
        measures = measures.split(",")
    out = []
    for m in measures:
        key = m.strip().lower()
        if key not in MEASURES + ("i2",):
            raise InvalidParameter(f"unknown measure {m!r}; choose from {', '.join(MEASURES)}")
        if key not in out:
            out.append(key)
    if not out:
        raise InvalidParameter("no measures requested")
    return tuple(out)


@dataclass(frozen=True)
class Interval:
    """Bootstrap estimate with a 2-sigma half width."""

    center: float
    half_width: float
    method: str = "poisson_bootstrap"
    n: int = 0
    n_failed: int = 0

    def __post_init__(self):
        if not self.half_width >= 0:
            raise InvalidParameter("half_width must be >= 0")

    def contains(self, value: float) -> bool:
        return abs(value - self.center) <= self.half_width


@dataclass(frozen=True)
class SweepConfig:
    gamma_grid: tuple[float, ...]
    lam: float = 1.0
    tol: float = 1e-6
    n_bootstrap: int = 0
    seed: int = 0
    measures: tuple[str, ...] = MEASURES
    counts_per_block: int | None = None
    n_jobs: int = 1

    def __post_init__(self):
        grid = tuple(float(g) for g in self.gamma_grid)
        if not grid:
            raise InvalidParameter("gamma_grid must not be empty")
        if any(not np.isfinite(g) or g < 0 for g in grid):
            raise InvalidParameter("gamma values must be finite and >= 0")
        object.__setattr__(self, "gamma_grid", grid)
        object.__setattr__(self, "measures", parse_measures(self.measures))
        if self.n_bootstrap < 0:
            raise InvalidParameter("n_bootstrap must be >= 0")
        if self.tol <= 0:
            raise InvalidParameter("tol must be > 0")
        if not 0 <= self.seed < 2**64:
            raise InvalidParameter("seed must be a 64-bit unsigned integer")
        if self.n_bootstrap and self.counts_per_block is None:
            object.__setattr__(self, "counts_per_block", DEFAULT_COUNTS_PER_BLOCK)


def sample_counts(p: BehaviorTable, counts_per_block: float, rng: np.random.Generator) -> CountsRecord:
    """Poisson coincidence counts with mean ``counts_per_block * P(ab|xy)``."""
    return CountsRecord(p.dims, rng.poisson(counts_per_block * p.p))


def measure_behavior(p: BehaviorTable, measures: Iterable[str], tol: float = 1e-6) -> dict:
    """Raw and signaling-corrected measures of one behavior, keyed by result column."""
    measures = parse_measures(measures)
    row: dict = {"signaling_deficit": signaling_deficit(p)}
    proj = project_nonsignaling(p)
    q = proj.nearest
    if "i3" in measures and p.dims == CGLMP_DIMS:
        row["i3"] = i3(p).value
        row["i3_ns"] = i3(q).value
    if "i2" in measures and p.dims == CHSH_DIMS:
        row["i2"] = i2(p).value
        row["i2_ns"] = i2(q).value
    if "dist_local" in measures:
        row["dist_local_raw"] = distance_to_local_polytope(p).distance
        row["dist_local_ns"] = distance_to_local_polytope(q).distance
    if "dist_ns" in measures:
        row["dist_ns"] = proj.distance
    if "capacity" in measures:
        cert = nonlocal_capacity_asym(q, tol=tol)
        row["capacity_ns"] = cert.value
        row["capacity_gap"] = cert.gap
    return row


def _statistic(p: BehaviorTable, statistic: str, project_ns: bool, tol: float) -> float:
    if project_ns or statistic in ("capacity", "dist_ns"):
        proj = project_nonsignaling(p)
        if statistic == "dist_ns":
            return proj.distance
        p = proj.nearest
    if statistic == "i3":
        return i3(p).value
    if statistic == "i2":
        return i2(p).value
    if statistic == "dist_local":
        return distance_to_local_polytope(p).distance
    return nonlocal_capacity_asym(p, tol=tol).value


def bootstrap_uncertainty(
    c: CountsRecord,
    statistic: str,
    n: int,
    seed: int,
    project_ns: bool | None = None,
    tol: float = 1e-6,
) -> Interval:
    """Poisson bootstrap of a statistic of the counts.

    Each cell is redrawn from a Poisson law with the observed count as mean;
    the background is held fixed. The interval is the bootstrap mean with two
    sample standard deviations. ``project_ns`` defaults to projecting for
    every statistic except the Bell parameters.
    """
    statistic = statistic.lower()
    if statistic not in BOOTSTRAP_STATISTICS:
        raise InvalidParameter(f"unknown statistic {statistic!r}")
    if n < 2:
        raise InvalidParameter("need at least two resamples")
    if n < 100:
        logger.warning("bootstrap with n=%d < 100 resamples gives unreliable intervals", n)
    if project_ns is None:
        project_ns = statistic not in ("i2", "i3")
    rng = np.random.default_rng(seed)
    resampled = rng.poisson(c.counts, size=(n,) + c.dims.shape).astype(float)
    if c.background is not None:
        resampled = np.clip(resampled - c.background, 0.0, None)
    totals = resampled.sum(axis=(-2, -1))
    ok = np.all(totals > 0, axis=(-2, -1))
    values = []
    if statistic == "i3" and not project_ns and c.dims == CGLMP_DIMS:
        if ok.any():
            values = list(i3_signed_batch(normalize_signal(resampled[ok])))
            values = [abs(v) for v in values]
    else:
        for k in np.flatnonzero(ok):
            try:
                p = BehaviorTable(c.dims, normalize_signal(resampled[k]))
                values.append(_statistic(p, statistic, project_ns, tol))
            except NonlocalityError as exc:
                logger.debug("resample %d failed: %s", k, exc)
    n_failed = n - len(values)
    if n_failed > MAX_FAILURE_RATE * n:
        raise BootstrapFailure(f"{n_failed} of {n} resamples failed")
    values = np.asarray(values)
    return Interval(float(values.mean()), float(2.0 * values.std(ddof=1)), n=n, n_failed=n_failed)


_BOOTSTRAP_COLUMN = {
    "i3": ("i3", "i3_hw"),
    "dist_local": ("dist_local", "dist_local_ns_hw"),
    "dist_ns": ("dist_ns", "dist_ns_hw"),
    "capacity": ("capacity", "capacity_ns_hw"),
}


def _sweep_point(args):
    gamma, cfg, seed_seq = args
    rng = np.random.default_rng(seed_seq)
    model = born_behavior(QutritModel(gamma, cfg.lam))
    if cfg.counts_per_block is not None:
        counts = sample_counts(model, cfg.counts_per_block, rng)
        p = normalize_counts(counts)
    else:
        counts, p = None, model
    measured = measure_behavior(p, cfg.measures, cfg.tol)
    row = {"gamma": gamma}
    row.update({col: measured.get(col) for col in RESULT_COLUMNS[1:]})
    if cfg.n_bootstrap and counts is not None:
        for measure in cfg.measures:
            if measure not in _BOOTSTRAP_COLUMN:
                continue
            statistic, column = _BOOTSTRAP_COLUMN[measure]
            boot_seed = int(rng.integers(2**63))
            row[column] = bootstrap_uncertainty(counts, statistic, cfg.n_bootstrap, boot_seed, tol=cfg.tol).half_width
    return row


def sweep_columns(cfg: SweepConfig) -> list[str]:
    columns = list(RESULT_COLUMNS)
    if cfg.n_bootstrap:
        columns += [_BOOTSTRAP_COLUMN[m][1] for m in cfg.measures if m in _BOOTSTRAP_COLUMN]
    return columns


def run_sweep(cfg: SweepConfig) -> list[dict]:
    """One row per gamma, in grid order. Columns not requested are ``None``."""
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(cfg.gamma_grid))
    tasks = list(zip(cfg.gamma_grid, [cfg] * len(seeds), seeds))
    if cfg.n_jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.n_jobs) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]
    columns = sweep_columns(cfg)
    return [{col: row.get(col) for col in columns} for row in rows]


def provenance(cfg: SweepConfig) -> dict:
    return {
        "tool": "nonlocality",
        "version": __version__,
        "config": asdict(cfg),
        "tolerances": {"lp": LP_TOL, "capacity": cfg.tol, "log_floor": LOG_FLOOR},
        "columns": sweep_columns(cfg),
    }
