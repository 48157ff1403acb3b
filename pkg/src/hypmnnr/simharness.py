"""Replicated Poisson-pattern experiments with reproducible seeding."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .analytics import PathlossModel
from .errors import InvalidArgumentError
from .marks import ControlSet, MarkModel
from .mnnr import mnnr_partition
from .pointprocess import PlanarMetric, Window, sample_ppp

Z95 = 1.96


@dataclass(frozen=True)
class EstimateSummary:
    mean: float
    stderr: float
    replicates: int
    ci95: tuple[float, float]

    def covers(self, value: float, k: float = 3.0) -> bool:
        """True if ``value`` lies within ``k`` standard errors of the mean."""
        return abs(value - self.mean) <= k * self.stderr


def summarize(values: Sequence[float]) -> EstimateSummary:
    """Sample mean, standard error and normal 95% interval."""
    x = np.asarray(values, dtype=float).ravel()
    if x.size < 2:
        raise InvalidArgumentError(f"need at least two values to summarize, got {x.size}")
    mean = float(x.mean())
    stderr = float(x.std(ddof=1) / math.sqrt(x.size))
    return EstimateSummary(mean, stderr, int(x.size), (mean - Z95 * stderr, mean + Z95 * stderr))


@dataclass(frozen=True)
class ExperimentConfig:
    lam: float
    window: Window
    marks: MarkModel
    control: ControlSet
    replicates: int = 400
    master_seed: int = 0
    boundary: str | None = None
    pathloss: PathlossModel | None = None
    workers: int = 1
    nn_method: str = "auto"
    guard: float = 0.0

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidArgumentError(f"intensity must be positive, got {self.lam}")
        if self.replicates < 1:
            raise InvalidArgumentError(f"replicates must be at least 1, got {self.replicates}")
        if self.workers < 1:
            raise InvalidArgumentError(f"workers must be at least 1, got {self.workers}")
        if self.guard < 0 or 2 * self.guard >= min(self.window.width, self.window.height):
            raise InvalidArgumentError(f"guard margin {self.guard} does not leave an interior")
        if self.master_seed < 0:
            raise InvalidArgumentError("master seed must be nonnegative")
        if self.lam * self.window.area < 10:
            warnings.warn(f"expected {self.lam * self.window.area:.3g} atoms per pattern; "
                          "pair statistics will be very noisy", RuntimeWarning, stacklevel=2)

    @property
    def metric(self) -> PlanarMetric:
        return PlanarMetric.for_window(self.window, self.boundary)


def replicate_rng(master_seed: int, i: int) -> np.random.Generator:
    """Generator for replicate ``i``; depends only on ``(master_seed, i)``."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(i)]))


def _replicate(cfg: ExperimentConfig, i: int, radii: tuple[float, ...]) -> tuple:
    rng = replicate_rng(cfg.master_seed, i)
    pattern = sample_ppp(cfg.lam, cfg.window, cfg.marks, rng, seed=cfg.master_seed)
    metric = cfg.metric
    part = mnnr_partition(pattern, cfg.control, metric, cfg.nn_method)
    paired = part.paired_mask()
    if cfg.guard > 0:
        # border atoms still act as neighbors but are not counted
        x, y = pattern.xy[:, 0], pattern.xy[:, 1]
        g = cfg.guard
        inner = (x >= g) & (x <= cfg.window.width - g) & (y >= g) & (y <= cfg.window.height - g)
    else:
        inner = np.ones(len(pattern), dtype=bool)
    n_counted = int(inner.sum())
    n_paired = int((paired & inner).sum())
    singles = pairs = ()
    if radii:
        pl = cfg.pathloss
        r_max = 0.5 * min(cfg.window.width, cfg.window.height)
        dist = metric.distance(np.asarray(cfg.window.center), pattern.xy) if len(pattern) else np.zeros(0)
        dist = np.atleast_1d(dist)
        singles, pairs = [], []
        for R in radii:
            g = PathlossModel(pl.beta, R).gain(dist, r_max)
            singles.append(float(g[~paired].sum()))
            pairs.append(float(g[paired].sum()))
    return n_counted, n_paired, tuple(singles), tuple(pairs)


def _run(cfg: ExperimentConfig, radii: tuple[float, ...] = ()) -> list[tuple]:
    idx = range(cfg.replicates)
    if cfg.workers == 1 or cfg.replicates == 1:
        return [_replicate(cfg, i, radii) for i in idx]
    chunk = max(1, cfg.replicates // (4 * cfg.workers))
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        # map keeps replicate order, so aggregation does not depend on scheduling
        return list(pool.map(_replicate, [cfg] * cfg.replicates, idx, [radii] * cfg.replicates,
                             chunksize=chunk))


def run_pair_fraction(cfg: ExperimentConfig) -> EstimateSummary:
    """Mean over replicates of the per-pattern fraction of atoms in pairs.

    Empty patterns carry no ratio and are left out of the mean and of the
    replicate count. With ``guard > 0`` only atoms at least that far from
    the window border are counted (useful with the open boundary).
    """
    rows = _run(cfg)
    ratios = [p / n for n, p, _, _ in rows if n > 0]
    if not ratios:
        raise InvalidArgumentError("every replicate produced an empty pattern")
    if len(ratios) == 1:
        raise InvalidArgumentError("only one replicate produced a nonempty pattern")
    return summarize(ratios)


def pair_fraction_ratio_of_means(cfg: ExperimentConfig) -> float:
    """Total paired atoms over total atoms; a sensitivity check on the ratio estimator."""
    rows = _run(cfg)
    n = sum(r[0] for r in rows)
    if n == 0:
        raise InvalidArgumentError("every replicate produced an empty pattern")
    return sum(r[1] for r in rows) / n


def run_interference_sweep(cfg: ExperimentConfig, radii: Sequence[float]
                           ) -> list[tuple[EstimateSummary, EstimateSummary]]:
    """Interference at the window center from singles and from paired atoms.

    Distances use the configured metric (the torus by default); atoms count
    when ``R < dist <= half the shorter window side``. All radii are
    evaluated on the same patterns.
    """
    if cfg.pathloss is None:
        raise InvalidArgumentError("interference needs a pathloss model")
    radii = tuple(float(r) for r in radii)
    if not radii:
        raise InvalidArgumentError("need at least one exclusion radius")
    for R in radii:
        PathlossModel(cfg.pathloss.beta, R)
    rows = _run(cfg, radii)
    out = []
    for k in range(len(radii)):
        out.append((summarize([r[2][k] for r in rows]), summarize([r[3][k] for r in rows])))
    return out


def run_interference(cfg: ExperimentConfig) -> tuple[EstimateSummary, EstimateSummary]:
    if cfg.pathloss is None:
        raise InvalidArgumentError("interference needs a pathloss model")
    return run_interference_sweep(cfg, [cfg.pathloss.excl_radius])[0]
