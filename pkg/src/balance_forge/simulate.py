"""Monte Carlo experiments on the null behaviour of the balance measures.

Three sweeps are supported:

* ``size``: continuous N(0, 1) covariate, i.i.d. Bernoulli(1/2) group
  labels, matching weights, varying total sample size.
* ``weights``: as ``size`` but with uniform, matching and IPTW weights and a
  propensity generator whose variance is doubled.
* ``ratio``: Bernoulli(1/2) covariate, fixed total size, varying percentage
  of control units.

Propensity scores are drawn from group-specific Gaussians independently of
the covariate and clipped. Every replication draws from its own PCG64 stream
derived from ``(seed, experiment, grid value, replication)``, so results do
not depend on grid order or on the number of worker threads.
"""

from __future__ import annotations

import enum
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .balance import sd_weighted_binary, sd_weighted_continuous, z_binary, z_continuous_mean
from .core import scale_weights, sum_sq_weights
from .errors import DataError
from .propensity import WeightScheme, clip_ps, compute_weights

log = logging.getLogger(__name__)

THREADS_ENV = "BALANCE_FORGE_THREADS"
FOLDED_NORMAL_MEAN = math.sqrt(2.0 / math.pi)
MIN_GROUP_RATIO = 50


class Experiment(str, enum.Enum):
    SIZE = "size"
    WEIGHTS = "weights"
    RATIO = "ratio"


class CovariateKind(str, enum.Enum):
    CONTINUOUS_NORMAL = "continuous_normal"
    BINARY_BERNOULLI = "binary_bernoulli"


_EXPERIMENT_KEY = {Experiment.SIZE: 1, Experiment.WEIGHTS: 2, Experiment.RATIO: 3}


@dataclass(frozen=True)
class PsGenerator:
    mean_treated: float = 0.34
    mean_control: float = 0.30
    sd: float = 0.09
    clip: tuple[float, float] = (0.01, 0.99)

    def __post_init__(self):
        lo, hi = self.clip
        if not (0.0 < lo < hi < 1.0):
            raise DataError(f"clip bounds need 0 < lo < hi < 1, got {self.clip!r}")
        if not self.sd > 0.0:
            raise DataError(f"PS generator sd must be positive, got {self.sd!r}")

    def draw(self, rng: np.random.Generator, treatment: np.ndarray) -> np.ndarray:
        mean = np.where(treatment, self.mean_treated, self.mean_control)
        return clip_ps(mean + self.sd * rng.standard_normal(treatment.size), *self.clip)


@dataclass(frozen=True)
class SimulationSpec:
    experiment: Experiment
    grid: tuple[int, ...]
    replications: int = 2000
    seed: int = 42
    covariate_kind: CovariateKind = CovariateKind.CONTINUOUS_NORMAL
    schemes: tuple[WeightScheme, ...] = (WeightScheme.MATCHING,)
    ps: PsGenerator = field(default_factory=PsGenerator)
    n_total: int = 5000

    def __post_init__(self):
        object.__setattr__(self, "experiment", Experiment(self.experiment))
        object.__setattr__(self, "covariate_kind", CovariateKind(self.covariate_kind))
        object.__setattr__(self, "schemes", tuple(WeightScheme(s) for s in self.schemes))
        object.__setattr__(self, "grid", tuple(int(g) for g in self.grid))
        if self.replications < 1:
            raise DataError("replications must be >= 1")
        if not self.grid:
            raise DataError("grid must be non-empty")
        if not self.schemes:
            raise DataError("at least one weight scheme is required")
        if not 0 <= self.seed < 2**64:
            raise DataError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class SummaryRow:
    grid_value: int
    scheme: WeightScheme
    measure: str
    mean_abs: float
    q95_abs: float
    mc_se: float
    replications: int
    # mean over replications of sqrt(2/pi) * sqrt(sum wx^2 + sum wy^2): the
    # folded-normal reference for |sd|; None for z rows
    folded_normal_ref: float | None = None
    mean_n_treated: float = float("nan")
    redraws: int = 0


@dataclass(frozen=True)
class SimulationResult:
    spec: SimulationSpec
    rows: list[SummaryRow]
    skipped: list[tuple[int, str]] = field(default_factory=list)

    def row(self, grid_value: int, scheme: WeightScheme | str, measure: str) -> SummaryRow:
        scheme = WeightScheme(scheme)
        for r in self.rows:
            if r.grid_value == grid_value and r.scheme is scheme and r.measure == measure:
                return r
        raise KeyError((grid_value, scheme, measure))


def size_spec(grid=(100, 200, 500, 1000, 2000, 5000), replications=2000, seed=42, **kw) -> SimulationSpec:
    return SimulationSpec(Experiment.SIZE, tuple(grid), replications, seed, **kw)


def weight_spec(grid=(100, 200, 500, 1000, 2000, 5000), replications=2000, seed=42, **kw) -> SimulationSpec:
    kw.setdefault("schemes", (WeightScheme.UNIFORM, WeightScheme.MATCHING, WeightScheme.IPTW))
    kw.setdefault("ps", PsGenerator(sd=0.09 * math.sqrt(2.0)))
    return SimulationSpec(Experiment.WEIGHTS, tuple(grid), replications, seed, **kw)


def ratio_spec(grid=(1, 2, 5, 8, 20, 50, 80, 92, 95, 98, 99), replications=2000, seed=42, **kw) -> SimulationSpec:
    kw.setdefault("covariate_kind", CovariateKind.BINARY_BERNOULLI)
    return SimulationSpec(Experiment.RATIO, tuple(grid), replications, seed, **kw)


FULL_GRIDS = {
    Experiment.SIZE: tuple(range(100, 10001, 100)),
    Experiment.WEIGHTS: tuple(range(100, 10001, 100)),
    Experiment.RATIO: tuple(range(1, 100)),
}
FULL_REPLICATIONS = 5000


def _rng(spec: SimulationSpec, grid_value: int, rep: int) -> np.random.Generator:
    ss = np.random.SeedSequence(spec.seed, spawn_key=(_EXPERIMENT_KEY[spec.experiment], grid_value, rep))
    return np.random.Generator(np.random.PCG64(ss))


def _draw_groups(spec: SimulationSpec, grid_value: int, rng: np.random.Generator) -> tuple[np.ndarray, int]:
    if spec.experiment is Experiment.RATIO:
        n_control = round(grid_value / 100.0 * spec.n_total)
        t = np.ones(spec.n_total, dtype=bool)
        t[:n_control] = False
        return t, 0
    redraws = 0
    while True:
        t = rng.random(grid_value) < 0.5
        n = int(t.sum())
        if 2 <= n <= grid_value - 2:
            return t, redraws
        redraws += 1


def _replicate(spec: SimulationSpec, grid_value: int, rep: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, int, int]:
    """One data set; returns per-scheme (z, sd, sum of squared weights)."""
    rng = _rng(spec, grid_value, rep)
    t, redraws = _draw_groups(spec, grid_value, rng)
    N = t.size
    if spec.covariate_kind is CovariateKind.CONTINUOUS_NORMAL:
        values = rng.standard_normal(N)
        z_fn, sd_fn = z_continuous_mean, sd_weighted_continuous
    else:
        values = (rng.random(N) < 0.5).astype(float)
        z_fn, sd_fn = z_binary, sd_weighted_binary
        # a constant group has undefined statistics; redraw the covariate
        while values[t].min() == values[t].max() or values[~t].min() == values[~t].max():
            values = (rng.random(N) < 0.5).astype(float)
            redraws += 1
    ps = spec.ps.draw(rng, t)
    x, y = values[t], values[~t]
    k = len(spec.schemes)
    zs, sds, ssq = np.empty(k), np.empty(k), np.empty(k)
    for i, scheme in enumerate(spec.schemes):
        w = scale_weights(compute_weights(ps, t, scheme), t)
        wx, wy = w.treated, w.control
        zs[i] = z_fn(x, y, wx, wy).z
        sds[i] = sd_fn(x, y, wx, wy).sd
        ssq[i] = sum_sq_weights(wx) + sum_sq_weights(wy)
    return zs, sds, ssq, int(t.sum()), redraws


def _run_block(spec: SimulationSpec, grid_value: int, reps: range):
    out = [_replicate(spec, grid_value, r) for r in reps]
    return (np.array([o[0] for o in out]), np.array([o[1] for o in out]), np.array([o[2] for o in out]),
            np.array([o[3] for o in out]), sum(o[4] for o in out))


def worker_count(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def _validate_grid(spec: SimulationSpec) -> tuple[list[int], list[tuple[int, str]]]:
    keep, skipped = [], []
    for g in spec.grid:
        if spec.experiment is Experiment.RATIO:
            if not 0 < g < 100:
                raise DataError(f"ratio grid values are percentages in 1..99, got {g}")
            n_control = round(g / 100.0 * spec.n_total)
            smallest = min(n_control, spec.n_total - n_control)
            if smallest < MIN_GROUP_RATIO:
                msg = f"{g}%: smallest group has {smallest} < {MIN_GROUP_RATIO} units"
                log.warning("skipping grid point %s", msg)
                skipped.append((g, msg))
                continue
        elif g < 4:
            raise DataError(f"sample size grid values must be >= 4, got {g}")
        keep.append(g)
    if len(set(keep)) != len(keep):
        raise DataError("grid values must be distinct")
    return keep, skipped


def _summarise(values: np.ndarray) -> tuple[float, float, float]:
    a = np.abs(values)
    sd = float(a.std(ddof=1)) if a.size > 1 else 0.0
    return float(a.mean()), float(np.quantile(a, 0.95)), sd / math.sqrt(a.size)


def run(spec: SimulationSpec, threads: int | None = None, block_size: int = 250) -> SimulationResult:
    """Run every grid point of ``spec``; output is independent of ``threads``."""
    grid, skipped = _validate_grid(spec)
    tasks = [(g, range(s, min(s + block_size, spec.replications)))
             for g in grid for s in range(0, spec.replications, block_size)]
    n_workers = worker_count(threads)
    if n_workers == 1:
        blocks = [_run_block(spec, g, reps) for g, reps in tasks]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            blocks = list(pool.map(lambda task: _run_block(spec, *task), tasks))

    rows = []
    for g in grid:
        parts = [b for (gv, _), b in zip(tasks, blocks) if gv == g]
        zs = np.concatenate([p[0] for p in parts])
        sds = np.concatenate([p[1] for p in parts])
        ssq = np.concatenate([p[2] for p in parts])
        n_treated = float(np.concatenate([p[3] for p in parts]).mean())
        redraws = sum(p[4] for p in parts)
        if redraws:
            log.info("grid point %s: %d redraws for degenerate groups", g, redraws)
        for i, scheme in enumerate(spec.schemes):
            for measure, vals in (("z", zs[:, i]), ("sd", sds[:, i])):
                mean_abs, q95, se = _summarise(vals)
                ref = float(np.mean(FOLDED_NORMAL_MEAN * np.sqrt(ssq[:, i]))) if measure == "sd" else None
                rows.append(SummaryRow(g, scheme, measure, mean_abs, q95, se, int(vals.size),
                                       ref, n_treated, redraws))
    return SimulationResult(spec, rows, skipped)


def run_size_sweep(spec: SimulationSpec, threads: int | None = None) -> SimulationResult:
    if spec.experiment is not Experiment.SIZE:
        spec = replace(spec, experiment=Experiment.SIZE)
    if spec.covariate_kind is not CovariateKind.CONTINUOUS_NORMAL:
        raise DataError("the size sweep uses a continuous normal covariate")
    return run(spec, threads)


def run_weight_sweep(spec: SimulationSpec, threads: int | None = None) -> SimulationResult:
    if spec.experiment is not Experiment.WEIGHTS:
        spec = replace(spec, experiment=Experiment.WEIGHTS)
    if spec.covariate_kind is not CovariateKind.CONTINUOUS_NORMAL:
        raise DataError("the weight sweep uses a continuous normal covariate")
    return run(spec, threads)


def run_ratio_sweep(spec: SimulationSpec, threads: int | None = None) -> SimulationResult:
    if spec.experiment is not Experiment.RATIO:
        spec = replace(spec, experiment=Experiment.RATIO)
    if spec.covariate_kind is not CovariateKind.BINARY_BERNOULLI:
        raise DataError("the ratio sweep uses a binary covariate")
    return run(spec, threads)


def experiment_spec(experiment: Experiment | str, grid: Sequence[int] | None = None,
                    replications: int | None = None, seed: int = 42, full_grid: bool = False,
                    clip: tuple[float, float] = (0.01, 0.99), n_total: int = 5000) -> SimulationSpec:
    """Default spec for an experiment, with optional overrides."""
    experiment = Experiment(experiment)
    kw = {}
    if grid is None and full_grid:
        grid = FULL_GRIDS[experiment]
    if grid is not None:
        kw["grid"] = tuple(grid)
    if replications is None and full_grid:
        replications = FULL_REPLICATIONS
    if replications is not None:
        kw["replications"] = replications
    if experiment is Experiment.SIZE:
        return size_spec(seed=seed, ps=PsGenerator(clip=clip), **kw)
    if experiment is Experiment.WEIGHTS:
        return weight_spec(seed=seed, ps=PsGenerator(sd=0.09 * math.sqrt(2.0), clip=clip), **kw)
    return ratio_spec(seed=seed, ps=PsGenerator(clip=clip), n_total=n_total, **kw)
