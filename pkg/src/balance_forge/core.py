"""Domain types, per-group weight scaling and weighted moments.

All sums go through :func:`math.fsum`, which is correctly rounded and
therefore independent of summation order. Weighted moments take one group's
slice of :class:`ScaledWeights` (weights summing to one).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataError, NumericalError

SCALE_TOLERANCE = 1e-12


class Scale(str, enum.Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"
    ORDINAL = "ordinal"
    NOMINAL = "nominal"


@dataclass(frozen=True)
class CovariateColumn:
    """One named covariate.

    ``levels`` holds the declared level labels for ordinal (in order) and
    nominal (in code order) covariates; the values are then integer codes
    ``1..len(levels)``.
    """

    name: str
    scale: Scale
    values: np.ndarray
    levels: tuple[str, ...] = ()

    def __post_init__(self):
        scale = Scale(self.scale)
        object.__setattr__(self, "scale", scale)
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise DataError(f"covariate {self.name!r}: values must be one-dimensional")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise DataError(f"covariate {self.name!r}: missing or non-finite value at row {bad}")
        if scale is Scale.BINARY and not np.all((values == 0) | (values == 1)):
            raise DataError(f"covariate {self.name!r}: binary values must be 0 or 1")
        if scale in (Scale.ORDINAL, Scale.NOMINAL):
            if not np.all(values == np.round(values)):
                raise DataError(f"covariate {self.name!r}: {scale.value} codes must be integers")
            if self.levels:
                k = len(self.levels)
                if values.size and (values.min() < 1 or values.max() > k):
                    raise DataError(f"covariate {self.name!r}: codes must lie in 1..{k}")
            if scale is Scale.NOMINAL and self.levels and len(self.levels) < 2:
                raise DataError(f"covariate {self.name!r}: nominal covariates need K >= 2 categories")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "levels", tuple(self.levels))


@dataclass(frozen=True)
class CohortSample:
    treatment: np.ndarray
    covariates: list[CovariateColumn] = field(default_factory=list)
    raw_weights: np.ndarray | None = None
    ps: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.treatment)
        if t.ndim != 1 or not np.all((t == 0) | (t == 1)):
            raise DataError("treatment must be a one-dimensional 0/1 indicator")
        t = t.astype(bool)
        t.setflags(write=False)
        object.__setattr__(self, "treatment", t)
        n, m = int(t.sum()), int((~t).sum())
        if n < 2 or m < 2:
            raise DataError(f"each group needs at least 2 units (treated={n}, control={m})")
        names = [c.name for c in self.covariates]
        if len(set(names)) != len(names):
            raise DataError("covariate names must be unique")
        for col in self.covariates:
            if col.values.shape[0] != t.shape[0]:
                raise DataError(f"covariate {col.name!r} has {col.values.shape[0]} values, expected {t.shape[0]}")
        for attr in ("raw_weights", "ps"):
            arr = getattr(self, attr)
            if arr is not None:
                arr = np.asarray(arr, dtype=float)
                if arr.shape != t.shape:
                    raise DataError(f"{attr} must have one entry per unit")
                object.__setattr__(self, attr, arr)

    @property
    def N(self) -> int:
        return int(self.treatment.shape[0])

    @property
    def n(self) -> int:
        return int(self.treatment.sum())

    @property
    def m(self) -> int:
        return self.N - self.n

    def covariate(self, name: str) -> CovariateColumn:
        for col in self.covariates:
            if col.name == name:
                return col
        raise KeyError(name)


@dataclass(frozen=True)
class ScaledWeights:
    """Weights normalised to sum to one within each treatment group."""

    w: np.ndarray
    treatment: np.ndarray

    @property
    def treated(self) -> np.ndarray:
        return self.w[self.treatment]

    @property
    def control(self) -> np.ndarray:
        return self.w[~self.treatment]


def fsum(values) -> float:
    return math.fsum(np.asarray(values, dtype=float).ravel().tolist())


def scale_weights(raw: Sequence[float], treatment: Sequence[int]) -> ScaledWeights:
    """Divide each group's weights by the group total.

    Raises :class:`DataError` for a non-positive or non-finite weight (naming
    the first offending index) or an empty group.
    """
    w = np.asarray(raw, dtype=float)
    t = np.asarray(treatment).astype(bool)
    if w.shape != t.shape or w.ndim != 1:
        raise DataError("weights and treatment must be one-dimensional and of equal length")
    bad = np.flatnonzero(~(np.isfinite(w) & (w > 0)))
    if bad.size:
        i = int(bad[0])
        raise DataError(f"weights must be positive and finite; got {w[i]!r} at index {i}")
    if not t.any() or t.all():
        raise DataError("both treatment groups must be non-empty")
    out = np.empty_like(w)
    for mask in (t, ~t):
        out[mask] = w[mask] / fsum(w[mask])
    out.setflags(write=False)
    t = t.copy()
    t.setflags(write=False)
    return ScaledWeights(out, t)


def uniform_weights(treatment: Sequence[int]) -> ScaledWeights:
    return scale_weights(np.ones(len(treatment)), treatment)


def _check_pair(values, w) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(values, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.shape != w.shape:
        raise DataError(f"length mismatch: {x.shape[0] if x.ndim else 0} values vs {w.shape[0] if w.ndim else 0} weights")
    return x, w


def weighted_mean(values: Sequence[float], w: Sequence[float]) -> float:
    """Return ``sum(w_i * x_i)`` for weights already scaled to sum to one.

    With all-equal weights this is ``fsum(x) / n``, so the uniform case is
    bit-identical to the arithmetic mean.
    """
    x, w = _check_pair(values, w)
    if x.size and np.all(w == w[0]):
        return fsum(x) / x.size
    return fsum(w * x)


def sum_sq_weights(w: Sequence[float]) -> float:
    w = np.asarray(w, dtype=float)
    return fsum(w * w)


def weighted_variance(values: Sequence[float], w: Sequence[float]) -> float:
    """Weighted variance ``sum(w_i (x_i - xbar_w)^2) / (1 - sum(w_i^2))``.

    Requires ``sum(w_i^2) < 1``, i.e. at least two units carrying weight.
    For uniform weights this is the usual ``n - 1`` sample variance.
    """
    x, w = _check_pair(values, w)
    s2 = sum_sq_weights(w)
    if not s2 < 1.0 - SCALE_TOLERANCE:
        raise NumericalError(f"degenerate group: sum of squared weights is {s2!r} (need < 1)")
    xbar = weighted_mean(x, w)
    d = x - xbar
    return fsum(w * d * d) / (1.0 - s2)
