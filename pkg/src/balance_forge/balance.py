"""Weighted z-differences, weighted standardized differences and reports.

Every statistic takes the treated values ``x`` and control values ``y``
together with their group-scaled weights ``wx`` and ``wy`` (each summing to
one). Differences are always treated minus control.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import distributions
from .core import (
    CohortSample,
    Scale,
    ScaledWeights,
    fsum,
    sum_sq_weights,
    weighted_mean,
    weighted_variance,
)
from .errors import BalanceForgeError, DataError, NumericalError

REFERENCE_SLOPES = (1.0, 0.5)


class ZKind(str, enum.Enum):
    CONTINUOUS_MEAN = "continuous_mean"
    CONTINUOUS_VARIANCE = "continuous_variance"
    BINARY = "binary"
    ORDINAL = "ordinal"
    NOMINAL = "nominal"


@dataclass(frozen=True)
class ZResult:
    covariate: str
    kind: ZKind
    z: float
    components: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class SdResult:
    covariate: str
    sd: float
    pooled: bool = True


@dataclass(frozen=True)
class ReportRow:
    covariate: str
    scale: Scale
    kind: ZKind
    treated: dict[str, Any]
    control: dict[str, Any]
    z: ZResult | None = None
    sd: SdResult | None = None
    error: str | None = None


@dataclass(frozen=True)
class BalanceReport:
    rows: list[ReportRow]
    n_treated: int
    n_control: int
    method: str = ""

    @property
    def zs(self) -> list[float]:
        return [r.z.z for r in self.rows if r.z is not None]

    @property
    def mean_abs_z(self) -> float | None:
        zs = self.zs
        return fsum(np.abs(zs)) / len(zs) if zs else None

    @property
    def var_z(self) -> float | None:
        """Sample variance (``n - 1`` denominator) of the row z values."""
        zs = np.asarray(self.zs)
        if zs.size < 2:
            return None
        mean = fsum(zs) / zs.size
        return fsum((zs - mean) ** 2) / (zs.size - 1)


def _arrays(x, y, wx, wy):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    wx = np.asarray(wx, dtype=float)
    wy = np.asarray(wy, dtype=float)
    if x.shape != wx.shape or y.shape != wy.shape:
        raise DataError("each group needs one weight per value")
    if x.size == 0 or y.size == 0:
        raise DataError("both groups must be non-empty")
    return x, y, wx, wy


def _ratio(num: float, var: float, what: str) -> float:
    if not var > 0.0 or not math.isfinite(var):
        raise NumericalError(f"{what}: variance of the difference is {var!r}; statistic undefined")
    return num / math.sqrt(var)


def z_continuous_mean(x, y, wx, wy, name: str = "") -> ZResult:
    """Weighted z-difference of means with unpooled group variances."""
    x, y, wx, wy = _arrays(x, y, wx, wy)
    mx, my = weighted_mean(x, wx), weighted_mean(y, wy)
    vx, vy = weighted_variance(x, wx), weighted_variance(y, wy)
    sx, sy = sum_sq_weights(wx), sum_sq_weights(wy)
    z = _ratio(mx - my, vx * sx + vy * sy, f"{name or 'covariate'} (means): both groups constant")
    return ZResult(name, ZKind.CONTINUOUS_MEAN, z, {
        "mean_treated": mx, "mean_control": my,
        "var_treated": vx, "var_control": vy,
        "sum_sq_w_treated": sx, "sum_sq_w_control": sy,
    })


def pooled_variance(x, y, wx, wy) -> float:
    """Average of the two weighted group variances."""
    return 0.5 * (weighted_variance(x, wx) + weighted_variance(y, wy))


def z_continuous_mean_pooled(x, y, wx, wy, name: str = "") -> ZResult:
    """Pooled-variance form; equals ``sd / sqrt(sum wx^2 + sum wy^2)``."""
    x, y, wx, wy = _arrays(x, y, wx, wy)
    mx, my = weighted_mean(x, wx), weighted_mean(y, wy)
    vp = pooled_variance(x, y, wx, wy)
    s = sum_sq_weights(wx) + sum_sq_weights(wy)
    z = _ratio(mx - my, vp * s, f"{name or 'covariate'}: zero pooled variance")
    return ZResult(name, ZKind.CONTINUOUS_MEAN, z, {
        "mean_treated": mx, "mean_control": my, "pooled_var": vp, "sum_sq_w": s,
    })


def z_continuous_variance(x, y, wx, wy, name: str = "") -> ZResult:
    """Weighted z-difference of variances.

    Each group is centred at its weighted mean; the variance of each
    weighted variance is estimated from the weighted variance of the squared
    centred values.
    """
    x, y, wx, wy = _arrays(x, y, wx, wy)
    parts = {}
    var_terms = []
    for label, v, w in (("treated", x, wx), ("control", y, wy)):
        s2 = sum_sq_weights(w)
        centred = v - weighted_mean(v, w)
        var = weighted_variance(v, w)
        var_sq = weighted_variance(centred * centred, w)
        parts[f"var_{label}"] = var
        parts[f"var_of_sq_{label}"] = var_sq
        parts[f"sum_sq_w_{label}"] = s2
        var_terms.append(s2 / (1.0 - s2) ** 2 * var_sq)
    z = _ratio(parts["var_treated"] - parts["var_control"], var_terms[0] + var_terms[1],
               f"{name or 'covariate'} (variances): squared deviations constant in both groups")
    return ZResult(name, ZKind.CONTINUOUS_VARIANCE, z, parts)


def _check_binary(v: np.ndarray, label: str) -> None:
    if not np.all((v == 0) | (v == 1)):
        raise DataError(f"{label}: binary values must be 0 or 1")


def z_binary(x, y, wx, wy, name: str = "") -> ZResult:
    """Weighted z-difference of prevalences.

    The variance terms use the weighted prevalence of each group.
    """
    x, y, wx, wy = _arrays(x, y, wx, wy)
    _check_binary(x, name or "treated")
    _check_binary(y, name or "control")
    for label, v in (("treated", x), ("control", y)):
        if v.min() == v.max():
            raise NumericalError(f"{name or 'covariate'}: {label} group is constant ({int(v[0])}); zero variance")
    px, py = weighted_mean(x, wx), weighted_mean(y, wy)
    sx, sy = sum_sq_weights(wx), sum_sq_weights(wy)
    z = _ratio(px - py, sx * px * (1.0 - px) + sy * py * (1.0 - py), f"{name or 'covariate'} (binary)")
    return ZResult(name, ZKind.BINARY, z, {
        "prev_treated": px, "prev_control": py,
        "sum_sq_w_treated": sx, "sum_sq_w_control": sy,
    })


def midranks(values) -> np.ndarray:
    """Ranks 1..N with ties replaced by the average of their positions."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="mergesort")
    sorted_v = v[order]
    starts = np.flatnonzero(np.r_[True, sorted_v[1:] != sorted_v[:-1]])
    ends = np.r_[starts[1:], v.size]
    avg = (starts + ends + 1) / 2.0
    ranks = np.empty(v.size)
    ranks[order] = np.repeat(avg, ends - starts)
    return ranks


def z_ordinal(x, y, wx, wy, name: str = "") -> ZResult:
    """Weighted z-difference of mean pooled midranks.

    Ranks ignore the weights. Rank variance and the between-unit rank
    covariance are the exact permutation moments of the pooled midranks:
    ``var = mean((R - (N+1)/2)^2)`` and ``cov = -var / (N - 1)``.
    """
    x, y, wx, wy = _arrays(x, y, wx, wy)
    n, m = x.size, y.size
    N = n + m
    ranks = midranks(np.concatenate([x, y]))
    rx, ry = ranks[:n], ranks[n:]
    centre = (N + 1) / 2.0
    rank_var = fsum((ranks - centre) ** 2) / N
    if rank_var <= 0.0:
        raise NumericalError(f"{name or 'covariate'} (ordinal): all {N} values tied")
    rank_cov = -rank_var / (N - 1)
    mx, my = weighted_mean(rx, wx), weighted_mean(ry, wy)
    sx, sy = sum_sq_weights(wx), sum_sq_weights(wy)
    z = _ratio(mx - my, (sx + sy) * (rank_var - rank_cov), f"{name or 'covariate'} (ordinal)")
    return ZResult(name, ZKind.ORDINAL, z, {
        "mean_rank_treated": mx, "mean_rank_control": my,
        "rank_var": rank_var, "rank_cov": rank_cov,
        "sum_sq_w_treated": sx, "sum_sq_w_control": sy,
    })


def z_nominal(x, y, wx, wy, name: str = "", categories: Sequence[float] | None = None) -> ZResult:
    """Weighted chi-square for two weighted histograms, mapped to a z scale.

    ``z = Phi^-1(F(chi2, K - 1))``. Categories empty in both groups are
    dropped (with a warning) and the degrees of freedom reduced.
    """
    x, y, wx, wy = _arrays(x, y, wx, wy)
    cats = np.unique(np.concatenate([x, y])) if categories is None else np.asarray(categories, dtype=float)
    px, py, vx, vy, kept, dropped = [], [], [], [], [], []
    for k in cats:
        ix, iy = x == k, y == k
        sx = fsum(wx[ix] ** 2)
        sy = fsum(wy[iy] ** 2)
        if sx + sy == 0.0:
            dropped.append(float(k))
            continue
        kept.append(float(k))
        px.append(fsum(wx[ix]))
        py.append(fsum(wy[iy]))
        vx.append(sx)
        vy.append(sy)
    if dropped:
        warnings.warn(f"{name or 'covariate'}: categories {dropped} empty in both groups were dropped",
                      stacklevel=2)
    if len(kept) < 2:
        raise NumericalError(f"{name or 'covariate'} (nominal): need at least 2 observed categories, got {len(kept)}")
    terms = [(a - b) ** 2 / (c + d) for a, b, c, d in zip(px, py, vx, vy)]
    chi2 = math.fsum(terms)
    df = len(kept) - 1
    z, nudged = distributions.chisq_to_z(chi2, df)
    return ZResult(name, ZKind.NOMINAL, z, {
        "categories": kept, "dropped_categories": dropped,
        "p_treated": px, "p_control": py,
        "var_treated": vx, "var_control": vy,
        "chi2": chi2, "df": df, "cdf": distributions.chisq_cdf(chi2, df), "nudged": nudged,
    })


def sd_weighted_continuous(x, y, wx, wy, name: str = "") -> SdResult:
    x, y, wx, wy = _arrays(x, y, wx, wy)
    diff = weighted_mean(x, wx) - weighted_mean(y, wy)
    sd = _ratio(diff, pooled_variance(x, y, wx, wy), f"{name or 'covariate'}: zero pooled variance")
    return SdResult(name, sd, pooled=True)


def sd_weighted_binary(x, y, wx, wy, name: str = "") -> SdResult:
    x, y, wx, wy = _arrays(x, y, wx, wy)
    px, py = weighted_mean(x, wx), weighted_mean(y, wy)
    sd = _ratio(px - py, 0.5 * (px * (1.0 - px) + py * (1.0 - py)), f"{name or 'covariate'} (binary sd)")
    return SdResult(name, sd, pooled=True)


def _group_summary(values: np.ndarray, w: np.ndarray, scale: Scale, levels: Sequence[str]) -> dict[str, Any]:
    if scale is Scale.CONTINUOUS:
        out = {"mean": weighted_mean(values, w)}
        try:
            out["sd"] = math.sqrt(weighted_variance(values, w))
        except NumericalError:
            out["sd"] = None
        return out
    if scale is Scale.BINARY:
        return {"prevalence": weighted_mean(values, w)}
    codes = range(1, len(levels) + 1) if levels else np.unique(values)
    props = {}
    for code in codes:
        label = levels[int(code) - 1] if levels else str(int(code))
        props[label] = fsum(w[values == code])
    return {"proportions": props}


_BLOCK_ORDER = (ZKind.CONTINUOUS_MEAN, ZKind.BINARY, ZKind.ORDINAL, ZKind.NOMINAL, ZKind.CONTINUOUS_VARIANCE)

_KINDS_BY_SCALE = {
    Scale.CONTINUOUS: (ZKind.CONTINUOUS_MEAN, ZKind.CONTINUOUS_VARIANCE),
    Scale.BINARY: (ZKind.BINARY,),
    Scale.ORDINAL: (ZKind.ORDINAL,),
    Scale.NOMINAL: (ZKind.NOMINAL,),
}


def _evaluate(kind: ZKind, x, y, wx, wy, name, levels) -> tuple[ZResult, SdResult | None]:
    if kind is ZKind.CONTINUOUS_MEAN:
        return z_continuous_mean(x, y, wx, wy, name), sd_weighted_continuous(x, y, wx, wy, name)
    if kind is ZKind.CONTINUOUS_VARIANCE:
        return z_continuous_variance(x, y, wx, wy, name), None
    if kind is ZKind.BINARY:
        return z_binary(x, y, wx, wy, name), sd_weighted_binary(x, y, wx, wy, name)
    if kind is ZKind.ORDINAL:
        return z_ordinal(x, y, wx, wy, name), None
    cats = np.arange(1, len(levels) + 1) if levels else None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return z_nominal(x, y, wx, wy, name, categories=cats), None


def build_report(sample: CohortSample, w: ScaledWeights, method: str = "") -> BalanceReport:
    """One row per covariate and statistic, ordered like a classic balance table.

    Blocks: continuous means, binary, ordinal, nominal, continuous variances;
    declaration order within each block. A statistic that cannot be computed
    becomes a row with ``error`` set instead of aborting the report.
    """
    t = sample.treatment
    if not np.array_equal(np.asarray(w.treatment, dtype=bool), t):
        raise DataError("weights were scaled against a different treatment vector")
    wx, wy = w.w[t], w.w[~t]
    rows = []
    for kind in _BLOCK_ORDER:
        for cov in sample.covariates:
            if kind not in _KINDS_BY_SCALE[cov.scale]:
                continue
            x, y = cov.values[t], cov.values[~t]
            treated = _group_summary(x, wx, cov.scale, cov.levels)
            control = _group_summary(y, wy, cov.scale, cov.levels)
            try:
                z, sd = _evaluate(kind, x, y, wx, wy, cov.name, cov.levels)
                rows.append(ReportRow(cov.name, cov.scale, kind, treated, control, z, sd))
            except BalanceForgeError as exc:
                rows.append(ReportRow(cov.name, cov.scale, kind, treated, control, error=str(exc)))
    return BalanceReport(rows, sample.n, sample.m, method)


@dataclass(frozen=True)
class QQData:
    theoretical: np.ndarray
    ordered_z: np.ndarray
    reference_slopes: tuple[float, ...] = REFERENCE_SLOPES


def qq_data(zs: Sequence[float]) -> QQData:
    """Ordered z values against normal quantiles at ``(i - 0.5) / P``."""
    z = np.sort(np.asarray(zs, dtype=float))
    if z.size < 2:
        raise DataError(f"a Q-Q plot needs at least 2 z values, got {z.size}")
    P = z.size
    q = np.array([distributions.normal_quantile((i - 0.5) / P) for i in range(1, P + 1)])
    return QQData(q, z)
