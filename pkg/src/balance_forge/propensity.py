"""Propensity score estimation and weight construction.

``fit_logistic`` is a plain IRLS (Newton-Raphson) fit of a main-effects
logistic model with step halving. ``compute_weights`` turns propensity
scores into raw weights; callers pass them through
:func:`balance_forge.core.scale_weights`.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import CohortSample, Scale
from .errors import DataError, NumericalError, SingularDesignError

log = logging.getLogger(__name__)

DEVIANCE_TOL = 1e-10
MAX_ITER = 50
SEPARATION_EPS = 1e-10


class WeightScheme(str, enum.Enum):
    UNIFORM = "uniform"
    IPTW = "iptw"
    MATCHING = "matching"
    OVERLAP = "overlap"
    ATT = "att"
    ATC = "atc"


@dataclass(frozen=True)
class PropensityModel:
    coefficients: np.ndarray
    fitted_ps: np.ndarray
    converged: bool
    iterations: int
    deviance: float
    separated: bool = False
    max_score: float = float("nan")
    diagnostic: str = ""
    column_names: tuple[str, ...] = ()


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _deviance(t: np.ndarray, eta: np.ndarray) -> float:
    # -2 log-likelihood via log1p(exp(.)) in a stable form
    return float(2.0 * np.sum(np.logaddexp(0.0, eta) - t * eta))


def _first_dependent_column(X: np.ndarray) -> int | None:
    r = np.linalg.qr(X, mode="r")
    diag = np.abs(np.diag(r))
    scale = max(float(diag.max(initial=0.0)), 1.0)
    tol = scale * max(X.shape) * np.finfo(float).eps * 1e3
    small = np.flatnonzero(diag <= tol)
    return int(small[0]) if small.size else None


def fit_logistic(design, treatment, column_names: Sequence[str] = ()) -> PropensityModel:
    """Maximum-likelihood logistic regression by IRLS.

    ``design`` must already contain the intercept column. Iteration stops
    when the relative deviance change drops to ``1e-10`` or after 50
    iterations; a deviance increase triggers step halving. Fits with fitted
    probabilities outside ``[1e-10, 1 - 1e-10]`` are flagged as separated
    and never reported as converged.
    """
    X = np.asarray(design, dtype=float)
    t = np.asarray(treatment, dtype=float)
    if X.ndim != 2 or X.shape[0] != t.shape[0]:
        raise DataError("design must be an N x (P+1) matrix matching the treatment length")
    if not np.all((t == 0) | (t == 1)):
        raise DataError("treatment must be 0/1")
    if t.min() == t.max():
        raise DataError("both treatment groups must be non-empty")
    names = tuple(column_names)
    if X.shape[0] < X.shape[1]:
        raise SingularDesignError(X.shape[0], names[X.shape[0]] if len(names) > X.shape[0] else None)
    dep = _first_dependent_column(X)
    if dep is not None:
        raise SingularDesignError(dep, names[dep] if dep < len(names) else None)

    beta = np.zeros(X.shape[1])
    eta = X @ beta
    dev = _deviance(t, eta)
    converged = False
    it = 0
    for it in range(1, MAX_ITER + 1):
        p = _sigmoid(eta)
        wt = np.maximum(p * (1.0 - p), 1e-300)
        score = X.T @ (t - p)
        info = X.T @ (X * wt[:, None])
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            log.debug("IRLS information matrix singular at iteration %d", it)
            break
        if not np.all(np.isfinite(step)):
            break
        new_beta = beta + step
        new_eta = X @ new_beta
        new_dev = _deviance(t, new_eta)
        halvings = 0
        while not (new_dev <= dev) and halvings < 30:
            step *= 0.5
            new_beta = beta + step
            new_eta = X @ new_beta
            new_dev = _deviance(t, new_eta)
            halvings += 1
        rel = abs(dev - new_dev) / (abs(new_dev) + 0.1)
        beta, eta, dev = new_beta, new_eta, new_dev
        if rel <= DEVIANCE_TOL:
            converged = True
            break

    ps = _sigmoid(eta)
    max_score = float(np.max(np.abs(X.T @ (t - ps))))
    separated = bool(np.any(ps < SEPARATION_EPS) or np.any(ps > 1.0 - SEPARATION_EPS))
    diagnostic = ""
    if separated:
        k = int(np.sum((ps < SEPARATION_EPS) | (ps > 1.0 - SEPARATION_EPS)))
        diagnostic = (f"perfect or quasi-complete separation: {k} fitted probabilities outside "
                      f"[{SEPARATION_EPS:g}, 1-{SEPARATION_EPS:g}], coefficients diverging")
        converged = False
    elif not converged:
        diagnostic = f"IRLS did not converge in {MAX_ITER} iterations"
    return PropensityModel(
        coefficients=beta,
        fitted_ps=ps,
        converged=converged,
        iterations=it,
        deviance=dev,
        separated=separated,
        max_score=max_score,
        diagnostic=diagnostic,
        column_names=names,
    )


def design_matrix(sample: CohortSample) -> tuple[np.ndarray, list[str]]:
    """Main-effects design with intercept.

    Continuous, binary and ordinal covariates enter as their (coded) values;
    nominal covariates are one-hot encoded against their first level.
    """
    cols = [np.ones(sample.N)]
    names = ["(intercept)"]
    for cov in sample.covariates:
        if cov.scale is Scale.NOMINAL:
            codes = np.unique(cov.values) if not cov.levels else np.arange(1, len(cov.levels) + 1)
            for code in codes[1:]:
                cols.append((cov.values == code).astype(float))
                label = cov.levels[int(code) - 1] if cov.levels else str(int(code))
                names.append(f"{cov.name}[{label}]")
        else:
            cols.append(cov.values.astype(float))
            names.append(cov.name)
    return np.column_stack(cols), names


def fit_propensity(sample: CohortSample) -> PropensityModel:
    X, names = design_matrix(sample)
    return fit_logistic(X, sample.treatment.astype(float), names)


def compute_weights(ps, treatment, scheme: WeightScheme | str) -> np.ndarray:
    """Raw (unscaled) weights for ``scheme`` given propensity scores ``ps``."""
    scheme = WeightScheme(scheme)
    e = np.asarray(ps, dtype=float)
    t = np.asarray(treatment).astype(bool)
    if e.shape != t.shape:
        raise DataError("ps and treatment must have equal length")
    bad = np.flatnonzero(~((e > 0.0) & (e < 1.0)))
    if bad.size:
        i = int(bad[0])
        raise DataError(f"propensity scores must lie strictly inside (0, 1); got {e[i]!r} at index {i}")
    if scheme is WeightScheme.UNIFORM:
        return np.ones_like(e)
    if scheme is WeightScheme.IPTW:
        return np.where(t, 1.0 / e, 1.0 / (1.0 - e))
    if scheme is WeightScheme.MATCHING:
        low = np.minimum(e, 1.0 - e)
        return np.where(t, low / e, low / (1.0 - e))
    if scheme is WeightScheme.OVERLAP:
        return np.where(t, 1.0 - e, e)
    if scheme is WeightScheme.ATT:
        return np.where(t, 1.0, e / (1.0 - e))
    return np.where(t, (1.0 - e) / e, 1.0)


def clip_ps(ps, lo: float = 0.01, hi: float = 0.99) -> np.ndarray:
    if not (0.0 < lo < hi < 1.0):
        raise DataError(f"clip bounds need 0 < lo < hi < 1, got lo={lo!r}, hi={hi!r}")
    return np.clip(np.asarray(ps, dtype=float), lo, hi)
