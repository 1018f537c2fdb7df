"""Synthetic cardiac-surgery style cohort for trying out the workflow.

The roster mirrors a typical bypass-surgery balance table: four continuous,
nine binary, one four-level ordinal and one three-level nominal covariate.
Treatment follows a main-effects logistic model, so a fitted propensity
model is correctly specified; older, non-diabetic, elective patients are
more likely to be treated.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .core import Scale
from .dataio import CovariateSpec, DatasetSchema, dumps

N_DEFAULT = 1282

PRIORITY_LEVELS = ("elective", "urgent", "emergent", "ultima ratio")
STENOSIS_LEVELS = ("yes", "no", "unclear")

BINARY_PREVALENCE = {
    "female": 0.22,
    "hypertension": 0.83,
    "diabetes": 0.29,
    "copd": 0.067,
    "renal_insufficiency": 0.03,
    "previous_mi": 0.33,
    "previous_stroke": 0.04,
    "pad": 0.115,
    "preop_iabp": 0.03,
}

# logit(P(treated)) = intercept + sum(coef * covariate)
LOGIT = {
    "intercept": -0.75,
    "age": 0.02,          # per year above 68
    "bmi": -0.025,        # per unit above 28
    "lvef": 0.008,        # per point above 55
    "previous_surgeries": -0.3,
    "diabetes": -0.45,
    "previous_mi": -0.35,
    "previous_stroke": -0.6,
    "priority": -0.55,    # per ordinal step
    "stenosis_no": -0.4,
    "stenosis_unclear": 0.05,
}


def schema() -> DatasetSchema:
    covs = [CovariateSpec(name, Scale.CONTINUOUS) for name in ("age", "bmi", "lvef", "previous_surgeries")]
    covs += [CovariateSpec(name, Scale.BINARY) for name in BINARY_PREVALENCE]
    covs.append(CovariateSpec("priority", Scale.ORDINAL, PRIORITY_LEVELS))
    covs.append(CovariateSpec("main_stem_stenosis", Scale.NOMINAL, STENOSIS_LEVELS))
    return DatasetSchema("opcab", tuple(covs))


def generate(n: int = N_DEFAULT, seed: int = 2009) -> dict[str, np.ndarray]:
    """Column arrays; ordinal and nominal columns hold level labels."""
    rng = np.random.default_rng(seed)
    cols: dict[str, np.ndarray] = {}
    cols["age"] = np.round(np.clip(rng.normal(68.0, 9.4, n), 35, 92), 0)
    cols["bmi"] = np.round(np.clip(rng.normal(28.1, 4.4, n), 17, 50), 1)
    cols["lvef"] = np.round(np.clip(rng.normal(55.8, 13.5, n), 10, 80), 0)
    cols["previous_surgeries"] = rng.poisson(0.07, n).astype(float)
    for name, p in BINARY_PREVALENCE.items():
        cols[name] = (rng.random(n) < p).astype(float)
    priority = rng.choice(4, size=n, p=[0.84, 0.075, 0.078, 0.007])
    stenosis = rng.choice(3, size=n, p=[0.25, 0.30, 0.45])

    eta = (LOGIT["intercept"]
           + LOGIT["age"] * (cols["age"] - 68.0)
           + LOGIT["bmi"] * (cols["bmi"] - 28.0)
           + LOGIT["lvef"] * (cols["lvef"] - 55.0)
           + LOGIT["previous_surgeries"] * cols["previous_surgeries"]
           + LOGIT["diabetes"] * cols["diabetes"]
           + LOGIT["previous_mi"] * cols["previous_mi"]
           + LOGIT["previous_stroke"] * cols["previous_stroke"]
           + LOGIT["priority"] * priority
           + LOGIT["stenosis_no"] * (stenosis == 1)
           + LOGIT["stenosis_unclear"] * (stenosis == 2))
    ps = 1.0 / (1.0 + np.exp(-eta))
    cols["opcab"] = (rng.random(n) < ps).astype(float)
    cols["priority"] = np.array(PRIORITY_LEVELS, dtype=object)[priority]
    cols["main_stem_stenosis"] = np.array(STENOSIS_LEVELS, dtype=object)[stenosis]
    return cols


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def write(csv_path: str | Path, schema_path: str | Path | None = None, n: int = N_DEFAULT, seed: int = 2009) -> None:
    cols = generate(n, seed)
    sch = schema()
    order = [sch.treatment_column] + [c.name for c in sch.covariates]
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(order)
        for i in range(n):
            writer.writerow([_cell(cols[c][i]) for c in order])
    if schema_path is not None:
        Path(schema_path).write_text(dumps(sch.to_dict()), encoding="utf-8")
