"""Dataset schemas, CSV ingestion and canonical serialisation.

A schema is a JSON document::

    {
      "treatment_column": "opcab",
      "covariates": [
        {"name": "age", "scale": "continuous"},
        {"name": "diabetes", "scale": "binary"},
        {"name": "priority", "scale": "ordinal",
         "ordered_levels": ["elective", "urgent", "emergent", "ultima ratio"]},
        {"name": "stenosis", "scale": "nominal", "categories": ["yes", "no", "unclear"]}
      ],
      "weight_column": null,
      "ps_column": null
    }

Numbers are written with 12 significant digits and JSON keys sorted, so a
report parsed and re-serialised is byte-identical.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .balance import BalanceReport, ReportRow
from .core import CohortSample, CovariateColumn, Scale
from .errors import DataError

SIG_DIGITS = 12
REPORT_FORMAT = "balance-forge.report/1"

_YES = {"1", "yes", "y", "true"}
_NO = {"0", "no", "n", "false"}


@dataclass(frozen=True)
class CovariateSpec:
    name: str
    scale: Scale
    levels: tuple[str, ...] = ()


@dataclass(frozen=True)
class DatasetSchema:
    treatment_column: str
    covariates: tuple[CovariateSpec, ...]
    weight_column: str | None = None
    ps_column: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetSchema":
        try:
            treatment = data["treatment_column"]
            raw_covs = data["covariates"]
        except (KeyError, TypeError) as exc:
            raise DataError(f"schema is missing required key {exc}") from None
        covs = []
        for entry in raw_covs:
            name = entry.get("name")
            try:
                scale = Scale(entry.get("scale"))
            except ValueError:
                raise DataError(f"covariate {name!r}: unknown scale {entry.get('scale')!r}") from None
            levels: tuple[str, ...] = ()
            if scale is Scale.ORDINAL:
                levels = tuple(str(v) for v in entry.get("ordered_levels") or ())
                if len(levels) < 2:
                    raise DataError(f"ordinal covariate {name!r} needs ordered_levels with at least 2 entries")
            elif scale is Scale.NOMINAL:
                levels = tuple(str(v) for v in entry.get("categories") or ())
                if len(levels) < 2:
                    raise DataError(f"nominal covariate {name!r} needs categories with at least 2 entries")
            if len(set(levels)) != len(levels):
                raise DataError(f"covariate {name!r}: levels must be distinct")
            covs.append(CovariateSpec(str(name), scale, levels))
        schema = cls(str(treatment), tuple(covs), data.get("weight_column"), data.get("ps_column"))
        names = [c.name for c in covs]
        if treatment in names:
            raise DataError(f"treatment column {treatment!r} is also listed as a covariate")
        if len(set(names)) != len(names):
            raise DataError("covariate names must be unique")
        if schema.weight_column and schema.ps_column:
            raise DataError("schema may set weight_column or ps_column, not both")
        return schema

    def to_dict(self) -> dict:
        covs = []
        for c in self.covariates:
            entry: dict[str, Any] = {"name": c.name, "scale": c.scale.value}
            if c.scale is Scale.ORDINAL:
                entry["ordered_levels"] = list(c.levels)
            elif c.scale is Scale.NOMINAL:
                entry["categories"] = list(c.levels)
            covs.append(entry)
        return {"treatment_column": self.treatment_column, "covariates": covs,
                "weight_column": self.weight_column, "ps_column": self.ps_column}


def load_schema(path: str | Path) -> DatasetSchema:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid schema JSON ({exc})") from None
    return DatasetSchema.from_dict(data)


def _parse_cell(raw: str, scale: Scale | None, levels: tuple[str, ...], column: str, row: int) -> float:
    cell = raw.strip()
    where = f"row {row}, column {column!r}"
    if cell == "" or cell.upper() in {"NA", "NAN", "NULL"}:
        raise DataError(f"missing value at {where}")
    if scale is Scale.BINARY or scale is None:
        low = cell.lower()
        if low in _YES:
            return 1.0
        if low in _NO:
            return 0.0
        if scale is None:
            raise DataError(f"treatment must be 0/1 or yes/no; got {cell!r} at {where}")
        raise DataError(f"binary value must be 0/1 or yes/no; got {cell!r} at {where}")
    if scale in (Scale.ORDINAL, Scale.NOMINAL):
        if cell in levels:
            return float(levels.index(cell) + 1)
        kind = "ordered_levels" if scale is Scale.ORDINAL else "categories"
        raise DataError(f"value {cell!r} at {where} is not one of the declared {kind} {list(levels)}")
    try:
        value = float(cell)
    except ValueError:
        raise DataError(f"cannot parse {cell!r} as a number at {where}") from None
    if not math.isfinite(value):
        raise DataError(f"non-finite value {cell!r} at {where}")
    return value


def ingest(csv_path: str | Path, schema: DatasetSchema | str | Path) -> CohortSample:
    """Read a CSV with a header row into a typed :class:`CohortSample`.

    Rows are numbered from 1 for the first data row. Weight and PS columns
    named in the schema are loaded into ``raw_weights`` / ``ps``.
    """
    if not isinstance(schema, DatasetSchema):
        schema = load_schema(schema)
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        wanted = [schema.treatment_column] + [c.name for c in schema.covariates]
        wanted += [c for c in (schema.weight_column, schema.ps_column) if c]
        missing = [c for c in wanted if c not in header]
        if missing:
            raise DataError(f"{csv_path}: missing column(s) {', '.join(map(repr, missing))}")
        rows = list(reader)
    if not rows:
        raise DataError(f"{csv_path}: no data rows")
    treatment = np.array([_parse_cell(r[schema.treatment_column] or "", None, (), schema.treatment_column, i)
                          for i, r in enumerate(rows, 1)])
    covariates = []
    for spec in schema.covariates:
        vals = np.array([_parse_cell(r[spec.name] or "", spec.scale, spec.levels, spec.name, i)
                         for i, r in enumerate(rows, 1)])
        covariates.append(CovariateColumn(spec.name, spec.scale, vals, spec.levels))
    extra = {}
    for attr, col in (("raw_weights", schema.weight_column), ("ps", schema.ps_column)):
        if col:
            extra[attr] = np.array([_parse_cell(r[col] or "", Scale.CONTINUOUS, (), col, i)
                                    for i, r in enumerate(rows, 1)])
    return CohortSample(treatment, covariates, **extra)


def round_sig(x: float, digits: int = SIG_DIGITS) -> float:
    return float(f"{x:.{digits}g}")


def canonical(obj: Any) -> Any:
    """Convert to JSON-ready builtins; floats rounded, non-finite -> None."""
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [canonical(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return round_sig(x) if math.isfinite(x) else None
    if hasattr(obj, "value") and isinstance(obj.value, str):
        return obj.value
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(canonical(obj), sort_keys=True, indent=2) + "\n"


def fmt_num(x: float | None) -> str:
    """Text rendering that prints exactly the number stored in JSON."""
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return "NA"
    return repr(round_sig(float(x)))


def _row_dict(row: ReportRow) -> dict:
    out: dict[str, Any] = {
        "covariate": row.covariate,
        "scale": row.scale.value,
        "kind": row.kind.value,
        "treated": row.treated,
        "control": row.control,
        "z": row.z.z if row.z else None,
        "sd": row.sd.sd if row.sd else None,
        "components": row.z.components if row.z else {},
        "error": row.error,
    }
    return out


def report_to_dict(report: BalanceReport, weighting: dict | None = None) -> dict:
    mean_abs, var_z = report.mean_abs_z, report.var_z
    notes = []
    if any(r.z and r.z.components.get("nudged") for r in report.rows):
        notes.append("some nominal z values were computed from a chi-square probability clamped to "
                     "[1e-300, 1-1e-16] to stay finite")
    return {
        "format": REPORT_FORMAT,
        "method": report.method,
        "n_treated": report.n_treated,
        "n_control": report.n_control,
        "weighting": weighting or {},
        "rows": [_row_dict(r) for r in report.rows],
        "aggregates": {
            "defined": mean_abs is not None,
            "n_z": len(report.zs),
            "mean_abs_z": mean_abs,
            "var_z": var_z,
        },
        "notes": notes,
    }


def report_json(report: BalanceReport, weighting: dict | None = None) -> str:
    return dumps(report_to_dict(report, weighting))


def load_report(path: str | Path) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: cannot read report JSON ({exc})") from None
    if not isinstance(data, dict) or data.get("format") != REPORT_FORMAT or not isinstance(data.get("rows"), list):
        raise DataError(f"{path}: not a balance report (expected format {REPORT_FORMAT!r})")
    for i, row in enumerate(data["rows"]):
        if not isinstance(row, dict) or "z" not in row:
            raise DataError(f"{path}: malformed row {i}")
    return data


def _summary_text(summary: dict) -> str:
    if "mean" in summary:
        return f"{fmt_num(summary['mean'])} ({fmt_num(summary.get('sd'))})"
    if "prevalence" in summary:
        return fmt_num(summary["prevalence"])
    return " ".join(f"{k}={fmt_num(v)}" for k, v in summary["proportions"].items())


_BLOCK_TITLES = {
    "continuous_mean": "Continuous scale (difference of means)",
    "binary": "Binary scale",
    "ordinal": "Ordinal scale",
    "nominal": "Nominal scale",
    "continuous_variance": "Continuous scale (difference of variances)",
}


def report_text(data: dict) -> str:
    """Aligned plain-text table from a report dict (see :func:`report_to_dict`)."""
    header = ("covariate", "treated", "control", "z", "sd")
    lines = []
    table: list[tuple[str, ...]] = []
    block = None
    for row in data["rows"]:
        if row["kind"] != block:
            block = row["kind"]
            table.append(("# " + _BLOCK_TITLES[block],))
        z = fmt_num(row["z"]) if row["error"] is None else "ERROR"
        table.append((row["covariate"], _summary_text(row["treated"]), _summary_text(row["control"]),
                      z, fmt_num(row["sd"]) if row["sd"] is not None else ""))
    widths = [max([len(header[i])] + [len(r[i]) for r in table if len(r) > 1]) for i in range(len(header))]
    title = f"Balance report: {data.get('method') or 'weights'} (treated n={data['n_treated']}, control m={data['n_control']})"
    lines.append(title)
    lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip())
    for r in table:
        if len(r) == 1:
            lines.append(r[0])
        else:
            lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    for row in data["rows"]:
        if row["error"]:
            lines.append(f"! {row['covariate']} ({row['kind']}): {row['error']}")
    agg = data["aggregates"]
    lines.append(f"mean |z| = {fmt_num(agg['mean_abs_z'])}   variance of z = {fmt_num(agg['var_z'])}   "
                 f"rows = {agg['n_z']}")
    for note in data.get("notes", []):
        lines.append(f"note: {note}")
    return "\n".join(lines) + "\n"
