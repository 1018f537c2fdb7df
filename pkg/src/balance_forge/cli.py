"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import demo, simulate
from .balance import REFERENCE_SLOPES, build_report, qq_data
from .core import CohortSample, scale_weights
from .dataio import dumps, fmt_num, ingest, load_report, load_schema, report_json, report_text
from .errors import DataError, NumericalError
from .propensity import WeightScheme, clip_ps, compute_weights, fit_propensity

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("balance_forge")


class UsageError(Exception):
    pass


def _parse_clip(text: str) -> tuple[float, float] | None:
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"--clip expects 'lo,hi', got {text!r}") from None
    if (lo, hi) == (0.0, 1.0):
        return None
    if not 0.0 < lo < hi < 1.0:
        raise UsageError(f"--clip needs 0 < lo < hi < 1 (or 0,1 to disable), got {text!r}")
    return lo, hi


def parse_grid(text: str) -> tuple[int, ...]:
    """``a,b,c`` or ``start:stop[:step]`` (inclusive), integers only."""
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            if len(parts) not in (2, 3):
                raise ValueError
            start, stop = parts[0], parts[1]
            step = parts[2] if len(parts) == 3 else 1
            if step <= 0 or stop < start:
                raise ValueError
            return tuple(range(start, stop + 1, step))
        grid = tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise UsageError(f"invalid --grid {text!r}; use 'a,b,c' or 'start:stop[:step]'") from None
    if not grid:
        raise UsageError("--grid is empty")
    return grid


def _weights_for(sample: CohortSample, args, schema) -> tuple[np.ndarray, dict]:
    weight_column = args.weight_column or (schema.weight_column if args.scheme is None else None)
    if args.weight_column and args.ps_column:
        raise UsageError("--ps-column and --weight-column are mutually exclusive")
    if weight_column:
        return sample.raw_weights, {"source": "weight_column", "column": weight_column}
    scheme = WeightScheme(args.scheme or "uniform")
    if scheme is WeightScheme.UNIFORM:
        return np.ones(sample.N), {"source": "uniform", "scheme": scheme.value}
    info: dict = {"scheme": scheme.value}
    if sample.ps is not None:
        ps = sample.ps
        info.update(source="ps_column", column=args.ps_column or schema.ps_column)
    else:
        model = fit_propensity(sample)
        if not model.converged:
            raise NumericalError(f"propensity model failed: {model.diagnostic}")
        ps = model.fitted_ps
        info.update(source="logistic_fit", iterations=model.iterations, deviance=model.deviance,
                    coefficients=dict(zip(model.column_names, model.coefficients.tolist())))
    clip = _parse_clip(args.clip)
    if clip:
        ps = clip_ps(ps, *clip)
        info["clip"] = list(clip)
    return compute_weights(ps, sample.treatment, scheme), info


def _load(args):
    schema = load_schema(args.schema)
    overrides = {}
    if args.ps_column:
        overrides["ps_column"] = args.ps_column
        overrides["weight_column"] = None
    if getattr(args, "weight_column", None):
        overrides["weight_column"] = args.weight_column
        overrides["ps_column"] = None
    if overrides:
        schema = replace(schema, **overrides)
    return ingest(args.data, schema), schema


def cmd_balance(args) -> int:
    if args.weight_column and args.scheme is not None:
        raise UsageError("--scheme and --weight-column are mutually exclusive")
    sample, schema = _load(args)
    raw, info = _weights_for(sample, args, schema)
    w = scale_weights(raw, sample.treatment)
    method = args.label or info.get("scheme") or "weights"
    report = build_report(sample, w, method=method)
    text = report_json(report, info)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    if args.json:
        sys.stdout.write(text)
    elif not args.quiet:
        sys.stdout.write(report_text(json.loads(text)))
    return EXIT_OK


def cmd_fit_ps(args) -> int:
    sample, schema = _load(args)
    model = fit_propensity(sample)
    if not model.converged:
        raise NumericalError(f"propensity model failed: {model.diagnostic}")
    with open(args.data, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header = rows[0] + [args.column]
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for row, p in zip(rows[1:], model.fitted_ps):
        writer.writerow(row + [fmt_num(p)])
    Path(args.out).write_text(out.getvalue(), encoding="utf-8")
    sys.stderr.write(f"fitted {len(model.coefficients)} coefficients in {model.iterations} iterations; "
                     f"deviance {fmt_num(model.deviance)}\n")
    return EXIT_OK


def qq_tsv(reports: Sequence[tuple[str, dict]]) -> str:
    lines = ["# reference_slopes\t" + "\t".join(fmt_num(s) for s in REFERENCE_SLOPES),
             "method\ttheoretical_quantile\tordered_z"]
    for method, data in reports:
        zs = [r["z"] for r in data["rows"] if r.get("z") is not None]
        if len(zs) < 2:
            raise DataError(f"report {method!r} has {len(zs)} z row(s); a Q-Q plot needs at least 2")
        qq = qq_data(zs)
        for q, z in zip(qq.theoretical, qq.ordered_z):
            lines.append(f"{method}\t{fmt_num(q)}\t{fmt_num(z)}")
    return "\n".join(lines) + "\n"


def cmd_qq(args) -> int:
    reports = []
    for path in args.reports:
        data = load_report(path)
        reports.append((data.get("method") or Path(path).stem, data))
    text = qq_tsv(reports)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


SIM_COLUMNS = ("experiment", "grid_value", "scheme", "measure", "mean_abs", "q95_abs", "mc_se",
               "replications", "folded_normal_ref", "mean_n_treated", "redraws")


def simulation_tsv(result: simulate.SimulationResult) -> str:
    lines = ["\t".join(SIM_COLUMNS)]
    for r in result.rows:
        vals = (result.spec.experiment.value, str(r.grid_value), r.scheme.value, r.measure,
                fmt_num(r.mean_abs), fmt_num(r.q95_abs), fmt_num(r.mc_se), str(r.replications),
                fmt_num(r.folded_normal_ref), fmt_num(r.mean_n_treated), str(r.redraws))
        lines.append("\t".join(vals))
    return "\n".join(lines) + "\n"


def simulation_dict(result: simulate.SimulationResult) -> dict:
    spec = result.spec
    return {
        "spec": {
            "experiment": spec.experiment.value, "grid": list(spec.grid), "replications": spec.replications,
            "seed": spec.seed, "covariate_kind": spec.covariate_kind.value,
            "schemes": [s.value for s in spec.schemes], "n_total": spec.n_total,
            "ps": {"mean_treated": spec.ps.mean_treated, "mean_control": spec.ps.mean_control,
                   "sd": spec.ps.sd, "clip": list(spec.ps.clip)},
        },
        "rows": [{c: getattr(r, c) for c in SIM_COLUMNS[1:]} for r in result.rows],
        "skipped": [{"grid_value": g, "reason": msg} for g, msg in result.skipped],
        "reference": {"mean_abs_standard_normal": simulate.FOLDED_NORMAL_MEAN},
    }


def cmd_simulate(args) -> int:
    grid = parse_grid(args.grid) if args.grid else None
    clip = _parse_clip(args.clip) if args.clip else (0.01, 0.99)
    if args.reps is not None and args.reps < 1:
        raise UsageError("--reps must be >= 1")
    try:
        spec = simulate.experiment_spec(args.experiment, grid=grid, replications=args.reps, seed=args.seed,
                                        full_grid=args.full_grid, clip=clip or (1e-12, 1 - 1e-12),
                                        n_total=args.n_total)
        result = simulate.run(spec, threads=args.threads)
    except DataError as exc:
        raise UsageError(str(exc)) from None
    for g, msg in result.skipped:
        sys.stderr.write(f"warning: skipped grid point {msg}\n")
    tsv = simulation_tsv(result)
    if args.out:
        prefix = Path(args.out)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        Path(f"{prefix}.tsv").write_text(tsv, encoding="utf-8")
        Path(f"{prefix}.json").write_text(dumps(simulation_dict(result)), encoding="utf-8")
    else:
        sys.stdout.write(tsv)
    return EXIT_OK


def cmd_demo_data(args) -> int:
    demo.write(args.out, args.schema_out, n=args.n, seed=args.seed)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="balance-forge",
                                     description="Weighted z-differences for covariate balance.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def data_args(p):
        p.add_argument("--data", required=True, help="CSV file with a header row")
        p.add_argument("--schema", required=True, help="schema JSON file")
        p.add_argument("--ps-column", help="column holding precomputed propensity scores")

    p = sub.add_parser("balance", help="balance report for one weighting")
    data_args(p)
    p.add_argument("--scheme", choices=[s.value for s in WeightScheme])
    p.add_argument("--weight-column", help="column holding precomputed raw weights")
    p.add_argument("--clip", default="0,1", help="clip propensity scores to lo,hi (default 0,1 = off)")
    p.add_argument("--label", help="method label stored in the report")
    p.add_argument("--out", help="write report JSON here")
    p.add_argument("--json", action="store_true", help="print JSON instead of the text table")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_balance)

    p = sub.add_parser("fit-ps", help="fit a logistic propensity model and append a PS column")
    data_args(p)
    p.add_argument("--column", default="ps")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_ps, weight_column=None)

    p = sub.add_parser("qq", help="Q-Q data (TSV) from one or more report JSON files")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_qq)

    p = sub.add_parser("simulate", help="Monte Carlo experiments")
    p.add_argument("--experiment", required=True, choices=[e.value for e in simulate.Experiment])
    p.add_argument("--grid", help="'a,b,c' or 'start:stop[:step]'")
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--full-grid", action="store_true", help="step-100 size grid / 1..99%% ratio grid, 5000 reps")
    p.add_argument("--clip", help="PS clipping (default 0.01,0.99)")
    p.add_argument("--n-total", type=int, default=5000, help="total size for the ratio experiment")
    p.add_argument("--threads", type=int, help=f"worker threads (default ${simulate.THREADS_ENV} or CPU count)")
    p.add_argument("--out", help="output prefix; writes PREFIX.tsv and PREFIX.json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("demo-data", help="write the synthetic example cohort")
    p.add_argument("--out", required=True, help="CSV path")
    p.add_argument("--schema-out", help="schema JSON path")
    p.add_argument("--n", type=int, default=demo.N_DEFAULT)
    p.add_argument("--seed", type=int, default=2009)
    p.set_defaults(func=cmd_demo_data)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except NumericalError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except (DataError, OSError) as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
