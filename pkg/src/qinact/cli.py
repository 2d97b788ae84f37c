"""Command-line surface: ``fit``, ``simulate``, and ``km`` subcommands.

All subcommands are deterministic given their flags: random draws come from
counter-based streams keyed by the ``--seed`` value, JSON is emitted with
sorted keys, and floats use shortest round-trip formatting.

Exit codes: 0 success, 2 usage/validation, 3 numerical failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from .dataset import ModelConfig, load_dataset, validate
from .errors import (DegenerateEnsemble, IterationLimit, NegativeVariance,
                     QinactError, RankDeficient, SingularGamma, TooManyRedraws,
                     Unbounded)
from .inference import covariance_from_ensemble, global_test, perturb_fit, wald_report
from .km import fit_censoring_km
from .model import fit, predict_quantile_inactivity
from .simulate import SimConfig, SimulationTable, WeibullPHSpec, run_power_study

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

_NUMERIC_ERRORS = (SingularGamma, RankDeficient, IterationLimit, Unbounded,
                   DegenerateEnsemble, NegativeVariance, TooManyRedraws)


class ConfigError(QinactError):
    """A simulate config file failed to parse; message carries line numbers."""


class UsageError(QinactError):
    """Flag values that fail validation outside argparse."""


def _float_list(text: str, flag: str) -> list[float]:
    if not text.strip():
        return []
    try:
        return [float(tok) for tok in text.split(",")]
    except ValueError:
        raise UsageError(f"{flag} expects comma-separated numbers, got {text!r}") from None


def _name_list(text: str) -> list[str]:
    return [tok.strip() for tok in text.split(",") if tok.strip()]


def _open_data(path: str):
    p = Path(path)
    if not p.exists():
        raise UsageError(f"data file not found: {path}")
    return p


def _json_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _write_text(path: str | None, text: str):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


# --- fit ---------------------------------------------------------------------

def cmd_fit(args) -> int:
    for q in args.quantile:
        if not (0.0 < q < 1.0):
            raise UsageError(f"quantile must be in (0, 1), got {q}")
    if args.t0 <= 0:
        raise UsageError(f"t0 must be positive, got {args.t0}")
    if args.perturb < 2:
        raise UsageError(f"--perturb must be at least 2, got {args.perturb}")
    if not (0.0 < args.alpha < 1.0):
        raise UsageError(f"alpha must be in (0, 1), got {args.alpha}")

    covariate_cols = _name_list(args.covariates) if args.covariates else []
    data = load_dataset(_open_data(args.data), args.time, args.status, covariate_cols)

    predict_z = None
    if args.predict is not None:
        predict_z = _float_list(args.predict, "--predict")
        if len(predict_z) != data.p:
            raise UsageError(
                f"--predict expects {data.p} values (one per covariate), "
                f"got {len(predict_z)}"
            )
    null_beta = None
    if args.global_null is not None:
        null_beta = _float_list(args.global_null, "--global-null")
        if len(null_beta) != data.p + 1:
            raise UsageError(
                f"--global-null expects {data.p + 1} values (intercept plus "
                f"one per covariate), got {len(null_beta)}"
            )

    names = ["intercept", *data.covariate_names]
    blocks = []
    for q in args.quantile:
        config = ModelConfig(t0=args.t0, quantile=q,
                             truncation_bound=args.truncate)
        report = validate(data, config)
        if report.insufficient_events:
            raise UsageError(
                f"only {report.events_before_t0} events before t0={args.t0}; "
                f"at least {config.min_events} required. Choose a larger t0 "
                "or provide more data."
            )
        fit_result = fit(data, config)
        ens = perturb_fit(data, config, B=args.perturb, seed=args.seed,
                          base_fit=fit_result)
        cov = covariance_from_ensemble(ens)
        inference = wald_report(fit_result, cov, args.alpha)
        coefficients = [
            {
                "name": names[j],
                "estimate": float(fit_result.beta[j]),
                "se": float(inference.se[j]),
                "ci_lower": float(inference.ci_lower[j]),
                "ci_upper": float(inference.ci_upper[j]),
                "wald_z": float(inference.wald_z[j]),
                "significant": bool(inference.significant[j]),
            }
            for j in range(len(names))
        ]
        block = {
            "t0": float(args.t0),
            "quantile": float(q),
            "n_effective": int(fit_result.n_effective),
            "events_before_t0": int(report.events_before_t0),
            "coefficients": coefficients,
            "global_test": None,
            "prediction": None,
        }
        if null_beta is not None:
            stat, pvalue, df = global_test(data, config, np.array(null_beta))
            block["global_test"] = {
                "null_value": [float(v) for v in null_beta],
                "statistic": float(stat),
                "df": int(df),
                "p_value": float(pvalue),
                "reject": bool(pvalue < args.alpha),
            }
        if predict_z is not None:
            block["prediction"] = {
                "covariates": [float(v) for v in predict_z],
                "estimate": float(predict_quantile_inactivity(fit_result, predict_z)),
            }
        blocks.append(block)

    payload = {
        "metadata": {
            "data": args.data,
            "time_col": args.time,
            "status_col": args.status,
            "covariates": list(data.covariate_names),
            "n": int(data.n),
            "censoring_proportion": float(np.mean(data.status == 0)),
            "perturbations": int(args.perturb),
            "seed": int(args.seed),
            "alpha": float(args.alpha),
            "truncation_bound": (float(args.truncate)
                                 if args.truncate is not None else None),
        },
        "reports": blocks,
    }
    if args.format == "json":
        _write_text(args.out, _json_dumps(payload))
    else:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["t0", "quantile", "name", "estimate", "se",
                         "ci_lower", "ci_upper", "wald_z", "significant"])
        for block in blocks:
            for row in block["coefficients"]:
                writer.writerow([
                    repr(block["t0"]), repr(block["quantile"]), row["name"],
                    repr(row["estimate"]), repr(row["se"]),
                    repr(row["ci_lower"]), repr(row["ci_upper"]),
                    repr(row["wald_z"]), int(row["significant"]),
                ])
        _write_text(args.out, out.getvalue())
    return EXIT_OK


# --- simulate ------------------------------------------------------------------

_REQUIRED_CONFIG_KEYS = (
    "rho", "eta", "beta", "group_sizes", "t0_list", "quantile",
    "censoring_targets", "n_sims", "n_perturb", "alpha", "seed",
)


def parse_sim_config(path: str | Path) -> tuple[SimConfig, tuple[float, ...]]:
    """Parse a ``key = value`` simulate config file.

    Lists use commas. ``beta_list`` is optional and defaults to the single
    ``beta``. Errors cite line numbers.
    """
    p = Path(path)
    if not p.exists():
        raise UsageError(f"config file not found: {path}")
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{p.name}, line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip()
        if key in entries:
            raise ConfigError(f"{p.name}, line {lineno}: duplicate key {key!r}")
        entries[key] = (value.strip(), lineno)

    def take(key, cast, many=False):
        if key not in entries:
            raise ConfigError(f"{p.name}: missing required key {key!r}")
        value, lineno = entries.pop(key)
        try:
            if many:
                return tuple(cast(tok.strip()) for tok in value.split(",") if tok.strip())
            return cast(value)
        except ValueError:
            raise ConfigError(
                f"{p.name}, line {lineno}: cannot parse {key} from {value!r}"
            ) from None

    rho = take("rho", float)
    eta = take("eta", float)
    beta = take("beta", float)
    group_sizes = take("group_sizes", int, many=True)
    if len(group_sizes) != 2:
        raise ConfigError(f"{p.name}: group_sizes needs exactly two integers")
    t0_list = take("t0_list", float, many=True)
    quantile = take("quantile", float)
    censoring_targets = take("censoring_targets", float, many=True)
    n_sims = take("n_sims", int)
    n_perturb = take("n_perturb", int)
    alpha = take("alpha", float)
    seed = take("seed", int)
    betas = (beta,)
    if "beta_list" in entries:
        value, lineno = entries.pop("beta_list")
        try:
            betas = tuple(float(tok.strip()) for tok in value.split(",") if tok.strip())
        except ValueError:
            raise ConfigError(
                f"{p.name}, line {lineno}: cannot parse beta_list from {value!r}"
            ) from None
    if entries:
        key, (_, lineno) = next(iter(entries.items()))
        raise ConfigError(f"{p.name}, line {lineno}: unknown key {key!r}")
    try:
        config = SimConfig(
            spec=WeibullPHSpec(rho=rho, eta=eta, beta=beta,
                               group_sizes=(group_sizes[0], group_sizes[1])),
            t0_list=t0_list,
            quantile=quantile,
            censoring_targets=censoring_targets,
            n_sims=n_sims,
            n_perturb=n_perturb,
            alpha=alpha,
            seed=seed,
        )
    except ValueError as exc:
        raise ConfigError(f"{p.name}: {exc}") from None
    return config, betas


def _table_payload(table: SimulationTable) -> dict:
    config = table.config
    return {
        "config": {
            "rho": config.spec.rho,
            "eta": config.spec.eta,
            "beta": config.spec.beta,
            "group_sizes": list(config.spec.group_sizes),
            "t0_list": list(config.t0_list),
            "quantile": config.quantile,
            "censoring_targets": list(config.censoring_targets),
            "n_sims": config.n_sims,
            "n_perturb": config.n_perturb,
            "alpha": config.alpha,
            "seed": config.seed,
        },
        "betas": list(table.betas),
        "cells": [
            {
                "t0": c.t0,
                "censoring_target": c.censoring_target,
                "beta": c.beta,
                "beta0_true": c.beta0_true,
                "beta1_true": c.beta1_true,
                "theta0_true": c.theta0_true,
                "theta1_true": c.theta1_true,
                "bias_beta0": c.bias_beta0,
                "sd_beta0": c.sd_beta0,
                "ase_beta0": c.ase_beta0,
                "bias_beta1": c.bias_beta1,
                "sd_beta1": c.sd_beta1,
                "ase_beta1": c.ase_beta1,
                "theta0_hat": c.theta0_hat,
                "theta1_hat": c.theta1_hat,
                "rejection_rate": c.rejection_rate,
                "chi2_rejection_rate": c.chi2_rejection_rate,
                "achieved_censoring": c.achieved_censoring,
                "n_sims_done": c.n_sims_done,
                "n_errors": c.n_errors,
                "max_root_bound_ratio": c.max_root_bound_ratio,
                "censor_interval": list(c.censor_interval),
            }
            for c in table.cells
        ],
    }


_TABLE1_COLUMNS = ["t0", "censoring_pct", "bias_beta0", "sd_beta0", "ase_beta0",
                   "bias_beta1", "sd_beta1", "ase_beta1", "theta0_hat", "theta1_hat"]


def _table1_rows(table: SimulationTable) -> list[dict]:
    primary = table.betas[0]
    rows = []
    for t0 in table.config.t0_list:
        for target in table.config.censoring_targets:
            c = table.cell(t0, target, primary)
            rows.append({
                "t0": c.t0,
                "censoring_pct": 100.0 * c.censoring_target,
                "bias_beta0": c.bias_beta0,
                "sd_beta0": c.sd_beta0,
                "ase_beta0": c.ase_beta0,
                "bias_beta1": c.bias_beta1,
                "sd_beta1": c.sd_beta1,
                "ase_beta1": c.ase_beta1,
                "theta0_hat": c.theta0_hat,
                "theta1_hat": c.theta1_hat,
            })
    return rows


def _table2_rows(table: SimulationTable) -> tuple[list[str], list[dict]]:
    reject_cols = [f"reject_beta={b:g}" for b in table.betas]
    rows = []
    for t0 in table.config.t0_list:
        for target in table.config.censoring_targets:
            row = {"t0": t0, "censoring_pct": 100.0 * target}
            for b, col in zip(table.betas, reject_cols):
                row[col] = table.cell(t0, target, b).rejection_rate
            rows.append(row)
    return ["t0", "censoring_pct", *reject_cols], rows


def _rows_to_csv(columns: list[str], rows: list[dict]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([repr(float(row[c])) for c in columns])
    return out.getvalue()


def cmd_simulate(args) -> int:
    if args.jobs < 1:
        raise UsageError(f"--jobs must be at least 1, got {args.jobs}")
    config, betas = parse_sim_config(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = run_power_study(config, betas, processes=args.jobs)
    payload = _table_payload(table)
    (out_dir / "simulation.json").write_text(_json_dumps(payload), encoding="utf-8")
    t1_rows = _table1_rows(table)
    t2_cols, t2_rows = _table2_rows(table)
    if args.format == "csv":
        (out_dir / "table1.csv").write_text(
            _rows_to_csv(_TABLE1_COLUMNS, t1_rows), encoding="utf-8")
        (out_dir / "table2.csv").write_text(
            _rows_to_csv(t2_cols, t2_rows), encoding="utf-8")
    else:
        (out_dir / "table1.json").write_text(_json_dumps(t1_rows), encoding="utf-8")
        (out_dir / "table2.json").write_text(_json_dumps(t2_rows), encoding="utf-8")
    return EXIT_OK


# --- km ------------------------------------------------------------------------

def cmd_km(args) -> int:
    covariate_cols = _name_list(args.covariates) if args.covariates else []
    data = load_dataset(_open_data(args.data), args.time, args.status, covariate_cols)
    if args.truncate is not None:
        data = data.truncate_censoring(args.truncate)
    curve = fit_censoring_km(data)
    out = io.StringIO()
    out.write("# censoring survival estimate G(t) = P(C >= t); G_before is the "
              "left-limit value at each jump time, G_after holds from just past it\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["time", "G_before", "G_after"])
    if curve.jump_times.size == 0:
        writer.writerow([repr(float(data.times.max())), repr(1.0), repr(1.0)])
    else:
        before = 1.0
        for t, after in zip(curve.jump_times, curve.values):
            writer.writerow([repr(float(t)), repr(float(before)), repr(float(after))])
            before = float(after)
    _write_text(args.out, out.getvalue())
    return EXIT_OK


# --- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qinact",
        description="Quantile regression for the inactivity time of "
                    "right-censored time-to-event data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit the model and report intervals")
    p_fit.add_argument("--data", required=True, help="CSV file path")
    p_fit.add_argument("--time", required=True, help="time column name")
    p_fit.add_argument("--status", required=True, help="event indicator column name")
    p_fit.add_argument("--covariates", default="", help="comma-separated covariate columns")
    p_fit.add_argument("--t0", type=float, required=True, help="conditioning time point")
    p_fit.add_argument("--quantile", type=float, action="append", required=True,
                       help="quantile level in (0,1); repeat for a grid")
    p_fit.add_argument("--perturb", type=int, default=400,
                       help="number of perturbation replicates (default 400)")
    p_fit.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p_fit.add_argument("--alpha", type=float, default=0.05,
                       help="interval level is 1 - alpha (default 0.05)")
    p_fit.add_argument("--truncate", type=float, default=None,
                       help="clamp censored times above this bound")
    p_fit.add_argument("--predict", default=None,
                       help="comma-separated covariate values to predict at")
    p_fit.add_argument("--global-null", dest="global_null", default=None,
                       help="comma-separated coefficient vector for the global test")
    p_fit.add_argument("--format", choices=("json", "csv"), default="json")
    p_fit.add_argument("--out", default=None, help="output file (default stdout)")
    p_fit.set_defaults(func=cmd_fit)

    p_sim = sub.add_parser("simulate", help="run a simulation study from a config file")
    p_sim.add_argument("--config", required=True, help="key = value config file")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--format", choices=("csv", "json"), default="csv")
    p_sim.add_argument("--jobs", type=int, default=1,
                       help="worker processes for grid cells (default 1)")
    p_sim.set_defaults(func=cmd_simulate)

    p_km = sub.add_parser("km", help="emit the censoring survival curve as CSV")
    p_km.add_argument("--data", required=True, help="CSV file path")
    p_km.add_argument("--time", required=True, help="time column name")
    p_km.add_argument("--status", required=True, help="event indicator column name")
    p_km.add_argument("--covariates", default="", help="comma-separated covariate columns")
    p_km.add_argument("--truncate", type=float, default=None,
                      help="clamp censored times above this bound")
    p_km.add_argument("--out", default=None, help="output file (default stdout)")
    p_km.set_defaults(func=cmd_km)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _NUMERIC_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except QinactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
