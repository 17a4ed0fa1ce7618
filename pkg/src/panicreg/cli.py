"""Command-line interface.

    panicreg fit      --data d.csv --family linear --lambda 0.1
    panicreg select   --data d.csv --method panic --kappa 1 --out sel.json
    panicreg simulate --paper-tables --reps 10 --out report

Exit codes: 0 success, 2 bad input, 3 numerical failure, 4 simulation
failure budget exceeded.
"""
import argparse
import csv
import json
import logging
import math
import os
from pathlib import Path
import sys

import numpy as np
import yaml

from .duality import SolverFailure, solve_constrained
from .errors import (BudgetExceededError, InputError, PanicRegError)
from .glm import Dataset, Family
from .penalty import PenaltySpec
from .selection import (DEFAULT_EPSILON, DEFAULT_FOLDS, DEFAULT_M, TABLE_COLUMNS, CriterionConfig,
                        Method, build_grid, select, select_continuous)
from .simulation import (DEFAULT_KAPPA_SWEEP, FAILURE_BUDGET, SimDesign, paper_designs, paper_methods, run_study)
from .solver import DEFAULT_CONFIG, SolverConfig, fit_penalized

log = logging.getLogger("panicreg")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_BUDGET = 0, 2, 3, 4

COMMON_KEYS = {"data", "response", "family", "nu", "penalty", "alpha", "seed", "threads",
               "out", "solver"}
COMMAND_KEYS = {
    "fit": COMMON_KEYS | {"lambda", "radius"},
    "select": COMMON_KEYS | {"method", "kappa", "epsilon", "m", "folds", "table"},
    "simulate": COMMON_KEYS | {"reps", "m", "kappa", "kappa_sweep", "bic_kappa", "epsilon",
                               "folds", "paper_tables", "n", "sigma", "d", "s", "methods"},
}
DEFAULTS = {
    "response": "y", "family": "linear", "nu": 1.0, "penalty": "l1", "alpha": None,
    "seed": 0, "threads": None, "out": None, "solver": {},
    "lambda": None, "radius": None,
    "method": "panic", "kappa": None, "epsilon": DEFAULT_EPSILON, "m": DEFAULT_M,
    "folds": DEFAULT_FOLDS, "table": None,
    "reps": 100, "kappa_sweep": None, "bic_kappa": 1.0, "paper_tables": False,
    "n": [500, 1000, 2000], "sigma": [1.0, 2.0, 5.0], "d": 20, "s": 10,
    "methods": ["panic", "modified-bic", "cv"],
}


class UsageError(InputError):
    code = "usage"


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser():
    parser = argparse.ArgumentParser(prog="panicreg", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        # defaults are None so config values survive unless a flag is given
        p.add_argument("--config", help="YAML/JSON file with default values for any flag")
        p.add_argument("--data", help="headered CSV; all non-response columns are covariates")
        p.add_argument("--response", help="response column name (default: y)")
        p.add_argument("--family", choices=["linear", "logistic", "poisson", "gamma"])
        p.add_argument("--nu", type=float, help="Gamma shape (default 1)")
        p.add_argument("--penalty", choices=["l1", "l2", "elasticnet", "lasso", "ridge"])
        p.add_argument("--alpha", type=float, help="elastic-net mixing weight in (0, 1)")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--out")

    p = sub.add_parser("fit", help="fit one penalized or constrained model")
    common(p)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--lambda", dest="lambda", type=float, help="penalty weight")
    group.add_argument("--radius", "-C", type=float, help="constraint radius C")

    p = sub.add_parser("select", help="choose the constraint radius")
    common(p)
    p.add_argument("--method", choices=[m.value for m in Method] + ["panic-continuous"])
    p.add_argument("--kappa", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--m", type=int, help="grid size")
    p.add_argument("--folds", type=int)
    p.add_argument("--table", help="per-radius CSV (default: next to --out)")

    p = sub.add_parser("simulate", help="run the Monte Carlo study")
    common(p)
    p.add_argument("--paper-tables", dest="paper_tables", action="store_const", const=True,
                   help="linear n x sigma grid plus the logistic sample sizes")
    p.add_argument("--reps", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--kappa", type=float, help="single PanIC kappa")
    p.add_argument("--kappa-sweep", dest="kappa_sweep", type=_float_list,
                   help="comma-separated PanIC kappas")
    p.add_argument("--bic-kappa", dest="bic_kappa", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--folds", type=int)
    p.add_argument("--n", type=_int_list, help="comma-separated sample sizes")
    p.add_argument("--sigma", type=_float_list, help="comma-separated noise levels")
    p.add_argument("--methods", type=lambda t: [v.strip() for v in t.split(",") if v.strip()])
    return parser


def load_config(path, command):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}")
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise InputError(f"cannot parse config {path}{where}")
    if not isinstance(doc, dict):
        raise InputError(f"config {path} must be a mapping")
    doc = {k.replace("-", "_"): v for k, v in doc.items()}
    unknown = sorted(set(doc) - COMMAND_KEYS[command])
    if unknown:
        raise InputError(f"unknown config keys for '{command}': {', '.join(unknown)}")
    return doc


def resolve(args):
    """Merge defaults < config file < command-line flags."""
    command = args.command
    conf = load_config(args.config, command) if args.config else {}
    out = {k: DEFAULTS[k] for k in COMMAND_KEYS[command] if k in DEFAULTS}
    out.update(conf)
    for key in COMMAND_KEYS[command]:
        val = getattr(args, key, None)
        if val is not None:
            out[key] = val
    return out


def solver_config(opts):
    try:
        return SolverConfig(**(opts.get("solver") or {}))
    except TypeError as exc:
        raise InputError(f"bad solver settings: {exc}")


def read_csv(path, family, response="y"):
    """Parse a headered numeric CSV into a Dataset (errors name line and column)."""
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc}")
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if response not in header:
            raise InputError(f"{path}: no response column {response!r} in header {header}")
        iy = header.index(response)
        rows = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputError(f"{path}: line {line}: expected {len(header)} fields, got {len(row)}")
            vals = []
            for col, cell in enumerate(row, start=1):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise InputError(f"{path}: line {line}, column {col}: "
                                     f"cannot parse {cell!r} as a number")
            rows.append(vals)
    if not rows:
        raise InputError(f"{path}: no data rows")
    arr = np.array(rows)
    y = arr[:, iy]
    x = np.delete(arr, iy, axis=1)
    if x.shape[1] == 0:
        raise InputError(f"{path}: no covariate columns")
    return Dataset(x, y, family)


def _family(opts):
    return Family.from_name(opts["family"], opts["nu"])


def _penalty(opts):
    try:
        return PenaltySpec.from_name(opts["penalty"], opts["alpha"])
    except ValueError as exc:
        raise InputError(str(exc))


def _dump(obj, out):
    text = json.dumps(obj, indent=2, allow_nan=False, default=_json_default)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text + "\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _finite(obj):
    """Replace non-finite floats (NaN placeholders, inf lambda) with None."""
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def cmd_fit(opts):
    if not opts.get("data"):
        raise UsageError("--data is required")
    family = _family(opts)
    spec = _penalty(opts)
    data = read_csv(opts["data"], family, opts["response"])
    config = solver_config(opts)
    if opts.get("radius") is not None:
        sol = solve_constrained(family, data, spec, opts["radius"], config)
        _dump(_finite(sol.to_dict()), opts["out"])
        return EXIT_OK
    lam = opts.get("lambda") or 0.0
    fit = fit_penalized(family, data, spec, lam, config)
    if not fit.converged:
        _dump(_finite(fit.to_dict()), opts["out"])
        raise SolverFailure(f"solver did not converge ({fit.status}, kkt={fit.kkt:.3g})")
    _dump(_finite(fit.to_dict()), opts["out"])
    return EXIT_OK


def _write_table(result, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TABLE_COLUMNS)
        for rec in result.table:
            w.writerow([_cell(getattr(rec, c)) for c in TABLE_COLUMNS])


def _cell(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(float(v))
    return str(v)


def cmd_select(opts):
    if not opts.get("data"):
        raise UsageError("--data is required")
    family = _family(opts)
    spec = _penalty(opts)
    data = read_csv(opts["data"], family, opts["response"])
    config = solver_config(opts)
    method = opts["method"]
    kappa = opts["kappa"]
    grid = build_grid(family, data, spec, opts["m"], config)
    if method == "panic-continuous":
        result = select_continuous(family, data, spec, (0.0, float(grid.radii[-1])),
                                   kappa if kappa is not None else 1.0, config, erm=grid.erm)
    else:
        try:
            crit = CriterionConfig(Method(method), kappa=kappa if kappa is not None else 1.0,
                                   epsilon=opts["epsilon"], folds=opts["folds"])
        except ValueError as exc:
            raise InputError(str(exc))
        result = select(family, data, spec, grid, crit, config, seed=opts["seed"])
    _dump(_finite(result.to_dict()), opts["out"])
    table = opts.get("table")
    if table is None and opts["out"]:
        table = str(Path(opts["out"]).with_suffix("")) + ".table.csv"
    if table:
        _write_table(result, table)
    if opts["out"]:
        print(f"method={result.method} chosen k={result.chosen_index} "
              f"C={result.chosen_radius:.6g} df={int(np.count_nonzero(result.fit.beta.slopes))} "
              f"risk={result.fit.risk:.6g}")
    return EXIT_OK


def _designs(opts):
    family = _family(opts)
    m, reps, seed = opts["m"], opts["reps"], opts["seed"]
    if opts["paper_tables"]:
        return paper_designs(reps=reps, seed=seed, m=m)
    sigmas = opts["sigma"] if family.kind.value == "linear" else [1.0]
    return [SimDesign(n=int(n), d=opts["d"], s=opts["s"], sigma=float(s), family=family,
                      reps=reps, seed=seed, m=m)
            for s in sigmas for n in opts["n"]]


def _methods(opts):
    kappas = opts["kappa_sweep"]
    if kappas is None:
        kappas = [opts["kappa"]] if opts["kappa"] is not None else list(DEFAULT_KAPPA_SWEEP)
    wanted = [Method(m) for m in opts["methods"]]
    out = []
    for crit in paper_methods(kappas, opts["bic_kappa"], opts["epsilon"], opts["folds"]):
        if crit.method in wanted:
            out.append(crit)
    return out


def cmd_simulate(opts):
    try:
        designs = _designs(opts)
        methods = _methods(opts)
    except ValueError as exc:
        raise InputError(str(exc))
    if not methods:
        raise UsageError("no methods selected")
    threads = opts["threads"] or os.cpu_count() or 1
    report = run_study(designs, methods, _penalty(opts), solver_config(opts), threads=threads)
    out = opts["out"]
    if out:
        base = str(Path(out).with_suffix("")) if out.endswith((".csv", ".json")) else out
        report.to_csv(base + ".csv")
        report.to_json(base + ".json")
    else:
        sys.stdout.write(report.csv_text())
    for cell in report.cells:
        stats = " ".join(f"{k}={v[0]:.6g}" for k, v in cell.stats.items())
        log.info("%s %s n=%d sigma=%s kappa=%s: %s", cell.method, cell.family, cell.n,
                 cell.sigma, cell.kappa, stats)
    if report.failed_cells:
        bad = ", ".join(f"{c.method}/{c.family}/n={c.n}/sigma={c.sigma}" for c in report.failed_cells)
        raise BudgetExceededError(f"cells over the {FAILURE_BUDGET:.0%} failure budget: {bad}")
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "select": cmd_select, "simulate": cmd_simulate}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        opts = resolve(args)
        return COMMANDS[args.command](opts)
    except BudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (PanicRegError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
