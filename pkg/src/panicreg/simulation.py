"""Monte Carlo study of radius selection on sparse synthetic GLMs.

Each replication draws standard Gaussian covariates, a sparse coefficient
vector whose first ``s`` entries are standard Gaussian, and responses from
the chosen family. Every replication has its own counter-based (Philox)
stream keyed by ``(seed, rep)``, so results do not depend on execution order
or on the number of worker processes.
"""
from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import asdict, dataclass, field
import io
import json
import logging
import math
import time

import numpy as np

from .errors import PanicRegError
from .glm import Dataset, Family, FamilyKind, LINEAR, LOGISTIC
from .penalty import LASSO
from .selection import (DEFAULT_M, CriterionConfig, Method, build_grid, select, solve_grid,
                        support)
from .solver import DEFAULT_CONFIG

log = logging.getLogger(__name__)

CSV_COLUMNS = ["method", "family", "n", "sigma", "kappa", "metric", "mean", "se", "reps", "excluded"]
METRICS = ["error", "abs_error", "n_var", "n_wrong_var"]
FAILURE_BUDGET = 0.05
DEFAULT_KAPPA_SWEEP = (0.1, 0.5, 1.0, 2.0, 5.0)


@dataclass(frozen=True)
class SimDesign:
    n: int
    d: int = 20
    s: int = 10
    sigma: float = 1.0
    family: Family = LINEAR
    reps: int = 100
    seed: int = 0
    m: int = DEFAULT_M

    def __post_init__(self):
        if not 1 <= self.s <= self.d:
            raise ValueError(f"need 1 <= s <= d, got s={self.s}, d={self.d}")
        if self.family.kind is FamilyKind.LINEAR and not self.sigma > 0:
            raise ValueError("linear designs need sigma > 0")
        if self.reps < 1 or self.n < 2 or self.m < 2:
            raise ValueError("need reps >= 1, n >= 2 and m >= 2")

    @property
    def sigma_label(self):
        return self.sigma if self.family.kind is FamilyKind.LINEAR else math.nan


@dataclass(frozen=True)
class TrueModel:
    beta_star: np.ndarray

    @property
    def support(self):
        return self.beta_star != 0


@dataclass(frozen=True)
class RepMetrics:
    error: float
    abs_error: float
    n_var: int
    n_wrong_var: int


def rep_generator(seed, rep_index, stream=0):
    ss = np.random.SeedSequence(seed, spawn_key=(rep_index, stream))
    return np.random.Generator(np.random.Philox(ss))


def generate_problem(design, rep_index):
    """Draw one replication: (Dataset, TrueModel)."""
    rng = rep_generator(design.seed, rep_index)
    d, s, n = design.d, design.s, design.n
    kind = design.family.kind
    beta = np.zeros(d)
    beta[:s] = rng.standard_normal(s)
    if kind in (FamilyKind.POISSON, FamilyKind.GAMMA):
        # keeps exp(x'beta) moderate so every moment condition is comfortably met
        beta /= math.sqrt(d)
    x = rng.standard_normal((n, d))
    eta = x @ beta
    if kind is FamilyKind.LINEAR:
        y = eta + design.sigma * rng.standard_normal(n)
    elif kind is FamilyKind.LOGISTIC:
        p = 0.5 * (1.0 + np.tanh(0.5 * eta))
        y = (rng.random(n) < p).astype(float)
    elif kind is FamilyKind.POISSON:
        y = rng.poisson(np.exp(eta)).astype(float)
    else:
        nu = design.family.nu
        y = rng.gamma(nu, np.exp(eta) / nu)
    return Dataset(x, y, design.family), TrueModel(beta)


def compute_metrics(fit, truth):
    """Signed/absolute L1-norm error, #var and #w.var of a selected fit."""
    chosen = support(fit)
    error = float(np.sum(np.abs(fit.beta.slopes)) - np.sum(np.abs(truth.beta_star)))
    return RepMetrics(error=error, abs_error=abs(error), n_var=int(chosen.sum()),
                      n_wrong_var=int(np.sum(chosen != truth.support)))


def method_label(crit):
    return crit.method.value


def method_kappa(crit):
    return math.nan if crit.method is Method.CV else crit.kappa


@dataclass
class RepRecord:
    method: str
    family: str
    n: int
    sigma: float
    kappa: float
    rep: int
    ok: bool
    error: float = math.nan
    abs_error: float = math.nan
    n_var: int = -1
    n_wrong_var: int = -1
    chosen_index: int = -1
    chosen_radius: float = math.nan
    seconds: float = 0.0
    message: str = ""


def run_replication(design, rep, methods, spec=LASSO, config=DEFAULT_CONFIG):
    """Generate one problem and apply every method to it."""
    data, truth = generate_problem(design, rep)
    family = design.family
    base = dict(family=str(family), n=design.n, sigma=design.sigma_label, rep=rep)
    out = []
    try:
        t0 = time.perf_counter()
        grid = build_grid(family, data, spec, design.m, config)
        solutions = solve_grid(family, data, spec, grid, config)
        shared = time.perf_counter() - t0
    except (PanicRegError, ArithmeticError) as exc:
        return [RepRecord(method=method_label(c), kappa=method_kappa(c), ok=False,
                          message=str(exc), **base) for c in methods]
    cv_seed = int(np.random.SeedSequence(design.seed, spawn_key=(rep, 1)).generate_state(1)[0])
    for crit in methods:
        t0 = time.perf_counter()
        try:
            res = select(family, data, spec, grid, crit, config, seed=cv_seed, solutions=solutions)
        except (PanicRegError, ArithmeticError) as exc:
            out.append(RepRecord(method=method_label(crit), kappa=method_kappa(crit), ok=False,
                                 message=str(exc), **base))
            continue
        metrics = compute_metrics(res.fit, truth)
        elapsed = time.perf_counter() - t0 + (0.0 if crit.method is Method.CV else shared)
        out.append(RepRecord(method=method_label(crit), kappa=method_kappa(crit), ok=True,
                             chosen_index=res.chosen_index, chosen_radius=res.chosen_radius,
                             seconds=elapsed, **asdict(metrics), **base))
    return out


@dataclass
class CellSummary:
    method: str
    family: str
    n: int
    sigma: float
    kappa: float
    reps: int
    excluded: int
    stats: dict = field(default_factory=dict)  # metric -> (mean, se)
    se_defined: bool = True

    @property
    def failed(self):
        total = self.reps + self.excluded
        return total > 0 and self.excluded > FAILURE_BUDGET * total


def _fmt(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(float(v))
    return str(v)


@dataclass
class SimulationReport:
    cells: list
    records: list

    @property
    def failed_cells(self):
        return [c for c in self.cells if c.failed]

    def cell(self, method, n, sigma=None, kappa=None, family=None):
        for c in self.cells:
            if c.method != method or c.n != n:
                continue
            if family is not None and c.family != family:
                continue
            if sigma is not None and c.sigma != sigma:
                continue
            if kappa is not None and not (c.kappa == kappa):
                continue
            return c
        raise KeyError((method, n, sigma, kappa))

    def csv_text(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for c in self.cells:
            for metric in METRICS:
                mean, se = c.stats.get(metric, (math.nan, math.nan))
                w.writerow([c.method, c.family, c.n, _fmt(c.sigma), _fmt(c.kappa), metric,
                            _fmt(mean), _fmt(se), c.reps, c.excluded])
        return buf.getvalue()

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.csv_text())

    def to_json_obj(self):
        def clean(d):
            return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in d.items()}

        cells = []
        for c in self.cells:
            row = clean({k: getattr(c, k) for k in ("method", "family", "n", "sigma", "kappa",
                                                    "reps", "excluded")})
            row["se_defined"] = c.se_defined
            row["failed"] = c.failed
            row["metrics"] = {m: {"mean": c.stats[m][0], "se": c.stats[m][1]}
                              for m in METRICS if m in c.stats}
            cells.append(row)
        return {"cells": cells, "records": [clean(asdict(r)) for r in self.records]}

    def to_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_obj(), fh, indent=1, allow_nan=False)


def summarize(records, order):
    """Aggregate rep records into cells ordered by ``order`` keys."""
    groups = {}
    for r in records:
        key = (r.method, r.family, r.n, _fmt(r.sigma), _fmt(r.kappa))
        groups.setdefault(key, []).append(r)
    cells = []
    for key in order:
        recs = groups.get(key, [])
        good = [r for r in recs if r.ok]
        cell = CellSummary(method=key[0], family=key[1], n=key[2],
                           sigma=recs[0].sigma if recs else math.nan,
                           kappa=recs[0].kappa if recs else math.nan,
                           reps=len(good), excluded=len(recs) - len(good))
        cell.se_defined = len(good) > 1
        for metric in METRICS:
            vals = np.array([getattr(r, metric) for r in good], dtype=float)
            if vals.size == 0:
                cell.stats[metric] = (math.nan, math.nan)
            elif vals.size == 1:
                cell.stats[metric] = (float(vals[0]), 0.0)
            else:
                cell.stats[metric] = (float(vals.mean()),
                                      float(vals.std(ddof=1) / math.sqrt(vals.size)))
        cells.append(cell)
    return cells


def _run_task(args):
    design, rep, methods, spec, config = args
    return run_replication(design, rep, methods, spec, config)


def run_study(designs, methods, spec=LASSO, config=DEFAULT_CONFIG, threads=1):
    """Run every (design, method) cell and aggregate mean/se per cell.

    Rows are ordered by method (as listed), then design order (n, sigma).
    """
    designs = list(designs)
    methods = list(methods)
    if not designs or not methods:
        raise ValueError("need at least one design and one method")
    tasks = [(dsn, rep, methods, spec, config) for dsn in designs for rep in range(dsn.reps)]
    t0 = time.perf_counter()
    if threads <= 1:
        results = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (8 * threads))))
    records = [r for batch in results for r in batch]
    log.info("%d replications in %.1fs", len(tasks), time.perf_counter() - t0)
    for crit in methods:
        secs = [r.seconds for r in records if r.ok and r.method == method_label(crit)
                and _fmt(r.kappa) == _fmt(method_kappa(crit))]
        if secs:
            log.info("%s kappa=%s: %.4fs per replication", method_label(crit),
                     _fmt(method_kappa(crit)), float(np.mean(secs)))
    order = []
    for crit in methods:
        for dsn in designs:
            key = (method_label(crit), str(dsn.family), dsn.n, _fmt(dsn.sigma_label),
                   _fmt(method_kappa(crit)))
            if key not in order:
                order.append(key)
    records.sort(key=lambda r: (order.index((r.method, r.family, r.n, _fmt(r.sigma),
                                             _fmt(r.kappa))), r.rep))
    return SimulationReport(cells=summarize(records, order), records=records)


def paper_designs(reps=500, seed=0, m=DEFAULT_M, include_logistic=True):
    """Linear n x sigma grid (3 x 3) followed by the three logistic sample sizes."""
    out = [SimDesign(n=n, sigma=s, family=LINEAR, reps=reps, seed=seed, m=m)
           for s in (1.0, 2.0, 5.0) for n in (500, 1000, 2000)]
    if include_logistic:
        out += [SimDesign(n=n, sigma=1.0, family=LOGISTIC, reps=reps, seed=seed, m=m)
                for n in (500, 1000, 2000)]
    return out


def paper_methods(kappas=DEFAULT_KAPPA_SWEEP, bic_kappa=1.0, epsilon=1e-3, folds=5):
    out = [CriterionConfig(Method.PANIC, kappa=k) for k in kappas]
    out.append(CriterionConfig(Method.MODIFIED_BIC, kappa=bic_kappa, epsilon=epsilon))
    out.append(CriterionConfig(Method.CV, folds=folds))
    return out
