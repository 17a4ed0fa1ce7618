"""Choosing the constraint radius: PanIC, modified BIC, K-fold CV and the
continuous (interval) PanIC search.

Grid indices ``k`` are 1-based throughout, so ``k = 1`` is always the
intercept-only model at radius 0.
"""
from dataclasses import asdict, dataclass, field
from enum import Enum
import logging
import math
import warnings

import numpy as np

from .duality import ConstrainedSolution, PathPoint, solve_constrained
from .errors import DegenerateGridError, DomainError, PanicRegError, SelectionError, UnboundedERMError
from .glm import Dataset, FamilyKind, empirical_risk, risk_gradient
from .penalty import LASSO, lambda_max, penalty_value
from .solver import DEFAULT_CONFIG, FitResult, fit_erm, intercept_only

log = logging.getLogger(__name__)

DEFAULT_M = 100
DEFAULT_EPSILON = 1e-3
DEFAULT_BIC_KAPPA = 1.0
DEFAULT_FOLDS = 5
# keeps P_{k,n} > 0 at C = 0 without changing any ordering
FLOOR = 1e-12
ERM_ZERO_RTOL = 1e-8


class Method(str, Enum):
    PANIC = "panic"
    MODIFIED_BIC = "modified-bic"
    CV = "cv"


@dataclass(frozen=True)
class CriterionConfig:
    method: Method = Method.PANIC
    kappa: float = 1.0
    epsilon: float = DEFAULT_EPSILON
    folds: int = DEFAULT_FOLDS

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")
        if self.method is Method.PANIC and self.kappa <= 0:
            raise ValueError("PanIC needs kappa > 0")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.folds < 2:
            raise ValueError("need at least two folds")


@dataclass
class Grid:
    radii: np.ndarray
    erm: FitResult

    @property
    def m(self):
        return self.radii.shape[0]

    @property
    def spacing(self):
        return float(self.radii[1] - self.radii[0])


@dataclass
class GridRecord:
    k: int
    radius: float
    value: float = math.nan
    penalty: float = math.nan
    criterion: float = math.nan
    df_hat: int = -1
    df_tilde: int = -1
    bic: float = math.nan
    cv_risk: float = math.nan
    lambda_star: float = math.nan
    active: bool = False
    failed: bool = False


TABLE_COLUMNS = [f for f in GridRecord.__dataclass_fields__]


@dataclass
class SelectionResult:
    method: str
    chosen_index: int
    chosen_radius: float
    fit: FitResult
    table: list = field(default_factory=list)
    kappa: float = math.nan
    epsilon: float = math.nan
    n: int = 0
    excluded: int = 0

    def to_dict(self):
        return {
            "method": self.method,
            "chosen_index": self.chosen_index,
            "chosen_radius": self.chosen_radius,
            "kappa": self.kappa,
            "epsilon": self.epsilon,
            "n": self.n,
            "excluded": self.excluded,
            "fit": self.fit.to_dict(),
            "table": [asdict(r) for r in self.table],
        }


def _rate(n):
    return math.log(n) / n


def panic_penalty(c, n, kappa):
    """kappa * C * sqrt(log n / n), plus a vanishing floor so it is positive at C = 0."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    root = math.sqrt(_rate(n))
    return float(kappa * c * root + FLOOR * root)


def build_grid(family, data, spec=LASSO, m=DEFAULT_M, config=DEFAULT_CONFIG, erm=None):
    """m evenly spaced radii from 0 to g(ERM)."""
    if m < 2:
        raise ValueError("grid needs m >= 2")
    if erm is None:
        erm = fit_erm(family, data, config)
    if not erm.converged:
        raise UnboundedERMError(f"ERM did not converge ({erm.status}); {erm.message}".rstrip("; "))
    top = penalty_value(spec, erm.beta.slopes)
    if not top > 0 or _intercept_is_optimal(family, data, spec, config):
        raise DegenerateGridError("the ERM has all slopes at zero; nothing to select")
    return Grid(radii=np.linspace(0.0, top, m), erm=erm)


def _intercept_is_optimal(family, data, spec, config):
    # the slope gradient at the intercept-only fit is below solver tolerance,
    # so any non-zero ERM slopes are rounding noise
    try:
        fit = intercept_only(family, data)
    except DomainError:
        return False
    _, g = risk_gradient(family, fit.beta, data)
    return lambda_max(spec, g) <= config.tol_kkt


def support(fit):
    """Boolean mask of the non-zero slopes of a fit.

    Penalized solutions carry exact zeros from the prox; the unpenalized ERM
    only gets a relative threshold.
    """
    b = np.asarray(fit.beta.slopes)
    if fit.lam > 0:
        return b != 0.0
    top = np.max(np.abs(b)) if b.size else 0.0
    return np.abs(b) > ERM_ZERO_RTOL * top


def df_hat(fit):
    """Number of non-zero slopes (intercept excluded)."""
    return int(np.count_nonzero(support(fit)))


def df_tilde(counts):
    """Monotone (running-maximum) version of a df-hat sequence."""
    counts = np.asarray(counts, dtype=int)
    if counts.size == 0:
        raise ValueError("need a non-empty sequence")
    return np.maximum.accumulate(counts)


def solve_grid(family, data, spec, grid, config=DEFAULT_CONFIG):
    """Constrained solutions at every radius, warm-starting upward.

    Failed radii come back as ``None`` (with a warning).
    """
    if data.family != family:
        data = Dataset(data.x, data.y, family)
    out = []
    hint = None
    for i, c in enumerate(grid.radii):
        if i > 0 and c == grid.radii[i - 1]:
            out.append(out[-1])
            continue
        try:
            sol = solve_constrained(family, data, spec, float(c), config,
                                    bracket_hint=hint, erm=grid.erm)
        except (PanicRegError, ArithmeticError) as exc:
            warnings.warn(f"radius {c:.6g} failed: {exc}", RuntimeWarning, stacklevel=2)
            out.append(None)
            continue
        if sol.active and sol.lambda_star > 0:
            hint = PathPoint(sol.lambda_star, sol.fit.penalty, sol.fit.risk, sol.fit)
        out.append(sol)
    return out


def _records(grid, solutions):
    recs = []
    for k, (c, sol) in enumerate(zip(grid.radii, solutions), start=1):
        if sol is None:
            recs.append(GridRecord(k=k, radius=float(c), failed=True))
        else:
            recs.append(GridRecord(k=k, radius=float(c), value=sol.value,
                                   df_hat=df_hat(sol.fit), lambda_star=sol.lambda_star,
                                   active=sol.active))
    return recs


def _choose(method, recs, solutions, **extra):
    ok = [r for r in recs if not r.failed]
    if not ok:
        raise SelectionError("every grid point failed")
    best = min(r.criterion for r in ok)
    chosen = next(r for r in ok if r.criterion == best)
    sol = solutions[chosen.k - 1]
    return SelectionResult(method=method, chosen_index=chosen.k, chosen_radius=chosen.radius,
                           fit=sol.fit, table=recs, excluded=len(recs) - len(ok), **extra)


def _prepare(family, data, spec, grid, config, solutions):
    if data.family != family:
        data = Dataset(data.x, data.y, family)
    if solutions is None:
        solutions = solve_grid(family, data, spec, grid, config)
    if len(solutions) != grid.m:
        raise ValueError("solutions do not match the grid")
    return data, solutions


def select_panic(family, data, spec, grid, kappa, config=DEFAULT_CONFIG, solutions=None):
    """Smallest k minimizing value_k + kappa * C_k * sqrt(log n / n)."""
    data, solutions = _prepare(family, data, spec, grid, config, solutions)
    n = data.n
    recs = _records(grid, solutions)
    for r in recs:
        r.penalty = panic_penalty(r.radius, n, kappa)
        if not r.failed:
            r.criterion = r.value + r.penalty
            r.bic = r.value + _rate(n) * r.df_hat
    return _choose(Method.PANIC.value, recs, solutions, kappa=kappa, n=n)


def select_modified_bic(family, data, spec, grid, kappa=DEFAULT_BIC_KAPPA,
                        epsilon=DEFAULT_EPSILON, config=DEFAULT_CONFIG, solutions=None):
    """Smallest k minimizing value_k + (log n / n) * (kappa * df~_k + epsilon * C_k)."""
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    data, solutions = _prepare(family, data, spec, grid, config, solutions)
    n = data.n
    rate = _rate(n)
    recs = _records(grid, solutions)
    ok = [r for r in recs if not r.failed]
    if ok:
        for r, t in zip(ok, df_tilde([r.df_hat for r in ok])):
            r.df_tilde = int(t)
            r.penalty = rate * (kappa * t + epsilon * r.radius)
            r.criterion = r.value + r.penalty
            r.bic = r.value + rate * r.df_hat
    return _choose(Method.MODIFIED_BIC.value, recs, solutions, kappa=kappa,
                   epsilon=epsilon, n=n)


def _degenerate(data):
    y = data.y
    kind = data.family.kind
    if kind is FamilyKind.LOGISTIC:
        return y.min() == y.max()
    if kind is FamilyKind.POISSON:
        return not np.any(y > 0)
    return False


def _fold_indices(n, folds, rng):
    perm = rng.permutation(n)
    return [np.sort(part) for part in np.array_split(perm, folds)]


def select_cv(family, data, spec, grid, folds=DEFAULT_FOLDS, seed=0,
              config=DEFAULT_CONFIG, solutions=None):
    """K-fold cross-validation over the same radius grid.

    Each fold is fitted at every C_k; the held-out family loss is averaged
    over folds and the smallest minimizing k is refitted on the full data.
    """
    if data.family != family:
        data = Dataset(data.x, data.y, family)
    n = data.n
    if folds < 2 or n < folds:
        raise ValueError(f"need 2 <= folds <= n, got folds={folds}, n={n}")
    seeds = np.random.SeedSequence(seed)
    rng = np.random.default_rng(seeds)
    parts = _fold_indices(n, folds, rng)
    splits = []
    for attempt in range(2):
        splits = []
        for held in parts:
            mask = np.ones(n, dtype=bool)
            mask[held] = False
            splits.append((data.subset(mask), data.subset(held)))
        if not any(_degenerate(train) for train, _ in splits):
            break
        if attempt == 0:
            log.info("degenerate training fold; reshuffling once")
            parts = _fold_indices(n, folds, np.random.default_rng(seeds.spawn(1)[0]))
    else:
        raise SelectionError("cross-validation folds have a degenerate response after reshuffling")

    m = grid.m
    risks = np.full((folds, m), np.nan)
    for f, (train, valid) in enumerate(splits):
        try:
            erm = fit_erm(family, train, config)
        except (PanicRegError, ArithmeticError) as exc:
            warnings.warn(f"fold {f + 1}: ERM failed: {exc}", RuntimeWarning, stacklevel=2)
            continue
        fold_grid = Grid(radii=grid.radii, erm=erm)
        for k, sol in enumerate(solve_grid(family, train, spec, fold_grid, config)):
            if sol is None:
                continue
            try:
                risks[f, k] = empirical_risk(family, sol.fit.beta, valid)
            except DomainError:
                pass
    cv = risks.mean(axis=0)

    data, solutions = _prepare(family, data, spec, grid, config, solutions)
    recs = _records(grid, solutions)
    for r in recs:
        r.cv_risk = float(cv[r.k - 1])
        if not np.isfinite(r.cv_risk):
            r.failed = True
        if not r.failed:
            r.criterion = r.cv_risk
            r.bic = r.value + _rate(n) * r.df_hat
    return _choose(Method.CV.value, recs, solutions, n=n)


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def select_continuous(family, data, spec, interval, kappa, config=DEFAULT_CONFIG,
                      coarse=50, erm=None, rtol=1e-3):
    """PanIC over every radius in [a, b] rather than a finite grid.

    A coarse grid locates the best bracket; golden-section search then
    narrows it to width rtol * (b - a). The smallest minimizer seen wins.
    """
    a, b = map(float, interval)
    if a < 0 or b < a:
        raise ValueError(f"need 0 <= a <= b, got [{a}, {b}]")
    if data.family != family:
        data = Dataset(data.x, data.y, family)
    n = data.n
    if erm is None:
        erm = fit_erm(family, data, config)
    seen = {}

    def crit(c):
        if c not in seen:
            sol = solve_constrained(family, data, spec, c, config, erm=erm)
            seen[c] = (sol.value + panic_penalty(c, n, kappa), sol)
        return seen[c][0]

    if a == b:
        crit(a)
    else:
        pts = np.linspace(a, b, coarse)
        vals = []
        for c in pts:
            try:
                vals.append(crit(float(c)))
            except (PanicRegError, ArithmeticError) as exc:
                warnings.warn(f"radius {c:.6g} failed: {exc}", RuntimeWarning, stacklevel=2)
                vals.append(math.inf)
        vals = np.asarray(vals)
        if not np.any(np.isfinite(vals)):
            raise SelectionError("every coarse radius failed")
        i = int(np.argmin(vals))
        lo, hi = float(pts[max(i - 1, 0)]), float(pts[min(i + 1, coarse - 1)])
        width = rtol * (b - a)
        x1 = hi - _INVPHI * (hi - lo)
        x2 = lo + _INVPHI * (hi - lo)
        f1, f2 = crit(x1), crit(x2)
        while hi - lo > width:
            if f1 <= f2:
                hi, x2, f2 = x2, x1, f1
                x1 = hi - _INVPHI * (hi - lo)
                f1 = crit(x1)
            else:
                lo, x1, f1 = x1, x2, f2
                x2 = lo + _INVPHI * (hi - lo)
                f2 = crit(x2)

    ordered = sorted(seen)
    best = min(seen[c][0] for c in ordered)
    c_star = next(c for c in ordered if seen[c][0] == best)
    table = []
    for k, c in enumerate(ordered, start=1):
        value, sol = seen[c]
        table.append(GridRecord(k=k, radius=c, value=sol.value,
                                penalty=value - sol.value, criterion=value,
                                df_hat=df_hat(sol.fit), lambda_star=sol.lambda_star,
                                active=sol.active))
    return SelectionResult(method="panic-continuous", chosen_index=ordered.index(c_star) + 1,
                           chosen_radius=c_star, fit=seen[c_star][1].fit, table=table,
                           kappa=kappa, n=n)


def select(family, data, spec, grid, criterion, config=DEFAULT_CONFIG, seed=0, solutions=None):
    """Dispatch on ``criterion.method``."""
    method = criterion.method
    if method is Method.PANIC:
        return select_panic(family, data, spec, grid, criterion.kappa, config, solutions)
    if method is Method.MODIFIED_BIC:
        return select_modified_bic(family, data, spec, grid, criterion.kappa,
                                   criterion.epsilon, config, solutions)
    return select_cv(family, data, spec, grid, criterion.folds, seed, config, solutions)
