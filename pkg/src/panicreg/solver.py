"""Penalized GLM fits: min R_n(b0, b) + lambda * g(b) by proximal gradient."""
from dataclasses import dataclass, field, replace
import logging
import math
import weakref

import numpy as np
from scipy.optimize import linprog

from . import kernels as K
from .errors import DomainError, InputError
from .glm import CoefficientVector, Dataset, FamilyKind
from .penalty import LASSO, penalty_value

log = logging.getLogger(__name__)

_STATUS = {
    K.CONVERGED: "converged",
    K.MAX_ITER: "max-iterations",
    K.STALLED: "stalled",
    K.STEP_UNDERFLOW: "step-underflow",
}


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 50_000
    tol_kkt: float = 1e-7
    tol_objective: float = 1e-12
    shrink: float = 0.5
    accelerate: bool = False
    use_gram: bool | None = None  # None: automatic for linear data with n > d
    record_trace: bool = False
    check_uniqueness: bool = False

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if not (self.tol_kkt > 0 and self.tol_objective > 0):
            raise ValueError("tolerances must be positive")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("shrink must lie in (0, 1)")

    def updated(self, **kw):
        return replace(self, **kw)


DEFAULT_CONFIG = SolverConfig()


@dataclass
class FitResult:
    beta: CoefficientVector
    lam: float
    objective: float
    risk: float
    penalty: float
    iterations: int
    converged: bool
    kkt: float = 0.0
    status: str = "converged"
    step: float = 1.0
    message: str = ""
    trace: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self):
        return {
            "intercept": self.beta.intercept,
            "slopes": self.beta.slopes.tolist(),
            "lambda": self.lam,
            "objective": self.objective,
            "risk": self.risk,
            "penalty": self.penalty,
            "iterations": self.iterations,
            "converged": self.converged,
            "kkt_residual": self.kkt,
            "status": self.status,
            "message": self.message,
        }


def _as_dataset(family, data):
    if data.family == family:
        return data
    return Dataset(data.x, data.y, family)


_step_cache = weakref.WeakKeyDictionary()


def _power_iteration(matvec, dim, iters=50):
    v = np.ones(dim) / math.sqrt(dim)
    lam = 0.0
    for _ in range(iters):
        w = matvec(v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(nw - lam) <= 1e-6 * nw:
            lam = nw
            break
        lam = nw
    return lam


def initial_step(data, beta=None, use_gram=None):
    """1 / (largest eigenvalue of the Hessian linearized at ``beta``).

    Linear and logistic curvature bounds do not depend on beta and are cached
    per dataset; 1.0 is the fallback when the estimate degenerates.
    """
    kind = data.family.kind
    cacheable = kind in (FamilyKind.LINEAR, FamilyKind.LOGISTIC)
    if cacheable and data in _step_cache:
        return _step_cache[data]
    n, d = data.n, data.d
    if kind is FamilyKind.LINEAR and (use_gram or (use_gram is None and n > d)):
        g, _, xbar, _ = data.gram_stats

        def matvec(v):
            return 2.0 * np.concatenate(([v[0] + xbar @ v[1:]], xbar * v[0] + g @ v[1:]))
    else:
        x = data.x
        if kind is FamilyKind.LINEAR:
            w = np.full(n, 2.0)
        elif kind is FamilyKind.LOGISTIC:
            w = np.full(n, 0.25)
        else:
            b = beta if beta is not None else CoefficientVector.zeros(d)
            z = np.clip(b.linear_predictor(x), -700.0, 700.0)
            if kind is FamilyKind.POISSON:
                w = np.exp(z)
            else:
                w = data.family.nu * data.y * np.exp(-z)

        def matvec(v):
            u = w * (v[0] + x @ v[1:])
            return np.concatenate(([u.sum()], x.T @ u)) / n
    top = _power_iteration(matvec, d + 1)
    # power iteration underestimates; pad so the first step rarely backtracks
    step = 1.0 / (1.05 * top) if top > 0 and np.isfinite(top) else 1.0
    if cacheable:
        _step_cache[data] = step
    return step


def intercept_only(family, data):
    """Closed-form minimizer of the risk over b0 with all slopes at zero."""
    data = _as_dataset(family, data)
    ybar = float(np.mean(data.y))
    kind = family.kind
    if kind is FamilyKind.LINEAR:
        b0 = ybar
    elif kind is FamilyKind.LOGISTIC:
        if ybar <= 0.0 or ybar >= 1.0:
            raise DomainError("intercept-only logistic fit is unbounded (single class)")
        b0 = math.log(ybar / (1.0 - ybar))
    else:
        if ybar <= 0.0:
            raise DomainError("intercept-only log-link fit is unbounded (all-zero response)")
        b0 = math.log(ybar)
    beta = CoefficientVector(b0, np.zeros(data.d))
    args = data.kernel_args(None)
    risk, g0, g = K.KERNELS.risk_grad(*args, beta.intercept, beta.slopes)
    return FitResult(beta=beta, lam=math.inf, objective=float(risk), risk=float(risk),
                     penalty=0.0, iterations=0, converged=True, kkt=abs(float(g0)))


def fit_penalized(family, data, spec=LASSO, lam=0.0, config=DEFAULT_CONFIG,
                  warm_start=None, step=None):
    """Minimize R_n(b0, b) + lam * g(b).

    ``converged`` is True iff the KKT residual dropped to ``config.tol_kkt``;
    otherwise the last (best) iterate is returned and the caller decides.
    """
    if lam < 0 or not np.isfinite(lam):
        raise ValueError(f"lambda must be finite and non-negative, got {lam}")
    data = _as_dataset(family, data)
    if warm_start is None:
        warm_start = CoefficientVector.zeros(data.d)
    elif warm_start.d != data.d:
        raise InputError(f"warm start has {warm_start.d} slopes, data has {data.d} covariates")
    if config.check_uniqueness and lam == 0.0 and data.n <= data.d:
        log.warning("n=%d <= d=%d: the empirical risk is not strictly convex; "
                    "the reported minimizer may not be unique", data.n, data.d)
    args = data.kernel_args(config.use_gram)
    if step is None:
        step = initial_step(data, warm_start, args[-1])
    trace = np.full(config.max_iterations + 1, np.nan) if config.record_trace else np.zeros(0)
    b0, beta, obj, risk, iters, status, step, kkt = K.KERNELS.prox_grad(
        *args, spec.code, spec.mix, float(lam),
        warm_start.intercept, np.ascontiguousarray(warm_start.slopes),
        float(step), config.shrink, config.max_iterations,
        config.tol_kkt, config.tol_objective, config.accelerate, trace)
    if not np.isfinite(obj):
        raise DomainError(f"objective is not finite for the {family} family at the start point")
    beta = np.asarray(beta, dtype=float)
    coef = CoefficientVector(b0, beta)
    return FitResult(
        beta=coef, lam=float(lam), objective=float(obj), risk=float(risk),
        penalty=penalty_value(spec, beta), iterations=int(iters),
        converged=status == K.CONVERGED, kkt=float(kkt), status=_STATUS[status],
        step=float(step), trace=trace[: iters + 1] if config.record_trace else None)


def separable(data):
    """True if some (b0, b) != 0 has (2y - 1)(b0 + x'b) >= 0 for every row,
    strictly for at least one; the logistic ERM then does not exist.

    Solved as max sum_i s_i z_i over the box |v| <= 1 subject to s_i z_i >= 0.
    """
    s = 2.0 * data.y - 1.0
    a = s[:, None] * np.column_stack([np.ones(data.n), data.x])
    res = linprog(-a.sum(axis=0), A_ub=-a, b_ub=np.zeros(data.n), bounds=(-1, 1),
                  method="highs")
    if res.status != 0:
        return False
    return -res.fun > 1e-7 * max(1.0, float(np.abs(a).sum()) / data.n)


def fit_erm(family, data, config=DEFAULT_CONFIG, warm_start=None):
    """Unpenalized empirical risk minimizer.

    Separable logistic data is reported as unbounded without trusting the
    vanishing gradient; otherwise a non-converged result whose slope norm
    keeps growing is flagged the same way.
    """
    data = _as_dataset(family, data)
    fit = fit_penalized(family, data, LASSO, 0.0, config, warm_start)
    if family.kind is FamilyKind.LOGISTIC and separable(data):
        fit.converged = False
        fit.status = "unbounded"
        fit.message = "the classes are separable; the ERM is unbounded"
        return fit
    if not fit.converged:
        probe = fit_penalized(family, data, LASSO, 0.0,
                              config.updated(max_iterations=min(config.max_iterations, 1000),
                                             record_trace=False),
                              fit.beta, fit.step)
        before = np.linalg.norm(fit.beta.slopes)
        after = np.linalg.norm(probe.beta.slopes)
        if after > before * (1 + 1e-9):
            fit.message = "slope norm keeps growing; the ERM appears to be unbounded"
        else:
            fit.message = f"no convergence within {config.max_iterations} iterations"
    return fit
