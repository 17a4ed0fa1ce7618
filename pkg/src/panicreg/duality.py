"""Constrained <-> penalized correspondence.

For a strictly convex risk the map lambda -> g(beta_lambda) is continuous
and non-increasing, so the constrained problem min R_n s.t. g(beta) <= C is
solved by bisecting on lambda until the penalized solution sits on the
boundary g = C.
"""
from dataclasses import dataclass
import math

import numpy as np

from . import kernels as K
from .errors import DomainError, PathInversionError, PanicRegError
from .glm import Dataset
from .penalty import LASSO, lambda_max, penalty_value
from .solver import DEFAULT_CONFIG, FitResult, fit_erm, fit_penalized, intercept_only

TOL_C = 1e-4
MAX_BISECTIONS = 200
LAMBDA_CEILING = 1e12


class SolverFailure(PanicRegError, ArithmeticError):
    code = "solver-failed"


@dataclass
class PathPoint:
    lam: float
    penalty_level: float
    risk: float
    fit: FitResult


@dataclass
class ConstrainedSolution:
    c: float
    lambda_star: float
    fit: FitResult
    active: bool
    value: float
    bisections: int = 0

    def to_dict(self):
        return {
            "radius": self.c,
            "lambda_star": self.lambda_star,
            "active": self.active,
            "value": self.value,
            "bisections": self.bisections,
            "fit": self.fit.to_dict(),
        }


def _acceptable(fit, config):
    return fit.converged or (fit.status == "stalled" and fit.kkt <= 100 * config.tol_kkt)


def path_value(family, data, spec=LASSO, lam=0.0, config=DEFAULT_CONFIG,
               warm_start=None, step=None):
    """Solve the penalized problem at ``lam`` and record g(beta_lam)."""
    fit = fit_penalized(family, data, spec, lam, config, warm_start, step)
    if not _acceptable(fit, config):
        raise SolverFailure(f"penalized fit at lambda={lam:.6g} ended with status {fit.status} "
                            f"(kkt={fit.kkt:.3g})")
    return PathPoint(lam=float(lam), penalty_level=fit.penalty, risk=fit.risk, fit=fit)


def _intercept_solution(family, data, spec):
    fit = intercept_only(family, data)
    args = data.kernel_args(None)
    _, _, g = K.KERNELS.risk_grad(*args, fit.beta.intercept, fit.beta.slopes)
    lam = lambda_max(spec, g)
    fit.lam = lam
    return ConstrainedSolution(c=0.0, lambda_star=lam, fit=fit, active=True, value=fit.risk)


def _polish(family, data, spec, c, config, lo, hi, point, tol, steps=3):
    """Secant steps inside the final bracket.

    The bisection tolerance on g leaves up to lambda * tol of error in the
    optimal value; L(lambda) is smooth between kinks, so a few secant steps
    usually remove it. A step is kept only if it lands closer to c.
    """
    target = 1e-3 * tol
    for _ in range(steps):
        if abs(point.penalty_level - c) <= target:
            break
        span = lo.penalty_level - hi.penalty_level
        if not (span > 0 and math.isfinite(span)):
            break
        lam = lo.lam + (lo.penalty_level - c) / span * (hi.lam - lo.lam)
        if not lo.lam < lam < hi.lam:
            break
        near = lo if abs(lo.penalty_level - c) < abs(hi.penalty_level - c) else hi
        try:
            trial = path_value(family, data, spec, lam, config, near.fit.beta, near.fit.step)
        except PanicRegError:
            break
        if trial.penalty_level > c:
            lo = trial
        else:
            hi = trial
        if abs(trial.penalty_level - c) < abs(point.penalty_level - c):
            point = trial
        else:
            break
    return point


def solve_constrained(family, data, spec=LASSO, c=0.0, config=DEFAULT_CONFIG,
                      bracket_hint=None, erm=None, tol_c=TOL_C,
                      max_bisections=MAX_BISECTIONS):
    """min R_n(b0, b) subject to g(b) <= c.

    ``bracket_hint`` is an upper lambda (or a PathPoint at one) believed to
    give g < c, e.g. the multiplier found for a smaller radius. ``erm`` is a
    precomputed unpenalized fit to reuse.
    """
    if c < 0 or not np.isfinite(c):
        raise ValueError(f"radius must be finite and non-negative, got {c}")
    if data.family != family:
        data = Dataset(data.x, data.y, family)
    if c == 0.0:
        return _intercept_solution(family, data, spec)

    if erm is None:
        erm = fit_erm(family, data, config)
    erm_level = penalty_value(spec, erm.beta.slopes) if erm.converged else math.inf
    if erm_level <= c:
        return ConstrainedSolution(c=float(c), lambda_star=0.0, fit=erm, active=False,
                                   value=erm.risk)

    scale = max(1.0, c)
    lo = PathPoint(0.0, erm_level, erm.risk, erm)

    hi = None
    if isinstance(bracket_hint, PathPoint):
        hi = bracket_hint
    elif bracket_hint is not None:
        hi = path_value(family, data, spec, float(bracket_hint), config, erm.beta)
    else:
        try:
            start = _intercept_solution(family, data, spec).lambda_star
        except DomainError:
            start = 0.0
        if start > 0:
            hi = path_value(family, data, spec, start, config)
    if hi is None or hi.penalty_level >= c:
        lam = 1.0 if hi is None else max(1.0, 2.0 * hi.lam)
        hi = path_value(family, data, spec, lam, config, erm.beta)
        while hi.penalty_level >= c:
            if lam > LAMBDA_CEILING:
                raise PathInversionError(
                    f"g(beta_lambda) stayed >= {c:.6g} up to lambda={LAMBDA_CEILING:.0e}")
            lam *= 2.0
            hi = path_value(family, data, spec, lam, config, hi.fit.beta, hi.fit.step)

    width_floor = 1e-12 * hi.lam
    point = hi
    count = 0
    while count < max_bisections:
        if abs(point.penalty_level - c) <= tol_c * scale:
            break
        if hi.lam - lo.lam <= width_floor:
            point = hi
            break
        count += 1
        mid = 0.5 * (lo.lam + hi.lam)
        near = lo if abs(lo.penalty_level - c) < abs(hi.penalty_level - c) else hi
        point = path_value(family, data, spec, mid, config, near.fit.beta, near.fit.step)
        if point.penalty_level > c:
            lo = point
        else:
            hi = point
    else:
        point = hi

    point = _polish(family, data, spec, c, config, lo, hi, point, tol_c * scale)
    return ConstrainedSolution(c=float(c), lambda_star=point.lam, fit=point.fit,
                               active=True, value=point.risk, bisections=count)
