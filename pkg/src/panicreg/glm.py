"""Loss and mean functions for linear, logistic, Poisson and Gamma regression.

All losses are negative log-likelihoods with every constant kept, so
reported risks are actual average negative log-likelihoods (up to the
squared-error convention for the linear model).
"""
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
import math

import numpy as np
from scipy.special import gammaln

from . import kernels as K
from .errors import DomainError, InputError

# |beta0 + beta'x| beyond this is rejected where exp() is involved
EXP_LIMIT = 709.0


class FamilyKind(str, Enum):
    LINEAR = "linear"
    LOGISTIC = "logistic"
    POISSON = "poisson"
    GAMMA = "gamma"


_CODES = {
    FamilyKind.LINEAR: K.LINEAR,
    FamilyKind.LOGISTIC: K.LOGISTIC,
    FamilyKind.POISSON: K.POISSON,
    FamilyKind.GAMMA: K.GAMMA,
}


@dataclass(frozen=True)
class Family:
    kind: FamilyKind
    gamma_shape: float | None = None

    def __post_init__(self):
        kind = FamilyKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is FamilyKind.GAMMA:
            if self.gamma_shape is None:
                object.__setattr__(self, "gamma_shape", 1.0)
            if not self.gamma_shape > 0:
                raise InputError(f"gamma shape must be positive, got {self.gamma_shape}")
        elif self.gamma_shape is not None:
            raise InputError("gamma_shape is only meaningful for the Gamma family")

    @classmethod
    def from_name(cls, name, nu=None):
        kind = FamilyKind(name.lower())
        return cls(kind, nu if kind is FamilyKind.GAMMA else None)

    @property
    def code(self):
        return _CODES[self.kind]

    @property
    def nu(self):
        return self.gamma_shape if self.gamma_shape is not None else 1.0

    def __str__(self):
        return self.kind.value

    def check_response(self, y):
        y = np.asarray(y, dtype=float)
        if not np.all(np.isfinite(y)):
            raise InputError("response contains non-finite values")
        if self.kind is FamilyKind.LOGISTIC and not np.all((y == 0) | (y == 1)):
            raise InputError("logistic response must be 0/1")
        if self.kind is FamilyKind.POISSON and not np.all((y >= 0) & (y == np.round(y))):
            raise InputError("Poisson response must be non-negative integers")
        if self.kind is FamilyKind.GAMMA and not np.all(y > 0):
            raise InputError("Gamma response must be positive")

    def loss_constant(self, y):
        """Mean of the terms of the loss that do not involve the coefficients."""
        if self.kind is FamilyKind.POISSON:
            return float(np.mean(gammaln(y + 1.0)))
        if self.kind is FamilyKind.GAMMA:
            nu = self.nu
            return float(-(nu - 1.0) * np.mean(np.log(y)) + gammaln(nu) - nu * math.log(nu))
        return 0.0


LINEAR = Family(FamilyKind.LINEAR)
LOGISTIC = Family(FamilyKind.LOGISTIC)
POISSON = Family(FamilyKind.POISSON)


@dataclass(frozen=True)
class CoefficientVector:
    intercept: float
    slopes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "intercept", float(self.intercept))
        object.__setattr__(self, "slopes", np.array(self.slopes, dtype=float).ravel())

    @classmethod
    def zeros(cls, d):
        return cls(0.0, np.zeros(d))

    @property
    def d(self):
        return self.slopes.shape[0]

    def linear_predictor(self, x):
        return self.intercept + np.asarray(x, dtype=float) @ self.slopes

    def to_dict(self):
        return {"intercept": self.intercept, "slopes": self.slopes.tolist()}


@dataclass(frozen=True, eq=False)
class Dataset:
    """Covariates ``x`` (n x d), responses ``y`` (n,) and their family.

    Arrays are copied and frozen on construction.
    """

    x: np.ndarray
    y: np.ndarray
    family: Family = field(default=LINEAR)

    def __post_init__(self):
        x = np.array(self.x, dtype=float, order="C")
        if x.ndim == 1:
            x = x[:, None]
        y = np.array(self.y, dtype=float).ravel()
        if x.ndim != 2 or x.shape[0] != y.shape[0]:
            raise InputError(f"x has shape {x.shape} but y has {y.shape[0]} entries")
        if x.shape[0] < 1 or x.shape[1] < 1:
            raise InputError("need at least one row and one covariate")
        if not np.all(np.isfinite(x)):
            raise InputError("covariates contain non-finite values")
        self.family.check_response(y)
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def d(self):
        return self.x.shape[1]

    def subset(self, idx):
        return Dataset(self.x[idx], self.y[idx], self.family)

    @cached_property
    def loss_constant(self):
        return self.family.loss_constant(self.y)

    @cached_property
    def gram_stats(self):
        """(X'X/n, X'y/n, column means, [mean y, mean y^2]) for the linear fast path."""
        n = self.n
        g = np.ascontiguousarray(self.x.T @ self.x / n)
        xy = self.x.T @ self.y / n
        xbar = self.x.mean(axis=0)
        stats = np.array([self.y.mean(), np.dot(self.y, self.y) / n])
        return g, xy, xbar, stats

    def kernel_args(self, use_gram=None):
        """Positional (fam, nu, const, X, y, xbar, stats, gram) for the kernels."""
        fam = self.family
        if use_gram is None:
            use_gram = fam.kind is FamilyKind.LINEAR and self.n > self.d
        if use_gram and fam.kind is not FamilyKind.LINEAR:
            raise ValueError("the Gram path exists only for the linear family")
        if use_gram:
            g, xy, xbar, stats = self.gram_stats
            return (fam.code, fam.nu, 0.0, g, xy, xbar, stats, True)
        return (fam.code, fam.nu, self.loss_constant, self.x, self.y,
                np.zeros(self.d), np.zeros(2), False)


def _check_dims(beta, x):
    if beta.slopes.shape[0] != np.shape(x)[-1]:
        raise InputError(f"coefficient length {beta.slopes.shape[0]} != covariate dimension {np.shape(x)[-1]}")


def _sigmoid(z):
    return 0.5 * (1.0 + math.tanh(0.5 * z))


def mean_value(family, beta, x_row):
    """Mean function h(x; beta0, beta)."""
    _check_dims(beta, x_row)
    z = float(beta.linear_predictor(x_row))
    kind = family.kind
    if kind is FamilyKind.LINEAR:
        return z
    if kind is FamilyKind.LOGISTIC:
        return _sigmoid(z)
    if z > EXP_LIMIT:
        raise DomainError(f"exp({z:.6g}) overflows")
    return math.exp(z)


def pointwise_loss(family, beta, x_row, y):
    """Loss of one observation (negative log-likelihood form)."""
    _check_dims(beta, x_row)
    y = float(y)
    family.check_response(np.array([y]))
    z = float(beta.linear_predictor(x_row))
    kind = family.kind
    if kind is FamilyKind.LINEAR:
        return (y - z) ** 2
    if kind is FamilyKind.LOGISTIC:
        # log(1 + e^z) - y z, stable for both signs of z
        return float(np.logaddexp(0.0, z) - y * z)
    if abs(z) > EXP_LIMIT:
        raise DomainError(f"linear predictor {z:.6g} outside the exp() guard")
    if kind is FamilyKind.POISSON:
        return math.exp(z) - y * z + math.lgamma(y + 1.0)
    nu = family.nu
    return (nu * z + y * nu * math.exp(-z) - (nu - 1.0) * math.log(y)
            + math.lgamma(nu) - nu * math.log(nu))


def _risk_grad(family, beta, data, use_gram=None):
    if data.family != family:
        data = Dataset(data.x, data.y, family)
    _check_dims(beta, data.x)
    args = data.kernel_args(use_gram)
    risk, g0, g = K.KERNELS.risk_grad(*args, beta.intercept, beta.slopes)
    if not np.isfinite(risk):
        raise DomainError(f"empirical risk is not finite for the {family} family")
    return float(risk), float(g0), np.asarray(g, dtype=float)


def empirical_risk(family, beta, data, use_gram=False):
    """Average loss over the sample."""
    return _risk_grad(family, beta, data, use_gram)[0]


def risk_gradient(family, beta, data, use_gram=False):
    """Gradient of :func:`empirical_risk` as ``(d/d beta0, d/d beta)``."""
    _, g0, g = _risk_grad(family, beta, data, use_gram)
    return g0, g
