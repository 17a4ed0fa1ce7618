"""Regularizers g(beta) on the slopes: L1 (lasso), L2 (ridge, the norm
itself, not its square) and the elastic net alpha*|b|_1 + (1-alpha)*|b|_2^2.
The intercept is never penalized.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels as K


class PenaltyKind(str, Enum):
    L1 = "l1"
    L2 = "l2"
    ELASTIC_NET = "elasticnet"


_CODES = {PenaltyKind.L1: K.L1, PenaltyKind.L2: K.L2, PenaltyKind.ELASTIC_NET: K.ELASTIC_NET}
_ALIASES = {"lasso": "l1", "ridge": "l2", "elastic-net": "elasticnet", "enet": "elasticnet"}


@dataclass(frozen=True)
class PenaltySpec:
    kind: PenaltyKind = PenaltyKind.L1
    alpha: float | None = None

    def __post_init__(self):
        kind = PenaltyKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is PenaltyKind.ELASTIC_NET:
            if self.alpha is None or not 0.0 < self.alpha < 1.0:
                raise ValueError(f"elastic net needs 0 < alpha < 1, got {self.alpha}")
        elif self.alpha is not None:
            raise ValueError("alpha is only used by the elastic net")

    @classmethod
    def from_name(cls, name, alpha=None):
        name = _ALIASES.get(name.lower(), name.lower())
        kind = PenaltyKind(name)
        return cls(kind, alpha if kind is PenaltyKind.ELASTIC_NET else None)

    @property
    def code(self):
        return _CODES[self.kind]

    @property
    def mix(self):
        """alpha as a float (ignored by the kernels unless elastic net)."""
        return 1.0 if self.alpha is None else float(self.alpha)

    @property
    def has_l1(self):
        return self.kind is not PenaltyKind.L2

    def __str__(self):
        if self.kind is PenaltyKind.ELASTIC_NET:
            return f"elasticnet(alpha={self.alpha})"
        return self.kind.value


LASSO = PenaltySpec(PenaltyKind.L1)


def _vec(beta):
    return np.ascontiguousarray(beta, dtype=float).ravel()


def penalty_value(spec, beta_slopes):
    return float(K.KERNELS.penalty(spec.code, spec.mix, _vec(beta_slopes)))


def prox(spec, lam, step, beta_slopes):
    """argmin_z |z - beta|^2 / (2 step) + lam * g(z)."""
    if step <= 0:
        raise ValueError("step must be positive")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    return K.KERNELS.prox(spec.code, spec.mix, step * lam, _vec(beta_slopes))


def within_ball(spec, c, beta_slopes, tol=0.0):
    if tol < 0:
        raise ValueError("tol must be non-negative")
    return penalty_value(spec, beta_slopes) <= c + tol


def lambda_max(spec, grad_slopes):
    """Smallest lambda whose penalized solution has all slopes at zero,
    given the slope gradient at the intercept-only optimum."""
    g = _vec(grad_slopes)
    if spec.kind is PenaltyKind.L1:
        return float(np.max(np.abs(g)))
    if spec.kind is PenaltyKind.L2:
        return float(np.linalg.norm(g))
    return float(np.max(np.abs(g)) / spec.alpha)
