"""Hot numeric kernels: GLM risk/gradient, proximal maps and the
proximal-gradient loop.

The functions below are plain numpy in the subset numba compiles; call them
through a build, not directly. :func:`build` makes a numba build and a
pure-numpy build. ``KERNELS`` is the active one (see ``panicreg._accel``);
``numpy_kernels()`` and ``numba_kernels()`` expose both for tests and the
benchmark.

Data layout shared by every kernel
----------------------------------
``fam``    family code (LINEAR, LOGISTIC, POISSON, GAMMA)
``gram``   True for the linear sufficient-statistic path. Then ``X`` is the
           d x d matrix X'X/n, ``y`` is X'y/n, ``xbar`` the column means and
           ``stats = [mean(y), mean(y**2)]``. Otherwise ``X``/``y`` are the
           raw rows and ``xbar``/``stats`` are ignored.
``const``  additive constant of the mean loss (log y! terms, Gamma constants)
``pen``    penalty code (L1, L2, ELASTIC_NET), ``alpha`` the mixing weight
"""
from types import FunctionType, SimpleNamespace

import numpy as np

from ._accel import ENABLE_NUMBA, NUMBA_AVAILABLE, identity, njit

LINEAR, LOGISTIC, POISSON, GAMMA = 0, 1, 2, 3
L1, L2, ELASTIC_NET = 0, 1, 2

# status codes returned by the proximal-gradient loop
RUNNING, CONVERGED, MAX_ITER, STALLED, STEP_UNDERFLOW = 0, 1, 2, 3, 4


def risk_grad(fam, nu, const, X, y, xbar, stats, gram, b0, beta):
    if gram:
        gb = X @ beta
        xb = np.dot(xbar, beta)
        risk = (stats[1] - 2.0 * b0 * stats[0] - 2.0 * np.dot(beta, y)
                + b0 * b0 + 2.0 * b0 * xb + np.dot(beta, gb))
        if risk < 0.0:
            risk = 0.0
        g0 = 2.0 * (b0 + xb - stats[0])
        g = 2.0 * (gb + b0 * xbar - y)
        return risk, g0, g
    n = X.shape[0]
    z = X @ beta + b0
    if fam == LINEAR:
        r = y - z
        risk = np.dot(r, r) / n
        w = -2.0 * r
    elif fam == LOGISTIC:
        risk = np.sum(np.logaddexp(0.0, z) - y * z) / n
        w = 0.5 * (1.0 + np.tanh(0.5 * z)) - y
    elif fam == POISSON:
        mu = np.exp(z)
        risk = np.sum(mu - y * z) / n + const
        w = mu - y
    else:
        e = y * np.exp(-z)
        risk = nu * np.sum(z + e) / n + const
        w = nu * (1.0 - e)
    g0 = np.sum(w) / n
    g = (X.T @ w) / n
    return risk, g0, g

def norm2(v):
    # scaled so tiny or huge entries neither underflow nor overflow
    top = np.max(np.abs(v)) if v.shape[0] > 0 else 0.0
    if top == 0.0 or not np.isfinite(top):
        return top
    w = v / top
    return top * np.sqrt(np.dot(w, w))

def penalty(pen, alpha, beta):
    if pen == L1:
        return np.sum(np.abs(beta))
    if pen == L2:
        return norm2(beta)
    return alpha * np.sum(np.abs(beta)) + (1.0 - alpha) * np.dot(beta, beta)

def soft_threshold(v, t):
    # + 0.0 turns -0.0 into 0.0
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0) + 0.0

def prox(pen, alpha, thr, v):
    """argmin_z |z - v|^2 / 2 + thr * g(z)  (thr = step * lambda)."""
    if thr <= 0.0:
        return v.copy()
    if pen == L1:
        return soft_threshold(v, thr)
    if pen == L2:
        nv = norm2(v)
        if nv <= thr:
            return np.zeros_like(v)
        return v * (1.0 - thr / nv)
    return soft_threshold(v, thr * alpha) / (1.0 + 2.0 * thr * (1.0 - alpha))

def kkt_residual(pen, alpha, lam, beta, g0, g):
    """Max-norm distance of -grad from the scaled subdifferential."""
    res = abs(g0)
    if pen == L2:
        nb = norm2(beta)
        if nb > 0.0:
            r = norm2(g + lam * (beta / nb))
        else:
            r = max(norm2(g) - lam, 0.0)
        return max(res, r)
    if pen == L1:
        a, q = lam, 0.0
    else:
        a, q = lam * alpha, 2.0 * lam * (1.0 - alpha)
    for j in range(beta.shape[0]):
        if beta[j] != 0.0:
            r = abs(g[j] + a * np.sign(beta[j]) + q * beta[j])
        else:
            r = max(abs(g[j]) - a, 0.0)
        if r > res:
            res = r
    return res

def prox_grad(fam, nu, const, X, y, xbar, stats, gram, pen, alpha, lam,
              b0, beta, step, shrink, max_iter, tol_kkt, tol_obj,
              accelerate, trace):
    """Proximal gradient with backtracking on (b0, beta).

    The intercept takes a plain gradient step; the slopes go through the
    prox of ``lam * g``. Returns
    (b0, beta, objective, risk, iterations, status, step, kkt).
    """
    beta = beta.copy()
    risk, g0, g = risk_grad(fam, nu, const, X, y, xbar, stats, gram, b0, beta)
    obj = risk + lam * penalty(pen, alpha, beta)
    kkt = kkt_residual(pen, alpha, lam, beta, g0, g)
    ntrace = trace.shape[0]
    if ntrace > 0:
        trace[0] = obj
    if not np.isfinite(obj):
        return b0, beta, obj, risk, 0, STEP_UNDERFLOW, step, kkt
    if kkt <= tol_kkt:
        return b0, beta, obj, risk, 0, CONVERGED, step, kkt

    # FISTA extrapolation point (equal to the iterate when not accelerating)
    yb0, ybeta = b0, beta.copy()
    yrisk, yg0, yg = risk, g0, g
    t_mom = 1.0
    best_kkt = kkt
    since_best = 0
    streak = 0
    status = MAX_ITER
    it = 0
    while it < max_iter:
        it += 1
        tries = 0
        while True:
            nb0 = yb0 - step * yg0
            nbeta = prox(pen, alpha, step * lam, ybeta - step * yg)
            nrisk, ng0, ng = risk_grad(fam, nu, const, X, y, xbar, stats,
                                       gram, nb0, nbeta)
            d0 = nb0 - yb0
            d = nbeta - ybeta
            dd = d0 * d0 + np.dot(d, d)
            quad = yrisk + yg0 * d0 + np.dot(yg, d) + dd / (2.0 * step)
            scale = max(1.0, abs(yrisk))
            if np.isfinite(nrisk):
                if nrisk <= quad + 1e-15 * scale:
                    break
                # function differences drowned in rounding: fall back to
                # the curvature test <grad(new) - grad(y), d> <= |d|^2 / step
                if abs(nrisk - yrisk) <= 1e-10 * scale:
                    curv = (ng0 - yg0) * d0 + np.dot(ng - yg, d)
                    if curv <= dd / step:
                        break
            step *= shrink
            tries += 1
            if step < 1e-30:
                return b0, beta, obj, risk, it, STEP_UNDERFLOW, step, kkt
        nobj = nrisk + lam * penalty(pen, alpha, nbeta)
        if accelerate and nobj > obj:
            # restart momentum; fall back to a plain step from the iterate
            t_mom = 1.0
            yb0, ybeta = b0, beta.copy()
            yrisk, yg0, yg = risk, g0, g
            continue
        decrease = obj - nobj
        if accelerate:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
            mom = (t_mom - 1.0) / t_next
            t_mom = t_next
            yb0 = nb0 + mom * (nb0 - b0)
            ybeta = nbeta + mom * (nbeta - beta)
        b0, beta, risk, g0, g, obj = nb0, nbeta, nrisk, ng0, ng, nobj
        if accelerate:
            yrisk, yg0, yg = risk_grad(fam, nu, const, X, y, xbar, stats,
                                       gram, yb0, ybeta)
        else:
            yb0, ybeta, yrisk, yg0, yg = b0, beta, risk, g0, g
        if it < ntrace:
            trace[it] = obj
        kkt = kkt_residual(pen, alpha, lam, beta, g0, g)
        if kkt <= tol_kkt:
            status = CONVERGED
            break
        # grow the step again after a run of first-try acceptances
        if tries == 0:
            streak += 1
            if streak >= 10:
                step /= shrink
                streak = 0
        else:
            streak = 0
        if kkt < best_kkt:
            best_kkt = kkt
            since_best = 0
        else:
            since_best += 1
        if decrease <= tol_obj * max(1.0, abs(obj)) and since_best >= 100:
            status = STALLED
            break
    return b0, beta, obj, risk, it, status, step, kkt


_NAMES = ("norm2", "risk_grad", "penalty", "soft_threshold", "prox", "kkt_residual",
          "prox_grad")


def build(jit):
    """Return a namespace of the kernels decorated with ``jit``.

    Each function is re-created with its globals pointing at a fresh
    namespace, so kernels call the other kernels of the same build. The
    functions stay module-level (no closures), which keeps numba's on-disk
    cache keys stable across processes.
    """
    ns = dict(globals())
    for name in _NAMES:
        f = globals()[name]
        g = FunctionType(f.__code__, ns, name, f.__defaults__)
        g.__qualname__ = f.__qualname__
        g.__doc__ = f.__doc__
        ns[name] = jit(g)
    return SimpleNamespace(compiled=jit is not identity, **{n: ns[n] for n in _NAMES})


_cache = {}


def numpy_kernels():
    if "numpy" not in _cache:
        _cache["numpy"] = build(identity)
    return _cache["numpy"]


def numba_kernels():
    if not NUMBA_AVAILABLE:
        raise RuntimeError("numba is not installed")
    if "numba" not in _cache:
        _cache["numba"] = build(njit)
    return _cache["numba"]


KERNELS = numba_kernels() if ENABLE_NUMBA else numpy_kernels()
