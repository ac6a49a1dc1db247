"""Conditional-variance recursions for GARCH, GJR, EGARCH and their SRN variants.

All six families run through one compiled step function. Parameters are
mapped onto a fixed 11-slot layout before entering the kernels::

    0 omega  1 alpha  2 beta  3 gamma  4 beta0  5 beta1
    6 v0     7 v1     8 v2    9 w      10 b

Slots a family does not use stay at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from numba import njit, prange

from rechvol.errors import InvalidInput, NumericalFailure
from rechvol.model_space import ModelSpec, in_support

# the bundled TBB is too old for numba; skip it
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

SLOTS = ("omega", "alpha", "beta", "gamma", "beta0", "beta1", "v0", "v1", "v2", "w", "b")
_SLOT = {name: i for i, name in enumerate(SLOTS)}
_KIND = {"GARCH": 0, "GJR": 1, "EGARCH": 2}

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
LOG_2PI = math.log(2.0 * math.pi)
VARIANCE_CAP = 1e12
EXP_INPUT_CLAMP = 20.0


@dataclass
class VariancePath:
    sigma2: np.ndarray
    omega: np.ndarray
    hidden: np.ndarray
    loglik: float


@dataclass
class SimOutput:
    y: np.ndarray
    sigma2: np.ndarray


def bounded_relu(z, bound=1.0):
    if bound <= 0:
        raise InvalidInput("activation bound must be positive")
    return min(max(z, 0.0), bound)


def srn_step(v, w, b, x, h_prev, bound=1.0):
    """One update of a single-unit Elman recurrence with bounded-ReLU output."""
    z = float(np.dot(v, x)) + w * h_prev + b
    return bounded_relu(z, bound)


# -- compiled kernels -------------------------------------------------------


@njit(cache=True)
def _next_state(kind, srn, exp_input, p, y_prev, s2_prev, om_prev, h_prev, bound):
    if srn:
        x1 = y_prev
        if exp_input:
            x1 = math.exp(min(max(y_prev, -EXP_INPUT_CLAMP), EXP_INPUT_CLAMP))
        z = p[6] * om_prev + p[7] * x1 + p[8] * s2_prev + p[9] * h_prev + p[10]
        h = min(max(z, 0.0), bound)
        om = p[4] + p[5] * h
        const = om
    else:
        h = 0.0
        om = 0.0
        const = p[0]
    y2 = y_prev * y_prev
    if kind == 0:
        s2 = const + p[1] * y2 + p[2] * s2_prev
    elif kind == 1:
        s2 = const + p[1] * y2 + p[2] * s2_prev
        if y_prev < 0.0:
            s2 += p[3] * y2
    else:
        sd = math.sqrt(s2_prev)
        e = p[0] + p[2] * math.log(s2_prev) + p[1] * (abs(y_prev) / sd - SQRT_2_OVER_PI) + p[3] * y_prev / sd
        if e > 700.0:
            s2 = math.inf
        elif srn:
            s2 = om + math.exp(e)
        else:
            s2 = math.exp(e)
    return s2, om, h


@njit(cache=True)
def _bad(s2):
    return not (s2 > 0.0 and s2 <= VARIANCE_CAP)


@njit(cache=True)
def _filter_path(kind, srn, exp_input, p, y, s0, bound, s2_out, om_out, h_out):
    """Fill the per-step arrays; returns (loglik, failing index or -1)."""
    n = y.shape[0]
    s2 = s0
    om = p[4] if srn else 0.0
    h = 0.0
    ll = 0.0
    for t in range(n):
        if t > 0:
            s2, om, h = _next_state(kind, srn, exp_input, p, y[t - 1], s2, om, h, bound)
            if _bad(s2):
                return -math.inf, t
        s2_out[t] = s2
        om_out[t] = om
        h_out[t] = h
        ll += -0.5 * (LOG_2PI + math.log(s2)) - 0.5 * y[t] * y[t] / s2
    return ll, -1


@njit(cache=True, parallel=True)
def _loglik_batch(kind, srn, exp_input, P, y, s0, bound, ll_out, s2_next, om_next, h_next):
    """Per-particle log-likelihood over ``y`` plus the state for the step after it."""
    m = P.shape[0]
    n = y.shape[0]
    for j in prange(m):
        p = P[j]
        s2 = s0
        om = p[4] if srn else 0.0
        h = 0.0
        ll = 0.0
        ok = True
        for t in range(n):
            if t > 0:
                s2, om, h = _next_state(kind, srn, exp_input, p, y[t - 1], s2, om, h, bound)
                if _bad(s2):
                    ok = False
                    break
            ll += -0.5 * (LOG_2PI + math.log(s2)) - 0.5 * y[t] * y[t] / s2
        if ok and n > 0:
            s2, om, h = _next_state(kind, srn, exp_input, p, y[n - 1], s2, om, h, bound)
            if _bad(s2):
                ok = False
        if ok:
            ll_out[j] = ll
            s2_next[j] = s2
            om_next[j] = om
            h_next[j] = h
        else:
            ll_out[j] = -math.inf
            s2_next[j] = math.nan
            om_next[j] = math.nan
            h_next[j] = math.nan


@njit(cache=True, parallel=True)
def _advance_batch(kind, srn, exp_input, P, y_t, s2, om, h, bound, inc_out):
    """Score ``y_t`` under each particle's current variance, then step the state."""
    m = P.shape[0]
    for j in prange(m):
        v = s2[j]
        if not (v > 0.0):
            inc_out[j] = -math.inf
            continue
        inc_out[j] = -0.5 * (LOG_2PI + math.log(v)) - 0.5 * y_t * y_t / v
        a, b, c = _next_state(kind, srn, exp_input, P[j], y_t, v, om[j], h[j], bound)
        if _bad(a):
            s2[j] = math.nan
            om[j] = math.nan
            h[j] = math.nan
        else:
            s2[j] = a
            om[j] = b
            h[j] = c


@njit(cache=True)
def _simulate_kernel(kind, srn, exp_input, p, eps, s0, bound, y_out, s2_out):
    n = eps.shape[0]
    s2 = s0
    om = p[4] if srn else 0.0
    h = 0.0
    for t in range(n):
        if t > 0:
            s2, om, h = _next_state(kind, srn, exp_input, p, y_out[t - 1], s2, om, h, bound)
            if _bad(s2):
                return t
        s2_out[t] = s2
        y_out[t] = math.sqrt(s2) * eps[t]
    return -1


@njit(cache=True)
def _sim2_next(y_prev, s2_prev):
    y2 = y_prev * y_prev
    neg = 1.0 if y_prev < 0.0 else 0.0
    return (
        0.05
        + 0.10 * y2
        + 0.21 * y2 / (1.0 + y2)
        + 0.8 * s2_prev
        + 0.11 * s2_prev / (1.0 + s2_prev)
        + 0.21 * neg * y2
        + 0.1 * neg / (1.0 + math.exp(-y2))
    )


@njit(cache=True)
def _simulate_sim2_kernel(eps, s0, y_out, s2_out):
    s2 = s0
    for t in range(eps.shape[0]):
        if t > 0:
            s2 = _sim2_next(y_out[t - 1], s2)
            if _bad(s2):
                return t
        s2_out[t] = s2
        y_out[t] = math.sqrt(s2) * eps[t]
    return -1


# -- python surface ---------------------------------------------------------


def _flags(spec: ModelSpec, exp_input: bool):
    return _KIND[spec.base], spec.is_srn, bool(exp_input and spec.family == "SRN_EGARCH")


def to_slots(spec: ModelSpec, theta) -> np.ndarray:
    """Scatter ``(M, d)`` (or ``(d,)``) parameters into the 11-slot layout."""
    theta = np.asarray(theta, dtype=float)
    single = theta.ndim == 1
    theta = np.atleast_2d(theta)
    out = np.zeros((theta.shape[0], len(SLOTS)))
    for i, name in enumerate(spec.names):
        out[:, _SLOT[name]] = theta[:, i]
    return out[0] if single else out


def _as_y(y):
    y = np.ascontiguousarray(y, dtype=float)
    if y.ndim != 1 or y.size < 1:
        raise InvalidInput("returns must be a nonempty 1-d sequence")
    return y


def filter_variance(spec: ModelSpec, theta, y, sigma0_sq, bound=1.0, exp_input=True) -> VariancePath:
    if not sigma0_sq > 0:
        raise InvalidInput("initial variance must be positive")
    y = _as_y(y)
    kind, srn, ex = _flags(spec, exp_input)
    p = to_slots(spec, theta)
    n = y.size
    s2, om, h = np.empty(n), np.empty(n), np.empty(n)
    ll, fail = _filter_path(kind, srn, ex, p, y, float(sigma0_sq), float(bound), s2, om, h)
    if fail >= 0:
        raise NumericalFailure(f"conditional variance invalid at t={fail + 1}", t=fail + 1)
    return VariancePath(sigma2=s2, omega=om, hidden=h, loglik=float(ll))


def log_likelihood(spec: ModelSpec, theta, y, sigma0_sq, bound=1.0, exp_input=True) -> float:
    try:
        return filter_variance(spec, theta, y, sigma0_sq, bound, exp_input).loglik
    except NumericalFailure:
        return -math.inf


def loglik_cloud(spec: ModelSpec, particles, y, sigma0_sq, bound=1.0, exp_input=True, return_state=False):
    """Log-likelihood of every particle; -inf where the recursion fails.

    With ``return_state`` also returns the (sigma2, omega, h) arrays for the
    step following the last observation.
    """
    y = np.ascontiguousarray(y, dtype=float)
    kind, srn, ex = _flags(spec, exp_input)
    P = np.ascontiguousarray(to_slots(spec, np.atleast_2d(particles)))
    m = P.shape[0]
    ll, s2, om, h = np.empty(m), np.empty(m), np.empty(m), np.empty(m)
    _loglik_batch(kind, srn, ex, P, y, float(sigma0_sq), float(bound), ll, s2, om, h)
    if return_state:
        return ll, (s2, om, h)
    return ll


def advance_cloud(spec: ModelSpec, particles, y_t, state, bound=1.0, exp_input=True):
    """Predictive log-density of ``y_t`` per particle; updates ``state`` in place."""
    kind, srn, ex = _flags(spec, exp_input)
    P = np.ascontiguousarray(to_slots(spec, np.atleast_2d(particles)))
    s2, om, h = state
    inc = np.empty(P.shape[0])
    _advance_batch(kind, srn, ex, P, float(y_t), s2, om, h, float(bound), inc)
    return inc


def forecast_variance(spec: ModelSpec, theta, y, sigma0_sq, bound=1.0, exp_input=True) -> float:
    """One-step-ahead variance for the observation after ``y``."""
    if len(y) == 0:
        return float(sigma0_sq)
    ll, (s2, _, _) = loglik_cloud(spec, theta, y, sigma0_sq, bound, exp_input, return_state=True)
    if not np.isfinite(ll[0]):
        raise NumericalFailure("variance recursion failed while forecasting")
    return float(s2[0])


def simulate(spec: ModelSpec, theta, T, burnin=0, sigma_init_sq=0.1, rng=None, bound=1.0, exp_input=True) -> SimOutput:
    """Simulate ``burnin + T`` steps and keep the last ``T``."""
    if T < 1 or burnin < 0:
        raise InvalidInput("T must be >= 1 and burnin >= 0")
    theta = np.asarray(theta, dtype=float)
    if not in_support(spec, theta)[0]:
        raise InvalidInput(f"{spec.family} parameters outside the support")
    rng = np.random.default_rng(rng)
    eps = rng.standard_normal(T + burnin)
    kind, srn, ex = _flags(spec, exp_input)
    y, s2 = np.empty_like(eps), np.empty_like(eps)
    fail = _simulate_kernel(kind, srn, ex, to_slots(spec, theta), eps, float(sigma_init_sq), float(bound), y, s2)
    if fail >= 0:
        raise NumericalFailure(f"simulated variance exploded at step {fail + 1}", t=fail + 1)
    return SimOutput(y=y[burnin:].copy(), sigma2=s2[burnin:].copy())


def simulate_sim2(T, burnin=0, rng=None, sigma_init_sq=0.1) -> SimOutput:
    """Nonlinear GARCH-type generator with threshold and saturating terms."""
    if T < 1 or burnin < 0:
        raise InvalidInput("T must be >= 1 and burnin >= 0")
    rng = np.random.default_rng(rng)
    eps = rng.standard_normal(T + burnin)
    y, s2 = np.empty_like(eps), np.empty_like(eps)
    fail = _simulate_sim2_kernel(eps, float(sigma_init_sq), y, s2)
    if fail >= 0:
        raise NumericalFailure(f"simulated variance exploded at step {fail + 1}", t=fail + 1)
    return SimOutput(y=y[burnin:].copy(), sigma2=s2[burnin:].copy())


def sim2_next_variance(y_prev, s2_prev):
    return float(_sim2_next(float(y_prev), float(s2_prev)))


def variance_bound(theta, sigma0_sq, bound=1.0) -> float:
    """Upper bound M / (1 - alpha - beta) + sigma0^2 with M = beta0 + beta1 * bound.

    ``theta`` is an SRN_GARCH vector or a mapping with beta0, beta1, alpha, beta.
    """
    if isinstance(theta, dict):
        t = theta
    else:
        t = ModelSpec("SRN_GARCH").as_dict(theta)
    persistence = t["alpha"] + t["beta"]
    if persistence >= 1:
        raise InvalidInput("variance bound requires alpha + beta < 1")
    m = t["beta0"] + t["beta1"] * bound
    return m / (1.0 - persistence) + sigma0_sq


def standardized_residuals(spec: ModelSpec, theta, y, sigma0_sq, bound=1.0, exp_input=True) -> np.ndarray:
    path = filter_variance(spec, theta, y, sigma0_sq, bound, exp_input)
    return np.asarray(y, dtype=float) / np.sqrt(path.sigma2)


def set_threads(n: int | None) -> None:
    """Cap the worker count of the particle kernels (results do not depend on it)."""
    if n:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
