"""Series diagnostics: moments, Ljung-Box, Lo's modified R/S, FIGARCH(1,d,1) QMLE."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.signal import fftconvolve, lfilter
from scipy.special import expit, gammainc

from rechvol.errors import DegenerateInput, InvalidInput, OptimizationFailure

LO_RS_BAND = (0.809, 1.862)


@dataclass
class MomentSummary:
    mean: float
    std: float
    skewness: float
    kurtosis: float
    min: float
    max: float

    def to_json(self):
        return asdict(self)


@dataclass
class FigarchParams:
    omega: float
    psi: float
    d: float
    beta: float

    def to_json(self):
        return asdict(self)


def sample_moments(series) -> MomentSummary:
    """Population-normalised moments; kurtosis is raw (3 for a Gaussian)."""
    x = np.asarray(series, dtype=float)
    if x.size < 4:
        raise InvalidInput("need at least 4 observations")
    dev = x - x.mean()
    m2 = np.mean(dev**2)
    if m2 <= 0:
        raise DegenerateInput("constant series has no skewness or kurtosis")
    return MomentSummary(
        mean=float(x.mean()),
        std=float(math.sqrt(m2)),
        skewness=float(np.mean(dev**3) / m2**1.5),
        kurtosis=float(np.mean(dev**4) / m2**2),
        min=float(x.min()),
        max=float(x.max()),
    )


def chi2_cdf(q, df):
    return float(gammainc(df / 2.0, q / 2.0))


def autocorrelations(x, lags):
    dev = np.asarray(x, dtype=float) - np.mean(x)
    denom = np.dot(dev, dev)
    if denom <= 0:
        raise DegenerateInput("zero-variance series")
    return np.array([np.dot(dev[k:], dev[:-k]) / denom for k in range(1, lags + 1)])


def ljung_box(series, lags=10):
    x = np.asarray(series, dtype=float)
    n = x.size
    if lags < 1 or n <= lags:
        raise InvalidInput("need 1 <= lags < length")
    rho = autocorrelations(x, lags)
    q = n * (n + 2) * np.sum(rho**2 / (n - np.arange(1, lags + 1)))
    p = 1.0 - chi2_cdf(q, lags)
    return float(q), float(min(max(p, 0.0), 1.0))


def lo_rs(series, q=10, return_verdict=False):
    """Lo's modified rescaled-range statistic with Bartlett-weighted variance."""
    x = np.asarray(series, dtype=float)
    n = x.size
    if q < 0 or n <= q:
        raise InvalidInput("need 0 <= q < length")
    dev = x - x.mean()
    var = np.dot(dev, dev) / n
    if var <= 0:
        raise DegenerateInput("constant series")
    for j in range(1, q + 1):
        var += 2.0 * (1.0 - j / (q + 1.0)) * np.dot(dev[j:], dev[:-j]) / n
    if var <= 0:
        raise DegenerateInput("long-run variance estimate is not positive")
    partial = np.cumsum(dev)
    v = float((partial.max() - partial.min()) / math.sqrt(var) / math.sqrt(n))
    if return_verdict:
        return v, not (LO_RS_BAND[0] <= v <= LO_RS_BAND[1])
    return v


# -- FIGARCH(1,d,1) ---------------------------------------------------------


def fractional_weights(d, truncation_lag):
    """Coefficients of (1 - L)^d up to ``truncation_lag``."""
    k = np.arange(1, truncation_lag + 1)
    return np.concatenate([[1.0], np.cumprod((k - 1 - d) / k)])


def figarch_lag_coefficients(params: FigarchParams, truncation_lag):
    """c_k in sigma2_t = omega + beta sigma2_{t-1} + sum_k c_k y2_{t-k}; c_0 = 0."""
    pi = fractional_weights(params.d, truncation_lag)
    a = pi.copy()
    a[1:] -= params.psi * pi[:-1]
    c = -a
    c[0] = 0.0
    c[1] -= params.beta
    return c


def figarch_arch_weights(params: FigarchParams, truncation_lag):
    """ARCH(inf) weights lambda_k, k = 1..truncation_lag."""
    c = figarch_lag_coefficients(params, truncation_lag)
    return lfilter([1.0], [1.0, -params.beta], c[1:])


def figarch_filter(y, params: FigarchParams, truncation_lag=1000):
    """Conditional variances with presample squared returns set to their mean."""
    y2 = np.asarray(y, dtype=float) ** 2
    n = y2.size
    backcast = y2.mean()
    c = figarch_lag_coefficients(params, truncation_lag)
    padded = np.concatenate([np.full(truncation_lag, backcast), y2])
    arch = fftconvolve(padded, c)[truncation_lag : truncation_lag + n]
    drive = params.omega + arch
    sigma2, _ = lfilter([1.0], [1.0, -params.beta], drive, zi=[params.beta * backcast])
    return sigma2


def figarch_loglik(y, params: FigarchParams, truncation_lag=1000):
    s2 = figarch_filter(y, params, truncation_lag)
    if np.any(~(s2 > 0)):
        return -np.inf
    y2 = np.asarray(y, dtype=float) ** 2
    return float(-0.5 * np.sum(np.log(2 * np.pi * s2) + y2 / s2))


FIGARCH_REGIONS = ("sufficient", "nonneg")


def _logit(u):
    u = min(max(u, 1e-12), 1 - 1e-12)
    return math.log(u / (1 - u))


def _unpack(z, region):
    d = float(expit(z[2]))
    if region == "sufficient":
        # 0 <= psi <= (1 - d)/2 and 0 <= beta <= d + psi
        psi = 0.5 * (1.0 - d) * float(expit(z[1]))
        beta = (d + psi) * float(expit(z[3]))
    else:
        psi = math.tanh(z[1])
        beta = float(expit(z[3]))
    return FigarchParams(omega=math.exp(z[0]), psi=psi, d=d, beta=beta)


def _pack(p: FigarchParams, region):
    if region == "sufficient":
        z1 = _logit(p.psi / (0.5 * (1.0 - p.d)))
        z3 = _logit(p.beta / (p.d + p.psi))
    else:
        z1 = math.atanh(p.psi)
        z3 = _logit(p.beta)
    return np.array([math.log(p.omega), z1, _logit(p.d), z3])


def _default_starts(scale, region):
    if region == "sufficient":
        return [
            FigarchParams(0.1 * scale, 0.2, 0.2, 0.3),
            FigarchParams(0.05 * scale, 0.1, 0.6, 0.6),
            FigarchParams(0.2 * scale, 0.3, 0.05, 0.2),
            FigarchParams(0.02 * scale, 0.05, 0.85, 0.8),
        ]
    return [
        FigarchParams(0.1 * scale, 0.2, 0.2, 0.3),
        FigarchParams(0.05 * scale, 0.1, 0.6, 0.6),
        FigarchParams(0.2 * scale, 0.3, 0.05, 0.2),
        FigarchParams(0.02 * scale, 0.95, 0.02, 0.8),
        FigarchParams(0.05 * scale, 0.5, 0.3, 0.7),
    ]


def fit_figarch_qmle(y, truncation_lag=1000, starts=None, region="sufficient"):
    """Gaussian QMLE of FIGARCH(1,d,1) by Nelder-Mead over transformed parameters,
    restarted from several points.

    ``region="sufficient"`` searches 0 <= psi <= (1 - d)/2, 0 <= beta <= d + psi,
    the usual sufficient conditions for a nonnegative ARCH(inf) representation.
    ``region="nonneg"`` lets psi range over (-1, 1) and beta over (0, 1).
    In both, negative ARCH(inf) weights are penalised in proportion to their size.
    Returns ``(FigarchParams, loglik)``.
    """
    if region not in FIGARCH_REGIONS:
        raise InvalidInput(f"region must be one of {FIGARCH_REGIONS}")
    y = np.asarray(y, dtype=float)
    if y.size < 10:
        raise InvalidInput("series too short for FIGARCH estimation")
    if truncation_lag < 1:
        raise InvalidInput("truncation lag must be positive")
    scale = float(np.mean(y**2))
    if scale <= 0:
        raise DegenerateInput("zero series")
    trace = []

    def objective(z):
        p = _unpack(z, region)
        lam = figarch_arch_weights(p, truncation_lag)
        neg = -lam[lam < 0].sum()
        ll = figarch_loglik(y, p, truncation_lag)
        if not np.isfinite(ll):
            return 1e10
        return -ll / y.size + 1e3 * neg

    if starts is None:
        starts = _default_starts(scale, region)
    best = None
    for start in starts:
        res = minimize(objective, _pack(start, region), method="Nelder-Mead",
                       options={"maxiter": 4000, "xatol": 1e-6, "fatol": 1e-9})
        trace.append({"start": start.to_json(), "fun": float(res.fun), "success": bool(res.success)})
        if np.isfinite(res.fun) and res.fun < 1e9 and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise OptimizationFailure("no finite FIGARCH likelihood found", trace=trace)
    params = _unpack(best.x, region)
    return params, figarch_loglik(y, params, truncation_lag)
