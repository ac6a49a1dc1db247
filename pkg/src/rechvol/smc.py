"""Adaptive SMC samplers: likelihood annealing and data annealing.

All random numbers are drawn from one ``numpy.random.Generator`` on the
calling thread in a fixed order; the compiled per-particle kernels are
deterministic, so results do not depend on the worker count.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import logsumexp

from rechvol import volatility_filter as vf
from rechvol.errors import DegenerateInput, IncompleteAnneal, InvalidInput
from rechvol.model_space import ModelSpec, log_prior, resolve_priors, sample_prior

BISECTION_TOL = 1e-6
STALL_STEP = 1e-8


@dataclass
class SmcConfig:
    particles: int = 1000
    ess_frac: float = 0.8
    n_lik: int = 30
    n_data: int = 30
    max_stages: int = 10000
    seed: int = 0
    proposal_scale: float = 1.0

    def __post_init__(self):
        if self.particles < 2:
            raise InvalidInput("need at least 2 particles")
        if not 0 < self.ess_frac < 1:
            raise InvalidInput("ESS fraction must lie in (0, 1)")
        if self.n_lik < 1 or self.n_data < 1:
            raise InvalidInput("number of Markov moves must be >= 1")
        if self.max_stages < 1 or not self.proposal_scale > 0:
            raise InvalidInput("max_stages must be >= 1 and proposal_scale > 0")


@dataclass
class ParticleCloud:
    particles: np.ndarray
    log_weights: np.ndarray
    temperature: float
    cum_log_ml: float
    cached_loglik: np.ndarray
    cached_logprior: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def size(self) -> int:
        return self.particles.shape[0]

    def ess(self) -> float:
        return ess(self.weights)

    def take(self, idx) -> "ParticleCloud":
        m = len(idx)
        return ParticleCloud(
            particles=self.particles[idx].copy(),
            log_weights=np.full(m, -math.log(m)),
            temperature=self.temperature,
            cum_log_ml=self.cum_log_ml,
            cached_loglik=self.cached_loglik[idx].copy(),
            cached_logprior=self.cached_logprior[idx].copy(),
        )


@dataclass
class FitResult:
    names: tuple
    posterior_mean: dict
    posterior_sd: dict
    log_ml: float
    final_cloud: ParticleCloud
    stage_trace: list = field(default_factory=list)


@dataclass
class StageRecord:
    stage: int
    temperature: float
    ess: float
    acceptance: float | None
    cum_log_ml: float
    resampled: bool
    stalled: bool = False

    def to_json(self) -> str:
        return json.dumps(asdict(self))


class RechTarget:
    """Posterior pieces for one model family on a fixed return series."""

    def __init__(self, spec: ModelSpec, y, sigma0_sq, priors=None, bound=1.0, exp_input=True):
        self.spec = spec
        self.y = np.ascontiguousarray(y, dtype=float)
        if self.y.size < 1:
            raise InvalidInput("return series is empty")
        self.sigma0_sq = float(sigma0_sq)
        self.priors = resolve_priors(spec, priors)
        self.bound = bound
        self.exp_input = exp_input

    @property
    def names(self):
        return self.spec.names

    def sample_prior(self, count, rng):
        return sample_prior(self.spec, count, rng, self.priors)

    def log_prior(self, theta):
        return log_prior(self.spec, theta, self.priors)

    def loglik(self, theta, n=None, return_state=False):
        y = self.y if n is None else self.y[:n]
        return vf.loglik_cloud(self.spec, theta, y, self.sigma0_sq, self.bound, self.exp_input, return_state)

    def advance(self, theta, t, state):
        return vf.advance_cloud(self.spec, theta, self.y[t], state, self.bound, self.exp_input)

    def forecast(self, theta, n):
        return vf.forecast_variance(self.spec, theta, self.y[:n], self.sigma0_sq, self.bound, self.exp_input)


# -- building blocks --------------------------------------------------------


def ess(weights) -> float:
    w = np.asarray(weights, dtype=float)
    s = np.sum(w * w)
    if not s > 0:
        raise DegenerateInput("all weights are zero")
    return float(1.0 / s)


def _ess_log(log_w) -> float:
    lse = logsumexp(log_w)
    if not np.isfinite(lse):
        return 0.0
    return float(math.exp(-logsumexp(2.0 * (log_w - lse))))


def _scaled(delta, loglik):
    return np.where(np.isneginf(loglik), -np.inf, delta * np.where(np.isneginf(loglik), 0.0, loglik))


def adapt_next_temperature(cached_loglik, log_weights, gamma_prev, target_ess, return_stalled=False):
    """Largest temperature in (gamma_prev, 1] keeping the reweighted ESS >= target."""
    if gamma_prev >= 1:
        raise InvalidInput("temperature already at 1")
    ll = np.asarray(cached_loglik, dtype=float)
    lw = np.asarray(log_weights, dtype=float)

    def ess_at(delta):
        return _ess_log(lw + _scaled(delta, ll))

    room = 1.0 - gamma_prev
    stalled = False
    if ess_at(room) >= target_ess:
        gamma = 1.0
    else:
        lo, hi = 0.0, room
        for _ in range(200):
            if hi - lo <= BISECTION_TOL * hi:
                break
            mid = 0.5 * (lo + hi)
            if ess_at(mid) >= target_ess:
                lo = mid
            else:
                hi = mid
        if lo > 0:
            gamma = gamma_prev + lo
        else:
            gamma = min(gamma_prev + STALL_STEP, 1.0)
            stalled = True
    return (gamma, stalled) if return_stalled else gamma


def reweight(cloud: ParticleCloud, increment) -> float:
    """Add per-particle log increments, bank the stage ML term, renormalize.

    Returns the log of the stage's normalizing constant estimate.
    """
    lw = cloud.log_weights + increment
    stage = logsumexp(lw)
    if not np.isfinite(stage):
        raise DegenerateInput("every particle has zero weight after reweighting")
    cloud.log_weights = lw - stage
    cloud.cum_log_ml += float(stage)
    return float(stage)


def reweight_tempered(cloud: ParticleCloud, gamma_next) -> float:
    delta = gamma_next - cloud.temperature
    if delta == 0:
        return 0.0
    inc = reweight(cloud, _scaled(delta, cloud.cached_loglik))
    cloud.temperature = gamma_next
    return inc


def resample_systematic(weights, rng, count=None) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    m = w.size if count is None else int(count)
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    cdf[-1] = 1.0
    u = (rng.uniform() + np.arange(m)) / m
    return np.minimum(np.searchsorted(cdf, u, side="right"), w.size - 1)


def proposal_covariance(cloud: ParticleCloud, scale=1.0) -> np.ndarray:
    """Scaled weighted covariance; dimensions with zero spread are frozen."""
    x = cloud.particles
    d = x.shape[1]
    w = cloud.weights
    w = w / w.sum()
    mean = w @ x
    dev = x - mean
    cov = (dev * w[:, None]).T @ dev
    active = np.diag(cov) > 0
    sigma = scale * (2.38**2 / d) * cov + 1e-10 * np.eye(d)
    sigma[~active, :] = 0.0
    sigma[:, ~active] = 0.0
    return sigma


def _cholesky(sigma):
    active = np.diag(sigma) > 0
    chol = np.zeros_like(sigma)
    if active.any():
        sub = sigma[np.ix_(active, active)]
        jitter = 0.0
        for _ in range(10):
            try:
                chol[np.ix_(active, active)] = np.linalg.cholesky(sub + jitter * np.eye(sub.shape[0]))
                break
            except np.linalg.LinAlgError:
                jitter = max(jitter * 10, 1e-10 * np.trace(sub) / sub.shape[0] + 1e-12)
    return chol


def markov_move_rwmh(cloud: ParticleCloud, target, gamma, n_moves, proposal_cov, rng, n_obs=None, state=None):
    """Random-walk MH on every particle, targeting loglik^gamma * prior.

    ``n_obs`` restricts the likelihood to the first observations (data
    annealing); ``state`` (if given) is the per-particle filter state and is
    refreshed for accepted proposals. Returns the acceptance rate.
    """
    if n_moves <= 0:
        return None
    chol = _cholesky(np.asarray(proposal_cov, dtype=float))
    m, d = cloud.particles.shape
    accepted = 0
    for _ in range(n_moves):
        z = rng.standard_normal((m, d))
        log_u = np.log(rng.uniform(size=m))
        prop = cloud.particles + z @ chol.T
        lp = target.log_prior(prop)
        ok = np.isfinite(lp)
        ll = np.full(m, -np.inf)
        new_state = None
        if ok.any():
            if state is not None:
                ll_ok, st_ok = target.loglik(prop[ok], n=n_obs, return_state=True)
                new_state = st_ok
            else:
                ll_ok = target.loglik(prop[ok], n=n_obs)
            ll[ok] = ll_ok
        cur = gamma * np.where(np.isneginf(cloud.cached_loglik), -1e300, cloud.cached_loglik)
        with np.errstate(invalid="ignore"):
            new = np.where(np.isfinite(ll), gamma * ll, -np.inf)
            log_ratio = new + lp - cur - cloud.cached_logprior
        acc = ok & np.isfinite(ll) & (log_u < log_ratio)
        if acc.any():
            cloud.particles[acc] = prop[acc]
            cloud.cached_loglik[acc] = ll[acc]
            cloud.cached_logprior[acc] = lp[acc]
            if state is not None:
                sub = acc[ok]
                for arr, fresh in zip(state, new_state):
                    arr[acc] = fresh[sub]
        accepted += int(acc.sum())
    return accepted / (m * n_moves)


def weighted_moments(cloud: ParticleCloud):
    w = cloud.weights
    w = w / w.sum()
    mean = w @ cloud.particles
    var = w @ (cloud.particles - mean) ** 2
    return mean, np.sqrt(np.maximum(var, 0.0))


def _result(target, cloud, trace) -> FitResult:
    mean, sd = weighted_moments(cloud)
    names = tuple(target.names)
    return FitResult(
        names=names,
        posterior_mean=dict(zip(names, map(float, mean))),
        posterior_sd=dict(zip(names, map(float, sd))),
        log_ml=float(cloud.cum_log_ml),
        final_cloud=cloud,
        stage_trace=trace,
    )


def _emit(on_stage, record):
    if on_stage is not None:
        on_stage(record)


# -- samplers ---------------------------------------------------------------


def init_cloud(target, count, rng) -> ParticleCloud:
    theta = target.sample_prior(count, rng)
    return ParticleCloud(
        particles=theta,
        log_weights=np.full(count, -math.log(count)),
        temperature=0.0,
        cum_log_ml=0.0,
        cached_loglik=np.asarray(target.loglik(theta), dtype=float),
        cached_logprior=np.asarray(target.log_prior(theta), dtype=float),
    )


def run_likelihood_annealing(target, config: SmcConfig, rng=None, on_stage=None) -> FitResult:
    """Temper from prior to posterior, returning moments and the log-ML estimate.

    A stage whose temperature step was cut short by the ESS target is always
    resampled and moved, as is the final stage at temperature 1.
    """
    rng = np.random.default_rng(config.seed if rng is None else rng)
    m = config.particles
    target_ess = config.ess_frac * m
    cloud = init_cloud(target, m, rng)
    trace = []
    stage = 0
    moved_at_one = False
    while cloud.temperature < 1.0:
        if stage >= config.max_stages:
            raise IncompleteAnneal(
                f"temperature {cloud.temperature:.6g} after {stage} stages",
                partial=_result(target, cloud, trace),
            )
        stage += 1
        gamma, stalled = adapt_next_temperature(
            cloud.cached_loglik, cloud.log_weights, cloud.temperature, target_ess, return_stalled=True
        )
        reweight_tempered(cloud, gamma)
        stage_ess = cloud.ess()
        acc = None
        resampled = stage_ess < target_ess or gamma < 1.0
        if resampled:
            cov = proposal_covariance(cloud, config.proposal_scale)
            cloud = cloud.take(resample_systematic(cloud.weights, rng))
            acc = markov_move_rwmh(cloud, target, gamma, config.n_lik, cov, rng)
            moved_at_one = gamma >= 1.0
        record = StageRecord(stage, float(gamma), stage_ess, acc, cloud.cum_log_ml, resampled, stalled)
        trace.append(record)
        _emit(on_stage, record)
    if not moved_at_one:
        stage += 1
        cov = proposal_covariance(cloud, config.proposal_scale)
        stage_ess = cloud.ess()
        cloud = cloud.take(resample_systematic(cloud.weights, rng))
        acc = markov_move_rwmh(cloud, target, 1.0, config.n_lik, cov, rng)
        record = StageRecord(stage, 1.0, stage_ess, acc, cloud.cum_log_ml, True)
        trace.append(record)
        _emit(on_stage, record)
    return _result(target, cloud, trace)


@dataclass
class DataAnnealingResult:
    t: np.ndarray
    posterior_mean: np.ndarray
    sigma2_hat: np.ndarray
    log_predictive: float
    final_cloud: ParticleCloud
    stage_trace: list
    warm_start: FitResult


def run_data_annealing(target: RechTarget, t_in, config: SmcConfig, rng=None, warm_start=None, on_stage=None):
    """Rolling one-step forecasts over ``target.y[t_in:]``.

    Starts from a likelihood-annealing fit on the first ``t_in`` observations
    (or ``warm_start``). The forecast for step t uses only ``y[:t]``.
    """
    n = target.y.size
    if not 0 < t_in < n:
        raise InvalidInput(f"t_in must lie in (0, {n})")
    rng = np.random.default_rng(config.seed if rng is None else rng)
    if warm_start is None:
        head = RechTarget(target.spec, target.y[:t_in], target.sigma0_sq, target.priors, target.bound, target.exp_input)
        warm_start = run_likelihood_annealing(head, config, rng)
    src = warm_start.final_cloud
    cloud = ParticleCloud(
        particles=src.particles.copy(),
        log_weights=src.log_weights.copy(),
        temperature=1.0,
        cum_log_ml=0.0,
        cached_loglik=np.empty(src.size),
        cached_logprior=np.asarray(target.log_prior(src.particles), dtype=float),
    )
    ll, state = target.loglik(cloud.particles, n=t_in, return_state=True)
    cloud.cached_loglik = ll
    target_ess = config.ess_frac * config.particles
    steps = n - t_in
    means = np.empty((steps, len(target.names)))
    sigma2_hat = np.empty(steps)
    trace = []
    for k, t in enumerate(range(t_in, n)):
        mean, _ = weighted_moments(cloud)
        means[k] = mean
        sigma2_hat[k] = target.forecast(mean, t)
        inc = target.advance(cloud.particles, t, state)
        cloud.cached_loglik = cloud.cached_loglik + inc
        reweight(cloud, inc)
        stage_ess = cloud.ess()
        acc = None
        resampled = stage_ess < target_ess
        if resampled:
            cov = proposal_covariance(cloud, config.proposal_scale)
            idx = resample_systematic(cloud.weights, rng)
            cloud = cloud.take(idx)
            state = tuple(a[idx].copy() for a in state)
            acc = markov_move_rwmh(cloud, target, 1.0, config.n_data, cov, rng, n_obs=t + 1, state=state)
        record = StageRecord(t + 1, float(t + 1), stage_ess, acc, cloud.cum_log_ml, resampled)
        trace.append(record)
        _emit(on_stage, record)
    return DataAnnealingResult(
        t=np.arange(t_in + 1, n + 1),
        posterior_mean=means,
        sigma2_hat=sigma2_hat,
        log_predictive=float(cloud.cum_log_ml),
        final_cloud=cloud,
        stage_trace=trace,
        warm_start=warm_start,
    )


def bayes_factor(log_ml_1, log_ml_2):
    """Returns (BF, log BF) of model 1 against model 2."""
    log_bf = float(log_ml_1) - float(log_ml_2)
    with np.errstate(over="ignore"):
        return float(np.exp(log_bf)), log_bf


def jeffreys_label(log_bf) -> str:
    """Verbal strength of evidence on Jeffreys' scale (in favour of the larger ML)."""
    k = abs(log_bf) / math.log(10)
    if k < 0.5:
        if k == 0:
            return "no evidence"
        return "barely worth mentioning"
    if k < 1:
        return "substantial"
    if k < 1.5:
        return "strong"
    if k < 2:
        return "very strong"
    return "decisive"
