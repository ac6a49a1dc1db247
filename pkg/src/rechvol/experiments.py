"""Simulation experiments shared by the scripts and the acceptance suite.

Each function returns plain dicts/arrays so callers can print or assert on them.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import ks_2samp

from rechvol import volatility_filter as vf
from rechvol.diagnostics import fit_figarch_qmle, ljung_box, lo_rs
from rechvol.model_space import FAMILIES, ModelSpec, sample_prior
from rechvol.smc import RechTarget, SmcConfig, resample_systematic, run_data_annealing, run_likelihood_annealing

SIM1_THETA = (0.05, 0.18, 0.8)
SIM3_THETAS = {
    1: dict(alpha=0.058, beta=0.681, beta0=0.068, beta1=0.418, v0=-0.018, v1=-0.430, v2=0.524, w=0.161, b=-0.173),
    2: dict(alpha=0.071, beta=0.690, beta0=0.075, beta1=0.362, v0=0.062, v1=-0.422, v2=0.538, w=0.087, b=-0.130),
    3: dict(alpha=0.076, beta=0.744, beta0=0.016, beta1=0.388, v0=-0.075, v1=-0.574, v2=0.400, w=-0.040, b=-0.023),
    4: dict(alpha=0.057, beta=0.562, beta0=0.101, beta1=0.413, v0=0.015, v1=-0.380, v2=0.652, w=0.270, b=-0.170),
}


def sim1_data(seed, T=2000):
    return vf.simulate(ModelSpec("GARCH"), SIM1_THETA, T, 0, 0.1, seed).y


def fit(family, y, particles=1000, seed=0, **kw):
    target = RechTarget(ModelSpec(family), y, float(np.var(y)))
    return run_likelihood_annealing(target, SmcConfig(particles=particles, seed=seed, **kw))


def sim1_recovery(seed=11, T=2000, particles=1000):
    y = sim1_data(seed, T)
    garch = fit("GARCH", y, particles, seed)
    srn = fit("SRN_GARCH", y, particles, seed)
    z = {k: abs(garch.posterior_mean[k] - v) / garch.posterior_sd[k] for k, v in zip(("omega", "alpha", "beta"), SIM1_THETA)}
    return {
        "garch": garch,
        "srn_garch": srn,
        "z_scores": z,
        "log_ml_gap": srn.log_ml - garch.log_ml,
        "beta1_z": srn.posterior_mean["beta1"] / srn.posterior_sd["beta1"],
    }


def sim2_ranking(seeds, T=2000, particles=1000, families=FAMILIES, on_seed=None):
    rows = []
    for seed in seeds:
        y = vf.simulate_sim2(T, 0, seed).y
        ml = {fam: fit(fam, y, particles, seed).log_ml for fam in families}
        row = {"seed": seed, "log_ml": ml}
        if "SRN_GJR" in ml and "GJR" in ml:
            row["gap_gjr"] = ml["SRN_GJR"] - ml["GJR"]
        if "SRN_GARCH" in ml and "GARCH" in ml:
            row["gap_garch"] = ml["SRN_GARCH"] - ml["GARCH"]
        rows.append(row)
        if on_seed is not None:
            on_seed(row)
    return rows


def sim3_d_hat(theta_index=1, reps=20, T=3000, burnin=7000, region="sufficient", truncation_lag=1000):
    """Mean FIGARCH d-hat on the GARCH arm (beta1 = 0) and the SRN-GARCH arm."""
    spec = ModelSpec("SRN_GARCH")
    out = {}
    for arm in ("garch", "srn"):
        params = dict(SIM3_THETAS[theta_index])
        if arm == "garch":
            params["beta1"] = 0.0
        theta = spec.vector(params)
        ds = []
        for rep in range(reps):
            y = vf.simulate(spec, theta, T, burnin, 0.1, rep).y
            ds.append(fit_figarch_qmle(y, truncation_lag, region=region)[0].d)
        out[arm] = np.array(ds)
    return out


class NormalMeanTarget:
    """y_i ~ N(theta, 1) with theta ~ N(0, 1); the marginal likelihood is closed form."""

    names = ("theta",)

    def __init__(self, y):
        self.y = np.asarray(y, dtype=float)

    def sample_prior(self, count, rng):
        return rng.standard_normal((count, 1))

    def log_prior(self, theta):
        theta = np.atleast_2d(theta)
        return -0.5 * math.log(2 * math.pi) - 0.5 * theta[:, 0] ** 2

    def loglik(self, theta, n=None, return_state=False):
        y = self.y if n is None else self.y[:n]
        th = np.atleast_2d(theta)[:, 0]
        n_obs, s, ss = y.size, y.sum(), np.dot(y, y)
        return -0.5 * n_obs * math.log(2 * math.pi) - 0.5 * (ss - 2 * th * s + n_obs * th**2)

    def exact_log_ml(self):
        n, s, ss = self.y.size, self.y.sum(), np.dot(self.y, self.y)
        return -0.5 * n * math.log(2 * math.pi) - 0.5 * math.log(1 + n) - 0.5 * (ss - s**2 / (1 + n))


def conjugate_log_ml(repeats=10, particles=1000, n_obs=200, ess_frac=0.8, data_seed=42):
    y = np.random.default_rng(data_seed).normal(0.5, 1.0, n_obs)
    target = NormalMeanTarget(y)
    est = np.array([
        run_likelihood_annealing(target, SmcConfig(particles=particles, ess_frac=ess_frac, n_lik=10, seed=s)).log_ml
        for s in range(repeats)
    ])
    return est, target.exact_log_ml()


def sampler_agreement(seed=11, T=2000, t_in=1000, particles=1000, family="GARCH"):
    """KS distance per parameter between the data-annealing cloud and a full-data fit."""
    y = sim1_data(seed, T)
    spec = ModelSpec(family)
    s0 = float(np.var(y[:t_in]))
    cfg = SmcConfig(particles=particles, seed=seed)
    rolled = run_data_annealing(RechTarget(spec, y, s0), t_in, cfg)
    full = run_likelihood_annealing(RechTarget(spec, y, s0), cfg)
    cloud = rolled.final_cloud
    a = cloud.particles[resample_systematic(cloud.weights, np.random.default_rng(seed))]
    b = full.final_cloud.particles[resample_systematic(full.final_cloud.weights, np.random.default_rng(seed))]
    return {name: float(ks_2samp(a[:, j], b[:, j]).statistic) for j, name in enumerate(spec.names)}


def variance_bound_pathwise(draws=100, T=5000, sigma_init_sq=0.1, seed=0):
    """Count simulated sigma2_t above beta0 + beta1 B over (1 - alpha - beta), plus sigma_init^2."""
    spec = ModelSpec("SRN_GARCH")
    rng = np.random.default_rng(seed)
    thetas = sample_prior(spec, draws, rng)
    exceed, worst = 0, 0.0
    for theta in thetas:
        bound = vf.variance_bound(theta, sigma_init_sq)
        path = vf.simulate(spec, theta, T, 0, sigma_init_sq, rng).sigma2
        exceed += int(np.any(path > bound))
        worst = max(worst, float(path.max() / bound))
    return {"draws": draws, "paths_exceeding": exceed, "worst_ratio": worst}


def variance_bound_expectation(draws=20, T=200, paths=2000, sigma_init_sq=0.1, seed=0):
    """Monte Carlo E[sigma2_t] against the bound; returns the largest standardized excess."""
    spec = ModelSpec("SRN_GARCH")
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for theta in sample_prior(spec, draws, rng):
        bound = vf.variance_bound(theta, sigma_init_sq)
        sims = np.array([vf.simulate(spec, theta, T, 0, sigma_init_sq, rng).sigma2 for _ in range(paths)])
        se = sims.std(axis=0) / math.sqrt(paths) + 1e-300
        worst = max(worst, float(np.max((sims.mean(axis=0) - bound) / se)))
    return worst


def null_rejection_rates(reps=1000, n=2000, lags=10, q=10, level=0.05):
    lb = rs = 0
    for rep in range(reps):
        x = np.random.default_rng(rep).standard_normal(n)
        lb += ljung_box(x, lags)[1] < level
        rs += lo_rs(x, q, return_verdict=True)[1]
    return lb / reps, rs / reps
