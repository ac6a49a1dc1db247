"""One-step-ahead forecast scores: PPS, interval violations, VaR quantile score,
hit rate and realized-measure losses."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from rechvol.errors import DegenerateInput, InvalidInput

LOSS_NAMES = ("MSE1", "MSE2", "MAE1", "MAE2", "QLIKE", "R2LOG")
Z_995 = float(ndtri(0.995))


@dataclass
class ForecastRecords:
    t: np.ndarray
    sigma2_hat: np.ndarray
    y: np.ndarray
    var_quantile: np.ndarray

    def __post_init__(self):
        self.sigma2_hat = np.asarray(self.sigma2_hat, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.t = np.asarray(self.t)
        self.var_quantile = np.asarray(self.var_quantile, dtype=float)
        if not (self.sigma2_hat.size == self.y.size == self.t.size == self.var_quantile.size):
            raise InvalidInput("forecast record columns differ in length")
        if self.y.size == 0:
            raise InvalidInput("no forecast records")
        if np.any(~(self.sigma2_hat > 0)):
            raise InvalidInput("forecast variances must be positive")

    @classmethod
    def build(cls, sigma2_hat, y, alpha=0.01, t=None):
        sigma2_hat = np.asarray(sigma2_hat, dtype=float)
        if np.any(~(sigma2_hat > 0)):
            raise InvalidInput("forecast variances must be positive")
        if t is None:
            t = np.arange(1, sigma2_hat.size + 1)
        return cls(t, sigma2_hat, y, var_quantile(sigma2_hat, alpha))

    def __len__(self):
        return self.y.size


@dataclass
class ScoreReport:
    pps: float
    n_violations: int
    qs: float
    hit_pct: float
    alpha: float
    n: int
    realized_losses: dict = field(default_factory=dict)
    dropped: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "alpha": self.alpha,
            "PPS": self.pps,
            "n_violations": self.n_violations,
            "QS": self.qs,
            "hit_pct": self.hit_pct,
            "realized_losses": self.realized_losses,
            "dropped": self.dropped,
        }


def var_quantile(sigma2_hat, alpha):
    """alpha-quantile of N(0, sigma2_hat)."""
    if not 0 < alpha < 1:
        raise InvalidInput("alpha must lie in (0, 1)")
    return np.sqrt(np.asarray(sigma2_hat, dtype=float)) * ndtri(alpha)


def pps(records: ForecastRecords) -> float:
    s2, y = records.sigma2_hat, records.y
    return float(np.mean(0.5 * (np.log(2 * np.pi * s2) + y * y / s2)))


def quantile_score(records: ForecastRecords, alpha) -> float:
    y, q = records.y, records.var_quantile
    return float(np.mean((alpha - (y <= q)) * (y - q)))


def violations_and_hits(records: ForecastRecords, alpha):
    """Count of |y| outside the central 99% interval, and the share of y below the VaR."""
    outside = np.abs(records.y) > np.sqrt(records.sigma2_hat) * Z_995
    hits = records.y < records.var_quantile
    return int(outside.sum()), float(hits.mean())


def realized_losses(sigma2_hat, sigma2_proxy, return_dropped=False):
    """The six variance-forecast losses against a variance proxy.

    Pairs with a zero proxy are dropped (QLIKE and R2LOG are undefined there).
    """
    f = np.asarray(sigma2_hat, dtype=float)
    p = np.asarray(sigma2_proxy, dtype=float)
    if f.shape != p.shape:
        raise InvalidInput("forecast and proxy differ in length")
    if np.any(~(f > 0)):
        raise InvalidInput("forecast variances must be positive")
    if np.any(p < 0):
        raise InvalidInput("variance proxy must be nonnegative")
    keep = p > 0
    dropped = int((~keep).sum())
    if dropped:
        warnings.warn(f"dropped {dropped} zero-valued proxy entries", RuntimeWarning, stacklevel=2)
    if not keep.any():
        raise DegenerateInput("no positive proxy values left")
    f, p = f[keep], p[keep]
    sd_diff = np.sqrt(p) - np.sqrt(f)
    var_diff = p - f
    log_ratio = np.log(p / f)
    losses = {
        "MSE1": float(np.mean(sd_diff**2)),
        "MSE2": float(np.mean(var_diff**2)),
        "MAE1": float(np.mean(np.abs(sd_diff))),
        "MAE2": float(np.mean(np.abs(var_diff))),
        "QLIKE": float(np.mean(np.log(f) + p / f)),
        "R2LOG": float(np.mean(log_ratio**2)),
    }
    return (losses, dropped) if return_dropped else losses


def score_forecasts(records: ForecastRecords, alpha=0.01, proxies=None) -> ScoreReport:
    """PPS, #violations, QS and %hit, plus realized losses per named proxy."""
    n_vio, hit = violations_and_hits(records, alpha)
    report = ScoreReport(
        pps=pps(records),
        n_violations=n_vio,
        qs=quantile_score(records, alpha),
        hit_pct=hit,
        alpha=alpha,
        n=len(records),
    )
    for kind, proxy in (proxies or {}).items():
        losses, dropped = realized_losses(records.sigma2_hat, proxy, return_dropped=True)
        report.realized_losses[kind] = losses
        report.dropped[kind] = dropped
    return report


def _better(a, b, lower=True, alpha=None):
    if alpha is not None:
        a, b = abs(a - alpha), abs(b - alpha)
    if math.isclose(a, b, rel_tol=0.0, abs_tol=1e-15) or a == b:
        return 0
    return 1 if (a < b) == lower else -1


def count_winner(scores_a: dict, scores_b: dict, alpha=0.01):
    """Per-score wins of a vs b. Lower wins, except hit_pct where closer to alpha wins."""
    count_a = count_b = 0
    for key in scores_a:
        if key not in scores_b:
            continue
        verdict = _better(scores_a[key], scores_b[key], alpha=alpha if key == "hit_pct" else None)
        count_a += verdict == 1
        count_b += verdict == -1
    return count_a, count_b


def headline_scores(report: ScoreReport) -> dict:
    return {"PPS": report.pps, "n_violations": report.n_violations, "QS": report.qs, "hit_pct": report.hit_pct}
