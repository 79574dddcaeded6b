"""The extended Pareto excess model: survival, likelihood, fitting, sampling.

The model perturbs the strict Pareto survival y**(-1/xi) by a bounded
power term: survival(y) = (y * (1 + delta - delta * y**tau))**(-1/xi) on
y >= 1, with tau < 0 < xi and delta > max(-1, 1/tau). delta = 0 recovers
the strict Pareto exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from .classical import hill
from .data import ExcessSet, SortedSample

__all__ = [
    "EPDParams",
    "EPDFit",
    "delta_lower_bound",
    "epd_survival",
    "epd_log_likelihood",
    "epd_loglik_grad",
    "epd_ml_fit",
    "epd_quantile",
    "epd_sample",
    "epd_tail_prob",
]

DELTA_MAX = 10.0  # upper search bound for the perturbation amplitude


def delta_lower_bound(tau: float) -> float:
    """Left endpoint of the admissible perturbation range, max(-1, 1/tau)."""
    if tau >= 0:
        raise ValueError(f"tau must be negative, got {tau}")
    return max(-1.0, 1.0 / tau)


@dataclass(frozen=True)
class EPDParams:
    """Parameters (xi, delta, tau) of the extended Pareto excess model."""

    xi: float
    delta: float
    tau: float

    def __post_init__(self) -> None:
        if not self.xi > 0:
            raise ValueError(f"xi must be positive, got {self.xi}")
        if not self.tau < 0:
            raise ValueError(f"tau must be negative, got {self.tau}")
        lo = delta_lower_bound(self.tau)
        # delta > max(-1, 1/tau) keeps 1 + delta - delta*y**tau positive on y >= 1
        if not self.delta > lo:
            raise ValueError(f"delta must exceed {lo}, got {self.delta}")


@dataclass(frozen=True)
class EPDFit:
    """Result of the two-parameter likelihood fit at fixed tau."""

    params: EPDParams
    loglik: float
    converged: bool
    iterations: int


def _in_region(xi: float, delta: float, tau: float) -> bool:
    return xi > 0 and tau < 0 and delta > delta_lower_bound(tau)


def epd_survival(p: EPDParams, y):
    """Survival function of the excess model, vectorized over y >= 1."""
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr < 1.0):
        raise ValueError("survival is defined for y >= 1 only")
    base = y_arr * (1.0 + p.delta - p.delta * y_arr ** p.tau)
    out = base ** (-1.0 / p.xi)
    return out if out.ndim else float(out)


def epd_log_likelihood(xi: float, delta: float, tau: float, e: ExcessSet) -> float:
    """Mean log-likelihood of the excesses under the extended Pareto model.

    Returns -inf for parameters outside the admissible region so that
    optimizers and samplers can reject naturally; malformed excess data
    raises instead.
    """
    y = e.y
    if np.any(y < 1.0):
        raise ValueError("excesses must be >= 1")
    if not _in_region(xi, delta, tau):
        return -math.inf
    p = y ** tau
    t1 = 1.0 + delta * (1.0 - p)
    t2 = 1.0 + delta * (1.0 - (1.0 + tau) * p)
    if np.any(t1 <= 0.0) or np.any(t2 <= 0.0):
        return -math.inf
    return float(
        -math.log(xi)
        - (1.0 / xi + 1.0) * np.mean(np.log(y) + np.log(t1))
        + np.mean(np.log(t2))
    )


def epd_loglik_grad(xi: float, delta: float, tau: float, e: ExcessSet) -> tuple[float, float]:
    """Analytic gradient of the mean log-likelihood in (xi, delta)."""
    y = e.y
    if not _in_region(xi, delta, tau):
        raise ValueError("gradient requested outside the parameter region")
    p = y ** tau
    a = 1.0 - p
    b = 1.0 - (1.0 + tau) * p
    t1 = 1.0 + delta * a
    t2 = 1.0 + delta * b
    if np.any(t1 <= 0.0) or np.any(t2 <= 0.0):
        raise ValueError("gradient requested outside the parameter region")
    d_xi = -1.0 / xi + np.mean(np.log(y) + np.log(t1)) / xi ** 2
    d_delta = -(1.0 / xi + 1.0) * np.mean(a / t1) + np.mean(b / t2)
    return float(d_xi), float(d_delta)


def epd_ml_fit(e: ExcessSet, tau: float, delta_max: float = DELTA_MAX) -> EPDFit:
    """Maximum-likelihood fit of (xi, delta) at fixed tau.

    Quasi-Newton search on (log xi, logit-mapped delta) so both
    constraints hold throughout; started at the Hill estimate with
    delta = 0. Requires at least 10 excesses.
    """
    if e.k < 10:
        raise ValueError(f"need at least 10 excesses to fit, got {e.k}")
    if tau >= 0:
        raise ValueError(f"tau must be negative, got {tau}")
    h = hill(e).xi
    if h <= 0:
        raise ValueError("all excesses are ties; the likelihood has no interior maximum")

    lo = delta_lower_bound(tau)
    span = delta_max - lo

    def unpack(w: np.ndarray) -> tuple[float, float, float]:
        u = float(np.clip(w[0], -40.0, 40.0))
        sig = float(expit(w[1]))
        return math.exp(u), lo + span * sig, sig

    def neg_loglik(w: np.ndarray) -> float:
        xi, delta, _ = unpack(w)
        val = epd_log_likelihood(xi, delta, tau, e)
        # big finite penalty so the line search backtracks from the region edge
        return 1e12 if val == -math.inf else -val

    def neg_grad(w: np.ndarray) -> np.ndarray:
        xi, delta, sig = unpack(w)
        try:
            d_xi, d_delta = epd_loglik_grad(xi, delta, tau, e)
        except ValueError:
            return np.zeros(2)
        return -np.array([d_xi * xi, d_delta * span * sig * (1.0 - sig)])

    w0 = np.array([math.log(h), float(logit((0.0 - lo) / span))])
    res = minimize(
        neg_loglik,
        w0,
        jac=neg_grad,
        method="L-BFGS-B",
        options={"gtol": 1e-9, "ftol": 1e-14, "maxiter": 500},
    )
    xi_hat, delta_hat, _ = unpack(res.x)
    return EPDFit(
        params=EPDParams(xi=xi_hat, delta=delta_hat, tau=tau),
        loglik=-float(res.fun),
        converged=bool(res.success),
        iterations=int(res.nit),
    )


def _invert_survival(p: EPDParams, targets: np.ndarray, rtol: float = 1e-13) -> np.ndarray:
    """Solve y*(1+delta-delta*y**tau) = t for each target t >= 1 by bisection."""
    lo_fac = min(1.0, 1.0 + p.delta)
    lower = np.ones_like(targets)
    upper = 1.0 + targets / lo_fac
    for _ in range(200):
        mid = 0.5 * (lower + upper)
        g = mid * (1.0 + p.delta - p.delta * mid ** p.tau)
        high = g >= targets
        upper = np.where(high, mid, upper)
        lower = np.where(high, lower, mid)
        if np.all(upper - lower <= rtol * lower):
            break
    return 0.5 * (lower + upper)


def epd_quantile(p: EPDParams, q: float) -> float:
    """Quantile of the excess model: the y with survival(y) = 1 - q."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must be in (0, 1), got {q}")
    target = np.array([(1.0 - q) ** (-p.xi)])
    return float(_invert_survival(p, target)[0])


def epd_sample(p: EPDParams, count: int, seed) -> np.ndarray:
    """Inverse-transform draws from the excess model, deterministic per seed."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    u = rng.random(count)
    survival_levels = np.maximum(1.0 - u, np.finfo(float).tiny)
    targets = survival_levels ** (-p.xi)
    return _invert_survival(p, targets)


def epd_tail_prob(s: SortedSample, k: int, x: float, p: EPDParams) -> float:
    """Exceedance probability (k/n) * survival(x / threshold) under the fit."""
    threshold = float(s.values[s.n - k - 1])
    if x < threshold:
        raise ValueError(f"x={x} is below the threshold {threshold}; extrapolation invalid")
    return (k / s.n) * float(epd_survival(p, x / threshold))
