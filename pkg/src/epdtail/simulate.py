"""Monte Carlo study harness: reference distributions, replication, aggregation.

Replications are independent work units with per-replication seeds
derived from the master seed, so results are bit-identical for any
worker count. Estimator failures are excluded cell-wise and counted;
a run aborts when exclusions exceed 5% of all cells.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy.special import gammaincc

from .bayes import (
    BayesEstimate,
    MCMCConfig,
    PriorSpec,
    bayes_closed_form,
    bayes_tail_prob,
    metropolis_sample,
    posterior_mode,
    prior_variance,
)
from .classical import hill, weissman_tail_prob
from .data import SortedSample, excesses
from .epd import epd_ml_fit, epd_tail_prob
from .second_order import NonEstimableError, resolve_rho, tau_hat

__all__ = [
    "StudyError",
    "SimDistribution",
    "frechet",
    "burr",
    "loggamma",
    "survival",
    "true_quantile",
    "sample_distribution",
    "MCStudyConfig",
    "EstimatorMetrics",
    "MCStudyResult",
    "run_study",
    "study_rows",
    "study_payload",
]

ESTIMATORS = ("hill", "epd_ml", "bayes_closed", "bayes_mcmc")


class StudyError(RuntimeError):
    """Raised when a study cannot produce trustworthy aggregates."""


@dataclass(frozen=True)
class SimDistribution:
    """A reference heavy-tailed law with known tail and second-order indices."""

    kind: str
    args: tuple[float, ...]
    true_xi: float
    true_rho: float


def frechet(xi: float) -> SimDistribution:
    """Fréchet law with distribution function exp(-x**(-1/xi)); rho = -1."""
    if xi <= 0:
        raise ValueError("xi must be positive")
    return SimDistribution("frechet", (xi,), true_xi=xi, true_rho=-1.0)


def burr(xi: float, rho: float) -> SimDistribution:
    """Burr law with survival (1 + x**(-rho/xi))**(1/rho)."""
    if xi <= 0 or rho >= 0:
        raise ValueError("need xi > 0 and rho < 0")
    return SimDistribution("burr", (xi, rho), true_xi=xi, true_rho=rho)


def loggamma(shape: float = 4.0, rate: float = 2.0) -> SimDistribution:
    """Exponential of a gamma variable; tail index 1/rate, no second-order rate."""
    if shape <= 0 or rate <= 0:
        raise ValueError("shape and rate must be positive")
    return SimDistribution("loggamma", (shape, rate), true_xi=1.0 / rate, true_rho=0.0)


def survival(d: SimDistribution, x) -> np.ndarray | float:
    """Exact survival function of the reference law, vectorized over x."""
    x_arr = np.asarray(x, dtype=float)
    if d.kind == "frechet":
        (xi,) = d.args
        out = 1.0 - np.exp(-np.power(x_arr, -1.0 / xi))
    elif d.kind == "burr":
        xi, rho = d.args
        out = (1.0 + np.power(x_arr, -rho / xi)) ** (1.0 / rho)
    elif d.kind == "loggamma":
        shape, rate = d.args
        out = np.where(x_arr <= 1.0, 1.0, gammaincc(shape, rate * np.log(np.maximum(x_arr, 1.0))))
    else:
        raise ValueError(f"unknown distribution kind {d.kind!r}")
    return out if out.ndim else float(out)


def true_quantile(d: SimDistribution, p: float) -> float:
    """Quantile function of the reference law at probability p.

    Analytic for the Fréchet and Burr laws; bisection on the survival
    function (to 1e-12 relative) for the loggamma law.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must be in (0, 1), got {p}")
    if d.kind == "frechet":
        (xi,) = d.args
        return float((-math.log(p)) ** (-xi))
    if d.kind == "burr":
        xi, rho = d.args
        s = 1.0 - p
        return float((s ** rho - 1.0) ** (-xi / rho))
    if d.kind == "loggamma":
        target = 1.0 - p
        lo, hi = 1.0, 2.0
        while survival(d, hi) > target:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if survival(d, mid) > target:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-12 * lo:
                break
        return 0.5 * (lo + hi)
    raise ValueError(f"unknown distribution kind {d.kind!r}")


def sample_distribution(d: SimDistribution, n: int, seed) -> SortedSample:
    """Draw a sorted i.i.d. sample of size n, deterministic for a given seed."""
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    rng = np.random.default_rng(seed)
    if d.kind == "frechet":
        (xi,) = d.args
        u = np.maximum(rng.random(n), np.finfo(float).tiny)
        x = (-np.log(u)) ** (-xi)
    elif d.kind == "burr":
        xi, rho = d.args
        s = np.minimum(1.0 - rng.random(n), np.nextafter(1.0, 0.0))
        x = (s ** rho - 1.0) ** (-xi / rho)
    elif d.kind == "loggamma":
        shape, rate = d.args
        x = np.exp(rng.gamma(shape, 1.0 / rate, size=n))
    else:
        raise ValueError(f"unknown distribution kind {d.kind!r}")
    return SortedSample(x)


@dataclass(frozen=True)
class MCStudyConfig:
    """Design of a replicated estimation study on a reference law.

    ``k_grid`` defaults (when empty) to every k from 10 to n-10 in steps
    of 5. ``smooth_window`` is the moving-average width applied to each
    replication's posterior-mode paths over k before aggregation; 0
    disables smoothing. ``target_p`` fixes the exceedance level whose
    probability is re-estimated at x equal to the true (1 - target_p)
    quantile.
    """

    dist: SimDistribution
    n: int = 500
    reps: int = 1000
    k_grid: tuple[int, ...] = ()
    estimators: tuple[str, ...] = ("hill", "epd_ml", "bayes_closed")
    rho_mode: str = "fraga"
    target_p: float = 1.0 / 500.0
    master_seed: int = 0
    smooth_window: int = 5
    mcmc_iterations: int = 3000
    mcmc_burn_in: int = 1000

    def __post_init__(self) -> None:
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.n < 21:
            raise ValueError("n must allow k in [10, n-10]")
        for name in self.estimators:
            if name not in ESTIMATORS:
                raise ValueError(f"unknown estimator {name!r}; supported: {ESTIMATORS}")
        if not self.estimators:
            raise ValueError("need at least one estimator")
        if self.rho_mode not in ("fraga", "fixed_minus_one"):
            raise ValueError("rho_mode must be 'fraga' or 'fixed_minus_one'")
        if not 0.0 < self.target_p < 1.0:
            raise ValueError("target_p must be in (0, 1)")
        if self.smooth_window < 0 or (self.smooth_window > 1 and self.smooth_window % 2 == 0):
            raise ValueError("smooth_window must be 0 (off) or odd")
        for k in self.k_grid:
            if not 10 <= k <= self.n - 1:
                raise ValueError(f"every k must lie in [10, n-1]; got {k}")

    def resolved_k_grid(self) -> tuple[int, ...]:
        if self.k_grid:
            return tuple(self.k_grid)
        return tuple(range(10, self.n - 9, 5))


@dataclass(frozen=True)
class EstimatorMetrics:
    """Per-k aggregates for one estimator: index metrics and relative tail metrics."""

    bias: np.ndarray
    variance: np.ndarray
    mse: np.ndarray
    rel_bias: np.ndarray
    rel_variance: np.ndarray
    rel_mse: np.ndarray
    excluded: np.ndarray


@dataclass(frozen=True)
class MCStudyResult:
    """Aggregated study output; ``metrics`` is keyed by estimator name."""

    config: MCStudyConfig
    k_grid: tuple[int, ...]
    metrics: dict[str, EstimatorMetrics]
    reps_used: int
    exclusion_fraction: float
    runtime: float


def _smooth_nan_aware(x: np.ndarray, window: int) -> np.ndarray:
    """Centered shrinking-window mean that skips missing cells."""
    r = window // 2
    out = np.empty_like(x)
    for i in range(x.size):
        ri = min(r, i, x.size - 1 - i)
        seg = x[i - ri: i + ri + 1]
        good = np.isfinite(seg)
        out[i] = seg[good].mean() if good.any() else np.nan
    return out


def _study_rep(cfg: MCStudyConfig, k_grid: tuple[int, ...], x_level: float, rep: int):
    """One replication: estimate xi and the tail probability on every k.

    Returns two (n_estimators, n_k) arrays; failed cells are nan.
    """
    est_names = cfg.estimators
    n_k = len(k_grid)
    xi_out = np.full((len(est_names), n_k), np.nan)
    p_out = np.full((len(est_names), n_k), np.nan)

    s = sample_distribution(cfg.dist, cfg.n, np.random.SeedSequence((cfg.master_seed, rep)))
    if cfg.rho_mode == "fraga":
        rho, _ = resolve_rho(s)
    else:
        rho = -1.0

    for j, k in enumerate(k_grid):
        e = excesses(s, k)
        h = hill(e).xi
        try:
            tau = tau_hat(rho, h)
        except NonEstimableError:
            continue
        for i, name in enumerate(est_names):
            try:
                if name == "hill":
                    xi_out[i, j] = h
                    p_out[i, j] = weissman_tail_prob(s, k, x_level, h)
                elif name == "epd_ml":
                    fit = epd_ml_fit(e, tau)
                    xi_out[i, j] = fit.params.xi
                    p_out[i, j] = epd_tail_prob(s, k, x_level, fit.params)
                else:
                    prior = PriorSpec.for_tau(prior_variance(k, cfg.n, rho), tau)
                    if name == "bayes_closed":
                        est = bayes_closed_form(e, tau, prior)
                    else:
                        seed = int(np.random.SeedSequence((cfg.master_seed, rep, k)).generate_state(1)[0])
                        chain = metropolis_sample(
                            e,
                            tau,
                            prior,
                            MCMCConfig(
                                iterations=cfg.mcmc_iterations,
                                burn_in=cfg.mcmc_burn_in,
                                seed=seed,
                            ),
                        )
                        xi_m, delta_m = posterior_mode(chain)
                        est = BayesEstimate(xi=xi_m, delta=delta_m, method="mcmc")
                    xi_out[i, j] = est.xi
                    p_out[i, j] = bayes_tail_prob(s, k, x_level, est, tau)
            except (ValueError, RuntimeError, ArithmeticError):
                continue

    if cfg.smooth_window >= 3:
        for i, name in enumerate(est_names):
            if name in ("bayes_closed", "bayes_mcmc"):
                xi_out[i] = _smooth_nan_aware(xi_out[i], cfg.smooth_window)
                p_out[i] = _smooth_nan_aware(p_out[i], cfg.smooth_window)
    return xi_out, p_out


def run_study(cfg: MCStudyConfig, workers: int = 1) -> MCStudyResult:
    """Run the replicated study; deterministic in master_seed, any worker count."""
    t0 = time.perf_counter()
    k_grid = cfg.resolved_k_grid()
    x_level = true_quantile(cfg.dist, 1.0 - cfg.target_p)
    rep_fn = partial(_study_rep, cfg, k_grid, x_level)

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_rep = list(pool.map(rep_fn, range(cfg.reps), chunksize=8))
    else:
        per_rep = [rep_fn(r) for r in range(cfg.reps)]

    xi_all = np.stack([r[0] for r in per_rep])  # (reps, est, k)
    p_all = np.stack([r[1] for r in per_rep])
    valid = np.isfinite(xi_all) & np.isfinite(p_all)
    excluded_total = int(valid.size - valid.sum())
    frac = excluded_total / valid.size
    if frac > 0.05:
        raise StudyError(
            f"{excluded_total} of {valid.size} cells failed ({frac:.1%}); "
            "aborting study aggregation"
        )

    metrics: dict[str, EstimatorMetrics] = {}
    for i, name in enumerate(cfg.estimators):
        bias = np.empty(len(k_grid))
        var = np.empty(len(k_grid))
        rel_bias = np.empty(len(k_grid))
        rel_var = np.empty(len(k_grid))
        excl = np.empty(len(k_grid), dtype=int)
        for j in range(len(k_grid)):
            mask = valid[:, i, j]
            excl[j] = int(cfg.reps - mask.sum())
            if not mask.any():
                bias[j] = var[j] = rel_bias[j] = rel_var[j] = np.nan
                continue
            xi_vals = xi_all[mask, i, j]
            ratio = p_all[mask, i, j] / cfg.target_p - 1.0
            bias[j] = xi_vals.mean() - cfg.dist.true_xi
            var[j] = xi_vals.var()  # population form, so mse = bias**2 + variance
            rel_bias[j] = ratio.mean()
            rel_var[j] = ratio.var()
        metrics[name] = EstimatorMetrics(
            bias=bias,
            variance=var,
            mse=bias ** 2 + var,
            rel_bias=rel_bias,
            rel_variance=rel_var,
            rel_mse=rel_bias ** 2 + rel_var,
            excluded=excl,
        )
    return MCStudyResult(
        config=cfg,
        k_grid=k_grid,
        metrics=metrics,
        reps_used=cfg.reps,
        exclusion_fraction=frac,
        runtime=time.perf_counter() - t0,
    )


def study_rows(result: MCStudyResult) -> list[dict]:
    """Flatten a result to one row per estimator and k, ready for CSV."""
    rows = []
    for name in result.config.estimators:
        m = result.metrics[name]
        for j, k in enumerate(result.k_grid):
            rows.append(
                {
                    "estimator": name,
                    "k": k,
                    "bias": m.bias[j],
                    "variance": m.variance[j],
                    "mse": m.mse[j],
                    "rel_bias": m.rel_bias[j],
                    "rel_variance": m.rel_variance[j],
                    "rel_mse": m.rel_mse[j],
                    "excluded": int(m.excluded[j]),
                }
            )
    return rows


def study_payload(result: MCStudyResult) -> dict:
    """Full provenance payload (config, seed, exclusions, metrics).

    Volatile fields (wall-clock runtime) are deliberately left out so the
    payload is byte-stable across reruns.
    """
    cfg = result.config
    return {
        "config": {
            "dist": {
                "kind": cfg.dist.kind,
                "args": list(cfg.dist.args),
                "true_xi": cfg.dist.true_xi,
                "true_rho": cfg.dist.true_rho,
            },
            "n": cfg.n,
            "reps": cfg.reps,
            "k_grid": list(result.k_grid),
            "estimators": list(cfg.estimators),
            "rho_mode": cfg.rho_mode,
            "target_p": cfg.target_p,
            "master_seed": cfg.master_seed,
            "smooth_window": cfg.smooth_window,
            "mcmc_iterations": cfg.mcmc_iterations,
            "mcmc_burn_in": cfg.mcmc_burn_in,
        },
        "reps_used": result.reps_used,
        "exclusion_fraction": result.exclusion_fraction,
        "rows": study_rows(result),
    }
