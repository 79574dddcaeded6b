from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import epdtail as et


@pytest.fixture(scope="session")
def burr_dist():
    return et.burr(0.75, -0.75)


@pytest.fixture(scope="session")
def frechet_dist():
    return et.frechet(0.5)


@pytest.fixture(scope="session")
def burr_sample(burr_dist):
    """One fixed Burr sample (n=500) shared by the heavier tests."""
    return et.sample_distribution(burr_dist, 500, 20250808)


@pytest.fixture(scope="session")
def burr_k200(burr_sample):
    """Excesses, tau and prior at k=200 on the shared Burr sample."""
    e = et.excesses(burr_sample, 200)
    h = et.hill(e).xi
    rho, _ = et.resolve_rho(burr_sample)
    tau = et.tau_hat(rho, h)
    prior = et.PriorSpec.for_tau(et.prior_variance(200, 500, rho), tau)
    return e, tau, prior


def pareto_excesses(xi: float, k: int, seed) -> "et.ExcessSet":
    """Excess set drawn directly from the strict Pareto excess law."""
    rng = np.random.default_rng(seed)
    u = np.maximum(rng.random(k), np.finfo(float).tiny)
    y = np.sort(u ** (-xi))[::-1]
    return et.ExcessSet(y=y, k=k, threshold=1.0)
