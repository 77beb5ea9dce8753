"""Shared model builders for the test suite."""

import numpy as np
import pytest

from netdrift import build_network, exponential_ph, poisson_map


def exp_model(discipline="non_preemptive", K=None, lam1=0.8, lam3=0.4,
              p=0.3, mus=(4.0, 2.4, 4.2, 2.2)):
    """Poisson/exponential network with the given discipline."""
    phs = [exponential_ph(m) for m in mus]
    return build_network(poisson_map(lam1), poisson_map(lam3),
                         phs[0], phs[1], phs[2], phs[3], p, discipline, K=K)


def symmetric_limited_model(K, lam=1.0, mu_single=5.0, mu_batch=1.8):
    """The (1,K) alternating-service configuration with matched stations."""
    return exp_model("limited", K=K, lam1=lam, lam3=lam, p=0.0,
                     mus=(mu_single, mu_batch, mu_single, mu_batch))


def priority_sample(rng):
    """One random parameter set for the priority disciplines.

    Satisfies the nominal condition, mu1 > mu2, mu3 > mu4 and
    lam1, lam3 + p*mu2 > 0, with the virtual-station load rho2 + rho4
    spread across both sides of 1.
    """
    while True:
        lam1 = rng.uniform(0.2, 1.5)
        mu2 = lam1 + rng.uniform(0.2, 2.0)
        mu1 = mu2 + rng.uniform(0.5, 3.0)
        lam3 = rng.uniform(0.05, 1.2)
        p = rng.uniform(0.0, 0.95)
        rho2 = lam1 / mu2
        target = rng.uniform(0.55, 1.45)
        if target <= rho2 + 0.02:
            continue
        mu4 = (p * lam1 + lam3) / (target - rho2)
        mu3 = mu4 + rng.uniform(0.3, 2.5)
        rho = np.array([lam1 / mu1, rho2, (p * lam1 + lam3) / mu3,
                        (p * lam1 + lam3) / mu4])
        if rho[0] + rho[3] >= 0.98 or rho[1] + rho[2] >= 0.98:
            continue
        if abs(rho[1] + rho[3] - 1.0) <= 1e-4:
            continue
        return dict(lam1=lam1, lam3=lam3, p=p, mus=(mu1, mu2, mu3, mu4),
                    rho=rho)


@pytest.fixture
def np_model():
    return exp_model()
