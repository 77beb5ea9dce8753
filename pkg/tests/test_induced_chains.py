"""Induced saturated chains: stationary solves, drift vectors, and the
closed-form / numeric cross-check."""

import numpy as np
import pytest

from netdrift import (
    CANONICAL_SUBSETS,
    build_induced_chain,
    build_network,
    closed_form_table,
    drift_table,
    erlang_ph,
    exponential_ph,
    mean_displacement,
    mmpp_map,
    numeric_table,
    output_rates,
    poisson_map,
    solve_stationary,
    uniformize,
)
from netdrift.errors import (
    AssumptionViolated,
    EmptySubset,
    NotConverged,
    UnsupportedSubset,
)
from netdrift.induced_chains import input_rates

from tests.conftest import exp_model, symmetric_limited_model


N = frozenset({1, 2, 3, 4})


def test_subset_validation():
    kernel = uniformize(exp_model())
    with pytest.raises(EmptySubset):
        build_induced_chain(kernel, [])
    with pytest.raises(UnsupportedSubset):
        build_induced_chain(kernel, {1, 5})


def test_fully_saturated_chain_solves_exactly(np_model):
    # no free coordinate: a single finite background chain, solved directly
    kernel = uniformize(np_model)
    chain = build_induced_chain(kernel, N)
    sol = solve_stationary(chain)
    assert sol.converged
    assert sol.dist.shape == (kernel.S0,)
    assert sol.residual <= 1e-12
    assert sol.tail_mass == 0.0
    assert abs(sol.dist.sum() - 1.0) <= 1e-12


def test_virtual_station_chain_reduces_to_single_server_queue(np_model):
    # With queues 2 and 3 saturated, station 2 works on class 2 only, so
    # queue 4 receives nothing and drains; queue 1 is then a plain
    # single-server queue with load lam1/mu1 = 0.2 and its stationary
    # level marginal is geometric.
    kernel = uniformize(np_model)
    chain = build_induced_chain(kernel, {2, 3})
    assert chain.free == (1, 4)
    sol = solve_stationary(chain)
    assert sol.converged

    # all mass sits at x4 = 0
    assert sol.dist[:, 1:, :].sum() <= 1e-9

    marg = sol.dist.sum(axis=(1, 2))
    rho1 = 0.8 / 4.0
    assert abs(marg[0] - (1.0 - rho1)) <= 1e-6
    for lvl in range(6):
        assert marg[lvl + 1] / marg[lvl] == pytest.approx(rho1, abs=1e-6)

    groups = sol.group_masses()
    total = sum(float(v.sum()) for v in groups.values())
    assert total == pytest.approx(1.0, abs=1e-12)


def test_alternate_virtual_station_chain_converges(np_model):
    kernel = uniformize(np_model)
    chain = build_induced_chain(kernel, {1, 4})
    assert chain.free == (2, 3)
    sol = solve_stationary(chain)
    assert sol.converged
    assert sol.tail_mass <= 1e-6
    # queue 2 starves (station 1 is monopolized by class 4)
    assert sol.dist[1:, :, :].sum() <= 1e-9


def test_noncanonical_transient_subset_is_flagged(np_model):
    # Saturating {1,2,4} feeds queue 3 at rate lam3 + p*mu2 while class 2
    # monopolizes station 2, so queue 3 never completes and the free
    # chain is transient.  The solver must refuse to converge.
    kernel = uniformize(np_model)
    chain = build_induced_chain(kernel, {1, 2, 4})
    sol = solve_stationary(chain, levels=4, cap=16)
    assert not sol.converged
    assert sol.tail_mass > 1e-3
    assert sol.note
    with pytest.raises(NotConverged):
        output_rates(np_model, chain, sol)


@pytest.mark.parametrize("subset", [N, frozenset({2, 3}), frozenset({1, 4})])
def test_drift_equals_uniformization_rate_times_step_mean(np_model, subset):
    # rate-time drift and per-step mean displacement differ exactly by nu
    kernel = uniformize(np_model)
    chain = build_induced_chain(kernel, subset)
    sol = solve_stationary(chain)
    mu_bar = output_rates(np_model, chain, sol)
    drift = input_rates(np_model, mu_bar) - mu_bar
    step = kernel.nu * mean_displacement(chain, sol)
    assert np.max(np.abs(drift - step)) <= 1e-8


def test_input_rate_identity(np_model):
    table = drift_table(np_model, mode="numeric", levels=32, cap=128)
    for A in CANONICAL_SUBSETS:
        e = table.numeric[A]
        out = e.output_rates
        expected = np.array([0.8, out[0], 0.4 + 0.3 * out[1], out[2]])
        assert np.max(np.abs(e.input_rates - expected)) <= 1e-12


@pytest.mark.parametrize(
    "model",
    [
        exp_model("non_preemptive"),
        exp_model("preemptive_resume"),
    ],
    ids=["non_preemptive", "preemptive_resume"],
)
def test_numeric_matches_closed_form_priority(model):
    table = drift_table(model, mode="both", levels=32, cap=128)
    cross = table.cross_check
    assert cross["ok"], cross
    assert cross["worst"] <= 1e-4


def test_numeric_matches_closed_form_limited():
    table = drift_table(symmetric_limited_model(3), mode="both",
                        levels=32, cap=128)
    cross = table.cross_check
    assert cross["ok"], cross
    assert cross["worst"] <= 1e-4


def test_off_subset_drift_vanishes(np_model):
    table = drift_table(np_model, mode="numeric", levels=32, cap=128)
    for A in CANONICAL_SUBSETS:
        e = table.numeric[A]
        assert e.diagnostics["offSubsetDriftMax"] <= 1e-5


def test_exponential_disciplines_share_numeric_drifts():
    # with exponential services the preemption rule cannot matter in any
    # saturated stationary regime; force equal truncation and compare
    t_np = drift_table(exp_model("non_preemptive"), mode="numeric",
                       levels=32, cap=64)
    t_pr = drift_table(exp_model("preemptive_resume"), mode="numeric",
                       levels=32, cap=64)
    for A in CANONICAL_SUBSETS:
        a = t_np.numeric[A].drifts
        b = t_pr.numeric[A].drifts
        assert a is not None and b is not None
        assert np.max(np.abs(a - b)) <= 1e-9


def test_limited_closed_form_approaches_priority_as_budget_grows():
    # gap(K) between the limited table and the priority table decays
    # like 1/K; it does not vanish at any finite K
    lam, mu1, mu2 = 1.0, 5.0, 1.8
    prio = exp_model("non_preemptive", lam1=lam, lam3=lam, p=0.0,
                     mus=(mu1, mu2, mu1, mu2))
    base = closed_form_table(prio)

    def gap(K):
        model = exp_model("limited", K=K, lam1=lam, lam3=lam, p=0.0,
                          mus=(mu1, mu2, mu1, mu2))
        lim = closed_form_table(model)
        return max(
            float(np.max(np.abs(lim[A].drifts - base[A].drifts)))
            for A in CANONICAL_SUBSETS
        )

    gaps = {K: gap(K) for K in (12, 50, 200)}
    assert gaps[50] < gaps[12]
    assert gaps[200] < gaps[50]
    for K, g in gaps.items():
        assert g > 1e-4          # never collapses onto the priority table
        assert K * g <= 6.0      # but decays at a 1/K rate


def test_closed_form_guards():
    # nominal overload
    with pytest.raises(AssumptionViolated):
        closed_form_table(exp_model(lam1=1.2, mus=(4.0, 1.0, 4.2, 2.2)))
    # priority form needs mu1 > mu2, mu3 > mu4
    with pytest.raises(AssumptionViolated):
        closed_form_table(exp_model(mus=(2.0, 2.4, 4.2, 2.2)))
    # limited form needs the symmetric configuration
    with pytest.raises(AssumptionViolated):
        closed_form_table(exp_model("limited", K=3))
    # and a budget above the critical one
    with pytest.raises(AssumptionViolated):
        closed_form_table(
            exp_model("limited", K=1, lam1=1.0, lam3=1.0, p=0.0,
                      mus=(5.0, 1.8, 5.0, 1.8)))


def test_table_rejects_unknown_subset(np_model):
    table = drift_table(np_model, mode="closed")
    with pytest.raises(UnsupportedSubset):
        table.entry({1, 2})


def test_direction_zeroes_stable_coordinates(np_model):
    table = drift_table(np_model, mode="closed")
    d = table.direction({2, 3})
    full = table.drifts({2, 3})
    assert d[0] == 0.0 and d[3] == 0.0
    assert d[1] == full[1] and d[2] == full[2]


def test_closed_form_drifts_scale_linearly():
    base = closed_form_table(exp_model())
    for c in (0.1, 10.0):
        scaled = closed_form_table(
            exp_model(lam1=0.8 * c, lam3=0.4 * c,
                      mus=(4.0 * c, 2.4 * c, 4.2 * c, 2.2 * c)))
        for A in CANONICAL_SUBSETS:
            assert np.allclose(scaled[A].drifts, c * base[A].drifts,
                               rtol=1e-12, atol=1e-12)


def test_markovian_inputs_cross_check():
    # modulated arrivals into queue 1 and a two-stage class-1 service;
    # the priority closed form depends on rates only and must still
    # agree with the numeric table
    model = build_network(
        mmpp_map([[-1.0, 1.0], [1.0, -1.0]], [0.5, 1.1]),
        poisson_map(0.4),
        erlang_ph(2, 8.0),
        exponential_ph(2.4),
        exponential_ph(4.2),
        exponential_ph(2.2),
        0.3,
    )
    table = drift_table(model, mode="both", levels=32, cap=128)
    assert table.lam1 == pytest.approx(0.8, abs=1e-12)
    cross = table.cross_check
    assert cross["ok"], cross
    assert cross["worst"] <= 1e-4
    for A in CANONICAL_SUBSETS:
        assert table.numeric[A].diagnostics["offSubsetDriftMax"] <= 1e-5


def test_numeric_table_reports_unstable_subset_without_drifts():
    # lam1 > mu1 makes the {2,3} chain itself transient; the entry must
    # carry no drift vector and downstream access must fail loudly
    model = exp_model(lam1=5.0, mus=(4.0, 2.4, 4.2, 2.2))
    entries, _ = numeric_table(model, levels=4, cap=8)
    e = entries[frozenset({2, 3})]
    assert e.drifts is None
    assert not e.diagnostics["converged"]
