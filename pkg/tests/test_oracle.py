import numpy as np
import pytest

from cranopt.channel import generate_channel, generate_topology
from cranopt.conic import solve
from cranopt.netmodel import (
    BeamformingSolution,
    ChannelRealization,
    NetworkConfig,
    NetworkState,
    PowerParams,
    network_power,
    objective_ref,
)
from cranopt.oracle import (
    ENUMERATION_LIMIT,
    EnumerationGuardError,
    InfeasibleInstanceError,
    check_pri_constraints,
    check_ref_constraints,
    enumerate_optimal,
    verify_lemma1,
    verify_theorem1,
)
from cranopt.socp_form import OPTIMAL, build_relaxed_problem, full_objective


def make_config(L=2, K=2, N=2, caps=None, gamma_db=0.0, p_max=10.0, zeta=1e-3):
    caps = caps if caps is not None else tuple(1 for _ in range(L))
    gamma = 10.0 ** (gamma_db / 10.0)
    return NetworkConfig(
        L=L,
        K=K,
        antennas_per_rrh=tuple(N for _ in range(L)),
        fronthaul_caps=caps,
        p_max_w=tuple(p_max for _ in range(L)),
        target_sinr_linear=tuple(gamma for _ in range(K)),
        zeta=zeta,
    )


def drawn(seed, **kw):
    config = make_config(**kw)
    topo = generate_topology(seed, config, half_width_m=500.0)
    channels = generate_channel(seed, topo, config)
    return config, channels, PowerParams.pico_defaults(config.L)


def test_single_pair_matches_matched_filter():
    config = make_config(L=1, K=1, N=1, caps=(1,), gamma_db=3.0)
    h = np.array([[0.8 - 0.3j]])
    channels = ChannelRealization(h=(h,), noise_power_w=(1.0,))
    params = PowerParams.pico_defaults(1)
    gamma = config.target_sinr_linear[0]
    expected_power = gamma * 1.0 / float(np.abs(h[0, 0]) ** 2)
    pri = enumerate_optimal(channels, params, config, "pri")
    assert pri.feasible
    assert pri.state.b == ((1,),)
    assert pri.value == pytest.approx(params.p_cms_w[0] + expected_power / params.eta[0], rel=1e-6)
    ref = enumerate_optimal(channels, params, config, "ref")
    assert ref.value == pytest.approx(pri.value + config.zeta, rel=1e-9)


def test_guard_refuses_large_instances():
    config = make_config(L=4, K=4, N=1, caps=(1, 1, 1, 1))
    _, channels, params = drawn(0, L=2, K=2)
    with pytest.raises(EnumerationGuardError) as exc:
        enumerate_optimal(channels, params, config, "pri")
    assert str(ENUMERATION_LIMIT) in str(exc.value)
    assert "16" in str(exc.value)


def test_rejects_unknown_objective():
    config, channels, params = drawn(1)
    with pytest.raises(ValueError):
        enumerate_optimal(channels, params, config, "both")


def test_zero_capacity_instance_is_infeasible():
    config, channels, params = drawn(2, caps=(0, 0))
    result = enumerate_optimal(channels, params, config, "ref")
    assert not result.feasible
    assert np.isnan(result.value)
    assert result.socp_solves == 0
    assert verify_lemma1(channels, params, config).outcome == "vacuous"
    with pytest.raises(InfeasibleInstanceError):
        verify_theorem1(channels, params, config)


def test_optimum_beats_every_manual_association():
    config, channels, params = drawn(3, L=2, K=2, caps=(2, 2), gamma_db=2.0)
    best = enumerate_optimal(channels, params, config, "ref")
    if not best.feasible:
        pytest.skip("draw infeasible")
    # full association is always one of the enumerated candidates
    from cranopt.socp_form import build_fixed_problem, extract_beamformers

    full = NetworkState.from_b(((1, 1), (1, 1)))
    problem = build_fixed_problem(full, channels, params, config)
    raw = solve(problem)
    assert raw.status == OPTIMAL
    sol = extract_beamformers(raw, problem.variable_layout, full, channels, params, config)
    assert objective_ref(full, sol, params, config) >= best.value - 1e-6


def test_gap_between_objectives_is_bounded():
    checked = 0
    for seed in range(6):
        config, channels, params = drawn(seed, L=2, K=2, caps=(1, 1), gamma_db=0.0)
        try:
            gap = verify_theorem1(channels, params, config)
        except InfeasibleInstanceError:
            continue
        checked += 1
        assert -1e-6 <= gap <= config.zeta + 1e-9
    assert checked >= 3


def test_cross_feasibility_on_drawn_instances():
    passed = 0
    for seed in range(6):
        config, channels, params = drawn(seed, L=2, K=2, caps=(1, 1), gamma_db=0.0)
        report = verify_lemma1(channels, params, config)
        if report.outcome == "vacuous":
            continue
        assert report.outcome == "pass", (
            report.ref_to_pri_violations,
            report.pri_to_ref_violations,
        )
        passed += 1
    assert passed >= 3


def test_checker_flags_link_budget_negative_control():
    config, channels, params = drawn(4, L=2, K=2, caps=(1, 1))
    # serving flag set while the RRH is off: the budget row must trip
    state = NetworkState(a=(0, 1), b=((1, 0), (0, 1)))
    w = tuple(0.01 * np.ones_like(h) for h in channels.h)
    sol = BeamformingSolution(
        w=w, objective_value=0.0, per_user_sinr=(0.0, 0.0), feasible=False
    )
    violations = check_ref_constraints(state, sol, channels, config)
    assert "link-budget l=0" in violations


def test_checker_flags_ghost_beams_and_dead_pairs():
    config, channels, params = drawn(5, L=2, K=2, caps=(2, 2))
    state = NetworkState(a=(1, 0), b=((1, 0), (0, 0)))
    w0 = np.zeros_like(channels.h[0])
    w1 = np.zeros_like(channels.h[1])
    w1[:, 1] = 0.5  # beam without a serving flag
    sol = BeamformingSolution(
        w=(w0, w1), objective_value=0.0, per_user_sinr=(0.0, 0.0), feasible=False
    )
    violations = check_pri_constraints(state, sol, channels, config)
    assert "dead-pair l=0,k=0" in violations
    assert "ghost-beam l=1,k=1" in violations


def test_relaxation_lower_bounds_the_enumerated_optimum():
    compared = 0
    for seed in range(8):
        config, channels, params = drawn(seed, L=2, K=2, caps=(1, 1), gamma_db=0.0)
        best = enumerate_optimal(channels, params, config, "ref")
        if not best.feasible:
            continue
        problem = build_relaxed_problem(channels, params, config)
        raw = solve(problem)
        assert raw.status == OPTIMAL
        assert full_objective(problem, raw) <= best.value + 1e-6
        compared += 1
    assert compared >= 3


def test_value_invariant_under_rrh_relabeling():
    config, channels, params = drawn(6, L=2, K=2, caps=(1, 2), gamma_db=0.0)
    base = enumerate_optimal(channels, params, config, "ref")
    if not base.feasible:
        pytest.skip("draw infeasible")
    perm = (1, 0)
    config_p = NetworkConfig(
        L=2,
        K=2,
        antennas_per_rrh=tuple(config.antennas_per_rrh[p] for p in perm),
        fronthaul_caps=tuple(config.fronthaul_caps[p] for p in perm),
        p_max_w=tuple(config.p_max_w[p] for p in perm),
        target_sinr_linear=config.target_sinr_linear,
        zeta=config.zeta,
    )
    channels_p = ChannelRealization(
        h=tuple(channels.h[p] for p in perm), noise_power_w=channels.noise_power_w
    )
    permuted = enumerate_optimal(channels_p, params, config_p, "ref")
    assert permuted.feasible
    assert permuted.value == pytest.approx(base.value, rel=1e-8)
    assert permuted.state.b == tuple(base.state.b[p] for p in perm)


def test_reported_value_matches_solution_power():
    config, channels, params = drawn(7, L=2, K=2, caps=(1, 1), gamma_db=0.0)
    result = enumerate_optimal(channels, params, config, "pri")
    if not result.feasible:
        pytest.skip("draw infeasible")
    assert result.value == pytest.approx(
        network_power(result.state, result.solution, params), rel=1e-9
    )
    assert result.solution.feasible
