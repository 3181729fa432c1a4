import csv

import numpy as np
import pytest

from cranopt.channel import generate_channel, generate_topology
from cranopt.inflation import inflate, priority_levels
from cranopt.netmodel import (
    BeamformingSolution,
    ChannelRealization,
    NetworkConfig,
    PowerParams,
    network_power,
    objective_ref,
    validate_state,
)
from cranopt.oracle import enumerate_optimal
from cranopt.socp_form import INFEASIBLE, OPTIMAL


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


def test_single_pair_run():
    config = make_config(L=1, K=1, N=1, caps=(1,), gamma_db=3.0)
    h = np.array([[0.8 - 0.3j]])
    channels = ChannelRealization(h=(h,), noise_power_w=(1.0,))
    params = PowerParams.pico_defaults(1)
    result = inflate(channels, params, config)
    assert result.solution.feasible
    assert result.state.b == ((1,),)
    gamma = config.target_sinr_linear[0]
    expected = params.p_cms_w[0] + gamma / float(np.abs(h[0, 0]) ** 2) / params.eta[0]
    assert network_power(result.state, result.solution, params) == pytest.approx(
        expected, rel=1e-6
    )
    trace = result.trace
    assert trace.initial_objective == pytest.approx(2.5 + 10.0 / 0.25 + 1e-3)
    assert trace.socp_solves == 2  # one relaxation, one fixed problem
    assert len(trace.steps) == 1
    step = trace.steps[0]
    assert (step.n, step.l_star, step.k_star) == (1, 0, 0)
    assert step.feasible and not step.reverted
    assert step.remaining == 0


def test_zero_capacity_short_circuits():
    config, channels, params = drawn(0, caps=(0, 0))
    result = inflate(channels, params, config)
    assert not result.solution.feasible
    assert np.isnan(result.solution.objective_value)
    assert result.trace.relaxed_status == INFEASIBLE
    assert result.trace.steps == ()
    assert result.trace.socp_solves == 1
    assert result.state.pair_count() == 0


def test_priority_rejects_zero_total_capacity():
    config, channels, params = drawn(1, caps=(0, 0))
    zeros = BeamformingSolution(
        w=tuple(np.zeros_like(h) for h in channels.h),
        objective_value=0.0,
        per_user_sinr=(0.0, 0.0),
        feasible=True,
    )
    with pytest.raises(ValueError):
        priority_levels(zeros, channels, config)


def test_priority_matches_scalar_loop():
    config, channels, params = drawn(2, L=3, K=2, N=2, caps=(1, 2, 1))
    rng = np.random.default_rng(7)
    w = tuple(
        rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for _ in range(3)
    )
    sol = BeamformingSolution(
        w=w, objective_value=0.0, per_user_sinr=(1.0, 1.0), feasible=True
    )
    alpha = priority_levels(sol, channels, config)
    signal = np.zeros((3, 2))
    for l in range(3):
        for k in range(2):
            signal[l, k] = np.abs(np.vdot(channels.h[l][:, k], w[l][:, k])) ** 2
    eps = 1e-12 * signal.max()
    cap_sum = sum(config.fronthaul_caps)
    for l in range(3):
        for k in range(2):
            leak = sum(
                np.abs(np.vdot(channels.h[l][:, i], w[l][:, k])) ** 2
                for i in range(2)
                if i != k
            )
            expected = signal[l, k] / (leak + eps) * config.fronthaul_caps[l] / cap_sum
            assert alpha[l, k] == pytest.approx(expected, rel=1e-12)


def test_zero_beams_rank_nowhere():
    config, channels, params = drawn(3, L=2, K=2, caps=(1, 1))
    zeros = BeamformingSolution(
        w=tuple(np.zeros_like(h) for h in channels.h),
        objective_value=0.0,
        per_user_sinr=(0.0, 0.0),
        feasible=True,
    )
    assert np.all(priority_levels(zeros, channels, config) == 0.0)


def test_first_pick_is_the_top_priority_pair():
    for seed in range(4):
        config, channels, params = drawn(seed, L=2, K=2, caps=(2, 2), gamma_db=0.0)
        result = inflate(channels, params, config)
        if result.trace.relaxed_status != OPTIMAL:
            continue
        from cranopt.conic import solve
        from cranopt.socp_form import build_relaxed_problem, extract_beamformers

        problem = build_relaxed_problem(channels, params, config)
        raw = solve(problem)
        relaxed = extract_beamformers(
            raw, problem.variable_layout, None, channels, params, config
        )
        alpha = priority_levels(relaxed, channels, config)
        flat = int(np.argmax(alpha))
        step = result.trace.steps[0]
        assert (step.l_star, step.k_star) == (flat // config.K, flat % config.K)


def test_trace_objectives_decrease_once_feasible():
    ran = 0
    for seed in range(6):
        config, channels, params = drawn(seed, L=3, K=2, caps=(1, 1, 1), gamma_db=2.0)
        result = inflate(channels, params, config)
        if not result.solution.feasible:
            continue
        ran += 1
        steps = result.trace.steps
        assert [s.n for s in steps] == list(range(1, len(steps) + 1))
        remaining = [s.remaining for s in steps]
        assert all(b < a for a, b in zip(remaining, remaining[1:]))
        feasible_objs = [s.objective for s in steps if s.feasible]
        assert all(b <= a + 1e-12 for a, b in zip(feasible_objs, feasible_objs[1:]))
        first_feasible = next(s for s in steps if s.feasible)
        assert not first_feasible.reverted
        for s in steps:
            if not s.feasible and s.n < first_feasible.n:
                assert s.objective == result.trace.initial_objective
                assert not s.reverted
    assert ran >= 3


def test_solve_count_bound_on_unit_capacity_rows():
    for seed in range(6):
        config, channels, params = drawn(seed, L=3, K=2, caps=(1, 1, 1), gamma_db=2.0)
        result = inflate(channels, params, config)
        assert result.trace.socp_solves <= sum(config.fronthaul_caps) + 1


def test_final_state_is_valid_and_matches_best_step():
    ran = 0
    for seed in range(6):
        config, channels, params = drawn(seed, L=2, K=2, caps=(2, 2), gamma_db=0.0)
        result = inflate(channels, params, config)
        if not result.solution.feasible:
            continue
        ran += 1
        assert validate_state(result.state, config) == []
        accepted = [s for s in result.trace.steps if s.feasible and not s.reverted]
        final_obj = objective_ref(result.state, result.solution, params, config)
        assert final_obj == pytest.approx(accepted[-1].objective, rel=1e-6)
    assert ran >= 3


def test_never_worse_than_exhaustive_search_allows():
    ran = 0
    for seed in range(8):
        config, channels, params = drawn(seed, L=2, K=2, caps=(1, 1), gamma_db=0.0)
        oracle = enumerate_optimal(channels, params, config, "ref", None)
        if not oracle.feasible:
            continue
        result = inflate(channels, params, config)
        if not result.solution.feasible:
            continue
        ran += 1
        value = objective_ref(result.state, result.solution, params, config)
        assert value >= oracle.value - 1e-6
    assert ran >= 4


def test_trace_round_trips_through_csv(tmp_path):
    config, channels, params = drawn(4, L=2, K=2, caps=(2, 2), gamma_db=0.0)
    result = inflate(channels, params, config)
    out = tmp_path / "trace.csv"
    result.trace.to_csv(out)
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["n", "l_star", "k_star", "objective", "feasible", "reverted"]
    assert len(rows) == len(result.trace.steps) + 1
    for row, step in zip(rows[1:], result.trace.steps):
        assert row[0] == str(step.n)
        assert row[3] == f"{step.objective:.9g}"
        assert row[4] == str(int(step.feasible))
