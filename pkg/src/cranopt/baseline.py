"""Distance-based single-association baseline.

Every RRH stays powered on. Each user attaches to its nearest RRH; when
a RRH attracts more users than its fronthaul allows, the surplus users
walk down their own distance ranking to the closest RRH with spare
capacity. Users with the most to lose (largest distance gap to their
second choice) pick first.
"""
from __future__ import annotations

import numpy as np

from cranopt.channel import Topology
from cranopt.conic import SolverSettings, solve
from cranopt.netmodel import (
    BeamformingSolution,
    ChannelRealization,
    NetworkConfig,
    NetworkState,
    PowerParams,
)
from cranopt.socp_form import OPTIMAL, build_fixed_problem, extract_beamformers


def lte_a_state(topology: Topology, config: NetworkConfig) -> NetworkState:
    """All RRHs active, one serving link per user, capacities respected."""
    L, K = config.L, config.K
    if sum(config.fronthaul_caps) < K:
        raise ValueError(
            f"total fronthaul capacity {sum(config.fronthaul_caps)} cannot carry {K} users"
        )
    dist = np.array([[topology.distance_m(l, k) for k in range(K)] for l in range(L)])
    order = np.argsort(dist, axis=0, kind="stable")  # per user: RRHs nearest first
    if L > 1:
        gap = dist[order[1], np.arange(K)] - dist[order[0], np.arange(K)]
    else:
        gap = np.zeros(K)
    assigned = [-1] * K
    load = [0] * L
    overflow = []
    for l in range(L):
        claims = [k for k in range(K) if int(order[0, k]) == l]
        # whoever would pay most to move keeps their first choice
        claims.sort(key=lambda k: (-gap[k], k))
        for k in claims[: config.fronthaul_caps[l]]:
            assigned[k] = l
            load[l] += 1
        overflow.extend(claims[config.fronthaul_caps[l] :])
    overflow.sort(key=lambda k: (-gap[k], k))
    for k in overflow:
        for l in order[:, k]:
            l = int(l)
            if load[l] < config.fronthaul_caps[l]:
                assigned[k] = l
                load[l] += 1
                break
    b = tuple(tuple(1 if assigned[k] == l else 0 for k in range(K)) for l in range(L))
    return NetworkState(a=tuple(1 for _ in range(L)), b=b)


def lte_a_solve(
    channels: ChannelRealization,
    params: PowerParams,
    config: NetworkConfig,
    state: NetworkState,
    settings: SolverSettings | None = None,
) -> BeamformingSolution:
    """Beamformers for the fixed baseline association.

    The objective charges circuit power for every RRH since none sleeps.
    Infeasible instances come back flagged rather than raising.
    """
    problem = build_fixed_problem(state, channels, params, config)
    result = solve(problem, settings)
    if result.status != OPTIMAL:
        return BeamformingSolution(
            w=tuple(np.zeros_like(h) for h in channels.h),
            objective_value=float("nan"),
            per_user_sinr=tuple(0.0 for _ in range(channels.K)),
            feasible=False,
        )
    return extract_beamformers(result, problem.variable_layout, state, channels, params, config)
