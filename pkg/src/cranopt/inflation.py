"""Greedy link inflation.

Starts from the continuous relaxation, ranks candidate RRH-user pairs by
a priority score, then adds links one at a time, re-solving the fixed
SOCP after each addition and reverting additions that raise the refined
objective. Each candidate is tried at most once, so the loop runs at
most L*K iterations.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from cranopt.conic import SolverSettings, solve
from cranopt.netmodel import (
    BeamformingSolution,
    ChannelRealization,
    NetworkConfig,
    NetworkState,
    PowerParams,
)
from cranopt.socp_form import (
    INFEASIBLE,
    OPTIMAL,
    build_fixed_problem,
    build_relaxed_problem,
    extract_beamformers,
    full_objective,
)

# relative floor applied to the leakage denominator of the priority score
_PRIORITY_EPS_REL = 1e-12


@dataclass(frozen=True)
class InflationStep:
    n: int
    l_star: int
    k_star: int
    objective: float
    feasible: bool
    reverted: bool
    remaining: int


@dataclass(frozen=True)
class InflationTrace:
    initial_objective: float
    relaxed_status: str
    steps: tuple[InflationStep, ...] = ()
    socp_solves: int = 0
    numerical_failures: int = 0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "l_star", "k_star", "objective", "feasible", "reverted"])
            for s in self.steps:
                writer.writerow(
                    [s.n, s.l_star, s.k_star, f"{s.objective:.9g}", int(s.feasible), int(s.reverted)]
                )


@dataclass(frozen=True)
class InflationResult:
    state: NetworkState
    solution: BeamformingSolution
    trace: InflationTrace


def priority_levels(
    relaxed: BeamformingSolution,
    channels: ChannelRealization,
    config: NetworkConfig,
) -> np.ndarray:
    """(L, K) score matrix: local signal-to-leakage, weighted by the
    RRH's share of total fronthaul capacity."""
    cap_total = sum(config.fronthaul_caps)
    if cap_total == 0:
        raise ValueError("all fronthaul capacities are zero; no link can be ranked")
    L, K = config.L, config.K
    signal = np.zeros((L, K))
    leakage = np.zeros((L, K))
    for l in range(L):
        # (K, K) gains at this RRH: row i = |h_{l,i}^H w_{l,k}|^2 over k
        g = np.abs(channels.h[l].conj().T @ relaxed.w[l]) ** 2
        signal[l] = np.diag(g)
        leakage[l] = g.sum(axis=0) - np.diag(g)
    eps = _PRIORITY_EPS_REL * max(float(signal.max()), 1e-300)
    shares = np.array(config.fronthaul_caps, dtype=float) / cap_total
    return (signal / (leakage + eps)) * shares[:, None]


def _upper_bound_objective(params: PowerParams, config: NetworkConfig) -> float:
    total = 0.0
    for l in range(config.L):
        total += params.p_cms_w[l] + config.p_max_w[l] / params.eta[l]
    return total + config.zeta


def _infeasible_result(channels, b, a, trace) -> InflationResult:
    state = NetworkState(a=tuple(a), b=tuple(tuple(row) for row in b))
    zeros = BeamformingSolution(
        w=tuple(np.zeros_like(h) for h in channels.h),
        objective_value=float("nan"),
        per_user_sinr=tuple(0.0 for _ in range(channels.K)),
        feasible=False,
    )
    return InflationResult(state, zeros, trace)


def inflate(
    channels: ChannelRealization,
    params: PowerParams,
    config: NetworkConfig,
    settings: SolverSettings | None = None,
) -> InflationResult:
    upper = _upper_bound_objective(params, config)
    relaxed_problem = build_relaxed_problem(channels, params, config)
    relaxed_raw = solve(relaxed_problem, settings)
    solves = 1
    failures = 0 if relaxed_raw.status in (OPTIMAL, INFEASIBLE) else 1
    if relaxed_raw.status != OPTIMAL:
        trace = InflationTrace(upper, relaxed_raw.status, (), solves, failures)
        L, K = config.L, config.K
        return _infeasible_result(
            channels, [[0] * K for _ in range(L)], [0] * L, trace
        )
    relaxed_solution = extract_beamformers(
        relaxed_raw, relaxed_problem.variable_layout, None, channels, params, config
    )
    alpha = priority_levels(relaxed_solution, channels, config)

    L, K = config.L, config.K
    b = [[0] * K for _ in range(L)]
    a = [0] * L
    # rows with zero capacity can never serve anyone
    candidates = [(l, k) for l in range(L) for k in range(K) if config.fronthaul_caps[l] > 0]
    prev_objective = upper
    best: tuple[NetworkState, BeamformingSolution] | None = None
    steps: list[InflationStep] = []
    n = 0

    while candidates:
        n += 1
        l_star, k_star = max(sorted(candidates), key=lambda lk: alpha[lk[0], lk[1]])
        candidates.remove((l_star, k_star))
        b[l_star][k_star] = 1
        a[l_star] = 1
        if sum(b[l_star]) == config.fronthaul_caps[l_star]:
            # row is full; drop its remaining candidates for good
            candidates = [(l, k) for (l, k) in candidates if l != l_star]
        state = NetworkState(a=tuple(a), b=tuple(tuple(row) for row in b))
        problem = build_fixed_problem(state, channels, params, config)
        result = solve(problem, settings)
        solves += 1
        if result.status not in (OPTIMAL, INFEASIBLE):
            failures += 1
        if result.status == OPTIMAL:
            new_objective = full_objective(problem, result)
            if new_objective > prev_objective:
                b[l_star][k_star] = 0
                a[l_star] = max(b[l_star])
                steps.append(
                    InflationStep(n, l_star, k_star, prev_objective, True, True, len(candidates))
                )
            else:
                prev_objective = new_objective
                best = (
                    state,
                    extract_beamformers(
                        result, problem.variable_layout, state, channels, params, config
                    ),
                )
                steps.append(
                    InflationStep(n, l_star, k_star, new_objective, True, False, len(candidates))
                )
        elif best is not None:
            # solver breakdown after feasibility was reached: roll the pick
            # back rather than poisoning the incumbent
            b[l_star][k_star] = 0
            a[l_star] = max(b[l_star])
            steps.append(
                InflationStep(n, l_star, k_star, prev_objective, False, True, len(candidates))
            )
        else:
            steps.append(InflationStep(n, l_star, k_star, upper, False, False, len(candidates)))

    trace = InflationTrace(upper, OPTIMAL, tuple(steps), solves, failures)
    if best is None:
        return _infeasible_result(channels, b, a, trace)
    return InflationResult(best[0], best[1], trace)
