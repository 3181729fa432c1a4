"""Exhaustive enumeration on small instances, plus executable feasibility
cross-checks between the primary problem and its refined counterpart.

The oracle exists for certification, not speed: it tries every
association matrix within the link budgets, solves the fixed SOCP for
each, and keeps the best. A hard guard refuses instances beyond
L*K = 12 flag dimensions.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from cranopt.conic import SolverSettings, solve
from cranopt.netmodel import (
    SINR_FEAS_TOL_REL,
    BeamformingSolution,
    ChannelRealization,
    NetworkConfig,
    NetworkState,
    PowerParams,
    network_power,
    objective_ref,
    sinr,
    validate_state,
)
from cranopt.socp_form import OPTIMAL, build_fixed_problem, extract_beamformers

ENUMERATION_LIMIT = 12

# ties in the enumerated objective are resolved toward fewer links, then
# lexicographically smallest flags, making the reported optimum unique
_TIE_REL = 1e-9


class EnumerationGuardError(ValueError):
    def __init__(self, L: int, K: int):
        super().__init__(
            f"enumeration refused: L*K = {L * K} exceeds the limit of {ENUMERATION_LIMIT}"
        )


class InfeasibleInstanceError(RuntimeError):
    pass


@dataclass(frozen=True)
class EnumerationResult:
    state: NetworkState
    solution: BeamformingSolution
    value: float
    feasible: bool
    socp_solves: int


@dataclass(frozen=True)
class CrossFeasibilityReport:
    """Cross-feasibility of the two enumerated optima.

    outcome is "pass", "fail", or "vacuous" (instance infeasible, nothing
    to check). The violation tuples name the broken constraints.
    """

    outcome: str
    ref_to_pri_violations: tuple[str, ...] = ()
    pri_to_ref_violations: tuple[str, ...] = ()


def _row_subsets(K: int, cap: int):
    for size in range(min(K, cap) + 1):
        yield from itertools.combinations(range(K), size)


def _guard(config: NetworkConfig) -> None:
    if config.L * config.K > ENUMERATION_LIMIT:
        raise EnumerationGuardError(config.L, config.K)


def _enumerate_candidates(channels, params, config, settings):
    """Yields (state, solution, F, F_hat) for every feasible association."""
    _guard(config)
    solves = 0
    per_row = [list(_row_subsets(config.K, config.fronthaul_caps[l])) for l in range(config.L)]
    for choice in itertools.product(*per_row):
        b = tuple(
            tuple(1 if k in choice[l] else 0 for k in range(config.K)) for l in range(config.L)
        )
        covered = all(any(b[l][k] for l in range(config.L)) for k in range(config.K))
        if not covered:
            continue  # some user unserved: the QoS block cannot hold
        state = NetworkState.from_b(b)
        problem = build_fixed_problem(state, channels, params, config)
        result = solve(problem, settings)
        solves += 1
        if result.status != OPTIMAL:
            continue
        solution = extract_beamformers(
            result, problem.variable_layout, state, channels, params, config
        )
        if not solution.feasible:
            continue
        f = network_power(state, solution, params)
        f_hat = objective_ref(state, solution, params, config)
        yield state, solution, f, f_hat, solves
    # sentinel so the caller can read the final solve count
    yield None, None, float("nan"), float("nan"), solves


def _collect(candidates):
    rows = []
    solves = 0
    for state, solution, f, f_hat, count in candidates:
        solves = count
        if state is None:
            break
        flat = tuple(v for row in state.b for v in row)
        rows.append((state.pair_count(), flat, state, solution, f, f_hat))
    return rows, solves


def _pick_best(rows, mode: str):
    if not rows:
        return None
    keyed = [((r[4] if mode == "pri" else r[5]),) + r for r in rows]
    best_value = min(r[0] for r in keyed)
    slack = _TIE_REL * max(1.0, abs(best_value))
    near = [r for r in keyed if r[0] <= best_value + slack]
    return min(near, key=lambda r: (r[1], r[2]))


def enumerate_optimal(
    channels: ChannelRealization,
    params: PowerParams,
    config: NetworkConfig,
    objective: str = "pri",
    settings: SolverSettings | None = None,
) -> EnumerationResult:
    """Globally optimal association by brute force.

    objective "pri" minimizes the network power F; "ref" minimizes the
    refined objective (F plus the vanishing link-count term).
    """
    if objective not in ("pri", "ref"):
        raise ValueError(f"objective must be 'pri' or 'ref', got {objective!r}")
    rows, solves = _collect(_enumerate_candidates(channels, params, config, settings))
    best = _pick_best(rows, objective)
    if best is None:
        empty = NetworkState.empty(config.L, config.K)
        zeros = BeamformingSolution.zeros_like(channels)
        return EnumerationResult(empty, zeros, float("nan"), False, solves)
    value, _, _, state, solution, _, _ = best
    return EnumerationResult(state, solution, float(value), True, solves)


# ---------------------------------------------------------------------------
# constraint checkers used by the cross-feasibility report (and tests)

_POWER_TOL = 1e-6


def check_pri_constraints(
    state: NetworkState,
    solution: BeamformingSolution,
    channels: ChannelRealization,
    config: NetworkConfig,
) -> list[str]:
    """Violations of the primary problem's constraint set, by name."""
    out = []
    for v in validate_state(state, config):
        if v.kind == "inactive-serving":
            out.append(f"activity-consistency l={v.l},k={v.k}")
        elif v.kind == "active-idle":
            out.append(f"idle-active l={v.l}")
        else:
            out.append(f"link-budget l={v.l}")
    for k in range(config.K):
        if sinr(channels, solution, k) < config.target_sinr_linear[k] * (1 - SINR_FEAS_TOL_REL):
            out.append(f"sinr-target k={k}")
    for l in range(config.L):
        budget = state.a[l] * config.p_max_w[l]
        if solution.transmit_power_w(l) > budget + _POWER_TOL * max(1.0, config.p_max_w[l]):
            out.append(f"power-budget l={l}")
        thr = config.zero_norm_threshold(l)
        for k in range(config.K):
            norm = float(np.linalg.norm(solution.w[l][:, k]))
            if state.b[l][k] == 0 and norm > thr:
                out.append(f"ghost-beam l={l},k={k}")
            if state.b[l][k] == 1 and norm <= thr:
                out.append(f"dead-pair l={l},k={k}")
    return out


def check_ref_constraints(
    state: NetworkState,
    solution: BeamformingSolution,
    channels: ChannelRealization,
    config: NetworkConfig,
) -> list[str]:
    """Violations of the refined problem's constraint set, by name."""
    out = []
    for k in range(config.K):
        if sinr(channels, solution, k) < config.target_sinr_linear[k] * (1 - SINR_FEAS_TOL_REL):
            out.append(f"sinr-target k={k}")
    for l in range(config.L):
        p_max = config.p_max_w[l]
        if solution.transmit_power_w(l) > p_max + _POWER_TOL * max(1.0, p_max):
            out.append(f"power-budget l={l}")
        if sum(state.b[l]) > state.a[l] * config.fronthaul_caps[l]:
            out.append(f"link-budget l={l}")
        for k in range(config.K):
            pair_power = float(np.sum(np.abs(solution.w[l][:, k]) ** 2))
            if pair_power > state.b[l][k] * p_max + _POWER_TOL * max(1.0, p_max):
                out.append(f"pair-power l={l},k={k}")
    return out


def verify_lemma1(
    channels: ChannelRealization,
    params: PowerParams,
    config: NetworkConfig,
    settings: SolverSettings | None = None,
) -> CrossFeasibilityReport:
    """Each enumerated optimum must be feasible for the other problem."""
    ref = enumerate_optimal(channels, params, config, "ref", settings)
    pri = enumerate_optimal(channels, params, config, "pri", settings)
    if not (ref.feasible and pri.feasible):
        return CrossFeasibilityReport("vacuous")
    forward = tuple(check_pri_constraints(ref.state, ref.solution, channels, config))
    backward = tuple(check_ref_constraints(pri.state, pri.solution, channels, config))
    outcome = "pass" if not forward and not backward else "fail"
    return CrossFeasibilityReport(outcome, forward, backward)


def verify_theorem1(
    channels: ChannelRealization,
    params: PowerParams,
    config: NetworkConfig,
    settings: SolverSettings | None = None,
) -> float:
    """F at the refined optimum minus F at the primary optimum.

    A single enumeration pass scores both objectives; the gap lies in
    [0, zeta] whenever the instance is feasible.
    """
    rows, _ = _collect(_enumerate_candidates(channels, params, config, settings))
    best_pri = _pick_best(rows, "pri")
    best_ref = _pick_best(rows, "ref")
    if best_pri is None or best_ref is None:
        raise InfeasibleInstanceError("instance infeasible; the gap is undefined")
    return float(best_ref[5] - best_pri[5])
