"""Seeded Monte Carlo experiment harness and command-line front end.

Power consumption is reported two ways per row: objective_f is the
network cost the optimizers minimize (active circuit power above sleep
plus amplifier draw), power_w adds the sleep-mode draw of every RRH so
it reads as absolute consumption.

All randomness flows through the per-row seed, so any row can be
regenerated in isolation, and a whole sweep re-run is byte-identical as
long as wall-clock recording stays off.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from cranopt.baseline import lte_a_solve, lte_a_state
from cranopt.channel import ChannelParams, generate_channel, generate_topology
from cranopt.conic import SolverSettings
from cranopt.inflation import inflate
from cranopt.netmodel import (
    NetworkConfig,
    PowerParams,
    network_power,
    validate_state,
)
from cranopt.oracle import (
    InfeasibleInstanceError,
    enumerate_optimal,
    verify_lemma1,
    verify_theorem1,
)
from cranopt.socp_form import OPTIMAL, build_relaxed_problem, full_objective
from cranopt.conic import solve as conic_solve

CSV_HEADER = "seed,K,gamma_db,fronthaul_cap,algorithm,feasible,power_w,objective_f,active_rrhs,socp_solves,wall_time_ms"

ALGORITHMS = ("inflation", "lte_a", "oracle")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERIFY = 3


class ConfigError(ValueError):
    pass


def _per_rrh(value, L, cast=float):
    if isinstance(value, (list, tuple)):
        if len(value) != L:
            raise ConfigError(f"expected {L} per-RRH values, got {len(value)}")
        return tuple(cast(v) for v in value)
    return tuple(cast(value) for _ in range(L))


def _float_list(value):
    if isinstance(value, (list, tuple)):
        return tuple(float(v) for v in value)
    return (float(value),)


@dataclass(frozen=True)
class ExperimentConfig:
    seeds: tuple[int, ...] = tuple(range(20))
    L: int = 6
    K: int = 6
    antennas: tuple[int, ...] = (2,) * 6
    fronthaul_cap: tuple[int, ...] = (4,) * 6
    gamma_db: tuple[float, ...] = (6.0,)
    half_width_m: float = 1500.0
    zeta: float = 1e-3
    p_max_w: tuple[float, ...] = (10.0,) * 6
    algorithms: tuple[str, ...] = ("inflation", "lte_a")
    channel: ChannelParams = ChannelParams()
    power: PowerParams | None = None
    solver: SolverSettings = SolverSettings()
    record_wall_time: bool = False
    workers: int = 1

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        if not self.gamma_db:
            raise ConfigError("gamma_db sweep must be nonempty")
        for name, values in (
            ("antennas", self.antennas),
            ("fronthaul_cap", self.fronthaul_cap),
            ("p_max_w", self.p_max_w),
        ):
            if len(values) != self.L:
                raise ConfigError(f"{name} must carry one value per RRH")
        if not self.algorithms:
            raise ConfigError("algorithms must be nonempty")
        for name in self.algorithms:
            if name not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {name!r}")
        if "oracle" in self.algorithms and self.L * self.K > 12:
            raise ConfigError(
                f"oracle enumeration needs L*K <= 12, got {self.L * self.K}"
            )
        if "lte_a" in self.algorithms and sum(self.fronthaul_cap) < self.K:
            raise ConfigError(
                f"lte_a needs total fronthaul capacity >= K={self.K}, "
                f"got {sum(self.fronthaul_cap)}"
            )
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.power is None:
            object.__setattr__(self, "power", PowerParams.pico_defaults(self.L))
        if len(self.power.eta) != self.L:
            raise ConfigError("power parameters must cover every RRH")

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        known = {
            "seeds", "L", "K", "antennas", "fronthaul_cap", "gamma_db",
            "half_width_m", "zeta", "p_max_w", "algorithms", "channel",
            "power", "solver", "record_wall_time", "workers",
        }
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        L = int(data.get("L", 6))
        kw = {"L": L, "K": int(data.get("K", 6))}
        if "seeds" in data:
            kw["seeds"] = tuple(int(s) for s in data["seeds"])
        kw["antennas"] = _per_rrh(data.get("antennas", 2), L, int)
        kw["fronthaul_cap"] = _per_rrh(data.get("fronthaul_cap", 4), L, int)
        if "gamma_db" in data:
            kw["gamma_db"] = _float_list(data["gamma_db"])
        if "half_width_m" in data:
            kw["half_width_m"] = float(data["half_width_m"])
        if "zeta" in data:
            kw["zeta"] = float(data["zeta"])
        kw["p_max_w"] = _per_rrh(data.get("p_max_w", 10.0), L, float)
        if "algorithms" in data:
            kw["algorithms"] = tuple(str(a) for a in data["algorithms"])
        if "channel" in data:
            kw["channel"] = _channel_from_mapping(data["channel"])
        if "power" in data:
            kw["power"] = _power_from_mapping(data["power"], L)
        if "solver" in data:
            kw["solver"] = _solver_from_mapping(data["solver"])
        if "record_wall_time" in data:
            kw["record_wall_time"] = bool(data["record_wall_time"])
        if "workers" in data:
            kw["workers"] = int(data["workers"])
        return cls(**kw)

    def network_config(self, gamma_db: float) -> NetworkConfig:
        gamma = 10.0 ** (gamma_db / 10.0)
        return NetworkConfig(
            L=self.L,
            K=self.K,
            antennas_per_rrh=self.antennas,
            fronthaul_caps=self.fronthaul_cap,
            p_max_w=self.p_max_w,
            target_sinr_linear=tuple(gamma for _ in range(self.K)),
            zeta=self.zeta,
        )


def _channel_from_mapping(data: dict) -> ChannelParams:
    known = {
        "pathloss_offset_db", "pathloss_slope_db_per_decade", "shadowing_std_db",
        "noise_density_dbm_per_hz", "bandwidth_hz", "antenna_gain_dbi",
    }
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown channel keys: {sorted(unknown)}")
    return ChannelParams(**{k: float(v) for k, v in data.items()})


def _power_from_mapping(data: dict, L: int) -> PowerParams:
    known = {"p_cir_w", "p_slp_w", "eta"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown power keys: {sorted(unknown)}")
    base = PowerParams.pico_defaults(L)
    return PowerParams(
        p_cir_w=_per_rrh(data.get("p_cir_w", base.p_cir_w), L),
        p_slp_w=_per_rrh(data.get("p_slp_w", base.p_slp_w), L),
        eta=_per_rrh(data.get("eta", base.eta), L),
    )


def _solver_from_mapping(data: dict) -> SolverSettings:
    known = {"feasibility_tol", "optimality_tol", "max_iterations"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown solver keys: {sorted(unknown)}")
    kw = dict(data)
    if "max_iterations" in kw:
        kw["max_iterations"] = int(kw["max_iterations"])
    return SolverSettings(**kw)


@dataclass(frozen=True)
class SweepRow:
    seed: int
    K: int
    gamma_db: float
    fronthaul_cap: tuple[int, ...]
    algorithm: str
    feasible: bool
    power_w: float | None
    objective_f: float | None
    active_rrhs: int
    socp_solves: int
    wall_time_ms: float


@dataclass(frozen=True)
class SummaryRow:
    gamma_db: float
    fronthaul_cap: tuple[int, ...]
    algorithm: str
    K: int
    n_rows: int
    n_feasible: int
    feasibility_rate: float
    mean_power_w: float
    se_power_w: float
    mean_objective_f: float
    se_objective_f: float
    mean_active_rrhs: float
    se_active_rrhs: float


def _cap_label(caps: tuple[int, ...]) -> str:
    return str(caps[0]) if len(set(caps)) == 1 else ";".join(str(c) for c in caps)


def _run_one(config: ExperimentConfig, seed: int, gamma_db: float, algorithm: str) -> SweepRow:
    net = config.network_config(gamma_db)
    topo = generate_topology(seed, net, config.half_width_m)
    channels = generate_channel(seed, topo, net, config.channel)
    sleep_total = sum(config.power.p_slp_w)
    start = time.perf_counter() if config.record_wall_time else 0.0

    if algorithm == "inflation":
        result = inflate(channels, config.power, net, config.solver)
        state, solution = result.state, result.solution
        solves = result.trace.socp_solves
    elif algorithm == "lte_a":
        state = lte_a_state(topo, net)
        solution = lte_a_solve(channels, config.power, net, state, config.solver)
        solves = 1
    else:
        result = enumerate_optimal(channels, config.power, net, "pri", config.solver)
        state, solution = result.state, result.solution
        solves = result.socp_solves

    elapsed_ms = (time.perf_counter() - start) * 1e3 if config.record_wall_time else 0.0
    if solution.feasible:
        f = network_power(state, solution, config.power)
        power_w, objective_f = f + sleep_total, f
    else:
        power_w = objective_f = None
    return SweepRow(
        seed=seed,
        K=config.K,
        gamma_db=gamma_db,
        fronthaul_cap=config.fronthaul_cap,
        algorithm=algorithm,
        feasible=solution.feasible,
        power_w=power_w,
        objective_f=objective_f,
        active_rrhs=state.active_count(),
        socp_solves=solves,
        wall_time_ms=elapsed_ms,
    )


def _task(args):
    return _run_one(*args)


def run_sweep(config: ExperimentConfig) -> list[SweepRow]:
    tasks = [
        (config, seed, gamma_db, algorithm)
        for gamma_db in config.gamma_db
        for seed in config.seeds
        for algorithm in config.algorithms
    ]
    if config.workers == 1:
        rows = [_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(_task, tasks, chunksize=1))
    return sort_rows(rows)


def sort_rows(rows: list[SweepRow]) -> list[SweepRow]:
    return sorted(
        rows,
        key=lambda r: (r.gamma_db, sum(r.fronthaul_cap), r.fronthaul_cap, r.K, r.algorithm, r.seed),
    )


def _fmt(value) -> str:
    if value is None:
        return ""
    return f"{value:.9g}"


def write_csv(rows: list[SweepRow], path) -> None:
    lines = [CSV_HEADER]
    for r in sort_rows(rows):
        lines.append(
            ",".join(
                [
                    str(r.seed),
                    str(r.K),
                    _fmt(r.gamma_db),
                    _cap_label(r.fronthaul_cap),
                    r.algorithm,
                    str(int(r.feasible)),
                    _fmt(r.power_w),
                    _fmt(r.objective_f),
                    str(r.active_rrhs),
                    str(r.socp_solves),
                    _fmt(r.wall_time_ms),
                ]
            )
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _mean_se(values: list[float]) -> tuple[float, float]:
    n = len(values)
    if n == 0:
        return float("nan"), float("nan")
    mean = sum(values) / n
    if n == 1:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, (var / n) ** 0.5


def summarize(rows: list[SweepRow]) -> list[SummaryRow]:
    if not rows:
        raise ValueError("nothing to summarize")
    groups: dict[tuple, list[SweepRow]] = {}
    for r in rows:
        groups.setdefault((r.gamma_db, r.fronthaul_cap, r.algorithm, r.K), []).append(r)
    out = []
    for key in sorted(groups, key=lambda k: (k[0], sum(k[1]), k[1], k[3], k[2])):
        members = groups[key]
        feas = [r for r in members if r.feasible]
        mean_p, se_p = _mean_se([r.power_w for r in feas])
        mean_f, se_f = _mean_se([r.objective_f for r in feas])
        mean_a, se_a = _mean_se([float(r.active_rrhs) for r in feas])
        out.append(
            SummaryRow(
                gamma_db=key[0],
                fronthaul_cap=key[1],
                algorithm=key[2],
                K=key[3],
                n_rows=len(members),
                n_feasible=len(feas),
                feasibility_rate=len(feas) / len(members),
                mean_power_w=mean_p,
                se_power_w=se_p,
                mean_objective_f=mean_f,
                se_objective_f=se_f,
                mean_active_rrhs=mean_a,
                se_active_rrhs=se_a,
            )
        )
    return out


# ---------------------------------------------------------------------------
# oracle-backed certification


@dataclass(frozen=True)
class InstanceCheck:
    seed: int
    instance_feasible: bool
    gap: float | None = None
    gap_ok: bool | None = None
    lemma_outcome: str | None = None
    relaxation_ok: bool | None = None
    heuristic_feasible: bool | None = None
    inflation_ok: bool | None = None
    solve_budget_ok: bool | None = None
    state_ok: bool | None = None
    matches_oracle: bool | None = None

    @property
    def ok(self) -> bool:
        if not self.instance_feasible:
            return True  # vacuous: nothing to certify
        certified = bool(
            self.gap_ok
            and self.lemma_outcome == "pass"
            and self.relaxation_ok
            and self.solve_budget_ok
        )
        # greedy runs that never reach feasibility have no objective to
        # compare; they are reported, not failed
        if self.heuristic_feasible:
            certified = certified and bool(self.inflation_ok and self.state_ok)
        return certified


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple[InstanceCheck, ...]

    @property
    def n_feasible(self) -> int:
        return sum(c.instance_feasible for c in self.checks)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    @property
    def match_fraction(self) -> float:
        feas = [c for c in self.checks if c.instance_feasible]
        if not feas:
            return float("nan")
        return sum(bool(c.matches_oracle) for c in feas) / len(feas)


def _check_instance(config: ExperimentConfig, seed: int) -> InstanceCheck:
    net = config.network_config(config.gamma_db[0])
    topo = generate_topology(seed, net, config.half_width_m)
    channels = generate_channel(seed, topo, net, config.channel)
    try:
        gap = verify_theorem1(channels, config.power, net, config.solver)
    except InfeasibleInstanceError:
        return InstanceCheck(seed=seed, instance_feasible=False)
    gap_ok = -1e-6 <= gap <= net.zeta
    lemma = verify_lemma1(channels, config.power, net, config.solver)
    ref = enumerate_optimal(channels, config.power, net, "ref", config.solver)
    pri = enumerate_optimal(channels, config.power, net, "pri", config.solver)
    relaxed_problem = build_relaxed_problem(channels, config.power, net)
    relaxed = conic_solve(relaxed_problem, config.solver)
    relaxation_ok = (
        relaxed.status == OPTIMAL
        and full_objective(relaxed_problem, relaxed) <= ref.value + 1e-6
    )
    result = inflate(channels, config.power, net, config.solver)
    heuristic_feasible = result.solution.feasible
    if heuristic_feasible:
        value = network_power(result.state, result.solution, config.power)
        inflation_ok = value >= pri.value - 1e-6
        state_ok = validate_state(result.state, net) == []
        matches = abs(value - pri.value) <= 1e-4
    else:
        inflation_ok = state_ok = None
        matches = False
    solve_budget_ok = result.trace.socp_solves <= sum(net.fronthaul_caps) + 1
    return InstanceCheck(
        seed=seed,
        instance_feasible=True,
        gap=gap,
        gap_ok=gap_ok,
        lemma_outcome=lemma.outcome,
        relaxation_ok=relaxation_ok,
        heuristic_feasible=heuristic_feasible,
        inflation_ok=inflation_ok,
        solve_budget_ok=solve_budget_ok,
        state_ok=state_ok,
        matches_oracle=matches,
    )


def run_verification(config: ExperimentConfig) -> VerificationReport:
    if config.L * config.K > 12:
        raise ConfigError("verification enumerates exhaustively; needs L*K <= 12")
    tasks = [(config, seed) for seed in config.seeds]
    if config.workers == 1:
        checks = [_check_instance(*t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            checks = list(pool.map(_verify_task, tasks, chunksize=1))
    return VerificationReport(tuple(checks))


def _verify_task(args):
    return _check_instance(*args)


# ---------------------------------------------------------------------------
# command line


def _parse_seeds(text: str) -> tuple[int, ...]:
    seeds: list[int] = []
    for token in text.split(","):
        token = token.strip()
        if ":" in token:
            lo, hi = token.split(":", 1)
            seeds.extend(range(int(lo), int(hi)))
        elif token:
            seeds.append(int(token))
    if not seeds:
        raise ConfigError(f"no seeds in {text!r}")
    return tuple(seeds)


def _load_config(args, overrides: dict, base: dict | None = None) -> ExperimentConfig:
    data: dict = dict(base) if base and not args.config else {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        data.update(loaded)
    data.update(overrides)
    if args.paper_scale:
        data["L"] = 10
        data["K"] = 15
        data.setdefault("seeds", list(range(100)))
    if args.seeds:
        data["seeds"] = _parse_seeds(args.seeds)
    if args.workers is not None:
        data["workers"] = args.workers
    config = ExperimentConfig.from_mapping(data)
    if args.solver_tol is not None:
        config = replace(
            config,
            solver=SolverSettings(
                feasibility_tol=args.solver_tol,
                optimality_tol=args.solver_tol,
                max_iterations=config.solver.max_iterations,
            ),
        )
    return config


def _add_common(parser):
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--out", help="output CSV path")
    parser.add_argument("--seeds", help="comma list and lo:hi ranges, e.g. 0:20,100")
    parser.add_argument("--paper-scale", action="store_true",
                        help="L=10, K=15, 100 seeds instead of the desk profile")
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--solver-tol", type=float, default=None)


def _cmd_sweep_sinr(args) -> int:
    overrides = {}
    if args.gammas:
        overrides["gamma_db"] = [float(g) for g in args.gammas.split(",")]
    config = _load_config(args, overrides)
    if len(config.gamma_db) == 1 and not args.gammas and not args.config:
        config = replace(config, gamma_db=(0.0, 2.0, 4.0, 6.0, 8.0, 10.0))
    rows = run_sweep(config)
    write_csv(rows, args.out or "sweep_sinr.csv")
    return EXIT_OK


def _cmd_sweep_fronthaul(args) -> int:
    caps = [int(c) for c in args.caps.split(",")] if args.caps else [1, 2, 3, 4, 5, 6]
    overrides = {} if args.gamma_db is None else {"gamma_db": [args.gamma_db]}
    config = _load_config(args, overrides)
    if len(config.gamma_db) != 1:
        raise ConfigError("the fronthaul sweep holds a single SINR target")
    rows: list[SweepRow] = []
    for cap in caps:
        rows.extend(run_sweep(replace(config, fronthaul_cap=(cap,) * config.L)))
    write_csv(rows, args.out or "sweep_fronthaul.csv")
    return EXIT_OK


_VERIFY_SHAPE = {"L": 3, "K": 2, "antennas": 2, "fronthaul_cap": 1,
                 "gamma_db": [4.0], "seeds": list(range(50))}


def _cmd_verify(args) -> int:
    config = _load_config(args, {}, base=_VERIFY_SHAPE)
    report = run_verification(config)
    for c in report.checks:
        if not c.instance_feasible:
            print(f"seed {c.seed}: infeasible instance, skipped")
            continue
        if c.heuristic_feasible:
            greedy = "ok" if c.inflation_ok and c.state_ok else "FAIL"
        else:
            greedy = "declined"
        verdict = "ok" if c.ok else "FAIL"
        print(
            f"seed {c.seed}: gap={c.gap:.3e} lemma={c.lemma_outcome} "
            f"relaxation={'ok' if c.relaxation_ok else 'FAIL'} "
            f"inflation={greedy} -> {verdict}"
        )
    declined = sum(
        c.instance_feasible and not c.heuristic_feasible for c in report.checks
    )
    print(
        f"{report.n_feasible}/{len(report.checks)} instances feasible; "
        f"{declined} greedy declines; "
        f"oracle match fraction {report.match_fraction:.2f}"
    )
    return EXIT_OK if report.ok else EXIT_VERIFY


def _cmd_oracle(args) -> int:
    overrides = {"algorithms": ["oracle"], "seeds": [args.seed]}
    config = _load_config(args, overrides, base=_VERIFY_SHAPE)
    rows = run_sweep(config)
    for row in rows:
        status = "feasible" if row.feasible else "infeasible"
        value = "" if row.objective_f is None else f" objective={row.objective_f:.9g}"
        print(f"seed {row.seed}: {status}{value} active={row.active_rrhs} "
              f"solves={row.socp_solves}")
    if args.out:
        write_csv(rows, args.out)
    return EXIT_OK


def _cmd_trace(args) -> int:
    config = _load_config(args, {})
    net = config.network_config(config.gamma_db[0])
    topo = generate_topology(args.seed, net, config.half_width_m)
    channels = generate_channel(args.seed, topo, net, config.channel)
    result = inflate(channels, config.power, net, config.solver)
    result.trace.to_csv(args.out or "trace.csv")
    status = "feasible" if result.solution.feasible else "infeasible"
    print(f"seed {args.seed}: {status}, {len(result.trace.steps)} steps, "
          f"{result.trace.socp_solves} solves")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cranopt",
        description="Monte Carlo experiments for joint association and beamforming",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep-sinr", help="sweep the per-user SINR target")
    _add_common(p)
    p.add_argument("--gammas", help="comma list of targets in dB")
    p.set_defaults(func=_cmd_sweep_sinr)

    p = sub.add_parser("sweep-fronthaul", help="sweep the per-RRH link budget")
    _add_common(p)
    p.add_argument("--caps", help="comma list of uniform capacities")
    p.add_argument("--gamma-db", type=float, default=None)
    p.set_defaults(func=_cmd_sweep_fronthaul)

    p = sub.add_parser("verify", help="certify optimality properties by enumeration")
    _add_common(p)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("oracle", help="enumerate one instance exhaustively")
    _add_common(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("trace", help="dump one greedy inflation trace")
    _add_common(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_trace)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
