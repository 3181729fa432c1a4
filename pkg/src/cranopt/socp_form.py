"""Real-valued SOCP formulations of the beamforming problems.

Two builders: the fixed-association problem (binary activity/association
flags frozen, beamformers only) and its continuous relaxation (activity
and association become box-bounded reals coupled to the beamformers).

Conic form convention: minimize c'x subject to b - A x in K, where K is
an ordered product of zero cones (equalities), nonnegative cones, and
second-order cones. A second-order block stores the radius entry first:
(r, v) in the cone means ||v|| <= r.

Complex bilinear terms use the real embedding
    Re{h^H w} = Re(h)'Re(w) + Im(h)'Im(w)
    Im{h^H w} = Re(h)'Im(w) - Im(h)'Re(w)
and quadratic power terms enter through the rotation
    sum ||w||^2 <= t  <=>  ||(2 w-stack, t-1)|| <= t+1.

Each user's quality-of-service block is divided through by that user's
noise amplitude, so channel coefficients enter the matrix near unit
scale instead of at the raw ~1e-7 amplitudes. This is an exact row
scaling of the cone and changes nothing about the solution.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np
from scipy import sparse

from cranopt.netmodel import (
    BeamformingSolution,
    ChannelRealization,
    NetworkConfig,
    NetworkState,
    PowerParams,
    objective_ref,
    sinr,
    validate_state,
)

ZERO = "zero"
NONNEG = "nonneg"
SOC = "soc"

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical-failure"


class ExtractionError(RuntimeError):
    """Raised when beamformer extraction is asked for a non-optimal solve."""

    def __init__(self, status: str):
        self.status = status
        super().__init__(f"cannot extract beamformers from a solve with status {status!r}")


@dataclass(frozen=True)
class VariableLayout:
    """Column map plus the affine objective part kept out of the cone program.

    Keys are ("w", l, k, component, "re"|"im"), ("t", l), ("a", l) and
    ("b", l, k). constant_objective_w is added to the conic optimum to
    recover the full objective.
    """

    columns: MappingProxyType
    constant_objective_w: float

    def __init__(self, columns: dict, constant_objective_w: float):
        object.__setattr__(self, "columns", MappingProxyType(dict(columns)))
        object.__setattr__(self, "constant_objective_w", float(constant_objective_w))

    @property
    def n_vars(self) -> int:
        return len(self.columns)

    def inverse(self) -> dict:
        return {v: k for k, v in self.columns.items()}


def _frozen_vector(v) -> np.ndarray:
    out = np.asarray(v, dtype=float).copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ConicProblem:
    """One standard-form cone program: minimize c'x with b - Ax in K."""

    objective_coeffs: np.ndarray
    constraint_matrix: sparse.csr_matrix
    constraint_offsets: np.ndarray
    cone_layout: tuple[tuple[str, int], ...]
    variable_layout: VariableLayout
    trivially_infeasible: bool = False

    def __post_init__(self):
        object.__setattr__(self, "objective_coeffs", _frozen_vector(self.objective_coeffs))
        object.__setattr__(self, "constraint_offsets", _frozen_vector(self.constraint_offsets))
        object.__setattr__(
            self, "cone_layout", tuple((str(kind), int(size)) for kind, size in self.cone_layout)
        )
        mat = sparse.csr_matrix(self.constraint_matrix)
        for arr in (mat.data, mat.indices, mat.indptr):
            arr.setflags(write=False)
        object.__setattr__(self, "constraint_matrix", mat)

        m, n = mat.shape
        if self.objective_coeffs.shape != (n,):
            raise ValueError("objective length disagrees with the matrix width")
        if self.constraint_offsets.shape != (m,):
            raise ValueError("offset length disagrees with the matrix height")
        total = sum(size for _, size in self.cone_layout)
        if total != m:
            raise ValueError(f"cone sizes sum to {total}, matrix has {m} rows")
        for kind, size in self.cone_layout:
            if kind not in (ZERO, NONNEG, SOC):
                raise ValueError(f"unknown cone kind {kind!r}")
            if size < 1:
                raise ValueError("cone sizes must be positive")
        cols = sorted(self.variable_layout.columns.values())
        if cols != list(range(n)):
            raise ValueError("variable layout must be a bijection onto the columns")

    @property
    def n_vars(self) -> int:
        return self.constraint_matrix.shape[1]

    @property
    def n_rows(self) -> int:
        return self.constraint_matrix.shape[0]


@dataclass(frozen=True)
class ConicSolution:
    """Solver output; primal/objective are meaningful only when optimal."""

    primal: np.ndarray
    objective: float
    status: str
    max_constraint_violation: float
    iterations: int = 0

    def __post_init__(self):
        object.__setattr__(self, "primal", _frozen_vector(self.primal))
        if self.status not in (OPTIMAL, INFEASIBLE, NUMERICAL_FAILURE):
            raise ValueError(f"unknown status {self.status!r}")


class _Assembler:
    """Accumulates COO triplets, offsets and cone tags in emission order."""

    def __init__(self, n_vars: int):
        self.n_vars = n_vars
        self.rows: list[int] = []
        self.cols: list[int] = []
        self.vals: list[float] = []
        self.offsets: list[float] = []
        self.cones: list[tuple[str, int]] = []

    def row(self, coeffs: dict[int, float], offset: float) -> None:
        r = len(self.offsets)
        for c, v in coeffs.items():
            if v != 0.0:
                self.rows.append(r)
                self.cols.append(c)
                self.vals.append(float(v))
        self.offsets.append(float(offset))

    def cone(self, kind: str, size: int) -> None:
        self.cones.append((kind, size))

    def finish(self, c: np.ndarray, layout: VariableLayout, trivially_infeasible=False) -> ConicProblem:
        mat = sparse.csr_matrix(
            (self.vals, (self.rows, self.cols)), shape=(len(self.offsets), self.n_vars)
        )
        return ConicProblem(c, mat, np.asarray(self.offsets), tuple(self.cones), layout,
                            trivially_infeasible=trivially_infeasible)


def _normalized_channels(channels: ChannelRealization) -> list[np.ndarray]:
    """Channel columns divided by each user's noise amplitude."""
    sigmas = np.sqrt(np.asarray(channels.noise_power_w))
    return [m / sigmas[np.newaxis, :] for m in channels.h]


def _w_columns(layout_cols: dict, l: int, k: int, n_l: int):
    re = [layout_cols[("w", l, k, n, "re")] for n in range(n_l)]
    im = [layout_cols[("w", l, k, n, "im")] for n in range(n_l)]
    return re, im


def _qos_blocks(asm, layout_cols, hn, config, served_by_user):
    """QoS SOC per user followed by one zero cone of Im-balance rows.

    served_by_user[k] lists the RRHs with a beamformer variable for k.
    Noise-normalized channels make the last SOC entry exactly 1.
    """
    K = config.K
    for k in range(K):
        inv_sqrt_gamma = 1.0 / np.sqrt(config.target_sinr_linear[k])
        head: dict[int, float] = {}
        for l in served_by_user[k]:
            re_cols, im_cols = _w_columns(layout_cols, l, k, config.antennas_per_rrh[l])
            col = hn[l][:, k]
            for n in range(config.antennas_per_rrh[l]):
                head[re_cols[n]] = head.get(re_cols[n], 0.0) - inv_sqrt_gamma * col[n].real
                head[im_cols[n]] = head.get(im_cols[n], 0.0) - inv_sqrt_gamma * col[n].imag
        asm.row(head, 0.0)
        size = 1
        for i in range(K):
            if i == k or not served_by_user[i]:
                continue
            re_row: dict[int, float] = {}
            im_row: dict[int, float] = {}
            for l in served_by_user[i]:
                re_cols, im_cols = _w_columns(layout_cols, l, i, config.antennas_per_rrh[l])
                col = hn[l][:, k]
                for n in range(config.antennas_per_rrh[l]):
                    re_row[re_cols[n]] = re_row.get(re_cols[n], 0.0) - col[n].real
                    re_row[im_cols[n]] = re_row.get(im_cols[n], 0.0) - col[n].imag
                    im_row[re_cols[n]] = im_row.get(re_cols[n], 0.0) + col[n].imag
                    im_row[im_cols[n]] = im_row.get(im_cols[n], 0.0) - col[n].real
            asm.row(re_row, 0.0)
            asm.row(im_row, 0.0)
            size += 2
        asm.row({}, 1.0)  # normalized noise amplitude
        asm.cone(SOC, size + 1)

    im_rows = 0
    for k in range(K):
        if not served_by_user[k]:
            continue  # no variables touch this balance row; drop it
        row: dict[int, float] = {}
        for l in served_by_user[k]:
            re_cols, im_cols = _w_columns(layout_cols, l, k, config.antennas_per_rrh[l])
            col = hn[l][:, k]
            for n in range(config.antennas_per_rrh[l]):
                row[re_cols[n]] = row.get(re_cols[n], 0.0) + col[n].imag
                row[im_cols[n]] = row.get(im_cols[n], 0.0) - col[n].real
        asm.row(row, 0.0)
        im_rows += 1
    if im_rows:
        asm.cone(ZERO, im_rows)


def _epigraph_block(asm, layout_cols, l, pairs, n_l):
    """||(2 w_l-stack, t_l - 1)|| <= t_l + 1 for RRH l's served pairs."""
    t_col = layout_cols[("t", l)]
    asm.row({t_col: -1.0}, 1.0)
    count = 0
    for k in pairs:
        re_cols, im_cols = _w_columns(layout_cols, l, k, n_l)
        for c in re_cols + im_cols:
            asm.row({c: -2.0}, 0.0)
            count += 1
    asm.row({t_col: -1.0}, -1.0)
    asm.cone(SOC, count + 2)


def build_fixed_problem(
    state: NetworkState,
    channels: ChannelRealization,
    params: PowerParams,
    config: NetworkConfig,
) -> ConicProblem:
    """Cone program for beamforming under a frozen activity/association.

    Beamformer variables exist only for pairs with a set association
    flag; the rest are zero by construction. An RRH kept active without
    any served pair contributes only its constant circuit power.
    """
    channels.check_config(config)
    bad = validate_state(state, config, allow_idle_active=True)
    if bad:
        raise ValueError("state fails validation: " + "; ".join(str(v) for v in bad))

    hn = _normalized_channels(channels)
    served_by_rrh = [[k for k in range(config.K) if state.b[l][k]] for l in range(config.L)]
    served_by_user = [[l for l in range(config.L) if state.b[l][k]] for k in range(config.K)]

    cols: dict = {}
    for l in range(config.L):
        n_l = config.antennas_per_rrh[l]
        for k in served_by_rrh[l]:
            for part in ("re", "im"):
                for n in range(n_l):
                    cols[("w", l, k, n, part)] = len(cols)
    for l in range(config.L):
        if served_by_rrh[l]:
            cols[("t", l)] = len(cols)

    c = np.zeros(len(cols))
    for l in range(config.L):
        if served_by_rrh[l]:
            c[cols[("t", l)]] = 1.0 / params.eta[l]
    constant = float(
        sum(state.a[l] * params.p_cms_w[l] for l in range(config.L))
        + config.zeta / (config.L * config.K) * state.pair_count()
    )

    asm = _Assembler(len(cols))
    for l in range(config.L):
        if served_by_rrh[l]:
            _epigraph_block(asm, cols, l, served_by_rrh[l], config.antennas_per_rrh[l])
    _qos_blocks(asm, cols, hn, config, served_by_user)
    for l in range(config.L):
        if not served_by_rrh[l]:
            continue
        asm.row({}, np.sqrt(config.p_max_w[l]))
        size = 1
        for k in served_by_rrh[l]:
            re_cols, im_cols = _w_columns(cols, l, k, config.antennas_per_rrh[l])
            for col in re_cols + im_cols:
                asm.row({col: -1.0}, 0.0)
                size += 1
        asm.cone(SOC, size)

    layout = VariableLayout(cols, constant)
    unserved = any(not served_by_user[k] for k in range(config.K))
    return asm.finish(c, layout, trivially_infeasible=unserved)


def build_relaxed_problem(
    channels: ChannelRealization,
    params: PowerParams,
    config: NetworkConfig,
) -> ConicProblem:
    """Continuous relaxation: activity and association in [0,1], coupled
    to the beamformers through per-pair power cones."""
    channels.check_config(config)
    hn = _normalized_channels(channels)
    L, K = config.L, config.K
    all_users = list(range(K))
    served_by_user = [list(range(L)) for _ in range(K)]

    cols: dict = {}
    for l in range(L):
        n_l = config.antennas_per_rrh[l]
        for k in range(K):
            for part in ("re", "im"):
                for n in range(n_l):
                    cols[("w", l, k, n, part)] = len(cols)
    for l in range(L):
        cols[("t", l)] = len(cols)
    for l in range(L):
        cols[("a", l)] = len(cols)
    for l in range(L):
        for k in range(K):
            cols[("b", l, k)] = len(cols)

    c = np.zeros(len(cols))
    for l in range(L):
        c[cols[("t", l)]] = 1.0 / params.eta[l]
        c[cols[("a", l)]] = params.p_cms_w[l]
        for k in range(K):
            c[cols[("b", l, k)]] = config.zeta / (L * K)

    asm = _Assembler(len(cols))
    for l in range(L):
        _epigraph_block(asm, cols, l, all_users, config.antennas_per_rrh[l])
    _qos_blocks(asm, cols, hn, config, served_by_user)
    for l in range(L):  # plain per-RRH budget, kept alongside the coupling
        asm.row({}, np.sqrt(config.p_max_w[l]))
        size = 1
        for k in range(K):
            re_cols, im_cols = _w_columns(cols, l, k, config.antennas_per_rrh[l])
            for col in re_cols + im_cols:
                asm.row({col: -1.0}, 0.0)
                size += 1
        asm.cone(SOC, size)
    for l in range(L):
        sqrt_p = np.sqrt(config.p_max_w[l])
        for k in range(K):
            asm.row({cols[("b", l, k)]: -sqrt_p}, 0.0)
            re_cols, im_cols = _w_columns(cols, l, k, config.antennas_per_rrh[l])
            for col in re_cols + im_cols:
                asm.row({col: -1.0}, 0.0)
            asm.cone(SOC, 1 + 2 * config.antennas_per_rrh[l])

    nonneg = 0
    for l in range(L):  # fronthaul: sum_k b_{l,k} <= a_l C_l
        row = {cols[("b", l, k)]: 1.0 for k in range(K)}
        row[cols[("a", l)]] = -float(config.fronthaul_caps[l])
        asm.row(row, 0.0)
        nonneg += 1
    for l in range(L):
        asm.row({cols[("a", l)]: -1.0}, 0.0)
        asm.row({cols[("a", l)]: 1.0}, 1.0)
        nonneg += 2
    for l in range(L):
        for k in range(K):
            asm.row({cols[("b", l, k)]: -1.0}, 0.0)
            asm.row({cols[("b", l, k)]: 1.0}, 1.0)
            nonneg += 2
    asm.cone(NONNEG, nonneg)

    return asm.finish(c, VariableLayout(cols, 0.0))


def extract_beamformers(
    solution: ConicSolution,
    layout: VariableLayout,
    state: NetworkState | None,
    channels: ChannelRealization,
    params: PowerParams,
    config: NetworkConfig,
) -> BeamformingSolution:
    """Reassemble complex beamformers from the real conic primal.

    The reported objective is the conic optimum plus the affine part the
    builder kept outside. Feasibility reflects the achieved SINRs
    against the targets within the relative tolerance. For relaxed
    solutions pass state=None.
    """
    if solution.status != OPTIMAL:
        raise ExtractionError(solution.status)
    w = [np.zeros((config.antennas_per_rrh[l], config.K), dtype=complex) for l in range(config.L)]
    for key, col in layout.columns.items():
        if key[0] != "w":
            continue
        _, l, k, n, part = key
        if part == "re":
            w[l][n, k] += solution.primal[col]
        else:
            w[l][n, k] += 1j * solution.primal[col]
    draft = BeamformingSolution(tuple(w), 0.0, (0.0,) * config.K, False)
    sinrs = tuple(sinr(channels, draft, k) for k in range(config.K))
    feasible = all(
        s >= g * (1.0 - 1e-6) for s, g in zip(sinrs, config.target_sinr_linear)
    )
    objective = layout.constant_objective_w + solution.objective
    return BeamformingSolution(tuple(w), objective, sinrs, feasible)


def full_objective(problem: ConicProblem, solution: ConicSolution) -> float:
    """Conic optimum plus the affine constant carried by the layout."""
    return problem.variable_layout.constant_objective_w + solution.objective


def dump_problem(problem: ConicProblem, path) -> None:
    """Plain-text dump (matrix-market flavor) for external cross-checks."""
    mat = sparse.coo_matrix(problem.constraint_matrix)
    with open(path, "w", encoding="utf-8") as f:
        f.write("%%conic problem: minimize c'x subject to b - Ax in K\n")
        f.write(f"dims {problem.n_rows} {problem.n_vars} {mat.nnz}\n")
        f.write("cones " + " ".join(f"{kind}:{size}" for kind, size in problem.cone_layout) + "\n")
        for r, col, v in zip(mat.row, mat.col, mat.data):
            f.write(f"A {r} {col} {v:.17g}\n")
        for r, v in enumerate(problem.constraint_offsets):
            f.write(f"b {r} {v:.17g}\n")
        for col, v in enumerate(problem.objective_coeffs):
            f.write(f"c {col} {v:.17g}\n")
