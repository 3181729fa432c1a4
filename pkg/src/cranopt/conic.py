"""Second-order cone solver behind a pluggable backend interface.

The bundled backend is a dense primal-dual interior-point method on the
homogeneous self-dual embedding, with Nesterov-Todd scaling and a
Mehrotra predictor-corrector step. It decides infeasibility by
certificate, which callers rely on: an exhausted iteration budget is
reported as numerical-failure, never as infeasible.

Problem form (see socp_form): minimize c'x subject to b - Ax in K,
K an ordered product of zero, nonnegative and second-order cones. Zero
cone rows become equalities A_eq x = b_eq internally; the rest become
G x + s = h with s in the product of the remaining cones.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, lu_factor, lu_solve

from cranopt.socp_form import (
    INFEASIBLE,
    NONNEG,
    NUMERICAL_FAILURE,
    OPTIMAL,
    SOC,
    ZERO,
    ConicProblem,
    ConicSolution,
)

# static KKT regularization (+delta on the variable block, -delta on the
# multiplier blocks) repaired by iterative refinement against the
# unregularized matrix
_REG = 1e-10
_REFINE_STEPS = 2
_STEP_SCALE = 0.99


@dataclass(frozen=True)
class SolverSettings:
    feasibility_tol: float = 1e-8
    optimality_tol: float = 1e-8
    max_iterations: int = 200

    def __post_init__(self):
        if not (self.feasibility_tol > 0 and self.optimality_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


class _NumericalTrouble(Exception):
    pass


# ---------------------------------------------------------------------------
# cone algebra on the inequality part: nonneg block of size ml, then socs


def _soc_slices(ml: int, soc_sizes: list[int]):
    out = []
    pos = ml
    for q in soc_sizes:
        out.append((pos, pos + q))
        pos += q
    return out


def _unit_element(ml: int, slices) -> np.ndarray:
    size = slices[-1][1] if slices else ml
    e = np.zeros(size)
    e[:ml] = 1.0
    for lo, _ in slices:
        e[lo] = 1.0
    return e


def _min_eigenvalue(u: np.ndarray, ml: int, slices) -> float:
    vals = []
    if ml:
        vals.append(u[:ml].min())
    for lo, hi in slices:
        vals.append(u[lo] - np.linalg.norm(u[lo + 1 : hi]))
    return min(vals) if vals else np.inf


def _jordan_product(u: np.ndarray, v: np.ndarray, ml: int, slices) -> np.ndarray:
    out = np.empty_like(u)
    out[:ml] = u[:ml] * v[:ml]
    for lo, hi in slices:
        u0, v0 = u[lo], v[lo]
        out[lo] = u[lo:hi] @ v[lo:hi]
        out[lo + 1 : hi] = u0 * v[lo + 1 : hi] + v0 * u[lo + 1 : hi]
    return out


def _jordan_solve(lam: np.ndarray, v: np.ndarray, ml: int, slices) -> np.ndarray:
    """x with lam o x = v, for lam strictly interior."""
    out = np.empty_like(v)
    out[:ml] = v[:ml] / lam[:ml]
    for lo, hi in slices:
        l0 = lam[lo]
        l1 = lam[lo + 1 : hi]
        det = l0 * l0 - l1 @ l1
        if det <= 0.0 or l0 <= 0.0:
            raise _NumericalTrouble("scaled point left the cone interior")
        x0 = (l0 * v[lo] - l1 @ v[lo + 1 : hi]) / det
        out[lo] = x0
        out[lo + 1 : hi] = (v[lo + 1 : hi] - x0 * l1) / l0
    return out


def _step_to_boundary(u: np.ndarray, d: np.ndarray, ml: int, slices) -> float:
    """sup {alpha >= 0 : u + alpha d stays in the cone}, u interior."""
    alpha = np.inf
    if ml:
        neg = d[:ml] < 0.0
        if np.any(neg):
            alpha = float(np.min(u[:ml][neg] / -d[:ml][neg]))
    for lo, hi in slices:
        u0, d0 = u[lo], d[lo]
        u1 = u[lo + 1 : hi]
        d1 = d[lo + 1 : hi]
        # roots of (u0+t d0)^2 - ||u1+t d1||^2, positive near t=0
        a = d0 * d0 - d1 @ d1
        b = u0 * d0 - u1 @ d1
        cc = u0 * u0 - u1 @ u1
        if cc <= 0.0:
            raise _NumericalTrouble("iterate left the cone interior")
        if a == 0.0:
            t = np.inf if b >= 0.0 else cc / (-2.0 * b)
        else:
            disc = b * b - a * cc
            if disc < 0.0:
                t = np.inf
            else:
                r = np.sqrt(disc)
                roots = [(-b - r) / a, (-b + r) / a]
                pos = [t for t in roots if t > 0.0]
                t = min(pos) if pos else np.inf
        alpha = min(alpha, t)
    return alpha


class _Scaling:
    """Nesterov-Todd scaling W for the current (s, z) pair.

    For the nonneg block W = diag(sqrt(s/z)). For each SOC block W is
    eta*(2 wbar wbar' - J)^(1/2) in the standard hyperbolic form; only
    matrix-vector products and the dense W^2 blocks are ever needed.
    """

    def __init__(self, s: np.ndarray, z: np.ndarray, ml: int, slices):
        self.ml = ml
        self.slices = slices
        if np.any(s[:ml] <= 0.0) or np.any(z[:ml] <= 0.0):
            raise _NumericalTrouble("nonnegative block left the interior")
        self.wn = np.sqrt(s[:ml] / z[:ml])
        self.soc: list[tuple[float, np.ndarray]] = []
        for lo, hi in slices:
            rho_s = s[lo] ** 2 - s[lo + 1 : hi] @ s[lo + 1 : hi]
            rho_z = z[lo] ** 2 - z[lo + 1 : hi] @ z[lo + 1 : hi]
            if rho_s <= 0.0 or rho_z <= 0.0 or s[lo] <= 0.0 or z[lo] <= 0.0:
                raise _NumericalTrouble("second-order block left the interior")
            sbar = s[lo:hi] / np.sqrt(rho_s)
            zbar = z[lo:hi] / np.sqrt(rho_z)
            gamma = np.sqrt((1.0 + sbar @ zbar) / 2.0)
            wbar = np.empty(hi - lo)
            wbar[0] = (sbar[0] + zbar[0]) / (2.0 * gamma)
            wbar[1:] = (sbar[1:] - zbar[1:]) / (2.0 * gamma)
            eta = (rho_s / rho_z) ** 0.25
            self.soc.append((float(eta), wbar))
        self.lam = self.apply(z)

    def apply(self, v: np.ndarray) -> np.ndarray:
        """W v (W is symmetric)."""
        out = np.empty_like(v)
        out[: self.ml] = self.wn * v[: self.ml]
        for (eta, wbar), (lo, hi) in zip(self.soc, self.slices):
            v0 = v[lo]
            v1 = v[lo + 1 : hi]
            w1 = wbar[1:]
            dot = w1 @ v1
            out[lo] = eta * (wbar[0] * v0 + dot)
            out[lo + 1 : hi] = eta * (v1 + (v0 + dot / (1.0 + wbar[0])) * w1)
        return out

    def w2_nonneg_diag(self) -> np.ndarray:
        return self.wn**2

    def w2_soc_block(self, i: int) -> np.ndarray:
        eta, wbar = self.soc[i]
        q = wbar.size
        block = 2.0 * np.outer(wbar, wbar)
        block[0, 0] -= 1.0
        block[1:, 1:] += np.eye(q - 1)
        return eta * eta * block


# ---------------------------------------------------------------------------
# bundled HSDE backend


def _split_problem(problem: ConicProblem):
    dense = problem.constraint_matrix.toarray()
    offsets = problem.constraint_offsets
    zero_rows: list[int] = []
    nonneg_rows: list[int] = []
    soc_rows: list[int] = []
    soc_sizes: list[int] = []
    pos = 0
    for kind, size in problem.cone_layout:
        rows = list(range(pos, pos + size))
        if kind == ZERO:
            zero_rows.extend(rows)
        elif kind == NONNEG:
            nonneg_rows.extend(rows)
        else:
            soc_rows.extend(rows)
            soc_sizes.append(size)
        pos += size
    a_eq = dense[zero_rows]
    b_eq = offsets[zero_rows]
    g = dense[nonneg_rows + soc_rows]
    h = offsets[nonneg_rows + soc_rows]
    return a_eq, b_eq, g, h, len(nonneg_rows), soc_sizes


def _raw_violation(problem: ConicProblem, x: np.ndarray) -> float:
    u = problem.constraint_offsets - problem.constraint_matrix @ x
    worst = 0.0
    pos = 0
    for kind, size in problem.cone_layout:
        block = u[pos : pos + size]
        if kind == ZERO:
            v = float(np.max(np.abs(block), initial=0.0))
        elif kind == NONNEG:
            v = float(max(0.0, -np.min(block, initial=0.0)))
        else:
            v = float(max(0.0, np.linalg.norm(block[1:]) - block[0]))
        worst = max(worst, v)
        pos += size
    return worst


def _feasible_within(problem: ConicProblem, x: np.ndarray, tol: float) -> bool:
    return _raw_violation(problem, x) <= tol * max(
        1.0, float(np.max(np.abs(problem.constraint_offsets), initial=0.0))
    )


def _solve_trivial(problem: ConicProblem, settings: SolverSettings) -> ConicSolution:
    """No variables: the offsets alone decide feasibility."""
    x = np.zeros(0)
    if _feasible_within(problem, x, settings.feasibility_tol):
        return ConicSolution(x, 0.0, OPTIMAL, _raw_violation(problem, x))
    return ConicSolution(x, float("nan"), INFEASIBLE, float("nan"))


def _solve_bundled(problem: ConicProblem, settings: SolverSettings) -> ConicSolution:
    if problem.trivially_infeasible:
        return ConicSolution(np.zeros(problem.n_vars), float("nan"), INFEASIBLE, float("nan"))
    if problem.n_vars == 0:
        return _solve_trivial(problem, settings)

    c = problem.objective_coeffs.astype(float)
    a_eq, b_eq, g, h, ml, soc_sizes = _split_problem(problem)
    n = c.size
    p = a_eq.shape[0]
    m = g.shape[0]
    slices = _soc_slices(ml, soc_sizes)
    e = _unit_element(ml, slices) if m else np.zeros(0)
    degree = ml + len(soc_sizes) + 1

    big = n + p + m
    kkt = np.zeros((big, big))
    kkt[:n, n : n + p] = a_eq.T
    kkt[:n, n + p :] = g.T
    kkt[n : n + p, :n] = a_eq
    kkt[n + p :, :n] = g
    reg = np.concatenate([np.full(n, _REG), np.full(p + m, -_REG)])

    def factor():
        regd = kkt.copy()
        regd[np.arange(big), np.arange(big)] += reg
        return lu_factor(regd)

    def solve_kkt(lu, rhs):
        sol = lu_solve(lu, rhs)
        for _ in range(_REFINE_STEPS):
            sol += lu_solve(lu, rhs - kkt @ sol)
        return sol

    def set_w2_identity():
        kkt[n + p :, n + p :] = -np.eye(m)

    def set_w2(scaling: _Scaling):
        block = kkt[n + p :, n + p :]
        block[:] = 0.0
        idx = np.arange(ml)
        block[idx, idx] = -scaling.w2_nonneg_diag()
        for i, (lo, hi) in enumerate(slices):
            block[lo:hi, lo:hi] = -scaling.w2_soc_block(i)

    resx0 = max(1.0, float(np.linalg.norm(c)))
    resy0 = max(1.0, float(np.linalg.norm(b_eq))) if p else 1.0
    resz0 = max(1.0, float(np.linalg.norm(h))) if m else 1.0

    try:
        # initial point from two solves with W = I, shifted into the cone
        set_w2_identity()
        lu = factor()
        sol = solve_kkt(lu, np.concatenate([np.zeros(n), b_eq, h]))
        x = sol[:n]
        s = -sol[n + p :]
        sol = solve_kkt(lu, np.concatenate([-c, np.zeros(p), np.zeros(m)]))
        y = sol[n : n + p]
        z = sol[n + p :]
        for u in (s, z):
            if u.size:
                shift = -_min_eigenvalue(u, ml, slices)
                if shift >= -1e-8 * max(1.0, float(np.linalg.norm(u))):
                    u += (1.0 + shift) * e
        tau = 1.0
        kappa = 1.0

        status = NUMERICAL_FAILURE
        iterations = settings.max_iterations
        for it in range(settings.max_iterations):
            # --- convergence bookkeeping on the scaled iterate
            xt = x / tau
            st = s / tau
            pres_eq = np.linalg.norm(a_eq @ xt - b_eq) / resy0 if p else 0.0
            pres_in = np.linalg.norm(g @ xt + st - h) / resz0 if m else 0.0
            pres = max(pres_eq, pres_in)
            dres = np.linalg.norm(a_eq.T @ (y / tau) + g.T @ (z / tau) + c) / resx0
            pcost = float(c @ xt)
            dcost = -float(b_eq @ y + h @ z) / tau
            gap = float(st @ (z / tau))
            relgap = None
            if pcost < 0.0:
                relgap = gap / -pcost
            elif dcost > 0.0:
                relgap = gap / dcost
            if (
                pres <= settings.feasibility_tol
                and dres <= settings.feasibility_tol
                and (gap <= settings.optimality_tol
                     or (relgap is not None and relgap <= settings.optimality_tol))
            ):
                status, iterations = OPTIMAL, it
                break

            certificate = -float(b_eq @ y + h @ z)
            if certificate > 0.0:
                pinfres = np.linalg.norm(a_eq.T @ y + g.T @ z) / resx0 / certificate
                if pinfres <= settings.feasibility_tol:
                    status, iterations = INFEASIBLE, it
                    break
            if -float(c @ x) > 0.0:
                dinfres = max(
                    np.linalg.norm(a_eq @ x) / resy0 if p else 0.0,
                    np.linalg.norm(g @ x + s) / resz0 if m else 0.0,
                ) / -float(c @ x)
                if dinfres <= settings.feasibility_tol:
                    # unbounded below: cannot happen for well-posed inputs
                    status, iterations = NUMERICAL_FAILURE, it
                    break

            # --- Newton directions under fresh NT scaling
            rx = a_eq.T @ y + g.T @ z + c * tau
            ry = a_eq @ x - b_eq * tau
            rz = g @ x + s - h * tau
            rt = float(c @ x + b_eq @ y + h @ z) + kappa
            mu = (float(s @ z) + tau * kappa) / degree

            scaling = _Scaling(s, z, ml, slices)
            lam = scaling.lam
            set_w2(scaling)
            lu = factor()
            v1 = solve_kkt(lu, np.concatenate([-c, b_eq, h]))
            t1 = float(c @ v1[:n] + b_eq @ v1[n : n + p] + h @ v1[n + p :])
            denom = t1 - kappa / tau
            if denom == 0.0:
                raise _NumericalTrouble("degenerate tau direction")

            def direction(res_scale, ds_target, dk_target):
                ds_tilde = scaling.apply(_jordan_solve(lam, ds_target, ml, slices))
                rhs = np.concatenate(
                    [-res_scale * rx, -res_scale * ry, -res_scale * rz - ds_tilde]
                )
                v2 = solve_kkt(lu, rhs)
                t2 = float(c @ v2[:n] + b_eq @ v2[n : n + p] + h @ v2[n + p :])
                dtau = (-res_scale * rt - dk_target / tau - t2) / denom
                dxyz = v2 + dtau * v1
                dz = dxyz[n + p :]
                ds = ds_tilde - scaling.apply(scaling.apply(dz))
                dkappa = (dk_target - kappa * dtau) / tau
                return dxyz, dz, ds, dtau, dkappa

            lam2 = _jordan_product(lam, lam, ml, slices)
            dxyz_a, dz_a, ds_a, dtau_a, dkappa_a = direction(1.0, -lam2, -tau * kappa)

            alpha_aff = min(
                1.0,
                _step_to_boundary(s, ds_a, ml, slices),
                _step_to_boundary(z, dz_a, ml, slices),
                tau / -dtau_a if dtau_a < 0.0 else np.inf,
                kappa / -dkappa_a if dkappa_a < 0.0 else np.inf,
            )
            sigma = (1.0 - alpha_aff) ** 3

            w_dz_a = scaling.apply(dz_a)
            winv_ds_a = -lam - w_dz_a  # W^{-T} ds from the affine system
            ds_target = -lam2 - _jordan_product(winv_ds_a, w_dz_a, ml, slices) + sigma * mu * e
            dk_target = -tau * kappa - dtau_a * dkappa_a + sigma * mu
            dxyz, dz, ds, dtau, dkappa = direction(1.0 - sigma, ds_target, dk_target)

            alpha = _STEP_SCALE * min(
                _step_to_boundary(s, ds, ml, slices),
                _step_to_boundary(z, dz, ml, slices),
                tau / -dtau if dtau < 0.0 else np.inf,
                kappa / -dkappa if dkappa < 0.0 else np.inf,
            )
            alpha = min(1.0, alpha)
            if not np.isfinite(alpha) or alpha <= 0.0:
                raise _NumericalTrouble("step length collapsed")

            x = x + alpha * dxyz[:n]
            y = y + alpha * dxyz[n : n + p]
            z = z + alpha * dxyz[n + p :]
            s = s + alpha * ds
            tau += alpha * dtau
            kappa += alpha * dkappa
            if tau <= 0.0 or kappa <= 0.0:
                raise _NumericalTrouble("embedding variables left the interior")
    except (_NumericalTrouble, LinAlgError, FloatingPointError):
        return ConicSolution(
            np.zeros(n), float("nan"), NUMERICAL_FAILURE, float("nan"), iterations=0
        )

    if status == OPTIMAL:
        x_opt = x / tau
        return ConicSolution(
            x_opt, float(c @ x_opt), OPTIMAL, _raw_violation(problem, x_opt), iterations
        )
    if status == INFEASIBLE:
        return ConicSolution(np.zeros(n), float("nan"), INFEASIBLE, float("nan"), iterations)
    return ConicSolution(np.zeros(n), float("nan"), NUMERICAL_FAILURE, float("nan"), iterations)


# ---------------------------------------------------------------------------
# backend registry


def _solve_cvxopt(problem: ConicProblem, settings: SolverSettings) -> ConicSolution:
    """Adapter for the cvxopt conelp solver (used for cross-checks)."""
    from cvxopt import matrix, solvers

    if problem.trivially_infeasible:
        return ConicSolution(np.zeros(problem.n_vars), float("nan"), INFEASIBLE, float("nan"))
    if problem.n_vars == 0:
        return _solve_trivial(problem, settings)
    a_eq, b_eq, g, h, ml, soc_sizes = _split_problem(problem)
    options = {
        "show_progress": False,
        "feastol": settings.feasibility_tol,
        "abstol": settings.optimality_tol,
        "reltol": settings.optimality_tol,
        "maxiters": settings.max_iterations,
    }
    kwargs = {}
    if a_eq.shape[0]:
        kwargs = {"A": matrix(a_eq), "b": matrix(b_eq)}
    result = solvers.conelp(
        matrix(problem.objective_coeffs),
        matrix(g),
        matrix(h),
        dims={"l": ml, "q": soc_sizes, "s": []},
        options=options,
        **kwargs,
    )
    status = result["status"]
    if status == "optimal":
        x = np.asarray(result["x"]).ravel()
        objective = float(problem.objective_coeffs @ x)
        return ConicSolution(x, objective, OPTIMAL, _raw_violation(problem, x))
    if status == "primal infeasible":
        return ConicSolution(np.zeros(problem.n_vars), float("nan"), INFEASIBLE, float("nan"))
    return ConicSolution(np.zeros(problem.n_vars), float("nan"), NUMERICAL_FAILURE, float("nan"))


_BACKENDS = {
    "bundled": _solve_bundled,
    "cvxopt": _solve_cvxopt,
}


def register_backend(name: str, backend) -> None:
    """Install an external conic solver behind the common contract."""
    if not callable(backend):
        raise TypeError("backend must be callable(problem, settings) -> ConicSolution")
    _BACKENDS[name] = backend


def solve(
    problem: ConicProblem,
    settings: SolverSettings | None = None,
    backend: str = "bundled",
) -> ConicSolution:
    """Solve one cone program. Deterministic for fixed inputs."""
    if settings is None:
        settings = SolverSettings()
    try:
        fn = _BACKENDS[backend]
    except KeyError:
        raise KeyError(f"no conic backend named {backend!r}") from None
    return fn(problem, settings)
