"""Core network model: configuration types, SINR and power evaluation.

All powers are linear watts. dB and dBm only appear at the edges of the
library (channel generation and the experiment CLI), never in the formulas
here.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

# Relative slack applied to per-user SINR targets when deciding feasibility
# of a solved beamformer set (matches the conic solver accuracy budget).
SINR_FEAS_TOL_REL = 1e-6

# A beamformer with norm below this factor times sqrt(P_max) of its RRH
# counts as zero when checking association consistency. Conic solvers
# return tiny nonzero residuals for deactivated directions.
ZERO_NORM_FACTOR = 1e-7


class DimensionMismatchError(ValueError):
    """Raised when channel/beamformer shapes disagree with the config."""

    def __init__(self, what: str, l: int | None = None, k: int | None = None):
        self.what = what
        self.l = l
        self.k = k
        where = ""
        if l is not None:
            where = f" at rrh={l}" + (f", mu={k}" if k is not None else "")
        super().__init__(f"dimension mismatch: {what}{where}")


def _as_tuple(x, cast=float):
    return tuple(cast(v) for v in x)


@dataclass(frozen=True)
class NetworkConfig:
    """Static network description.

    Attributes:
        L: number of RRHs.
        K: number of single-antenna MUs.
        antennas_per_rrh: antenna count N_l for each RRH, length L.
        fronthaul_caps: max number of served links C_l per RRH, length L.
        p_max_w: per-RRH transmit power budget in watts, length L.
        target_sinr_linear: per-MU SINR target, linear scale, length K.
        zeta: small positive weight on the served-link count in the
            refined objective; vanishing by design.
    """

    L: int
    K: int
    antennas_per_rrh: tuple[int, ...]
    fronthaul_caps: tuple[int, ...]
    p_max_w: tuple[float, ...]
    target_sinr_linear: tuple[float, ...]
    zeta: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "antennas_per_rrh", _as_tuple(self.antennas_per_rrh, int))
        object.__setattr__(self, "fronthaul_caps", _as_tuple(self.fronthaul_caps, int))
        object.__setattr__(self, "p_max_w", _as_tuple(self.p_max_w, float))
        object.__setattr__(self, "target_sinr_linear", _as_tuple(self.target_sinr_linear, float))
        if self.L < 1 or self.K < 1:
            raise ValueError("need at least one RRH and one MU")
        for name, seq, L in (
            ("antennas_per_rrh", self.antennas_per_rrh, self.L),
            ("fronthaul_caps", self.fronthaul_caps, self.L),
            ("p_max_w", self.p_max_w, self.L),
            ("target_sinr_linear", self.target_sinr_linear, self.K),
        ):
            if len(seq) != L:
                raise DimensionMismatchError(f"{name} must have length {L}")
        if any(n < 1 for n in self.antennas_per_rrh):
            raise ValueError("every RRH needs at least one antenna")
        if any(c < 0 for c in self.fronthaul_caps):
            raise ValueError("fronthaul capacities must be nonnegative")
        if any(p <= 0 for p in self.p_max_w):
            raise ValueError("power budgets must be positive")
        if any(g <= 0 for g in self.target_sinr_linear):
            raise ValueError("SINR targets must be positive")
        if not self.zeta > 0:
            raise ValueError("zeta must be positive")

    def zero_norm_threshold(self, l: int) -> float:
        """Norm below which a beamformer for RRH ``l`` counts as zero."""
        return ZERO_NORM_FACTOR * np.sqrt(self.p_max_w[l])


@dataclass(frozen=True)
class PowerParams:
    """Per-RRH power model parameters (watts, linear efficiency).

    p_cms_w is the circuit-minus-sleep difference, recomputed from the
    other two fields; it is what an RRH saves by sleeping.
    """

    p_cir_w: tuple[float, ...]
    p_slp_w: tuple[float, ...]
    eta: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "p_cir_w", _as_tuple(self.p_cir_w))
        object.__setattr__(self, "p_slp_w", _as_tuple(self.p_slp_w))
        object.__setattr__(self, "eta", _as_tuple(self.eta))
        if not (len(self.p_cir_w) == len(self.p_slp_w) == len(self.eta)):
            raise DimensionMismatchError("power parameter lists must share one length")
        for cir, slp in zip(self.p_cir_w, self.p_slp_w):
            if not cir >= slp >= 0:
                raise ValueError("need p_cir >= p_slp >= 0 for every RRH")
        for e in self.eta:
            if not (0 < e <= 1):
                raise ValueError("amplifier efficiency must lie in (0, 1]")

    @property
    def p_cms_w(self) -> tuple[float, ...]:
        return tuple(c - s for c, s in zip(self.p_cir_w, self.p_slp_w))

    @classmethod
    def pico_defaults(cls, L: int) -> "PowerParams":
        """Typical pico-cell values: 6.8 W circuit, 4.3 W sleep, 25% PA."""
        return cls((6.8,) * L, (4.3,) * L, (0.25,) * L)


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ChannelRealization:
    """Complex downlink channels for every RRH-MU pair.

    h[l] is an (N_l, K) complex array; column k is the amplitude-scale
    channel vector from RRH l to MU k. noise_power_w holds sigma_k^2.
    """

    h: tuple[np.ndarray, ...]
    noise_power_w: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "h", tuple(_freeze(np.asarray(m, dtype=complex)) for m in self.h))
        object.__setattr__(self, "noise_power_w", _as_tuple(self.noise_power_w))
        K = len(self.noise_power_w)
        for l, m in enumerate(self.h):
            if m.ndim != 2 or m.shape[1] != K:
                raise DimensionMismatchError("channel block must be (N_l, K)", l=l)
            if not np.all(np.isfinite(m.view(float))):
                raise ValueError(f"non-finite channel entries at rrh={l}")
        if any(s <= 0 for s in self.noise_power_w):
            raise ValueError("noise powers must be positive")

    @property
    def L(self) -> int:
        return len(self.h)

    @property
    def K(self) -> int:
        return len(self.noise_power_w)

    def check_config(self, config: NetworkConfig) -> None:
        if self.L != config.L or self.K != config.K:
            raise DimensionMismatchError("channel realization does not match config")
        for l, m in enumerate(self.h):
            if m.shape[0] != config.antennas_per_rrh[l]:
                raise DimensionMismatchError("antenna count mismatch", l=l)


@dataclass(frozen=True)
class NetworkState:
    """Binary activity flags a_l and association flags b_{l,k}."""

    a: tuple[int, ...]
    b: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "a", _as_tuple(self.a, int))
        object.__setattr__(self, "b", tuple(_as_tuple(row, int) for row in self.b))
        if len(self.b) != len(self.a):
            raise DimensionMismatchError("b must have one row per RRH")
        for l, al in enumerate(self.a):
            if al not in (0, 1):
                raise ValueError(f"a[{l}] must be 0 or 1")
            for k, blk in enumerate(self.b[l]):
                if blk not in (0, 1):
                    raise ValueError(f"b[{l}][{k}] must be 0 or 1")

    @property
    def L(self) -> int:
        return len(self.a)

    @property
    def K(self) -> int:
        return len(self.b[0]) if self.b else 0

    @classmethod
    def empty(cls, L: int, K: int) -> "NetworkState":
        return cls((0,) * L, tuple((0,) * K for _ in range(L)))

    @classmethod
    def from_b(cls, b) -> "NetworkState":
        """State with a_l derived as max_k b_{l,k}."""
        rows = tuple(tuple(int(v) for v in row) for row in b)
        return cls(tuple(max(row, default=0) for row in rows), rows)

    def served_counts(self) -> tuple[int, ...]:
        return tuple(sum(row) for row in self.b)

    def active_count(self) -> int:
        return sum(self.a)

    def pair_count(self) -> int:
        return sum(self.served_counts())


@dataclass(frozen=True)
class BeamformingSolution:
    """Beamformers w_{l,k} plus the achieved objective and SINRs.

    w uses the same (N_l, K) per-RRH layout as ChannelRealization.h.
    objective_value is the refined network objective (power plus the
    zeta-weighted link count); per_user_sinr holds the achieved linear
    SINRs. feasible marks whether every SINR target is met within
    SINR_FEAS_TOL_REL.
    """

    w: tuple[np.ndarray, ...]
    objective_value: float
    per_user_sinr: tuple[float, ...]
    feasible: bool

    def __post_init__(self):
        object.__setattr__(self, "w", tuple(_freeze(np.asarray(m, dtype=complex)) for m in self.w))
        object.__setattr__(self, "per_user_sinr", _as_tuple(self.per_user_sinr))

    @classmethod
    def zeros_like(cls, channels: ChannelRealization, feasible: bool = False) -> "BeamformingSolution":
        w = tuple(np.zeros_like(m) for m in channels.h)
        return cls(w, 0.0, (0.0,) * channels.K, feasible)

    def transmit_power_w(self, l: int) -> float:
        """Total radiated power of RRH l, sum_k ||w_{l,k}||^2."""
        return float(np.sum(np.abs(self.w[l]) ** 2))


def _check_pair_shapes(channels: ChannelRealization, solution: BeamformingSolution) -> None:
    if len(solution.w) != channels.L:
        raise DimensionMismatchError("beamformer blocks must match RRH count")
    for l in range(channels.L):
        if solution.w[l].shape != channels.h[l].shape:
            raise DimensionMismatchError("beamformer shape differs from channel", l=l)


def sinr(channels: ChannelRealization, solution: BeamformingSolution, k: int) -> float:
    """Received SINR of MU k under the given beamformers.

    Signal power is |sum_l h_{l,k}^H w_{l,k}|^2; every other MU's stream
    contributes |sum_l h_{l,k}^H w_{l,i}|^2 of interference on top of the
    noise floor sigma_k^2.
    """
    _check_pair_shapes(channels, solution)
    if not 0 <= k < channels.K:
        raise DimensionMismatchError("user index out of range", k=k)
    # row i of `received` is the net complex gain of stream i at MU k
    received = np.zeros(channels.K, dtype=complex)
    for l in range(channels.L):
        received += channels.h[l][:, k].conj() @ solution.w[l]
    powers = np.abs(received) ** 2
    signal = powers[k]
    interference = float(np.sum(powers)) - float(signal)
    return float(signal / (interference + channels.noise_power_w[k]))


def network_power(state: NetworkState, solution: BeamformingSolution, params: PowerParams) -> float:
    """Network power: active circuit overhead plus amplifier input power.

    The constant total sleep power is left out; add it back for absolute
    reporting.
    """
    p_cms = params.p_cms_w
    total = 0.0
    for l, al in enumerate(state.a):
        total += al * p_cms[l] + solution.transmit_power_w(l) / params.eta[l]
    return float(total)


def objective_ref(
    state: NetworkState,
    solution: BeamformingSolution,
    params: PowerParams,
    config: NetworkConfig,
) -> float:
    """Refined objective: network power plus the zeta-weighted link count."""
    return network_power(state, solution, params) + config.zeta / (config.L * config.K) * state.pair_count()


@dataclass(frozen=True)
class Violation:
    """One violated association constraint, with the offending indices."""

    kind: str  # "inactive-serving" | "active-idle" | "fronthaul"
    l: int
    k: int | None = None

    def __str__(self):
        if self.kind == "inactive-serving":
            return f"rrh {self.l} is asleep but serves mu {self.k}"
        if self.kind == "active-idle":
            return f"rrh {self.l} is active but serves nobody"
        return f"rrh {self.l} exceeds its fronthaul link budget"


def validate_state(
    state: NetworkState,
    config: NetworkConfig,
    allow_idle_active: bool = False,
) -> list[Violation]:
    """Check activity/association consistency and fronthaul caps.

    Returns the list of violations (empty means valid): a sleeping RRH
    with a served MU, an active RRH serving nobody, or a row exceeding
    its link budget. ``allow_idle_active`` skips the second check for
    schemes that keep every RRH powered regardless of load.
    """
    if state.L != config.L or any(len(row) != config.K for row in state.b):
        raise DimensionMismatchError("state does not match config dimensions")
    violations: list[Violation] = []
    for l in range(config.L):
        row = state.b[l]
        if state.a[l] == 0:
            for k, blk in enumerate(row):
                if blk:
                    violations.append(Violation("inactive-serving", l, k))
        elif not any(row) and not allow_idle_active:
            violations.append(Violation("active-idle", l))
        if sum(row) > config.fronthaul_caps[l]:
            violations.append(Violation("fronthaul", l))
    return violations
