"""Seeded topology and channel generation.

Distances, path loss and shadowing follow the standard urban pico-cell
model: 148.1 + 37.6 log10(d_km) dB path loss, 8 dB lognormal shadowing,
CN(0, I) small-scale fading, -174 dBm/Hz noise over 10 MHz.

Reproducibility contract: every public generator takes an integer seed
and derives two independent streams from numpy's SeedSequence, child 0
for geometry and child 1 for fading/shadowing. Identical seeds give
bitwise-identical outputs on any platform (PCG64 is fully specified).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cranopt.netmodel import ChannelRealization, DimensionMismatchError, NetworkConfig

# below this the log-distance model diverges; standard cell-model guard
MIN_DISTANCE_M = 10.0


@dataclass(frozen=True)
class Topology:
    """RRH and MU positions in meters, inside [-half, half]^2."""

    rrh_positions: tuple[tuple[float, float], ...]
    mu_positions: tuple[tuple[float, float], ...]
    region_half_width_m: float

    def __post_init__(self):
        object.__setattr__(
            self, "rrh_positions", tuple((float(x), float(y)) for x, y in self.rrh_positions)
        )
        object.__setattr__(
            self, "mu_positions", tuple((float(x), float(y)) for x, y in self.mu_positions)
        )
        half = self.region_half_width_m
        if not half > 0:
            raise ValueError("region half width must be positive")
        for x, y in self.rrh_positions + self.mu_positions:
            if not (-half <= x <= half and -half <= y <= half):
                raise ValueError("position outside the region square")

    @property
    def L(self) -> int:
        return len(self.rrh_positions)

    @property
    def K(self) -> int:
        return len(self.mu_positions)

    def distance_m(self, l: int, k: int) -> float:
        """RRH-to-MU distance, clamped below at MIN_DISTANCE_M."""
        rx, ry = self.rrh_positions[l]
        mx, my = self.mu_positions[k]
        return max(float(np.hypot(rx - mx, ry - my)), MIN_DISTANCE_M)


@dataclass(frozen=True)
class ChannelParams:
    """Propagation and noise parameters, defaults from the standard model."""

    pathloss_offset_db: float = 148.1
    pathloss_slope_db_per_decade: float = 37.6
    shadowing_std_db: float = 8.0
    noise_density_dbm_per_hz: float = -174.0
    bandwidth_hz: float = 10e6
    antenna_gain_dbi: float = 9.0

    def __post_init__(self):
        fields = (
            self.pathloss_offset_db,
            self.pathloss_slope_db_per_decade,
            self.shadowing_std_db,
            self.noise_density_dbm_per_hz,
            self.bandwidth_hz,
            self.antenna_gain_dbi,
        )
        if not all(np.isfinite(fields)):
            raise ValueError("channel parameters must be finite")
        if not self.bandwidth_hz > 0:
            raise ValueError("bandwidth must be positive")
        if self.shadowing_std_db < 0:
            raise ValueError("shadowing std must be nonnegative")


def path_loss_db(d_km: float, params: ChannelParams | None = None) -> float:
    """Log-distance path loss in dB at distance d_km kilometers."""
    if params is None:
        params = ChannelParams()
    if not d_km > 0:
        raise ValueError(f"path loss undefined for d_km={d_km}")
    return params.pathloss_offset_db + params.pathloss_slope_db_per_decade * np.log10(d_km)


def noise_power_w(params: ChannelParams | None = None) -> float:
    """Thermal noise power over the system bandwidth, in watts."""
    if params is None:
        params = ChannelParams()
    noise_dbm = params.noise_density_dbm_per_hz + 10.0 * np.log10(params.bandwidth_hz)
    return float(10.0 ** ((noise_dbm - 30.0) / 10.0))


def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    geometry, fading = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(geometry), np.random.default_rng(fading)


def generate_topology(seed: int, config: NetworkConfig, half_width_m: float = 1500.0) -> Topology:
    """Drop RRHs and MUs independently uniform over the square region."""
    if not half_width_m > 0:
        raise ValueError("half_width_m must be positive")
    rng, _ = _streams(seed)
    rrh = rng.uniform(-half_width_m, half_width_m, size=(config.L, 2))
    mu = rng.uniform(-half_width_m, half_width_m, size=(config.K, 2))
    return Topology(
        tuple(map(tuple, rrh)), tuple(map(tuple, mu)), region_half_width_m=half_width_m
    )


def generate_channel(
    seed: int,
    topology: Topology,
    config: NetworkConfig,
    params: ChannelParams | None = None,
) -> ChannelRealization:
    """Draw one quasi-static channel realization for the given topology.

    h_{l,k} = g_{l,k} v with v ~ CN(0, I_{N_l}) and amplitude gain
    g = 10^((-PL(d) + G_ant + s)/20), s ~ N(0, shadowing_std^2) dB drawn
    independently per (l, k). Noise power is identical for every MU.

    The fading stream is consumed in a fixed (l, k) order, so outputs are
    reproducible bit for bit for a given (seed, topology, config, params).
    """
    if params is None:
        params = ChannelParams()
    if topology.L != config.L or topology.K != config.K:
        raise DimensionMismatchError("topology does not match config")
    _, rng = _streams(seed)
    sigma2 = noise_power_w(params)
    blocks = []
    for l in range(config.L):
        n_l = config.antennas_per_rrh[l]
        block = np.empty((n_l, config.K), dtype=complex)
        for k in range(config.K):
            d_km = topology.distance_m(l, k) / 1000.0
            shadow_db = rng.normal(0.0, params.shadowing_std_db) if params.shadowing_std_db else 0.0
            gain_db = -path_loss_db(d_km, params) + params.antenna_gain_dbi + shadow_db
            amp = 10.0 ** (gain_db / 20.0)
            fading = (rng.standard_normal(n_l) + 1j * rng.standard_normal(n_l)) / np.sqrt(2.0)
            block[:, k] = amp * fading
        blocks.append(block)
    return ChannelRealization(tuple(blocks), (sigma2,) * config.K)
