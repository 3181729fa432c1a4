"""Joint user association and downlink beamforming for C-RAN power
minimization under per-RRH fronthaul link budgets."""

from cranopt.baseline import lte_a_solve, lte_a_state
from cranopt.channel import ChannelParams, generate_channel, generate_topology
from cranopt.inflation import InflationResult, InflationTrace, inflate
from cranopt.netmodel import (
    BeamformingSolution,
    ChannelRealization,
    DimensionMismatchError,
    NetworkConfig,
    NetworkState,
    PowerParams,
    Violation,
    network_power,
    objective_ref,
    sinr,
    validate_state,
)
from cranopt.oracle import (
    EnumerationGuardError,
    EnumerationResult,
    InfeasibleInstanceError,
    enumerate_optimal,
    verify_lemma1,
    verify_theorem1,
)

__all__ = [
    "BeamformingSolution",
    "ChannelParams",
    "ChannelRealization",
    "DimensionMismatchError",
    "EnumerationGuardError",
    "EnumerationResult",
    "InfeasibleInstanceError",
    "InflationResult",
    "InflationTrace",
    "NetworkConfig",
    "NetworkState",
    "PowerParams",
    "Violation",
    "enumerate_optimal",
    "generate_channel",
    "generate_topology",
    "inflate",
    "lte_a_solve",
    "lte_a_state",
    "network_power",
    "objective_ref",
    "sinr",
    "validate_state",
    "verify_lemma1",
    "verify_theorem1",
]

__version__ = "0.1.0"
