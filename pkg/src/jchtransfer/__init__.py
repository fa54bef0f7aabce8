"""Single-excitation transfer in Jaynes-Cummings-Hubbard cavity arrays."""

__version__ = "0.1.0"

from jchtransfer.dynamics import (
    SingleExcitationState,
    atom_excitation_at,
    dense_oracle_evolve,
    evolve_exact,
    from_amplitudes,
    photon_excitation_at,
)
from jchtransfer.regimes import RegimeKind, RegimeSpec
from jchtransfer.topology import ChainParams, Topology, mode_basis

__all__ = [
    "ChainParams",
    "RegimeKind",
    "RegimeSpec",
    "SingleExcitationState",
    "Topology",
    "atom_excitation_at",
    "dense_oracle_evolve",
    "evolve_exact",
    "from_amplitudes",
    "mode_basis",
    "photon_excitation_at",
]
