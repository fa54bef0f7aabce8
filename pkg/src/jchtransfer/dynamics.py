"""Exact single-excitation dynamics.

The one-excitation sector of the array is 2N-dimensional. In the delocalized
mode basis the Hamiltonian splits into N independent 2×2 blocks
[[Ω_j, g], [g, ε]] acting on (photon mode j, atomic mode j), which is what
:func:`evolve_exact` exploits. :func:`dense_oracle_evolve` builds the full
2N×2N matrix in the site basis instead and serves as ground truth.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from jchtransfer.errors import TopologyError
from jchtransfer.topology import ChainParams, ModeBasis, Topology, coupling_matrix, mode_basis

NORM_TOL = 1e-12
ORACLE_TOL = 1e-9
ORACLE_MAX_N = 512
_SINC_SERIES_BELOW = 1e-6


def _vec(values, n: int | None = None) -> np.ndarray:
    a = np.array(values, dtype=complex).reshape(-1)
    if n is not None and a.shape[0] != n:
        raise ValueError(f"expected {n} amplitudes, got {a.shape[0]}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SingleExcitationState:
    """Photon amplitudes a_j and atom amplitudes b_j in the site basis."""

    photon_amps: np.ndarray
    atom_amps: np.ndarray

    def __post_init__(self):
        a = _vec(self.photon_amps)
        b = _vec(self.atom_amps)
        if a.shape != b.shape:
            raise ValueError("photon and atom amplitude vectors differ in length")
        object.__setattr__(self, "photon_amps", a)
        object.__setattr__(self, "atom_amps", b)

    @property
    def n(self) -> int:
        return self.photon_amps.shape[0]

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.photon_amps, self.photon_amps).real
                             + np.vdot(self.atom_amps, self.atom_amps).real))

    @property
    def is_normalized(self) -> bool:
        return abs(self.norm() - 1.0) < NORM_TOL

    def as_vector(self) -> np.ndarray:
        """Concatenation (a_0 … a_{N−1}, b_0 … b_{N−1})."""
        return np.concatenate([self.photon_amps, self.atom_amps])

    @classmethod
    def from_vector(cls, v) -> "SingleExcitationState":
        v = np.asarray(v, dtype=complex).reshape(-1)
        if v.shape[0] % 2:
            raise ValueError("state vector must have even length 2N")
        n = v.shape[0] // 2
        return cls(v[:n], v[n:])

    def populations(self) -> tuple[np.ndarray, np.ndarray]:
        return np.abs(self.photon_amps) ** 2, np.abs(self.atom_amps) ** 2


def atom_excitation_at(n: int, site: int) -> SingleExcitationState:
    if not 0 <= site < n:
        raise ValueError(f"site {site} outside 0..{n - 1}")
    b = np.zeros(n, dtype=complex)
    b[site] = 1.0
    return SingleExcitationState(np.zeros(n, dtype=complex), b)


def photon_excitation_at(n: int, site: int) -> SingleExcitationState:
    if not 0 <= site < n:
        raise ValueError(f"site {site} outside 0..{n - 1}")
    a = np.zeros(n, dtype=complex)
    a[site] = 1.0
    return SingleExcitationState(a, np.zeros(n, dtype=complex))


def from_amplitudes(raw, normalize: bool = True) -> SingleExcitationState:
    """Build a state from a length-2N vector (photons first, then atoms).

    With ``normalize=False`` the vector is kept as given; the kernels are
    linear so unnormalized data is meaningful, and ``is_normalized`` reports it.
    """
    state = SingleExcitationState.from_vector(raw)
    if normalize:
        norm = state.norm()
        if norm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        state = SingleExcitationState(state.photon_amps / norm, state.atom_amps / norm)
    return state


@dataclass(frozen=True)
class DelocalizedState:
    """Photon-mode amplitudes α_j and atomic-mode amplitudes β_j."""

    photon_modes: np.ndarray
    atom_modes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "photon_modes", _vec(self.photon_modes))
        object.__setattr__(self, "atom_modes", _vec(self.atom_modes, self.photon_modes.shape[0]))

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.photon_modes, self.photon_modes).real
                             + np.vdot(self.atom_modes, self.atom_modes).real))


def _check_dim(n: int, basis: ModeBasis) -> None:
    if basis.n != n:
        raise ValueError(f"basis has dimension {basis.n}, state has {n}")


def to_delocalized(state: SingleExcitationState, basis: ModeBasis) -> DelocalizedState:
    _check_dim(state.n, basis)
    w = basis.transform
    return DelocalizedState(w @ state.photon_amps, w @ state.atom_amps)


def from_delocalized(state: DelocalizedState, basis: ModeBasis) -> SingleExcitationState:
    _check_dim(state.photon_modes.shape[0], basis)
    w_inv = basis.transform.conj().T
    return SingleExcitationState(w_inv @ state.photon_modes, w_inv @ state.atom_modes)


@dataclass(frozen=True)
class BlockEigensystem:
    """Per-mode spectral data of the 2×2 blocks, as arrays over modes."""

    chi: np.ndarray
    omega_plus: np.ndarray
    omega_minus: np.ndarray
    detuning: np.ndarray


def block_eigensystem(params: ChainParams, basis: ModeBasis | None = None) -> BlockEigensystem:
    basis = basis or mode_basis(params)
    g = params.atom_photon_coupling
    chi = np.hypot(basis.detunings / 2.0, g)
    centre = (basis.mode_freqs + params.atom_freq) / 2.0
    return BlockEigensystem(chi=chi, omega_plus=centre + chi, omega_minus=centre - chi,
                            detuning=np.array(basis.detunings))


def _sin_over_chi(chi: np.ndarray, t: float) -> np.ndarray:
    # sin(χt)/χ with the removable singularity at χ = 0 handled by its series
    x = chi * t
    small = np.abs(x) < _SINC_SERIES_BELOW
    safe = np.where(small, 1.0, chi)
    return np.where(small, t * (1.0 - x * x / 6.0), np.sin(x) / safe)


def block_propagators(params: ChainParams, basis: ModeBasis, t: float) -> np.ndarray:
    """exp(−i H_j t) for every mode, shape (N, 2, 2), ordered (photon, atom)."""
    eig = block_eigensystem(params, basis)
    g = params.atom_photon_coupling
    c = np.cos(eig.chi * t)
    s = _sin_over_chi(eig.chi, t)
    phase = np.exp(-0.5j * (basis.mode_freqs + params.atom_freq) * t)
    half_delta = eig.detuning / 2.0
    out = np.empty((basis.n, 2, 2), dtype=complex)
    out[:, 0, 0] = phase * (c + 1j * half_delta * s)
    out[:, 1, 1] = phase * (c - 1j * half_delta * s)
    out[:, 0, 1] = out[:, 1, 0] = phase * (-1j * g * s)
    return out


def evolve_exact(state: SingleExcitationState, t: float, params: ChainParams,
                 basis: ModeBasis | None = None) -> SingleExcitationState:
    """Evolve by the closed-form 2×2 block solution in the mode basis."""
    basis = basis or mode_basis(params)
    modes = to_delocalized(state, basis)
    blocks = block_propagators(params, basis, t)
    alpha = blocks[:, 0, 0] * modes.photon_modes + blocks[:, 0, 1] * modes.atom_modes
    beta = blocks[:, 1, 0] * modes.photon_modes + blocks[:, 1, 1] * modes.atom_modes
    return from_delocalized(DelocalizedState(alpha, beta), basis)


def exact_propagator(params: ChainParams, t: float, basis: ModeBasis | None = None) -> np.ndarray:
    """Full 2N×2N site-basis propagator assembled from the mode blocks."""
    basis = basis or mode_basis(params)
    w = basis.transform
    w_inv = w.conj().T
    blocks = block_propagators(params, basis, t)
    n = basis.n
    out = np.empty((2 * n, 2 * n), dtype=complex)
    for r in range(2):
        for c in range(2):
            out[r * n:(r + 1) * n, c * n:(c + 1) * n] = (w_inv * blocks[:, r, c]) @ w
    return out


def single_excitation_hamiltonian(params: ChainParams) -> np.ndarray:
    """H restricted to {|G⟩⊗|1_j⟩} ∪ {|e_j⟩⊗|0⟩}, photons first."""
    n = params.n_cavities
    eye = np.eye(n)
    g = params.atom_photon_coupling
    top = params.cavity_freq * eye + params.hop_strength * coupling_matrix(params)
    return np.block([[top, g * eye], [g * eye, params.atom_freq * eye]])


def dense_oracle_evolve(state: SingleExcitationState, t: float,
                        params: ChainParams) -> SingleExcitationState:
    """Reference evolution by Hermitian eigendecomposition of the dense sector matrix."""
    if params.n_cavities > ORACLE_MAX_N:
        raise ValueError(f"dense oracle limited to N <= {ORACLE_MAX_N}")
    if state.n != params.n_cavities:
        raise ValueError("state dimension does not match the chain")
    energies, vecs = np.linalg.eigh(single_excitation_hamiltonian(params))
    coeffs = vecs.conj().T @ state.as_vector()
    return SingleExcitationState.from_vector(vecs @ (np.exp(-1j * energies * t) * coeffs))


def shift_apply(state: SingleExcitationState, steps: int,
                topology: Topology = Topology.CYCLIC_UNIFORM) -> SingleExcitationState:
    """Apply τ^steps, where τ|1_j⟩ = |1_{j+1}⟩ and τ|e_j⟩ = |e_{j+1}⟩ (indices mod N)."""
    if Topology(topology) is not Topology.CYCLIC_UNIFORM:
        raise TopologyError("the shift operator is only a symmetry of the cyclic chain")
    return SingleExcitationState(np.roll(state.photon_amps, steps), np.roll(state.atom_amps, steps))


def norm_drift(state: SingleExcitationState, evolved: SingleExcitationState) -> float:
    return abs(evolved.norm() - state.norm())


def mode_index_pairs(n: int) -> list[tuple[int, int]]:
    """Degenerate cyclic mode pairs (j, N−j) with 0 < j < N/2."""
    return [(j, n - j) for j in range(1, math.ceil(n / 2)) if j != n - j]
