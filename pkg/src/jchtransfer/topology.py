"""Chain geometry: coupling matrices, diagonalizing transforms and mode spectra."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from jchtransfer.krawtchouk import MAX_DEGREE, normalized_krawtchouk_matrix

UNITARITY_TOL = 1e-12
DIAG_TOL = 1e-10
MAX_KRAWTCHOUK_N = MAX_DEGREE + 1


class Topology(str, Enum):
    CYCLIC_UNIFORM = "cyclic_uniform"
    LINEAR_PARABOLIC = "linear_parabolic"


@dataclass(frozen=True)
class ChainParams:
    """Physical configuration of a Jaynes-Cummings-Hubbard array.

    Frequencies are angular frequencies in a common (arbitrary) unit.
    """

    n_cavities: int
    atom_freq: float
    cavity_freq: float
    atom_photon_coupling: float
    hop_strength: float
    topology: Topology = Topology.CYCLIC_UNIFORM

    def __post_init__(self):
        if isinstance(self.n_cavities, bool) or int(self.n_cavities) != self.n_cavities:
            raise ValueError(f"n_cavities must be an integer, got {self.n_cavities!r}")
        object.__setattr__(self, "n_cavities", int(self.n_cavities))
        if self.n_cavities < 2:
            raise ValueError(f"n_cavities must be >= 2, got {self.n_cavities}")
        for name in ("atom_freq", "cavity_freq", "atom_photon_coupling", "hop_strength"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.atom_photon_coupling < 0:
            raise ValueError("atom_photon_coupling must be >= 0")
        object.__setattr__(self, "topology", Topology(self.topology))

    @property
    def detuning(self) -> float:
        """Atom-cavity detuning ε − Ω."""
        return self.atom_freq - self.cavity_freq

    def replace(self, **changes) -> "ChainParams":
        fields = dict(
            n_cavities=self.n_cavities,
            atom_freq=self.atom_freq,
            cavity_freq=self.cavity_freq,
            atom_photon_coupling=self.atom_photon_coupling,
            hop_strength=self.hop_strength,
            topology=self.topology,
        )
        fields.update(changes)
        return ChainParams(**fields)


@dataclass(frozen=True)
class ModeBasis:
    """Diagonalizing transform plus the delocalized-mode spectrum.

    ``transform`` maps localized column vectors to delocalized ones
    (rows index modes, columns index sites).
    """

    transform: np.ndarray
    mode_freqs: np.ndarray
    detunings: np.ndarray

    @property
    def n(self) -> int:
        return self.transform.shape[0]


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def coupling_matrix(params: ChainParams) -> np.ndarray:
    """Dimensionless hopping adjacency C; the hopping term is κ·C."""
    n = params.n_cavities
    c = np.zeros((n, n))
    if params.topology is Topology.CYCLIC_UNIFORM:
        # at N=2 the wrap edge and the nearest-neighbour edge coincide: one edge
        for j in range(n):
            c[j, (j + 1) % n] = c[(j + 1) % n, j] = 1.0
    else:
        for j in range(1, n):
            c[j, j - 1] = c[j - 1, j] = math.sqrt(j * (n - j))
    return _frozen(c)


@lru_cache(maxsize=128)
def dft_matrix(n: int) -> np.ndarray:
    """U[j, k] = ω^{jk}/√n with ω = exp(2πi/n)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    jk = np.outer(np.arange(n), np.arange(n)) % n
    return _frozen(np.exp(2j * np.pi * jk / n) / math.sqrt(n))


@lru_cache(maxsize=128)
def krawtchouk_basis(n: int) -> np.ndarray:
    """Symmetric orthogonal matrix U[j, k] = K̃_k(j; 1/2, n−1)."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if n > MAX_KRAWTCHOUK_N:
        raise OverflowError(
            f"Krawtchouk basis supported for N <= {MAX_KRAWTCHOUK_N}, got {n}"
        )
    return _frozen(np.array(normalized_krawtchouk_matrix(n - 1), dtype=float))


def _ring_cos(m: int, n: int) -> float:
    # cos(2πm/n) written as a sine so that quarter-turns give exact zeros
    return math.sin(math.pi * (n - 4 * m) / (2 * n))


def hop_spectrum(params: ChainParams) -> np.ndarray:
    """Eigenvalues of C in mode order."""
    n = params.n_cavities
    if params.topology is Topology.CYCLIC_UNIFORM:
        if n == 2:
            return np.array([1.0, -1.0])
        # evaluate on min(j, n-j) so that degenerate pairs are bitwise equal
        return np.array([2.0 * _ring_cos(min(j, n - j), n) for j in range(n)])
    return np.array([float(n - 1 - 2 * j) for j in range(n)])


def mode_frequencies(params: ChainParams) -> tuple[np.ndarray, np.ndarray]:
    """Delocalized photon eigenfrequencies Ω_j and detunings Δ_j = ε − Ω_j."""
    freqs = params.cavity_freq + params.hop_strength * hop_spectrum(params)
    return _frozen(freqs), _frozen(params.atom_freq - freqs)


def mode_basis(params: ChainParams) -> ModeBasis:
    n = params.n_cavities
    if params.topology is Topology.CYCLIC_UNIFORM:
        w = dft_matrix(n)
    else:
        w = krawtchouk_basis(n)
    freqs, detunings = mode_frequencies(params)
    return ModeBasis(transform=w, mode_freqs=freqs, detunings=detunings)
