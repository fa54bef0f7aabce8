"""Closed-form approximate propagators for the limiting regimes.

Every regime is available in two shapes:

* the site-space formulas (kernels acting on localized amplitudes), which are
  the objects one writes down by hand for each limit;
* a generic 2N×2N propagator from :func:`regime_propagator`, built in the mode
  basis, which is what comparisons against exact evolution use.

The two shapes are computed independently, and the tests check that they agree.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from jchtransfer.dynamics import SingleExcitationState, evolve_exact, exact_propagator
from jchtransfer.errors import (
    DegenerateModeError,
    RegimePreconditionError,
    SingularDetuningError,
    TopologyError,
    TruncationError,
)
from jchtransfer.specfun import BESSEL_N_MAX, bessel_j_orders, hyp2f1_terminating_coeffs
from jchtransfer.topology import (
    ChainParams,
    Topology,
    dft_matrix,
    krawtchouk_basis,
    mode_basis,
    mode_frequencies,
)

DETUNING_FLOOR = 1e-9
REGIME_TOL_C = 20.0
BESSEL_SHELL_TOL = 1e-14
UNIT_CIRCLE_TOL = 1e-9


class RegimeKind(str, Enum):
    LARGE_HOPPING = "large_hopping"
    LARGE_DETUNING = "large_detuning"
    RESONANCE_NONDEGENERATE = "resonance_nondegenerate"
    RESONANCE_DEGENERATE = "resonance_degenerate"
    PARABOLIC_LARGE_HOPPING = "parabolic_large_hopping"
    PARABOLIC_DISPERSION_FREE = "parabolic_dispersion_free"
    PARABOLIC_LARGE_DETUNING = "parabolic_large_detuning"
    PARABOLIC_RESONANCE = "parabolic_resonance"


class KernelMode(str, Enum):
    FULL = "full"
    DISPERSION_FREE = "dispersion_free"
    LARGE_DETUNING = "large_detuning"


class Channel(str, Enum):
    PHOTON = "photon"
    ATOM = "atom"


_CYCLIC_KINDS = {
    RegimeKind.LARGE_HOPPING,
    RegimeKind.LARGE_DETUNING,
    RegimeKind.RESONANCE_NONDEGENERATE,
    RegimeKind.RESONANCE_DEGENERATE,
}
RESONANT_KINDS = frozenset({
    RegimeKind.RESONANCE_NONDEGENERATE,
    RegimeKind.RESONANCE_DEGENERATE,
    RegimeKind.PARABOLIC_RESONANCE,
})


def regime_topology(kind: RegimeKind) -> Topology:
    return Topology.CYCLIC_UNIFORM if RegimeKind(kind) in _CYCLIC_KINDS else Topology.LINEAR_PARABOLIC


# ---------------------------------------------------------------- validity


@dataclass(frozen=True)
class ValidityReport:
    """Dimensionless ratios a regime assumes small, and the resulting tolerance."""

    ratios: dict[str, float]
    worst_name: str
    worst: float
    tolerance: float

    def as_dict(self) -> dict:
        return {"ratios": dict(self.ratios), "worst_name": self.worst_name,
                "worst": self.worst, "tolerance": self.tolerance}


def regime_tolerance(worst_ratio: float) -> float:
    return REGIME_TOL_C * worst_ratio ** 2


def _ratio(num: float, den: float) -> float:
    num, den = abs(num), abs(den)
    if num == 0.0:
        return 0.0
    return math.inf if den == 0.0 else num / den


@dataclass(frozen=True)
class RegimeSpec:
    """A limiting regime, plus the resonant mode index for the resonance kinds.

    ``dispersive`` selects, for resonance kinds, whether the g²/Δ Stark phases
    of the off-resonant modes are kept (True) or dropped (False).
    """

    kind: RegimeKind
    mode: int | None = None
    dispersive: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", RegimeKind(self.kind))
        if self.kind in RESONANT_KINDS:
            if self.mode is None:
                raise ValueError(f"{self.kind.value} needs a resonant mode index")
            object.__setattr__(self, "mode", int(self.mode))
        elif self.mode is not None:
            raise ValueError(f"{self.kind.value} takes no mode index")

    @property
    def topology(self) -> Topology:
        return regime_topology(self.kind)

    def resonant_modes(self, n: int) -> tuple[int, ...]:
        if self.kind not in RESONANT_KINDS:
            return ()
        if self.kind is RegimeKind.RESONANCE_DEGENERATE:
            return (self.mode % n, (n - self.mode) % n)
        return (self.mode % n,)

    def validity_ratios(self, params: ChainParams) -> dict[str, float]:
        _require_topology(params, self.topology)
        n = params.n_cavities
        g = params.atom_photon_coupling
        _, det = mode_frequencies(params)
        out: dict[str, float] = {}
        if self.kind in (RegimeKind.LARGE_DETUNING, RegimeKind.PARABOLIC_LARGE_DETUNING):
            out["kappa/|delta|"] = _ratio(params.hop_strength, params.detuning)
            out["g/|delta|"] = _ratio(g, params.detuning)
            return out
        resonant = self.resonant_modes(n)
        for ell in resonant[:1]:
            _check_mode_index(ell, n)
            out[f"|Delta_{ell}|/g"] = _ratio(det[ell], g)
        for j in range(n):
            if j not in resonant:
                out[f"g/|Delta_{j}|"] = _ratio(g, det[j])
        return out

    def validity_report(self, params: ChainParams) -> ValidityReport:
        ratios = self.validity_ratios(params)
        worst_name = max(ratios, key=lambda k: ratios[k]) if ratios else ""
        worst = ratios[worst_name] if ratios else 0.0
        return ValidityReport(ratios=ratios, worst_name=worst_name, worst=worst,
                              tolerance=regime_tolerance(worst))


# ---------------------------------------------------------------- helpers


def _require_topology(params: ChainParams, topology: Topology) -> None:
    if params.topology is not topology:
        raise TopologyError(f"needs a {topology.value} chain, got {params.topology.value}")


def _check_mode_index(ell: int, n: int) -> None:
    if not 0 <= ell < n:
        raise ValueError(f"mode index {ell} outside 0..{n - 1}")


def _check_detunings(detunings: np.ndarray, skip: Sequence[int] = ()) -> None:
    for j, d in enumerate(detunings):
        if j not in skip and abs(d) < DETUNING_FLOOR:
            raise SingularDetuningError(j, float(d), DETUNING_FLOOR)


def _check_delta(params: ChainParams) -> None:
    if abs(params.detuning) < DETUNING_FLOOR:
        raise SingularDetuningError(-1, params.detuning, DETUNING_FLOOR)


def _stark(g: float, detunings: np.ndarray) -> np.ndarray:
    if g == 0.0:
        return np.zeros_like(detunings)
    return g * g / detunings


def _ring_hop_scale(n: int) -> float:
    # hopping eigenvalue is scale·cos(2πℓ/N); the N=2 ring has a single edge
    return 1.0 if n == 2 else 2.0


def _circulant(first_column: np.ndarray) -> np.ndarray:
    n = first_column.shape[0]
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return first_column[idx]


@dataclass(frozen=True)
class KernelMatrix:
    """Sector-diagonal propagator: a(t) = photon·a(0), b(t) = atom·b(0)."""

    photon: np.ndarray
    atom: np.ndarray
    time: float

    def apply(self, state: SingleExcitationState) -> SingleExcitationState:
        return SingleExcitationState(self.photon @ state.photon_amps, self.atom @ state.atom_amps)

    def as_propagator(self) -> np.ndarray:
        n = self.photon.shape[0]
        out = np.zeros((2 * n, 2 * n), dtype=complex)
        out[:n, :n] = self.photon
        out[n:, n:] = self.atom
        return out


# ---------------------------------------------------------------- cyclic chain


def kernel_large_hopping_cyclic(params: ChainParams, t: float) -> KernelMatrix:
    """Decoupled-sector kernels of the ring when every |g/Δ_j| is small.

    K(j, k) = (1/N) Σ_ℓ exp[−i(2π(j−k)ℓ/N + E_ℓ t)], with E_ℓ = Ω_ℓ − g²/Δ_ℓ
    for photons and ε + g²/Δ_ℓ for atoms.
    """
    _require_topology(params, Topology.CYCLIC_UNIFORM)
    n = params.n_cavities
    freqs, det = mode_frequencies(params)
    g = params.atom_photon_coupling
    if g != 0.0:
        _check_detunings(det)
    shift = _stark(g, det)
    ell = np.arange(n)
    m = np.arange(n)
    # exp(−2πi mℓ/N) with the exponent reduced mod N before scaling
    fourier = np.exp(-2j * np.pi * ((m[:, None] * ell[None, :]) % n) / n) / n
    photon_col = fourier @ np.exp(-1j * (freqs - shift) * t)
    atom_col = fourier @ np.exp(-1j * (params.atom_freq + shift) * t)
    return KernelMatrix(_circulant(photon_col), _circulant(atom_col), float(t))


def bessel_ring_sum(n: int, x: float) -> np.ndarray:
    """S_j = Σ_ν (−i)^{j+νN} J_{j+νN}(x) for j = 0…N−1.

    Shells ν = ±s are added until two consecutive shells contribute less than
    BESSEL_SHELL_TOL in norm. Orders are capped at the Bessel range.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    jv = bessel_j_orders(x, BESSEL_N_MAX)
    # (−i)^m J_m(x) for m < 0 equals (−i)^{|m|} J_{|m|}(x)
    term = (-1j) ** (np.arange(BESSEL_N_MAX + 1) % 4) * jv
    # orders past the cap may be dropped only if |J_m(x)| <= (|x|/2)^m / m! proves them negligible
    m_out = BESSEL_N_MAX + 1
    tail_ok = (abs(x) / 2.0 < m_out
               and m_out * math.log(max(abs(x) / 2.0, 1e-300)) - math.lgamma(m_out + 1)
               < math.log(BESSEL_SHELL_TOL))
    out = term[:n].astype(complex)
    quiet = 0
    shell = 1
    while quiet < 2:
        if shell * n - n + 1 > BESSEL_N_MAX or shell * n + n - 1 > BESSEL_N_MAX and not tail_ok:
            if tail_ok:
                break
            raise TruncationError(
                f"ring sum not converged at order {BESSEL_N_MAX} for x={x!r}, N={n}")
        contrib = np.zeros(n, dtype=complex)
        for j in range(n):
            for order in (shell * n + j, shell * n - j):
                if order <= BESSEL_N_MAX:
                    contrib[j] += term[order]
        out += contrib
        quiet = quiet + 1 if np.linalg.norm(contrib) < BESSEL_SHELL_TOL else 0
        shell += 1
    return out


def kernel_large_detuning_cyclic(params: ChainParams, t: float) -> np.ndarray:
    """Photon amplitudes a_j(t) for a photon initially in cavity 0, when δ ≫ κ, g.

    a_j(t) = exp[−i(Ω − g²/δ)t] Σ_ν (−i)^{j+νN} J_{j+νN}[2κ(1 − g²/δ²)t];
    the atoms stay unexcited.
    """
    _require_topology(params, Topology.CYCLIC_UNIFORM)
    _check_delta(params)
    g, d = params.atom_photon_coupling, params.detuning
    n = params.n_cavities
    x = _ring_hop_scale(n) * params.hop_strength * (1.0 - (g / d) ** 2) * t
    return np.exp(-1j * (params.cavity_freq - g * g / d) * t) * bessel_ring_sum(n, x)


def kernel_large_detuning_cyclic_matrix(params: ChainParams, t: float) -> KernelMatrix:
    """Both sector kernels of the large-detuning ring, as circulant matrices.

    The atomic kernel has the same Bessel form, with argument 2κg²t/δ² and
    carrier frequency ε + g²/δ.
    """
    photon_col = kernel_large_detuning_cyclic(params, t)
    g, d = params.atom_photon_coupling, params.detuning
    n = params.n_cavities
    xb = _ring_hop_scale(n) * params.hop_strength * (g / d) ** 2 * t
    atom_col = np.exp(-1j * (params.atom_freq + g * g / d) * t) * bessel_ring_sum(n, xb)
    return KernelMatrix(_circulant(photon_col), _circulant(atom_col), float(t))


def green_propagator(params: ChainParams) -> np.ndarray:
    """G(j) = (1/N) Σ_k ω^{−jk} / Δ_k."""
    _require_topology(params, Topology.CYCLIC_UNIFORM)
    _, det = mode_frequencies(params)
    _check_detunings(det)
    return dft_matrix(params.n_cavities).conj() @ (1.0 / det) / math.sqrt(params.n_cavities)


def _resonant_rotation(params: ChainParams, detuning: float, t: float) -> tuple[complex, float, float]:
    """(carrier phase, cos, sin) of the near-resonant 2×2 rotation."""
    g = params.atom_photon_coupling
    if g == 0.0:
        if detuning != 0.0:
            raise RegimePreconditionError("near-resonance formulas need g > 0 unless Δ_ℓ = 0")
        rate = 0.0
    else:
        rate = g + detuning ** 2 / (8.0 * g)
    carrier = cmath.exp(-1j * (params.atom_freq - detuning / 2.0) * t)
    return carrier, math.cos(rate * t), math.sin(rate * t)


def _resonance_site_formula(params: ChainParams, projectors: np.ndarray, resonant: Sequence[int],
                            t: float, atom_amps, dispersive: bool):
    """Near-resonance evolution from atomic initial data, in the site basis.

    ``projectors[n]`` is the site-space projector onto mode n.
    """
    n = params.n_cavities
    b0 = np.asarray(atom_amps, dtype=complex).reshape(-1)
    if b0.shape[0] != n:
        raise ValueError(f"expected {n} atomic amplitudes, got {b0.shape[0]}")
    _, det = mode_frequencies(params)
    g = params.atom_photon_coupling
    off = [m for m in range(n) if m not in resonant]
    if dispersive and g != 0.0:
        _check_detunings(det, skip=resonant)
    carrier, cos_r, sin_r = _resonant_rotation(params, float(det[resonant[0]]), t)
    p_res = sum(projectors[m] for m in resonant)
    a = -1j * carrier * sin_r * (p_res @ b0)
    kernel_b = carrier * cos_r * p_res
    for m in off:
        shift = g * g / det[m] if (dispersive and g != 0.0) else 0.0
        kernel_b = kernel_b + np.exp(-1j * (params.atom_freq + shift) * t) * projectors[m]
    return a, kernel_b @ b0


def _dft_projectors(n: int) -> np.ndarray:
    w = dft_matrix(n)
    # projector onto mode m: (1/N) ω^{−m(j−k)}
    return np.einsum("mj,mk->mjk", w.conj(), w)


def resonance_cyclic_nondegenerate(params: ChainParams, ell: int, t: float, atom_amps,
                                   dispersive: bool = True):
    """Ring evolution with the atoms resonant with the nondegenerate mode ℓ (0 or N/2).

    Returns (a(t), b(t)) for a(0) = 0 and b(0) = ``atom_amps``.
    """
    _require_topology(params, Topology.CYCLIC_UNIFORM)
    n = params.n_cavities
    _check_mode_index(ell, n)
    if ell != (n - ell) % n:
        raise DegenerateModeError(f"mode {ell} is degenerate with mode {n - ell}")
    return _resonance_site_formula(params, _dft_projectors(n), (ell,), t, atom_amps, dispersive)


def resonance_cyclic_degenerate(params: ChainParams, ell: int, t: float, atom_amps,
                                dispersive: bool = True):
    """Ring evolution with the atoms resonant with the degenerate pair {ℓ, N−ℓ}.

    The pair acts through (2/N) cos(2πℓ(j−k)/N), the clockwise plus
    anticlockwise superposition.
    """
    _require_topology(params, Topology.CYCLIC_UNIFORM)
    n = params.n_cavities
    _check_mode_index(ell, n)
    if ell == (n - ell) % n:
        raise DegenerateModeError(f"mode {ell} is nondegenerate")
    return _resonance_site_formula(params, _dft_projectors(n), (ell, n - ell), t, atom_amps,
                                   dispersive)


# ---------------------------------------------------------------- parabolic chain


@lru_cache(maxsize=None)
def _integer_coeffs(j: int, k: int, n: int) -> tuple[tuple[int, ...], int]:
    coeffs = hyp2f1_terminating_coeffs(j, k, n)
    common = math.lcm(*(c.denominator for c in coeffs))
    return tuple(int(c * common) for c in coeffs), common


class _HalfAngleTables:
    """Exact powers of s² = sin²(θ/2) and c² = cos²(θ/2) as integers over 2^e.

    The smaller of s², c² is taken exactly from its double; the other is
    defined as one minus it, so the two remain exactly complementary.
    """

    def __init__(self, theta: float, n: int):
        half = theta / 2.0
        self.s = math.sin(half)
        self.c = math.cos(half)
        self.carrier = cmath.exp(1j * half * (n - 1))
        if self.s * self.s <= self.c * self.c:
            y, d = (self.s * self.s).as_integer_ratio()
            yc = d - y
        else:
            yc, d = (self.c * self.c).as_integer_ratio()
            y = d - yc
        self.y_pow = [1]
        self.yc_pow = [1]
        self.d_pow = [1]
        for _ in range(n):
            self.y_pow.append(self.y_pow[-1] * y)
            self.yc_pow.append(self.yc_pow[-1] * yc)
            self.d_pow.append(self.d_pow[-1] * d)


def _closed_form_entry(j: int, k: int, n: int, tab: _HalfAngleTables) -> complex:
    if j + k > n - 1:
        # mirror symmetry of the Krawtchouk matrix: f_{j,k} = f_{N−1−j, N−1−k}
        j, k = n - 1 - j, n - 1 - k
    r = j + k
    e = n - 1 - r
    p, q = r // 2, e // 2
    ints, common = _integer_coeffs(j, k, n)
    num = 0
    for m, cm in enumerate(ints):
        num += cm * tab.y_pow[p - m] * tab.d_pow[m]
    value = (num * tab.yc_pow[q]) / (common * tab.d_pow[p + q])
    value *= math.sqrt(math.comb(n - 1, j)) * math.sqrt(math.comb(n - 1, k))
    value *= tab.s ** (r - 2 * p) * tab.c ** (e - 2 * q)
    return (-1j) ** (r % 4) * tab.carrier * value


def _phase_of_unit(z: complex) -> float:
    z = complex(z)
    if abs(abs(z) - 1.0) > UNIT_CIRCLE_TOL:
        raise ValueError(f"z must lie on the unit circle, |z| = {abs(z)!r}")
    return cmath.phase(z)


def parabolic_closed_form_f(j: int, k: int, n: int, z: complex) -> complex:
    """f_{j,k} = Σ_ℓ U_{jℓ} U_{kℓ} z^ℓ summed in closed form, for |z| = 1.

    On the unit circle z = e^{iθ}, the hypergeometric argument −4z/(1−z)² is
    the real number 1/sin²(θ/2), and the prefactor (1−z)^{j+k} cancels its
    poles. Multiplying through gives a polynomial in s² = sin²(θ/2) and
    c² = cos²(θ/2), which is evaluated in exact integer arithmetic. At z = 1
    this yields δ_jk with no special branch.
    """
    if not (0 <= j < n and 0 <= k < n):
        raise ValueError(f"need 0 <= j, k <= N-1 = {n - 1}")
    return _closed_form_entry(j, k, n, _HalfAngleTables(_phase_of_unit(z), n))


def parabolic_closed_form_matrix(n: int, theta: float) -> np.ndarray:
    """The matrix f_{j,k}(z = e^{iθ}) for all j, k, via the closed form."""
    if n < 1:
        raise ValueError("n must be >= 1")
    tab = _HalfAngleTables(float(theta), n)
    out = np.empty((n, n), dtype=complex)
    for j in range(n):
        for k in range(j, n):
            out[j, k] = out[k, j] = _closed_form_entry(j, k, n, tab)
    return out


def parabolic_spectral_matrix(n: int, theta: float) -> np.ndarray:
    """Σ_ℓ U_{jℓ} U_{kℓ} e^{iℓθ} summed over modes."""
    u = krawtchouk_basis(n)
    return (u * np.exp(1j * theta * np.arange(n))) @ u.T


def parabolic_kernel(params: ChainParams, t: float, mode: KernelMode = KernelMode.FULL,
                     method: str = "spectral") -> KernelMatrix:
    """Sector kernels of the parabolic chain.

    ``FULL`` keeps the exact g²/Δ̂_ℓ shifts in the exponent (spectral sum only).
    ``DISPERSION_FREE`` drops the atom-photon coupling. ``LARGE_DETUNING`` keeps
    the shifts to first order in κ/δ, which rescales Ω and κ.
    """
    _require_topology(params, Topology.LINEAR_PARABOLIC)
    mode = KernelMode(mode)
    if method not in ("spectral", "closed_form"):
        raise ValueError(f"unknown method {method!r}")
    n = params.n_cavities
    g, kappa = params.atom_photon_coupling, params.hop_strength
    if mode is KernelMode.FULL:
        if method != "spectral":
            raise ValueError("the full kernel has no closed form; use method='spectral'")
        freqs, det = mode_frequencies(params)
        if g != 0.0:
            _check_detunings(det)
        shift = _stark(g, det)
        u = krawtchouk_basis(n)
        photon = (u * np.exp(-1j * (freqs - shift) * t)) @ u.T
        atom = (u * np.exp(-1j * (params.atom_freq + shift) * t)) @ u.T
        return KernelMatrix(photon, atom, float(t))

    summed = parabolic_spectral_matrix if method == "spectral" else parabolic_closed_form_matrix
    if mode is KernelMode.DISPERSION_FREE:
        carrier = cmath.exp(-1j * (params.cavity_freq + kappa * (n - 1)) * t)
        photon = carrier * summed(n, 2.0 * kappa * t)
        atom = cmath.exp(-1j * params.atom_freq * t) * np.eye(n, dtype=complex)
        return KernelMatrix(photon, atom, float(t))

    _check_delta(params)
    d = params.detuning
    omega_p = params.cavity_freq - g * g / d
    kappa_p = kappa * (1.0 - (g / d) ** 2)
    kappa_b = kappa * (g / d) ** 2
    photon = cmath.exp(-1j * (omega_p + kappa_p * (n - 1)) * t) * summed(n, 2.0 * kappa_p * t)
    atom = (cmath.exp(-1j * (params.atom_freq + g * g / d + kappa_b * (n - 1)) * t)
            * summed(n, 2.0 * kappa_b * t))
    return KernelMatrix(photon, atom, float(t))


def resonance_parabolic(params: ChainParams, ell: int, t: float, atom_amps,
                        dispersive: bool = True):
    """Parabolic-chain evolution with the atoms resonant with mode ℓ.

    Returns (a(t), b(t)) for a(0) = 0 and b(0) = ``atom_amps``.
    """
    _require_topology(params, Topology.LINEAR_PARABOLIC)
    n = params.n_cavities
    _check_mode_index(ell, n)
    u = krawtchouk_basis(n)
    projectors = np.einsum("jm,km->mjk", u, u).astype(complex)
    return _resonance_site_formula(params, projectors, (ell,), t, atom_amps, dispersive)


@dataclass(frozen=True)
class TransferBoundReport:
    times: np.ndarray
    end_amplitude: np.ndarray
    max_fidelity: float
    argmax_time: float
    tolerance: float
    bound_holds: bool
    unit_transfer: bool


def parabolic_transfer_bound_check(params: ChainParams, t_grid, tol: float | None = None,
                                   unit_tol: float = 1e-9) -> TransferBoundReport:
    """|a_{N−1}(t)| for a photon started in cavity 0, under the full parabolic kernel.

    The bound |a_{N−1}| ≤ 1 is checked to ``tol`` (the regime tolerance by
    default). ``unit_transfer`` records whether the peak reaches 1 within
    ``unit_tol``.
    """
    if tol is None:
        tol = RegimeSpec(RegimeKind.PARABOLIC_LARGE_HOPPING).validity_report(params).tolerance
    times = np.asarray(t_grid, dtype=float).reshape(-1)
    n = params.n_cavities
    amps = np.array([abs(parabolic_kernel(params, t).photon[n - 1, 0]) for t in times])
    i = int(np.argmax(amps))
    peak = float(amps[i])
    return TransferBoundReport(times=times, end_amplitude=amps, max_fidelity=peak,
                               argmax_time=float(times[i]), tolerance=float(tol),
                               bound_holds=bool(peak <= 1.0 + tol),
                               unit_transfer=bool(peak >= 1.0 - unit_tol))


# ---------------------------------------------------------------- generic propagators


def _resonance_mode_propagator(spec: RegimeSpec, params: ChainParams, t: float) -> np.ndarray:
    """Near-resonance propagator for arbitrary initial data, built mode by mode."""
    basis = mode_basis(params)
    n = basis.n
    resonant = spec.resonant_modes(n)
    for ell in resonant:
        _check_mode_index(ell, n)
    if spec.kind is RegimeKind.RESONANCE_NONDEGENERATE and resonant[0] != (n - resonant[0]) % n:
        raise DegenerateModeError(f"mode {resonant[0]} is degenerate")
    if spec.kind is RegimeKind.RESONANCE_DEGENERATE and resonant[0] == resonant[1]:
        raise DegenerateModeError(f"mode {resonant[0]} is nondegenerate")
    g = params.atom_photon_coupling
    det = basis.detunings
    keep_stark = spec.dispersive and g != 0.0
    if keep_stark:
        _check_detunings(det, skip=resonant)
    carrier, cos_r, sin_r = _resonant_rotation(params, float(det[resonant[0]]), t)
    blocks = np.zeros((n, 2, 2), dtype=complex)
    for m in range(n):
        if m in resonant:
            blocks[m] = carrier * np.array([[cos_r, -1j * sin_r], [-1j * sin_r, cos_r]])
        else:
            shift = g * g / det[m] if keep_stark else 0.0
            blocks[m, 0, 0] = np.exp(-1j * (basis.mode_freqs[m] - shift) * t)
            blocks[m, 1, 1] = np.exp(-1j * (params.atom_freq + shift) * t)
    w = basis.transform
    w_inv = w.conj().T
    out = np.empty((2 * n, 2 * n), dtype=complex)
    for r in range(2):
        for c in range(2):
            out[r * n:(r + 1) * n, c * n:(c + 1) * n] = (w_inv * blocks[:, r, c]) @ w
    return out


def regime_kernel(spec: RegimeSpec, params: ChainParams, t: float) -> KernelMatrix:
    """Sector-diagonal kernel for the non-resonant regimes."""
    _require_topology(params, spec.topology)
    kind = spec.kind
    if kind is RegimeKind.LARGE_HOPPING:
        return kernel_large_hopping_cyclic(params, t)
    if kind is RegimeKind.LARGE_DETUNING:
        return kernel_large_detuning_cyclic_matrix(params, t)
    if kind is RegimeKind.PARABOLIC_LARGE_HOPPING:
        return parabolic_kernel(params, t, KernelMode.FULL)
    if kind is RegimeKind.PARABOLIC_DISPERSION_FREE:
        return parabolic_kernel(params, t, KernelMode.DISPERSION_FREE)
    if kind is RegimeKind.PARABOLIC_LARGE_DETUNING:
        return parabolic_kernel(params, t, KernelMode.LARGE_DETUNING)
    raise ValueError(f"{kind.value} mixes the sectors; use regime_propagator")


def regime_propagator(spec: RegimeSpec, params: ChainParams, t: float) -> np.ndarray:
    """2N×2N site-basis propagator of the regime, ordered photons then atoms."""
    _require_topology(params, spec.topology)
    if spec.kind in RESONANT_KINDS:
        return _resonance_mode_propagator(spec, params, t)
    return regime_kernel(spec, params, t).as_propagator()


EvolutionPath = Callable[[SingleExcitationState, float], SingleExcitationState]


def make_evolution_path(params: ChainParams, spec: RegimeSpec | None = None) -> EvolutionPath:
    """State-to-state map for exact evolution (spec None) or a regime."""
    if spec is None:
        basis = mode_basis(params)
        return lambda state, t: evolve_exact(state, t, params, basis)

    def path(state: SingleExcitationState, t: float) -> SingleExcitationState:
        return SingleExcitationState.from_vector(regime_propagator(spec, params, t) @ state.as_vector())

    return path


@dataclass(frozen=True)
class EvolutionResult:
    times: np.ndarray
    states: tuple[SingleExcitationState, ...]

    def photon_populations(self) -> np.ndarray:
        return np.array([np.abs(s.photon_amps) ** 2 for s in self.states])

    def atom_populations(self) -> np.ndarray:
        return np.array([np.abs(s.atom_amps) ** 2 for s in self.states])


def run_evolution(path: EvolutionPath, initial: SingleExcitationState, t_grid) -> EvolutionResult:
    times = np.asarray(t_grid, dtype=float).reshape(-1)
    return EvolutionResult(times, tuple(path(initial, float(t)) for t in times))


@dataclass(frozen=True)
class FidelityCurve:
    times: np.ndarray
    values: np.ndarray
    peak: float
    argmax_time: float


def transfer_fidelity(path: EvolutionPath, n: int, source: int, target: int,
                      channel: Channel, t_grid) -> FidelityCurve:
    """|amplitude at target| over the grid for a unit excitation at source.

    Source and target live in the same channel (photon or atom).
    """
    from jchtransfer.dynamics import atom_excitation_at, photon_excitation_at

    channel = Channel(channel)
    for site in (source, target):
        if not 0 <= site < n:
            raise ValueError(f"site {site} outside 0..{n - 1}")
    make = photon_excitation_at if channel is Channel.PHOTON else atom_excitation_at
    initial = make(n, source)
    times = np.asarray(t_grid, dtype=float).reshape(-1)
    values = np.empty(times.shape[0])
    for i, t in enumerate(times):
        state = path(initial, float(t))
        amps = state.photon_amps if channel is Channel.PHOTON else state.atom_amps
        values[i] = abs(amps[target])
    i = int(np.argmax(values))
    return FidelityCurve(times=times, values=values, peak=float(values[i]),
                         argmax_time=float(times[i]))


# ---------------------------------------------------------------- deviation from exact


@dataclass(frozen=True)
class DeviationReport:
    """Sup-norm gap between a regime propagator and exact evolution.

    ``gated`` holds, per time, the largest entry error over the blocks that the
    regime claims to reproduce. ``informational`` covers the remaining blocks,
    which carry O(g/Δ) admixtures the regime neglects by construction.
    """

    times: np.ndarray
    gated: np.ndarray
    informational: np.ndarray
    validity: ValidityReport
    gated_blocks: tuple[str, ...] = field(default=())

    @property
    def max_deviation(self) -> float:
        return float(self.gated.max()) if self.gated.size else 0.0

    @property
    def max_informational(self) -> float:
        return float(self.informational.max()) if self.informational.size else 0.0

    @property
    def tolerance(self) -> float:
        return self.validity.tolerance

    @property
    def passed(self) -> bool:
        return self.max_deviation < self.tolerance


_BLOCKS = {"photon<-photon": (0, 0), "photon<-atom": (0, 1),
           "atom<-photon": (1, 0), "atom<-atom": (1, 1)}


def gated_blocks(spec: RegimeSpec) -> tuple[str, ...]:
    if spec.kind in RESONANT_KINDS:
        return ("atom<-atom",)
    return ("photon<-photon", "atom<-atom")


def regime_deviation(spec: RegimeSpec, params: ChainParams, t_grid) -> DeviationReport:
    times = np.asarray(t_grid, dtype=float).reshape(-1)
    n = params.n_cavities
    basis = mode_basis(params)
    gated_names = gated_blocks(spec)
    gated = np.empty(times.shape[0])
    info = np.empty(times.shape[0])
    for i, t in enumerate(times):
        diff = np.abs(regime_propagator(spec, params, t) - exact_propagator(params, t, basis))
        g_val, i_val = 0.0, 0.0
        for name, (r, c) in _BLOCKS.items():
            block = diff[r * n:(r + 1) * n, c * n:(c + 1) * n].max()
            if name in gated_names:
                g_val = max(g_val, block)
            else:
                i_val = max(i_val, block)
        gated[i], info[i] = g_val, i_val
    return DeviationReport(times=times, gated=gated, informational=info,
                           validity=spec.validity_report(params), gated_blocks=gated_names)
