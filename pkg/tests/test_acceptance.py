"""End-to-end acceptance checks, one line of PASS/FAIL output per criterion.

Run under pytest (the table appears in the terminal summary) or directly with
``python tests/test_acceptance.py``.
"""
from __future__ import annotations

import math
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from jchtransfer.dynamics import (
    atom_excitation_at,
    dense_oracle_evolve,
    evolve_exact,
    exact_propagator,
    from_amplitudes,
    photon_excitation_at,
)
from jchtransfer.regimes import (
    KernelMode,
    RegimeKind,
    RegimeSpec,
    kernel_large_detuning_cyclic,
    kernel_large_detuning_cyclic_matrix,
    kernel_large_hopping_cyclic,
    parabolic_closed_form_matrix,
    parabolic_kernel,
    parabolic_spectral_matrix,
    parabolic_transfer_bound_check,
    regime_deviation,
    resonance_cyclic_degenerate,
    resonance_cyclic_nondegenerate,
    resonance_parabolic,
)
from jchtransfer.topology import (
    DIAG_TOL,
    MAX_KRAWTCHOUK_N,
    UNITARITY_TOL,
    ChainParams,
    Topology,
    coupling_matrix,
    dft_matrix,
    krawtchouk_basis,
    mode_basis,
)

RING, LINE = Topology.CYCLIC_UNIFORM, Topology.LINEAR_PARABOLIC
ROOT = Path(__file__).resolve().parent.parent
REFERENCE_CONFIGS = sorted((ROOT / "configs").glob("*.yaml"))
SEED = 20240607


@dataclass
class Outcome:
    passed: bool
    detail: str


def _random_params(rng, n, topology):
    return ChainParams(n, rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(0, 2),
                       rng.uniform(-2, 2), topology)


def _random_state(rng, n):
    return from_amplitudes(rng.normal(size=2 * n) + 1j * rng.normal(size=2 * n))


def oracle_equivalence() -> Outcome:
    rng = np.random.default_rng(SEED)
    start = time.perf_counter()
    worst = 0.0
    for topology in (RING, LINE):
        for n in (2, 3, 4, 5, 8, 16):
            for _ in range(50):
                p = _random_params(rng, n, topology)
                s = _random_state(rng, n)
                t = rng.uniform(0, 20)
                diff = evolve_exact(s, t, p).as_vector() - dense_oracle_evolve(s, t, p).as_vector()
                worst = max(worst, float(np.abs(diff).max()))
    elapsed = time.perf_counter() - start
    return Outcome(worst < 1e-9 and elapsed < 30,
                   f"max error {worst:.2e} (< 1e-9), {elapsed:.2f} s (< 30 s)")


def parabolic_perfect_transfer() -> Outcome:
    rng = np.random.default_rng(SEED + 1)
    worst = 0.0
    for n in range(2, 17):
        kappa = rng.uniform(0.2, 5)
        p = ChainParams(n, rng.uniform(-3, 3), rng.uniform(-3, 3), 0.0, kappa, LINE)
        for t in (math.pi / (2 * kappa), 3 * math.pi / (2 * kappa)):
            out = evolve_exact(photon_excitation_at(n, 0), t, p)
            worst = max(worst, abs(abs(out.photon_amps[n - 1]) - 1))
    return Outcome(worst < 1e-9, f"max | |a_(N-1)| - 1 | {worst:.2e} (< 1e-9), N = 2..16")


def closed_form_identity() -> Outcome:
    worst = 0.0
    thetas = 2.0 * np.linspace(0.0, math.pi, 64)
    for n in range(2, 33):
        for theta in thetas:
            diff = parabolic_closed_form_matrix(n, theta) - parabolic_spectral_matrix(n, theta)
            worst = max(worst, float(np.abs(diff).max()))
    return Outcome(worst < 1e-10, f"max error {worst:.2e} (< 1e-10), N = 2..32, 64 times")


def binomial_profile() -> Outcome:
    worst = 0.0
    kappa, omega = 1.3, 0.7
    times = np.linspace(0, math.pi / kappa, 32)
    for n in range(2, 17):
        p = ChainParams(n, 0.4, omega, 0.0, kappa, LINE)
        j = np.arange(n)
        binom = np.array([math.comb(n - 1, k) for k in j], dtype=float)
        for t in times:
            s, c = math.sin(kappa * t), math.cos(kappa * t)
            formula = ((-1j) ** j * np.sqrt(binom) * np.exp(-1j * omega * t)
                       * s ** j * c ** (n - 1 - j))
            exact = evolve_exact(photon_excitation_at(n, 0), t, p).photon_amps
            worst = max(worst, float(np.abs(exact - formula).max()))
    return Outcome(worst < 1e-10, f"max error {worst:.2e} (< 1e-10), N = 2..16, 32 times")


def ring_two_site_resonance() -> Outcome:
    # mode 0 resonant (ε = Ω + κ); the other mode sits 2κ away
    g = 1.0
    parts, ok = [], True
    for ratio in (1e-3, 5e-4, 1e-4):
        kappa = g / (2 * ratio)
        p = ChainParams(2, kappa, 0.0, g, kappa, RING)
        exact = abs(evolve_exact(atom_excitation_at(2, 0), math.pi / g, p).atom_amps[1])
        ok &= exact > 1 - 1e-6
        parts.append(f"ratio {ratio:g}: deficit {1 - exact:.2e}")
    _, b = resonance_cyclic_nondegenerate(p, 0, math.pi / g, [1, 0], dispersive=False)
    formula_err = abs(abs(b[1]) - 1)
    ok &= formula_err < 1e-12
    return Outcome(bool(ok), "; ".join(parts) + f" (each < 1e-6); formula |1 - |b_1|| {formula_err:.1e}")


def ring_degenerate_resonance() -> Outcome:
    g = 1.0
    p = ChainParams(4, 0.0, 0.0, g, 25.0, RING)
    ratio = RegimeSpec(RegimeKind.RESONANCE_DEGENERATE, 1).validity_report(p).worst
    _, b = resonance_cyclic_degenerate(p, 1, math.pi / g, [1, 0, 0, 0], dispersive=False)
    formula_err = abs(abs(b[2]) - 1)
    exact_def = 1 - abs(evolve_exact(atom_excitation_at(4, 0), math.pi / g, p).atom_amps[2])
    return Outcome(formula_err < 1e-12 and abs(exact_def) < 5e-3,
                   f"formula |1 - |b_2|| {formula_err:.1e}; exact deficit {exact_def:.2e} (< 5e-3) "
                   f"at ratio {ratio:g}")


def parabolic_three_site_resonance() -> Outcome:
    g = 1.0
    p = ChainParams(3, 0.0, 0.0, g, 25.0, LINE)
    spec = RegimeSpec(RegimeKind.PARABOLIC_RESONANCE, 1)
    u01_sq = krawtchouk_basis(3)[0, 1] ** 2
    _, b = resonance_parabolic(p, 1, math.pi / g, [1, 0, 0], dispersive=False)
    formula_err = abs(abs(b[2]) - 1)
    exact_def = 1 - abs(evolve_exact(atom_excitation_at(3, 0), math.pi / g, p).atom_amps[2])
    rep = regime_deviation(spec, p, np.linspace(0, 2 * math.pi / g, 201))
    ok = (abs(u01_sq - 0.5) < 1e-15 and formula_err < 1e-12
          and abs(exact_def) < rep.tolerance and rep.passed)
    return Outcome(ok, f"U01^2 = {u01_sq:.16f}; formula |1 - |b_2|| {formula_err:.1e}; "
                       f"exact deficit {exact_def:.2e}, deviation {rep.max_deviation:.2e} "
                       f"(< regime_tol {rep.tolerance:.1e})")


def large_detuning_bessel() -> Outcome:
    p = ChainParams(12, 100.0, 0.0, 1.0, 1.0, RING)
    photon_dev, atom_max = 0.0, 0.0
    for t in np.linspace(0, 4.0, 161):
        exact = evolve_exact(photon_excitation_at(12, 0), t, p)
        photon_dev = max(photon_dev, float(np.abs(kernel_large_detuning_cyclic(p, t)
                                                  - exact.photon_amps).max()))
        atom_max = max(atom_max, float(np.abs(exact.atom_amps).max()))
    return Outcome(photon_dev < 1e-3 and atom_max < 1e-3,
                   f"photon deviation {photon_dev:.2e} (< 1e-3); max |b_j| {atom_max:.2e} (< 1e-3)")


def _slope(time_of):
    xs, ys = [], []
    for n in (16, 24, 32, 48, 64):
        p = ChainParams(n, 100.0, 0.0, 1.0, 1.0, RING)
        a = kernel_large_detuning_cyclic(p, time_of(p))
        xs.append(math.log(n))
        ys.append(math.log(abs(a[n // 2])))
    return float(np.polyfit(xs, ys, 1)[0])


def asymptotic_scaling() -> Outcome:
    def renormalized_hop(p):
        return p.hop_strength * (1 - (p.atom_photon_coupling / p.detuning) ** 2)

    # the front reaches cavity N/2 when the Bessel argument 2κ't equals N/2
    slope = _slope(lambda p: p.n_cavities / (4 * renormalized_hop(p)))
    other = _slope(lambda p: p.n_cavities / (2 * p.hop_strength))
    return Outcome(-0.43 <= slope <= -0.23,
                   f"slope {slope:.3f} in [-0.43, -0.23] at t = N/(4 kappa'); "
                   f"at t = N/(2 kappa) the slope is {other:.3f}")


def sector_conservation() -> Outcome:
    rng = np.random.default_rng(SEED + 2)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 17))
        t = rng.uniform(0, 20)
        kernels = [
            kernel_large_detuning_cyclic_matrix(ChainParams(n, 80.0, 0.0, 1.0, 1.0, RING), t),
            parabolic_kernel(ChainParams(n, 80.0, 0.0, 1.0, 1.0, LINE), t, KernelMode.LARGE_DETUNING),
            parabolic_kernel(ChainParams(n, 0.3, 0.0, 0.2, 9.0, LINE), t, KernelMode.DISPERSION_FREE),
            parabolic_kernel(ChainParams(n, 0.3, 0.0, 0.2, 9.0, LINE), t, KernelMode.FULL),
        ]
        if n != 4:
            kernels.append(kernel_large_hopping_cyclic(ChainParams(n, 0.3, 0.0, 0.2, 9.0, RING), t))
        for k in kernels:
            a0 = rng.normal(size=n) + 1j * rng.normal(size=n)
            b0 = rng.normal(size=n) + 1j * rng.normal(size=n)
            worst = max(worst, abs(np.linalg.norm(k.photon @ a0) ** 2 - np.linalg.norm(a0) ** 2)
                        / np.linalg.norm(a0) ** 2,
                        abs(np.linalg.norm(k.atom @ b0) ** 2 - np.linalg.norm(b0) ** 2)
                        / np.linalg.norm(b0) ** 2)
    return Outcome(worst < 1e-12, f"max relative sector-norm drift {worst:.2e} (< 1e-12)")


def transfer_bound() -> Outcome:
    rng = np.random.default_rng(SEED + 3)
    worst_excess = -math.inf
    for _ in range(10_000):
        n = int(rng.integers(2, 11))
        kappa = rng.uniform(5, 50)
        g = rng.uniform(0, 0.2) * kappa
        p = ChainParams(n, rng.uniform(-1, 1), 0.0, g, kappa, LINE)
        grid = np.sort(rng.uniform(0, 4 * math.pi / kappa, 8))
        rep = parabolic_transfer_bound_check(p, grid)
        worst_excess = max(worst_excess, rep.max_fidelity - 1 - max(rep.tolerance, 1e-12))
    strict = ChainParams(4, 0.0, 0.0, 3.0, 20.0, LINE)
    rep = parabolic_transfer_bound_check(strict, np.linspace(0, 2 * math.pi / 20.0, 40001))
    deficit = 1 - rep.max_fidelity
    return Outcome(worst_excess <= 0 and deficit > 1e-4,
                   f"largest excess over 1 + tol: {worst_excess:.2e} (<= 0) over 10^4 grids; "
                   f"N=4, kappa=20, g=3 peak deficit {deficit:.2e} (> 1e-4)")


def basis_orthogonality() -> Outcome:
    worst_u, worst_d, worst_gram = 0.0, 0.0, 0.0
    for n in range(1, 257):
        w = dft_matrix(n)
        worst_u = max(worst_u, float(np.abs(w @ w.conj().T - np.eye(n)).max()))
    for n in range(2, MAX_KRAWTCHOUK_N + 1):
        for topology in (RING, LINE):
            p = ChainParams(n, 0.0, 0.0, 0.0, 1.0, topology)
            b = mode_basis(p)
            d = b.transform @ coupling_matrix(p) @ b.transform.conj().T
            worst_d = max(worst_d, float(np.abs(d - np.diag(b.mode_freqs)).max()))
        u = krawtchouk_basis(n)
        worst_gram = max(worst_gram, float(np.abs(u.T @ u - np.eye(n)).max()))
        worst_u = max(worst_u, float(np.abs(u @ u.T - np.eye(n)).max()))
    ok = worst_u < UNITARITY_TOL and worst_d < DIAG_TOL and worst_gram < 1e-10
    return Outcome(ok, f"unitarity {worst_u:.1e} (< {UNITARITY_TOL:g}), diagonalization "
                       f"{worst_d:.1e} (< {DIAG_TOL:g}), Krawtchouk Gram {worst_gram:.1e} (< 1e-10)")


CONVERGENCE_SEQUENCES = {
    "large_hopping": (RegimeSpec(RegimeKind.LARGE_HOPPING),
                      lambda i: ChainParams(5, 0, 0, 1.0 / 2 ** i, 50, RING),
                      lambda p: 10 / p.atom_photon_coupling),
    "large_detuning": (RegimeSpec(RegimeKind.LARGE_DETUNING),
                       lambda i: ChainParams(12, 100.0 * 2 ** i, 0, 1.0, 1.0, RING),
                       lambda p: 4 / p.hop_strength),
    "resonance_nondegenerate": (RegimeSpec(RegimeKind.RESONANCE_NONDEGENERATE, 0),
                                lambda i: ChainParams(4, 2.0, 0, 0.8 / 2 ** i, 1.0, RING),
                                lambda p: 2 * math.pi / p.atom_photon_coupling),
    "resonance_degenerate": (RegimeSpec(RegimeKind.RESONANCE_DEGENERATE, 1),
                             lambda i: ChainParams(4, 0, 0, 0.8 / 2 ** i, 1.0, RING),
                             lambda p: 2 * math.pi / p.atom_photon_coupling),
    "parabolic_large_hopping": (RegimeSpec(RegimeKind.PARABOLIC_LARGE_HOPPING),
                                lambda i: ChainParams(6, 0.5, 0, 0.5 / 2 ** i, 50, LINE),
                                lambda p: math.pi / p.hop_strength),
    "parabolic_dispersion_free": (RegimeSpec(RegimeKind.PARABOLIC_DISPERSION_FREE),
                                  lambda i: ChainParams(6, 0.5, 0, 0.5 / 2 ** i, 50, LINE),
                                  lambda p: math.pi / p.hop_strength),
    "parabolic_large_detuning": (RegimeSpec(RegimeKind.PARABOLIC_LARGE_DETUNING),
                                 lambda i: ChainParams(6, 100.0 * 2 ** i, 0, 1.0, 1.0, LINE),
                                 lambda p: math.pi / p.hop_strength),
    "parabolic_resonance_n3": (RegimeSpec(RegimeKind.PARABOLIC_RESONANCE, 1),
                               lambda i: ChainParams(3, 0, 0, 0.8 / 2 ** i, 1.0, LINE),
                               lambda p: 2 * math.pi / p.atom_photon_coupling),
    "parabolic_resonance_n5": (RegimeSpec(RegimeKind.PARABOLIC_RESONANCE, 2),
                               lambda i: ChainParams(5, 0, 0, 0.8 / 2 ** i, 1.0, LINE),
                               lambda p: 2 * math.pi / p.atom_photon_coupling),
}


def regime_convergence() -> Outcome:
    bad, parts = [], []
    for name, (spec, make, window) in CONVERGENCE_SEQUENCES.items():
        errors = []
        for i in range(5):
            p = make(i)
            errors.append(regime_deviation(spec, p, np.linspace(0, window(p), 201)).max_deviation)
        if not all(errors[i + 1] <= 1.1 * errors[i] for i in range(4)):
            bad.append(name)
        parts.append(f"{name} {errors[0]:.1e}->{errors[-1]:.1e}")
    detail = ("all monotone: " if not bad else f"non-monotone: {', '.join(bad)}; ") + ", ".join(parts)
    return Outcome(not bad, detail)


def _run_cli(*args, timeout=300):
    return subprocess.run([sys.executable, "-m", "jchtransfer", *args], capture_output=True,
                          text=True, timeout=timeout)


def cli_determinism() -> Outcome:
    mismatched = []
    with tempfile.TemporaryDirectory() as tmp:
        for cfg in REFERENCE_CONFIGS:
            snapshots = []
            for i, threads in enumerate((1, 1, 4)):
                out = Path(tmp) / f"{cfg.stem}_{i}"
                proc = _run_cli("simulate", str(cfg), "--out-dir", str(out), "--threads", str(threads))
                if proc.returncode != 0:
                    mismatched.append(f"{cfg.stem} exit {proc.returncode}")
                    break
                snapshots.append({f.name: f.read_bytes() for f in sorted(out.glob("*.csv"))})
            else:
                if not snapshots[0] or not snapshots[0] == snapshots[1] == snapshots[2]:
                    mismatched.append(cfg.stem)
    start = time.perf_counter()
    proc = _run_cli("validate")
    elapsed = time.perf_counter() - start
    ok = not mismatched and proc.returncode == 0 and elapsed < 120
    return Outcome(ok, f"{len(REFERENCE_CONFIGS)} configs byte-identical"
                       + (f" except {mismatched}" if mismatched else "")
                       + f"; validate exit {proc.returncode} in {elapsed:.1f} s (< 120 s)")


CRITERIA = [
    oracle_equivalence,
    parabolic_perfect_transfer,
    closed_form_identity,
    binomial_profile,
    ring_two_site_resonance,
    ring_degenerate_resonance,
    parabolic_three_site_resonance,
    large_detuning_bessel,
    asymptotic_scaling,
    sector_conservation,
    transfer_bound,
    basis_orthogonality,
    regime_convergence,
    cli_determinism,
]


def _line(index: int, check, outcome: Outcome) -> str:
    return f"[{index:02d}] {'PASS' if outcome.passed else 'FAIL'}  {check.__name__}: {outcome.detail}"


@pytest.mark.parametrize("index,check", list(enumerate(CRITERIA, start=1)),
                         ids=[c.__name__ for c in CRITERIA])
def test_acceptance(index, check, request):
    outcome = check()
    line = _line(index, check, outcome)
    request.config._acceptance_lines.append(line)
    print(line)
    assert outcome.passed, line


if __name__ == "__main__":
    failures = 0
    for index, check in enumerate(CRITERIA, start=1):
        outcome = check()
        failures += not outcome.passed
        print(_line(index, check, outcome), flush=True)
    sys.exit(1 if failures else 0)
