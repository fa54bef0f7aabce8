"""Invariant suite behind ``jchtransfer validate``.

Each check returns a :class:`CheckResult`; names are ``<scope>.<invariant>``.
Random draws come from a seeded generator and never influence the physics
being checked, only which points are sampled.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from jchtransfer import dynamics, krawtchouk, regimes, specfun, topology
from jchtransfer.topology import ChainParams, Topology

SCOPES = ("topology", "krawtchouk", "specfun", "dynamics", "regimes")


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    seconds: float = 0.0

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "value": self.value,
                "threshold": self.threshold, "seconds": round(self.seconds, 4)}


def _below(name: str, value: float, threshold: float) -> CheckResult:
    return CheckResult(name, bool(value < threshold), float(value), float(threshold))


def _random_params(rng: np.random.Generator, n: int, topo: Topology) -> ChainParams:
    return ChainParams(n, rng.normal() * 3, rng.normal() * 3, abs(rng.normal()), rng.normal(), topo)


def _random_state(rng: np.random.Generator, n: int) -> dynamics.SingleExcitationState:
    return dynamics.from_amplitudes(rng.normal(size=2 * n) + 1j * rng.normal(size=2 * n))


# ---------------------------------------------------------------- topology


def _topology_checks(rng) -> list[CheckResult]:
    out = []
    worst_u = worst_d = worst_par = worst_mub = 0.0
    degenerate_exact = True
    for n in range(2, topology.MAX_KRAWTCHOUK_N + 1):
        for topo in Topology:
            p = ChainParams(n, 0.0, 0.0, 0.0, 1.0, topo)
            basis = topology.mode_basis(p)
            w = basis.transform
            worst_u = max(worst_u, np.abs(w @ w.conj().T - np.eye(n)).max())
            d = w @ topology.coupling_matrix(p) @ w.conj().T
            worst_d = max(worst_d, np.abs(d - np.diag(basis.mode_freqs)).max())
            if topo is Topology.CYCLIC_UNIFORM:
                worst_mub = max(worst_mub, np.abs(np.abs(w) - 1 / math.sqrt(n)).max())
                f = basis.mode_freqs
                degenerate_exact &= all(f[j] == f[n - j] for j in range(1, n))
            else:
                signs = (-1.0) ** np.arange(n)
                worst_par = max(worst_par, np.abs(w[n - 1] - signs * w[0]).max())
    out.append(_below("topology.unitarity", worst_u, topology.UNITARITY_TOL))
    out.append(_below("topology.diagonalization", worst_d, topology.DIAG_TOL))
    out.append(_below("topology.mutually_unbiased", worst_mub, topology.UNITARITY_TOL))
    out.append(_below("topology.krawtchouk_parity", worst_par, topology.UNITARITY_TOL))
    out.append(CheckResult("topology.cyclic_degeneracy", bool(degenerate_exact),
                           0.0 if degenerate_exact else 1.0, 0.0))
    return out


# ---------------------------------------------------------------- krawtchouk


def _krawtchouk_checks(rng) -> list[CheckResult]:
    gram = dual = recur = 0.0
    for big_n in range(0, krawtchouk.MAX_DEGREE + 1):
        m = krawtchouk.normalized_krawtchouk_matrix(big_n)
        gram = max(gram, np.abs(m.T @ m - np.eye(big_n + 1)).max())
        dual = max(dual, np.abs(m - m.T).max())
        recur = max(recur, np.abs(m - krawtchouk.normalized_krawtchouk_recurrence(big_n)).max())
    parity_ok = all(krawtchouk.parity_check(ell, j, big_n)
                    for big_n in range(0, 13) for ell in range(big_n + 1) for j in range(big_n + 1))
    # independent route: the hypergeometric coefficients from specfun, evaluated at 1/p = 2
    exact = 0.0
    for big_n in range(1, 13):
        m = krawtchouk.normalized_krawtchouk_matrix(big_n)
        for n in range(big_n + 1):
            for x in range(big_n + 1):
                k = sum(c * 2 ** i for i, c in
                        enumerate(specfun.hyp2f1_terminating_coeffs(n, x, big_n + 1)))
                square = k * k * Fraction(math.comb(big_n, x) * math.comb(big_n, n), 2 ** big_n)
                ref = math.copysign(math.sqrt(square), k) if k else 0.0
                exact = max(exact, abs(m[x, n] - ref))
    return [
        _below("krawtchouk.orthonormality", gram, 1e-10),
        _below("krawtchouk.self_duality", dual, 1e-15),
        _below("krawtchouk.recurrence_agreement", recur, 1e-10),
        CheckResult("krawtchouk.parity", parity_ok, 0.0 if parity_ok else 1.0, 0.0),
        _below("krawtchouk.exact_rational", exact, 1e-15),
    ]


# ---------------------------------------------------------------- specfun


def _specfun_checks(rng) -> list[CheckResult]:
    recur = norm = anger = 0.0
    for x in list(rng.uniform(0.1, 60.0, size=20)) + [0.5, 10.0, 59.0]:
        jv = specfun.bessel_j_orders(x)
        n = np.arange(1, specfun.BESSEL_N_MAX)
        lhs = jv[n - 1] + jv[n + 1]
        rhs = 2 * n / x * jv[n]
        scale = np.maximum(np.abs(lhs), np.abs(rhs))
        mask = scale > 1e-250
        recur = max(recur, (np.abs(lhs - rhs)[mask] / scale[mask]).max())
        norm = max(norm, abs(jv[0] ** 2 + 2 * np.sum(jv[1:] ** 2) - 1.0))
    for x in (0.3, 5.0, 20.0):
        big_m = int(x) + 40
        orders = np.arange(-big_m, big_m + 1)
        for theta in np.linspace(0, 2 * math.pi, 7):
            total = sum((1j) ** (k % 4) * specfun.bessel_j(int(k), x) * np.exp(1j * k * theta)
                        for k in orders)
            anger = max(anger, abs(total - np.exp(1j * x * math.cos(theta))))
    # arguments −4z/(1−z)² for z on the unit circle; error scaled by the sum of |terms|
    hyp = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 9))
        j, k = (int(v) for v in rng.integers(0, n, size=2))
        z = np.exp(1j * rng.uniform(0.05, 2 * math.pi - 0.05))
        x = -4 * z / (1 - z) ** 2
        coeffs = specfun.hyp2f1_terminating_coeffs(j, k, n)
        xq = Fraction(x.real)
        exact = float(sum(c * xq ** m for m, c in enumerate(coeffs)))
        scale = float(sum(abs(c) * abs(xq) ** m for m, c in enumerate(coeffs)))
        hyp = max(hyp, abs(specfun.hyp2f1_terminating(j, k, n, x.real) - exact) / scale)
    return [
        _below("specfun.bessel_recurrence", recur, 1e-9),
        _below("specfun.bessel_normalization", norm, 1e-10),
        _below("specfun.jacobi_anger", anger, 1e-10),
        _below("specfun.hyp2f1_exact_rational", hyp, 1e-12),
    ]


# ---------------------------------------------------------------- dynamics


def _dynamics_checks(rng) -> list[CheckResult]:
    oracle = unitarity = group = reverse = shift = 0.0
    for topo in Topology:
        for n in (2, 3, 4, 5, 8, 16):
            for _ in range(50):
                p = _random_params(rng, n, topo)
                s = _random_state(rng, n)
                t = float(rng.uniform(-5, 5))
                e = dynamics.evolve_exact(s, t, p)
                o = dynamics.dense_oracle_evolve(s, t, p)
                oracle = max(oracle, np.abs(e.as_vector() - o.as_vector()).max())
                unitarity = max(unitarity, abs(e.norm() - s.norm()))
            p = _random_params(rng, n, topo)
            s = _random_state(rng, n)
            t1, t2 = (float(v) for v in rng.uniform(-3, 3, size=2))
            both = dynamics.evolve_exact(s, t1 + t2, p)
            seq = dynamics.evolve_exact(dynamics.evolve_exact(s, t1, p), t2, p)
            group = max(group, np.abs(both.as_vector() - seq.as_vector()).max())
            back = dynamics.evolve_exact(dynamics.evolve_exact(s, t1, p), -t1, p)
            reverse = max(reverse, np.abs(back.as_vector() - s.as_vector()).max())
            if topo is Topology.CYCLIC_UNIFORM:
                steps = int(rng.integers(0, n))
                a = dynamics.shift_apply(dynamics.evolve_exact(s, t1, p), steps)
                b = dynamics.evolve_exact(dynamics.shift_apply(s, steps), t1, p)
                shift = max(shift, np.abs(a.as_vector() - b.as_vector()).max())
    return [
        _below("dynamics.oracle_equivalence", oracle, dynamics.ORACLE_TOL),
        _below("dynamics.unitarity", unitarity, dynamics.NORM_TOL),
        _below("dynamics.group_law", group, 1e-10),
        _below("dynamics.time_reversal", reverse, 1e-10),
        _below("dynamics.translation_invariance", shift, 1e-10),
    ]


# ---------------------------------------------------------------- regimes


def _regimes_checks(rng) -> list[CheckResult]:
    closed = 0.0
    for n in range(2, 33):
        for theta in np.linspace(0.0, 2 * math.pi, 16):
            closed = max(closed, np.abs(regimes.parabolic_closed_form_matrix(n, theta)
                                        - regimes.parabolic_spectral_matrix(n, theta)).max())
    transfer = 0.0
    for n in range(2, 17):
        p = ChainParams(n, 0.0, 0.0, 0.0, 1.0, Topology.LINEAR_PARABOLIC)
        for t in (math.pi / 2, 3 * math.pi / 2):
            s = dynamics.evolve_exact(dynamics.photon_excitation_at(n, 0), t, p)
            transfer = max(transfer, abs(abs(s.photon_amps[n - 1]) - 1.0))
    sector = 0.0
    for n in (3, 4, 5, 8):
        p_ring = ChainParams(n, 50.0, 0.0, 0.5, 0.7, Topology.CYCLIC_UNIFORM)
        p_lin = p_ring.replace(topology=Topology.LINEAR_PARABOLIC)
        s = _random_state(rng, n)
        for t in (0.5, 3.0):
            for k in (regimes.kernel_large_hopping_cyclic(p_ring, t),
                      regimes.kernel_large_detuning_cyclic_matrix(p_ring, t),
                      regimes.parabolic_kernel(p_lin, t, regimes.KernelMode.LARGE_DETUNING)):
                out = k.apply(s)
                sector = max(sector,
                             abs(np.linalg.norm(out.photon_amps) - np.linalg.norm(s.photon_amps)),
                             abs(np.linalg.norm(out.atom_amps) - np.linalg.norm(s.atom_amps)))
    claims = 0.0
    g = 1.0
    ring2 = ChainParams(2, 1.0, 0.0, g, 1.0, Topology.CYCLIC_UNIFORM)
    _, b = regimes.resonance_cyclic_nondegenerate(ring2, 0, math.pi / g, [1, 0], dispersive=False)
    claims = max(claims, abs(abs(b[1]) - 1.0))
    ring4 = ChainParams(4, 0.0, 0.0, g, 25.0, Topology.CYCLIC_UNIFORM)
    _, b = regimes.resonance_cyclic_degenerate(ring4, 1, math.pi / g, [1, 0, 0, 0], dispersive=False)
    claims = max(claims, abs(abs(b[2]) - 1.0))
    lin3 = ChainParams(3, 0.0, 0.0, g, 25.0, Topology.LINEAR_PARABOLIC)
    _, b = regimes.resonance_parabolic(lin3, 1, math.pi / g, [1, 0, 0], dispersive=False)
    claims = max(claims, abs(abs(b[2]) - 1.0))
    bound = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 9))
        kappa = float(rng.uniform(10, 50))
        p = ChainParams(n, float(rng.uniform(-2, 2)), 0.0, float(rng.uniform(0, 1)), kappa,
                        Topology.LINEAR_PARABOLIC)
        try:
            rep = regimes.parabolic_transfer_bound_check(p, rng.uniform(0, 10 * math.pi / kappa, 8))
        except regimes.SingularDetuningError:
            continue
        bound = max(bound, rep.max_fidelity - 1.0)
    return [
        _below("regimes.closed_form_identity", closed, 1e-10),
        _below("regimes.parabolic_perfect_transfer", transfer, 1e-9),
        _below("regimes.sector_conservation", sector, 1e-12),
        _below("regimes.resonance_transfer_claims", claims, 1e-12),
        _below("regimes.transfer_bound", bound, 1e-12),
    ]


_SUITES: dict[str, Callable] = {
    "topology": _topology_checks,
    "krawtchouk": _krawtchouk_checks,
    "specfun": _specfun_checks,
    "dynamics": _dynamics_checks,
    "regimes": _regimes_checks,
}


def run_validation(scope: str = "all", seed: int = 0) -> list[CheckResult]:
    if scope != "all" and scope not in _SUITES:
        raise ValueError(f"unknown scope {scope!r}; choose from all, {', '.join(SCOPES)}")
    names = SCOPES if scope == "all" else (scope,)
    results: list[CheckResult] = []
    for name in names:
        rng = np.random.default_rng([seed, SCOPES.index(name)])
        start = time.perf_counter()
        checks = _SUITES[name](rng)
        elapsed = time.perf_counter() - start
        results.extend(CheckResult(c.name, c.passed, c.value, c.threshold, elapsed) for c in checks)
    return results
