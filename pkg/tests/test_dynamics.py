import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from jchtransfer.dynamics import (
    ORACLE_TOL,
    DelocalizedState,
    SingleExcitationState,
    atom_excitation_at,
    dense_oracle_evolve,
    evolve_exact,
    exact_propagator,
    from_amplitudes,
    from_delocalized,
    mode_index_pairs,
    norm_drift,
    photon_excitation_at,
    shift_apply,
    single_excitation_hamiltonian,
    to_delocalized,
)
from jchtransfer.errors import TopologyError
from jchtransfer.topology import ChainParams, Topology, mode_basis

RING, LINE = Topology.CYCLIC_UNIFORM, Topology.LINEAR_PARABOLIC


@st.composite
def chains(draw, topologies=(RING, LINE), max_n=16):
    n = draw(st.integers(2, max_n))
    eps = draw(st.floats(-5, 5))
    om = draw(st.floats(-5, 5))
    g = draw(st.floats(0, 3))
    kappa = draw(st.floats(-3, 3))
    return ChainParams(n, eps, om, g, kappa, draw(st.sampled_from(topologies)))


def random_state(rng, n):
    return from_amplitudes(rng.normal(size=2 * n) + 1j * rng.normal(size=2 * n))


def test_state_construction():
    s = photon_excitation_at(3, 1)
    assert s.as_vector().tolist() == [0, 1, 0, 0, 0, 0]
    assert atom_excitation_at(3, 2).as_vector().tolist() == [0, 0, 0, 0, 0, 1]
    assert s.is_normalized
    with pytest.raises(ValueError):
        photon_excitation_at(3, 3)
    with pytest.raises(ValueError):
        SingleExcitationState([1, 0], [0])
    with pytest.raises(ValueError):
        from_amplitudes([1, 2, 3])
    with pytest.raises(ValueError):
        from_amplitudes([0, 0])


def test_unnormalized_input_is_kept_when_asked():
    s = from_amplitudes([3, 0, 0, 4], normalize=False)
    assert s.norm() == 5.0 and not s.is_normalized
    assert from_amplitudes([3, 0, 0, 4]).is_normalized


def test_states_are_immutable():
    s = photon_excitation_at(2, 0)
    with pytest.raises(ValueError):
        s.photon_amps[0] = 2.0


@given(chains(), st.integers(0, 2**32 - 1))
def test_delocalized_roundtrip(p, seed):
    rng = np.random.default_rng(seed)
    s = random_state(rng, p.n_cavities)
    basis = mode_basis(p)
    d = to_delocalized(s, basis)
    assert isinstance(d, DelocalizedState)
    assert abs(d.norm() - 1) < 1e-12
    back = from_delocalized(d, basis)
    assert np.abs(back.as_vector() - s.as_vector()).max() < 1e-12


@given(chains(), st.floats(0, 20), st.integers(0, 2**32 - 1))
def test_exact_matches_dense_oracle(p, t, seed):
    s = random_state(np.random.default_rng(seed), p.n_cavities)
    mine = evolve_exact(s, t, p).as_vector()
    ref = dense_oracle_evolve(s, t, p).as_vector()
    assert np.abs(mine - ref).max() < ORACLE_TOL


def test_zero_time_and_zero_coupling():
    p = ChainParams(5, 1.0, 0.3, 0.0, 2.0, RING)
    s = atom_excitation_at(5, 2)
    assert np.abs(evolve_exact(s, 0.0, p).as_vector() - s.as_vector()).max() < 1e-15
    out = evolve_exact(s, 1.3, p)
    assert np.abs(out.atom_amps[2] - np.exp(-1.3j)) < 1e-15
    assert np.abs(out.photon_amps).max() < 1e-15


def test_exact_resonance_two_site_single_cavity_block():
    # resonant atom and photon in an isolated mode exchange fully at t = pi/(2g)
    p = ChainParams(2, 1.0, 1.0, 0.5, 0.0, RING)
    out = evolve_exact(photon_excitation_at(2, 0), math.pi, p)
    assert abs(abs(out.atom_amps[0]) - 1) < 1e-14


@given(chains(), st.floats(0, 10), st.floats(0, 10))
def test_propagator_unitary_and_group_law(p, t1, t2):
    u1 = exact_propagator(p, t1)
    u2 = exact_propagator(p, t2)
    u12 = exact_propagator(p, t1 + t2)
    eye = np.eye(2 * p.n_cavities)
    assert np.abs(u1 @ u1.conj().T - eye).max() < 1e-11
    assert np.abs(u2 @ u1 - u12).max() < 1e-10
    assert np.abs(exact_propagator(p, -t1) @ u1 - eye).max() < 1e-10


@given(chains(), st.floats(0, 10), st.integers(0, 2**32 - 1))
def test_norm_conserved(p, t, seed):
    s = random_state(np.random.default_rng(seed), p.n_cavities)
    assert norm_drift(s, evolve_exact(s, t, p)) < 1e-12


@given(chains(topologies=(RING,)), st.floats(0, 10), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_ring_translation_invariance(p, t, steps, seed):
    s = random_state(np.random.default_rng(seed), p.n_cavities)
    lhs = evolve_exact(shift_apply(s, steps), t, p).as_vector()
    rhs = shift_apply(evolve_exact(s, t, p), steps).as_vector()
    assert np.abs(lhs - rhs).max() < 1e-11


def test_shift_refuses_parabolic():
    with pytest.raises(TopologyError):
        shift_apply(photon_excitation_at(3, 0), 1, LINE)


def test_hamiltonian_layout():
    h = single_excitation_hamiltonian(ChainParams(3, 2.0, 1.0, 0.5, 0.25, RING))
    assert h.shape == (6, 6)
    assert np.array_equal(h, h.T)
    assert h[0, 3] == 0.5 and h[4, 4] == 2.0 and h[0, 0] == 1.0 and h[0, 2] == 0.25


def test_dense_oracle_refuses_huge_chains():
    p = ChainParams(600, 0, 0, 0, 1, RING)
    with pytest.raises(ValueError):
        dense_oracle_evolve(photon_excitation_at(600, 0), 1.0, p)


def test_mode_pairs():
    assert mode_index_pairs(4) == [(1, 3)]
    assert mode_index_pairs(5) == [(1, 4), (2, 3)]
    assert mode_index_pairs(2) == []
