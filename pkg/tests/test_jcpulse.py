import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from laserstate import jcpulse as jc
from laserstate.errors import TruncationError
from laserstate.hilbert import (
    DensityOperator,
    ModeSpace,
    StateVector,
    coherent_state,
    expectation,
    fock_cutoff,
    fock_state,
    poisson_diagonal,
)
from oracles import jc_number_amplitudes, random_density


def ket(atom, n, n_max):
    v = np.zeros(2 * (n_max + 1), dtype=complex)
    v[atom * (n_max + 1) + n] = 1.0
    return v


def test_hamiltonian_structure():
    h = jc.jc_hamiltonian(6, 0.7)
    assert h.hermiticity_defect() < 1e-12
    m = h.matrix
    assert np.all(m @ ket(jc.GROUND, 0, 6) == 0)
    for n in range(1, 7):
        elem = ket(jc.EXCITED, n - 1, 6).conj() @ m @ ket(jc.GROUND, n, 6)
        assert abs(elem - (-1j * 0.7 * math.sqrt(n))) < 1e-14
    n_exc = jc.excitation_number(6).matrix
    assert np.max(np.abs(m @ n_exc - n_exc @ m)) < 1e-12


@pytest.mark.parametrize("n", [1, 2, 5, 10])
def test_rabi_amplitudes(n):
    lam, n_max = 0.8, n + 5
    start = jc.ground_with_field(fock_state(n, ModeSpace("f", n_max)), lam)
    for t in (0.0, 0.3, 1.1, jc.pi_pulse_time(n, lam)):
        out = jc.evolve(start, t).state.amplitudes
        cg, ce = jc_number_amplitudes(n, lam, t)
        assert abs(out[ket(jc.GROUND, n, n_max).argmax()] - cg) < 1e-9
        assert abs(out[ket(jc.EXCITED, n - 1, n_max).argmax()] - ce) < 1e-9
        assert abs(cg**2 + ce**2 - 1) < 1e-10
        assert abs(np.linalg.norm(out) - 1) < 1e-10
    full = jc.evolve(start, jc.pi_pulse_time(n, lam))
    assert abs(full.excited_probability - 1) < 1e-9


def test_excited_state_evolution():
    n, lam, n_max, t = 3, 1.0, 8, 0.4
    psi = jc.AtomFieldState(StateVector(jc.jc_space(n_max), ket(jc.EXCITED, n - 1, n_max)), lam)
    out = jc.evolve(psi, t).state.amplitudes
    w = math.sqrt(n) * lam * t
    assert abs(out[ket(jc.EXCITED, n - 1, n_max).argmax()] - math.cos(w)) < 1e-9
    assert abs(out[ket(jc.GROUND, n, n_max).argmax()] - math.sin(w)) < 1e-9


def test_zero_time_is_identity():
    start = jc.ground_with_field(coherent_state(1.0, ModeSpace("field", 20)), 1.0)
    assert np.max(np.abs(jc.evolve(start, 0.0).state.amplitudes - start.state.amplitudes)) < 1e-15


@pytest.mark.parametrize("n", [1, 2, 5, 10])
def test_disrupted_pulse_number_states(n):
    n_max = n + jc.TRUNCATION_MARGIN
    res = jc.disrupted_pi_pulse(fock_state(n, ModeSpace("field", n_max)), n)
    assert abs(res.ground_probability - 1) < 1e-9
    final = res.final.state.amplitudes
    assert np.max(np.abs(final - (-1) ** n * ket(jc.GROUND, n, n_max))) < 1e-9
    mid = res.midpoint.state.amplitudes
    expected = (ket(jc.GROUND, n, n_max) - ket(jc.EXCITED, n - 1, n_max)) / math.sqrt(2)
    assert np.max(np.abs(mid - expected)) < 1e-9


def test_disrupted_pulse_coherent_and_mixed():
    alpha2 = 5.0
    n_max = max(fock_cutoff(math.sqrt(alpha2)), 10)
    coh = coherent_state(math.sqrt(alpha2) * np.exp(0.3j), ModeSpace("field", n_max))
    assert abs(jc.disrupted_pi_pulse(coh, 5).ground_probability - 1) < 1e-9
    # without the kick the coherent field does not return the atom to |g>
    plain = jc.evolve(jc.ground_with_field(coh, 1.0), jc.pi_pulse_time(5, 1.0))
    assert plain.ground_probability < 0.5
    mix = poisson_diagonal(3.0, ModeSpace("field", 30))
    assert abs(jc.disrupted_pi_pulse(mix, 3).ground_probability - 1) < 1e-9


@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.floats(0.2, 3.0))
def test_disrupted_pulse_random_fields(seed, n_ref, lam):
    rng = np.random.default_rng(seed)
    n_max = n_ref + jc.TRUNCATION_MARGIN
    rho = DensityOperator(ModeSpace("field", n_max), random_density(rng, n_max + 1, rng.integers(1, n_max + 2)))
    res = jc.disrupted_pi_pulse(rho, n_ref, lam)
    assert abs(res.ground_probability - 1) < 1e-9


def test_truncation_margin_enforced():
    with pytest.raises(TruncationError):
        jc.disrupted_pi_pulse(fock_state(3, ModeSpace("field", 6)), 3)


def test_combined_unitary_identity():
    assert jc.combined_unitary_identity_check(10, 1.0, 4) < 1e-9
    assert jc.combined_unitary_identity_check(10, 0.0, 4) == 0.0
    rng = np.random.default_rng(5)
    for t in rng.uniform(0, 10, 5):
        assert jc.combined_unitary_identity_check(10, 1.0, t=float(t)) < 1e-9


def test_kick_anticommutes_with_hamiltonian():
    h = jc.jc_hamiltonian(8, 1.3).matrix
    u = jc.field_phase_shift(8, math.pi).matrix
    assert np.max(np.abs(u @ h @ u.conj().T + h)) < 1e-12


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 5.0))
def test_excitation_conserved(seed, t):
    rng = np.random.default_rng(seed)
    rho = DensityOperator(ModeSpace("field", 6), random_density(rng, 7))
    start = jc.ground_with_field(rho, 0.9)
    n_exc = jc.excitation_number(6)
    before = expectation(start.state, n_exc).real
    after = expectation(jc.evolve(start, t).state, n_exc).real
    assert abs(before - after) < 1e-10
