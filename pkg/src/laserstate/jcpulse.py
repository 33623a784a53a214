"""Resonant Jaynes-Cummings pi-pulses with a mid-pulse phase kick.

Space order is atom (|g>, |e>) then field.  H = i lambda (a^dag |g><e| - a |e><g|).
The pi phase shift exp(-i pi N) flips the sign of H, so

    exp(-i H t) U(pi) exp(-i H t) = U(pi)

for every t: a half pulse, a phase kick and another half pulse return the
atom to |g> whatever the field state was.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DimensionMismatch, TruncationError
from .hilbert import (
    CompositeSpace,
    DensityOperator,
    LevelSpace,
    LinearOperator,
    ModeSpace,
    StateVector,
    annihilation,
    as_space,
    embed,
    evolve_state,
    expectation,
    number_operator,
    phase_shift_operator,
    product_space,
    tensor,
    tensor_density,
    tensor_states,
    unitary_propagator,
)

ATOM = "atom"
FIELD = "field"
GROUND, EXCITED = 0, 1
TRUNCATION_MARGIN = 5


def atom_space() -> LevelSpace:
    return LevelSpace(ATOM, 2)


def jc_space(field_n_max: int) -> CompositeSpace:
    return product_space(atom_space(), ModeSpace(FIELD, field_n_max))


def _atom_op(m) -> LinearOperator:
    return LinearOperator(atom_space(), np.asarray(m, dtype=complex))


def jc_hamiltonian(field_n_max: int, coupling: float) -> LinearOperator:
    space = jc_space(field_n_max)
    field = space.factor(FIELD)
    g_e = _atom_op([[0, 1], [0, 0]])  # |g><e|
    a = annihilation(field)
    x = tensor([g_e, a.adjoint()])
    return 1j * coupling * (x - x.adjoint())


def excitation_number(field_n_max: int) -> LinearOperator:
    space = jc_space(field_n_max)
    n = embed(number_operator(space.factor(FIELD)), space)
    return n + embed(_atom_op([[0, 0], [0, 1]]), space)


def field_phase_shift(field_n_max: int, dphi: float) -> LinearOperator:
    """exp(-i N dphi) on the field, identity on the atom."""
    space = jc_space(field_n_max)
    return embed(phase_shift_operator(space.factor(FIELD), dphi), space)


State = Union[StateVector, DensityOperator]


@dataclass(frozen=True, eq=False)
class AtomFieldState:
    state: State
    coupling: float

    def __post_init__(self):
        labels = self.state.space.labels
        if labels[0] != ATOM or self.state.space.dims[0] != 2 or len(labels) != 2:
            raise DimensionMismatch(f"expected (atom, field) space, got {labels}")

    @property
    def field_n_max(self) -> int:
        return self.state.space.factor(FIELD).n_max

    def atom_probability(self, level: int) -> float:
        proj = np.zeros((2, 2))
        proj[level, level] = 1.0
        p = embed(_atom_op(proj), self.state.space)
        return float(expectation(self.state, p).real)

    @property
    def ground_probability(self) -> float:
        return self.atom_probability(GROUND)

    @property
    def excited_probability(self) -> float:
        return self.atom_probability(EXCITED)


def ground_with_field(field_state: State, coupling: float) -> AtomFieldState:
    """|g> (x) field_state."""
    g = StateVector(atom_space(), [1.0, 0.0])
    if isinstance(field_state, StateVector):
        return AtomFieldState(tensor_states([g, _relabel_field(field_state)]), coupling)
    rho_f = _relabel_field(field_state)
    return AtomFieldState(tensor_density([g.projector(), rho_f]), coupling)


def _relabel_field(state: State) -> State:
    (f,) = state.space.factors
    if f.label == FIELD:
        return state
    space = ModeSpace(FIELD, f.n_max)
    if isinstance(state, StateVector):
        return StateVector(space, state.amplitudes)
    return DensityOperator(space, state.matrix)


def pi_pulse_time(n_ref: int, coupling: float) -> float:
    return math.pi / (2.0 * math.sqrt(n_ref) * coupling)


def evolve(state: AtomFieldState, t: float) -> AtomFieldState:
    h = jc_hamiltonian(state.field_n_max, state.coupling)
    return AtomFieldState(evolve_state(state.state, unitary_propagator(h, t)), state.coupling)


@dataclass(frozen=True, eq=False)
class DisruptedPulse:
    midpoint: AtomFieldState
    final: AtomFieldState

    @property
    def ground_probability(self) -> float:
        return self.final.ground_probability


def disrupted_pi_pulse(field_state: State, n_ref: int, coupling: float = 1.0) -> DisruptedPulse:
    """Half pulse, pi phase shift of the field, half pulse; atom starts in |g>.

    ``n_ref`` fixes t_pi = pi / (2 sqrt(n_ref) lambda); the field space must
    extend at least five levels beyond it.
    """
    if n_ref < 1:
        raise ValueError("n_ref must be >= 1")
    (f,) = as_space(field_state.space).factors
    if f.n_max < n_ref + TRUNCATION_MARGIN:
        raise TruncationError(f"field n_max={f.n_max} < n_ref + {TRUNCATION_MARGIN}")
    half = 0.5 * pi_pulse_time(n_ref, coupling)
    start = ground_with_field(field_state, coupling)
    mid = evolve(start, half)
    kicked = AtomFieldState(evolve_state(mid.state, field_phase_shift(f.n_max, math.pi)), coupling)
    return DisruptedPulse(mid, evolve(kicked, half))


def combined_unitary_identity_check(field_n_max: int, coupling: float, n_ref: int = 1, t: float = None) -> float:
    """max |exp(-iHt) U(pi) exp(-iHt) - U(pi)| with t = t_pi / 2 unless given."""
    if t is None:
        t = 0.5 * pi_pulse_time(n_ref, coupling) if coupling != 0 else 1.0
    h = jc_hamiltonian(field_n_max, coupling)
    u_half = unitary_propagator(h, t).matrix
    kick = field_phase_shift(field_n_max, math.pi).matrix
    combined = u_half @ kick @ u_half
    return float(np.max(np.abs(combined - kick)))
