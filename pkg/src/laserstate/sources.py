"""Quantum sources driving a single field mode.

Two source models share the energy-conserving coupling
H = i lambda (a^dag c - c^dag a):

* a harmonic oscillator, with ``c`` its annihilation operator;
* up to four two-level atoms, with ``c = sum_i g_i |g><e|_i``.

Factor order is field first, then the source factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import PreconditionError, TruncationError, ValidationError
from .hilbert import (
    CompositeSpace,
    DensityOperator,
    LevelSpace,
    LinearOperator,
    ModeSpace,
    StateVector,
    annihilation,
    as_density,
    basis_state,
    embed,
    evolve_state,
    expectation,
    fock_state,
    number_diagonal_defect,
    number_operator,
    partial_trace,
    product_space,
    reduced_density,
    tensor_density,
    tensor_states,
)

FIELD = "field"
OSCILLATOR = "osc"
TRUNCATION_TOL = 1e-8
MAX_ATOMS = 4


@dataclass(frozen=True, eq=False)
class SourceFieldSystem:
    space: CompositeSpace
    field_label: str
    source_labels: tuple
    coupling: float
    hamiltonian: LinearOperator
    source_operator: LinearOperator

    def __post_init__(self):
        if self.hamiltonian.hermiticity_defect() > 1e-10:
            raise ValidationError("source-field Hamiltonian is not Hermitian")

    @property
    def field_space(self) -> ModeSpace:
        return self.space.factor(self.field_label)

    @property
    def source_space(self) -> CompositeSpace:
        return CompositeSpace(tuple(self.space.factor(lab) for lab in self.source_labels))

    @cached_property
    def _eig(self):
        return np.linalg.eigh(self.hamiltonian.matrix)

    def propagator(self, t: float) -> LinearOperator:
        w, v = self._eig
        return LinearOperator(self.space, (v * np.exp(-1j * w * t)) @ v.conj().T)

    def field_annihilation(self) -> LinearOperator:
        return embed(annihilation(self.field_space), self.space)

    def excitation_number(self) -> LinearOperator:
        """Total excitation number N_field + N_source (conserved by H)."""
        total = embed(number_operator(self.field_space), self.space)
        for lab in self.source_labels:
            f = self.space.factor(lab)
            if isinstance(f, ModeSpace):
                total = total + embed(number_operator(f), self.space)
            else:
                excited = LinearOperator(f, np.diag([0.0, 1.0]))
                total = total + embed(excited, self.space)
        return total


def _coupling_hamiltonian(a: LinearOperator, c: LinearOperator, lam: float) -> LinearOperator:
    adag_c = a.adjoint() @ c
    return 1j * lam * (adag_c - adag_c.adjoint())


def build_oscillator_source(source_n_max: int, field_n_max: int, coupling: float) -> SourceFieldSystem:
    field = ModeSpace(FIELD, field_n_max)
    osc = ModeSpace(OSCILLATOR, source_n_max)
    space = product_space(field, osc)
    a = embed(annihilation(field), space)
    c = embed(annihilation(osc), space)
    h = _coupling_hamiltonian(a, c, coupling)
    return SourceFieldSystem(space, FIELD, (OSCILLATOR,), coupling, h, c)


def atom_label(i: int) -> str:
    return f"atom{i}"


def build_atomic_source(
    k_atoms: int, field_n_max: int, couplings: Optional[Sequence[float]] = None, coupling: float = 1.0
) -> SourceFieldSystem:
    """Field mode coupled to ``k_atoms`` resonant two-level atoms (basis |g>, |e>)."""
    if not 1 <= k_atoms <= MAX_ATOMS:
        raise ValueError(f"k_atoms must be in 1..{MAX_ATOMS}")
    if couplings is None:
        couplings = [1.0] * k_atoms
    if len(couplings) != k_atoms:
        raise ValueError("one coupling per atom")
    field = ModeSpace(FIELD, field_n_max)
    atoms = [LevelSpace(atom_label(i), 2) for i in range(k_atoms)]
    space = product_space(field, *atoms)
    lower = np.array([[0.0, 1.0], [0.0, 0.0]])  # |g><e|
    c = sum(
        (g * embed(LinearOperator(at, lower), space) for g, at in zip(couplings, atoms)),
        start=LinearOperator(space, np.zeros((space.dim, space.dim))),
    )
    a = embed(annihilation(field), space)
    h = _coupling_hamiltonian(a, c, coupling)
    return SourceFieldSystem(space, FIELD, tuple(at.label for at in atoms), coupling, h, c)


def _check_truncation(sys: SourceFieldSystem, state) -> None:
    rho = as_density(state)
    for f in sys.space.factors:
        if isinstance(f, ModeSpace):
            top = float(partial_trace(rho, [f.label]).matrix[-1, -1].real)
            if top > TRUNCATION_TOL:
                raise TruncationError(
                    f"mode {f.label!r} has top-level occupation {top:.3g}; enlarge n_max"
                )


def evolve(sys: SourceFieldSystem, state, t: float):
    """exp(-i H t) applied to a ket or density operator on the joint space."""
    return evolve_state(state, sys.propagator(t))


@dataclass(frozen=True)
class CoherenceReport:
    eigenvalue_residual: float
    arg_alignment: float
    alpha: complex
    gamma: complex
    source_amplitude: complex
    cross_phase_imag: float


def _wrap(x: float) -> float:
    return (x + math.pi) % (2 * math.pi) - math.pi


def coherence_transfer_check(sys: SourceFieldSystem, source_state: StateVector, t: float) -> CoherenceReport:
    """Evolve |gamma>_S |0>_F and test whether the field stays an eigenstate of a.

    The report gives ||(a - alpha)|psi(t)>|| with alpha = <a>, the phase
    mismatch |arg alpha - arg gamma|, and Im(alpha* <c(t)>).
    """
    osc = sys.source_space.factors[0]
    if len(sys.source_labels) != 1 or not isinstance(osc, ModeSpace):
        raise PreconditionError("coherence transfer needs an oscillator source")
    c_src = annihilation(osc)
    gamma = expectation(source_state, c_src)
    resid0 = np.linalg.norm(c_src.matrix @ source_state.amplitudes - gamma * source_state.amplitudes)
    if resid0 > 1e-8:
        raise PreconditionError(f"source state is not a c-eigenstate (residual {resid0:.3g})")
    psi0 = tensor_states([fock_state(0, sys.field_space), source_state])
    psi = evolve(sys, psi0, t)
    _check_truncation(sys, psi)
    a = sys.field_annihilation()
    alpha = expectation(psi, a)
    resid = float(np.linalg.norm(a.matrix @ psi.amplitudes - alpha * psi.amplitudes))
    c_t = expectation(psi, sys.source_operator)
    if abs(alpha) < 1e-12 or abs(gamma) < 1e-12:
        align = 0.0
    else:
        align = abs(_wrap(np.angle(alpha) - np.angle(gamma)))
    return CoherenceReport(
        eigenvalue_residual=resid,
        arg_alignment=align,
        alpha=alpha,
        gamma=gamma,
        source_amplitude=c_t,
        cross_phase_imag=float((np.conj(alpha) * c_t).imag),
    )


def number_mixture_field(sys: SourceFieldSystem, weights, t: float) -> DensityOperator:
    """Field state produced by an oscillator prepared in |N> with probability P_N.

    ``weights`` maps N -> P_N (or is a sequence indexed by N).
    """
    if not isinstance(weights, Mapping):
        weights = dict(enumerate(weights))
    total_p = sum(weights.values())
    if abs(total_p - 1.0) > 1e-10:
        raise ValueError(f"weights sum to {total_p}, not 1")
    osc = sys.source_space.factors[0]
    u = sys.propagator(t)
    rho_f = np.zeros((sys.field_space.dim,) * 2, dtype=complex)
    for n, p in weights.items():
        if p == 0:
            continue
        if n > osc.n_max:
            raise TruncationError(f"|{n}> outside oscillator space n_max={osc.n_max}")
        psi = tensor_states([fock_state(0, sys.field_space), fock_state(n, osc)]).apply(u)
        _check_truncation(sys, psi)
        rho_f += p * partial_trace(psi.projector(), [sys.field_label]).matrix
    return DensityOperator(sys.field_space, rho_f)


def atom_product_state(levels: str) -> StateVector:
    """Product of atomic energy eigenstates, e.g. ``"eeg"``."""
    kets = []
    for i, ch in enumerate(levels):
        if ch not in "ge":
            raise ValueError(f"atomic level must be 'g' or 'e', got {ch!r}")
        kets.append(basis_state(0 if ch == "g" else 1, LevelSpace(atom_label(i), 2)))
    return tensor_states(kets)


def atom_superposition_state(thetas: Sequence[float]) -> StateVector:
    """Product of (|g> + e^{i theta}|e>)/sqrt(2) over the atoms."""
    kets = []
    for i, th in enumerate(thetas):
        v = np.array([1.0, np.exp(1j * th)]) / math.sqrt(2)
        kets.append(StateVector(LevelSpace(atom_label(i), 2), v))
    return tensor_states(kets)


def atomic_source_field(
    sys: SourceFieldSystem, source_state, t: float, field_state: Optional[DensityOperator] = None
) -> DensityOperator:
    """Reduced field state after the atoms and field evolve jointly for time ``t``.

    The field starts in vacuum unless a number-diagonal ``field_state`` is given.
    """
    if field_state is None:
        field_state = fock_state(0, sys.field_space).projector()
    if number_diagonal_defect(field_state) > 1e-12:
        raise PreconditionError("initial field must be number-diagonal")
    src = as_density(source_state)
    if src.space != sys.source_space:
        raise ValueError(f"source state lives on {src.space.labels}, expected {sys.source_labels}")
    rho0 = tensor_density([field_state, src])
    rho = evolve(sys, rho0, t)
    _check_truncation(sys, rho)
    return reduced_density(rho, [sys.field_label])
