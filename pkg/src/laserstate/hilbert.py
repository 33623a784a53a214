"""Dense operator algebra on truncated Fock spaces.

Composite spaces are ordered tuples of factors; the last factor varies
fastest in the flattened index, which matches ``np.kron`` and C-order
reshapes.  All values are immutable: matrices are stored read-only and every
operation returns a fresh object.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence, Union

import numpy as np
import scipy.linalg
from scipy.special import gammainc, gammaln

from .errors import DimensionMismatch, TruncationError, ValidationError

HERMITIAN_TOL = 1e-10
POSITIVITY_TOL = 1e-10
TRACE_TOL = 1e-10
COHERENT_TAIL_TOL = 1e-12


# --------------------------------------------------------------------------
# spaces


@dataclass(frozen=True)
class ModeSpace:
    """Single bosonic mode truncated at ``n_max`` photons."""

    label: str
    n_max: int

    def __post_init__(self):
        if self.n_max < 0:
            raise ValueError(f"n_max must be >= 0, got {self.n_max}")

    @property
    def dim(self) -> int:
        return self.n_max + 1


@dataclass(frozen=True)
class LevelSpace:
    """Finite auxiliary space, e.g. a two-level atom ordered (|g>, |e>)."""

    label: str
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")


Factor = Union[ModeSpace, LevelSpace]


@dataclass(frozen=True)
class CompositeSpace:
    factors: tuple

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        labels = [f.label for f in self.factors]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate factor labels: {labels}")
        if not self.factors:
            raise ValueError("composite space needs at least one factor")

    @property
    def labels(self) -> tuple:
        return tuple(f.label for f in self.factors)

    @property
    def dims(self) -> tuple:
        return tuple(f.dim for f in self.factors)

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"no factor labelled {label!r} in {self.labels}") from None

    def factor(self, label: str) -> Factor:
        return self.factors[self.index(label)]

    def __len__(self):
        return len(self.factors)


def as_space(space) -> CompositeSpace:
    if isinstance(space, CompositeSpace):
        return space
    if isinstance(space, (ModeSpace, LevelSpace)):
        return CompositeSpace((space,))
    return CompositeSpace(tuple(space))


def product_space(*spaces) -> CompositeSpace:
    factors = []
    for s in spaces:
        factors.extend(as_space(s).factors)
    return CompositeSpace(tuple(factors))


# --------------------------------------------------------------------------
# values


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LinearOperator:
    space: CompositeSpace
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "space", as_space(self.space))
        m = _frozen(self.matrix)
        d = self.space.dim
        if m.shape != (d, d):
            raise DimensionMismatch(f"matrix shape {m.shape} does not fit space of dim {d}")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.space.dim

    def _check(self, other: "LinearOperator"):
        if other.space != self.space:
            raise DimensionMismatch(f"spaces differ: {self.space.labels} vs {other.space.labels}")

    def __add__(self, other):
        self._check(other)
        return LinearOperator(self.space, self.matrix + other.matrix)

    def __sub__(self, other):
        self._check(other)
        return LinearOperator(self.space, self.matrix - other.matrix)

    def __neg__(self):
        return LinearOperator(self.space, -self.matrix)

    def __mul__(self, scalar):
        if isinstance(scalar, LinearOperator):
            return NotImplemented
        return LinearOperator(self.space, scalar * self.matrix)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return LinearOperator(self.space, self.matrix / scalar)

    def __matmul__(self, other):
        if isinstance(other, StateVector):
            return other.apply(self)
        self._check(other)
        return LinearOperator(self.space, self.matrix @ other.matrix)

    def adjoint(self) -> "LinearOperator":
        return LinearOperator(self.space, self.matrix.conj().T)

    dag = adjoint

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.matrix)))


@dataclass(frozen=True, eq=False)
class StateVector:
    space: CompositeSpace
    amplitudes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "space", as_space(self.space))
        v = _frozen(self.amplitudes).reshape(-1)
        v.setflags(write=False)
        if v.shape != (self.space.dim,):
            raise DimensionMismatch(f"vector length {v.shape[0]} does not fit space of dim {self.space.dim}")
        object.__setattr__(self, "amplitudes", v)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        n = self.norm()
        if n == 0.0:
            raise ValidationError("cannot normalize the zero vector")
        return StateVector(self.space, self.amplitudes / n)

    def apply(self, op: LinearOperator) -> "StateVector":
        if op.space != self.space:
            raise DimensionMismatch(f"spaces differ: {op.space.labels} vs {self.space.labels}")
        return StateVector(self.space, op.matrix @ self.amplitudes)

    def inner(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def projector(self) -> "DensityOperator":
        v = self.amplitudes
        return DensityOperator(self.space, np.outer(v, v.conj()))


@dataclass(frozen=True, eq=False)
class DensityOperator(LinearOperator):
    """Hermitian, positive, unit-trace operator; checked on construction."""

    def __post_init__(self):
        super().__post_init__()
        problems = density_defects(self.matrix)
        if problems:
            raise ValidationError("not a density operator: " + "; ".join(problems))

    @classmethod
    def from_operator(cls, op: LinearOperator) -> "DensityOperator":
        return cls(op.space, op.matrix)


def _min_eigenvalue_above(m: np.ndarray, tol: float) -> bool:
    # Cholesky of m + tol*I succeeds iff the smallest eigenvalue exceeds -tol
    # (up to rounding); it is several times cheaper than a full eigensolve.
    h = 0.5 * (m + m.conj().T)
    try:
        np.linalg.cholesky(h + tol * np.eye(h.shape[0]))
        return True
    except np.linalg.LinAlgError:
        return False


def density_defects(m: np.ndarray) -> list:
    problems = []
    herm = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
    if herm > HERMITIAN_TOL:
        problems.append(f"hermiticity defect {herm:.3g}")
    tr = np.trace(m)
    if abs(tr - 1.0) > TRACE_TOL:
        problems.append(f"trace {tr.real:.12g}{tr.imag:+.3g}j != 1")
    if herm <= HERMITIAN_TOL and not _min_eigenvalue_above(m, POSITIVITY_TOL):
        lo = float(np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min())
        problems.append(f"negative eigenvalue {lo:.3g}")
    return problems


# --------------------------------------------------------------------------
# standard operators and states


def identity(space) -> LinearOperator:
    space = as_space(space)
    return LinearOperator(space, np.eye(space.dim))


def annihilation(space: ModeSpace) -> LinearOperator:
    n = np.arange(1, space.dim)
    return LinearOperator(space, np.diag(np.sqrt(n), k=1))


def creation(space: ModeSpace) -> LinearOperator:
    return annihilation(space).adjoint()


def number_operator(space: ModeSpace) -> LinearOperator:
    return LinearOperator(space, np.diag(np.arange(space.dim, dtype=float)))


def sqrt_number_operator(space: ModeSpace) -> LinearOperator:
    """Diagonal square root of the number operator (exact in the number basis)."""
    return LinearOperator(space, np.diag(np.sqrt(np.arange(space.dim, dtype=float))))


def susskind_glogower(space: ModeSpace) -> LinearOperator:
    """Phase lowering operator sum_n |n><n+1| restricted to the truncated space.

    On the truncated space E^dag E = 1 - |0><0| as in infinite dimensions,
    while E E^dag = 1 - |n_max><n_max| instead of the identity.
    """
    return LinearOperator(space, np.eye(space.dim, k=1))


def phase_shift_operator(space: ModeSpace, dphi: float) -> LinearOperator:
    """exp(-i N dphi): rotates the phase of the mode by ``-dphi``."""
    n = np.arange(space.dim)
    return LinearOperator(space, np.diag(np.exp(-1j * n * dphi)))


def fock_state(n: int, space: ModeSpace) -> StateVector:
    if not 0 <= n <= space.n_max:
        raise TruncationError(f"|{n}> not in space with n_max={space.n_max}")
    v = np.zeros(space.dim, dtype=complex)
    v[n] = 1.0
    return StateVector(space, v)


def basis_state(index: int, space) -> StateVector:
    space = as_space(space)
    v = np.zeros(space.dim, dtype=complex)
    v[index] = 1.0
    return StateVector(space, v)


def coherent_tail_mass(alpha: complex, n_max: int) -> float:
    """Poisson probability of more than ``n_max`` photons for |alpha>."""
    mean = abs(alpha) ** 2
    if mean == 0.0:
        return 0.0
    return float(gammainc(n_max + 1, mean))


def fock_cutoff(alpha: complex, tail: float = COHERENT_TAIL_TOL) -> int:
    """Smallest n_max for which the coherent-state tail mass is below ``tail``."""
    n = 0
    while coherent_tail_mass(alpha, n) >= tail:
        n += 1
    return n


def coherent_amplitudes(alpha: complex, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1)
    r = abs(alpha)
    if r == 0.0:
        v = np.zeros(n_max + 1, dtype=complex)
        v[0] = 1.0
        return v
    logmag = n * math.log(r) - 0.5 * gammaln(n + 1) - 0.5 * r * r
    return np.exp(logmag) * np.exp(1j * n * np.angle(alpha))


def coherent_state(alpha: complex, space: ModeSpace, tail_tol: float = COHERENT_TAIL_TOL) -> StateVector:
    tail = coherent_tail_mass(alpha, space.n_max)
    if tail >= tail_tol:
        raise TruncationError(
            f"coherent state alpha={alpha} loses mass {tail:.3g} above n_max={space.n_max}"
        )
    return StateVector(space, coherent_amplitudes(alpha, space.n_max)).normalized()


def number_diagonal(space: ModeSpace, probs: Sequence[float]) -> DensityOperator:
    """Number-diagonal density operator with the given photon-number distribution."""
    if len(probs) > space.dim:
        raise TruncationError("distribution longer than the space")
    p = np.zeros(space.dim)
    p[: len(probs)] = probs
    return DensityOperator(space, np.diag(p))


def poisson_diagonal(mean: float, space: ModeSpace) -> DensityOperator:
    """Phase-averaged coherent state: diagonal Poisson mixture, renormalized."""
    tail = coherent_tail_mass(math.sqrt(mean), space.n_max)
    if tail >= COHERENT_TAIL_TOL:
        raise TruncationError(f"Poisson mean {mean} loses mass {tail:.3g} above n_max={space.n_max}")
    p = np.abs(coherent_amplitudes(math.sqrt(mean), space.n_max)) ** 2
    return DensityOperator(space, np.diag(p / p.sum()))


# --------------------------------------------------------------------------
# multilinear algebra


def tensor(ops: Iterable[LinearOperator]) -> LinearOperator:
    ops = list(ops)
    if not ops:
        raise ValueError("tensor of an empty list")
    space = product_space(*(o.space for o in ops))
    return LinearOperator(space, reduce(np.kron, (o.matrix for o in ops)))


def tensor_states(states: Iterable[StateVector]) -> StateVector:
    states = list(states)
    space = product_space(*(s.space for s in states))
    return StateVector(space, reduce(np.kron, (s.amplitudes for s in states)))


def tensor_density(rhos: Iterable[LinearOperator]) -> DensityOperator:
    return DensityOperator.from_operator(tensor(rhos))


def embed(op: LinearOperator, space) -> LinearOperator:
    """Lift ``op`` (acting on a subset of factors) to the full ``space``."""
    space = as_space(space)
    sub = op.space.labels
    for lab in sub:
        if space.factor(lab) != op.space.factor(lab):
            raise DimensionMismatch(f"factor {lab!r} differs between operator and target space")
    rest = [f for f in space.factors if f.label not in sub]
    rest_dim = math.prod(f.dim for f in rest)
    full = np.kron(op.matrix, np.eye(rest_dim))
    order = list(sub) + [f.label for f in rest]
    dims = [space.factor(lab).dim for lab in order]
    k = len(order)
    t = full.reshape(dims + dims)
    perm = [order.index(lab) for lab in space.labels]
    t = t.transpose(perm + [p + k for p in perm])
    return LinearOperator(space, t.reshape(space.dim, space.dim))


def local(op: LinearOperator, space) -> LinearOperator:
    return embed(op, space)


def apply_local_left(local_matrix: np.ndarray, label: str, space, matrix: np.ndarray) -> np.ndarray:
    """Return (L on factor ``label``) @ matrix without forming the full operator."""
    space = as_space(space)
    k = space.index(label)
    dims = space.dims
    t = matrix.reshape(dims + (space.dim,))
    t = np.tensordot(local_matrix, t, axes=([1], [k]))
    t = np.moveaxis(t, 0, k)
    return t.reshape(space.dim, space.dim)


def partial_trace(op: LinearOperator, keep: Sequence[str]) -> LinearOperator:
    """Trace out every factor whose label is not in ``keep``.

    Kept factors stay in their original order.
    """
    space = op.space
    keep = list(keep)
    for lab in keep:
        space.index(lab)
    keep_idx = [i for i, lab in enumerate(space.labels) if lab in keep]
    k = len(space)
    dims = space.dims
    t = op.matrix.reshape(dims + dims)
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    if 2 * k > len(letters):
        raise ValueError("too many factors")
    row = [letters[i] for i in range(k)]
    col = [letters[k + i] if i in keep_idx else letters[i] for i in range(k)]
    out = [row[i] for i in keep_idx] + [col[i] for i in keep_idx]
    red = np.einsum("".join(row) + "".join(col) + "->" + "".join(out), t)
    sub = CompositeSpace(tuple(space.factors[i] for i in keep_idx))
    return LinearOperator(sub, red.reshape(sub.dim, sub.dim))


def reduced_density(rho: DensityOperator, keep: Sequence[str]) -> DensityOperator:
    return DensityOperator.from_operator(partial_trace(rho, keep))


def expectation(state, op: LinearOperator) -> complex:
    """<op> in a StateVector or density operator."""
    if isinstance(state, StateVector):
        if state.space != op.space:
            raise DimensionMismatch("state and operator spaces differ")
        v = state.amplitudes
        return complex(np.vdot(v, op.matrix @ v))
    if state.space != op.space:
        raise DimensionMismatch("state and operator spaces differ")
    # Tr(rho A) without forming the product
    return complex(np.sum(state.matrix * op.matrix.T))


def matrix_exponential(op: LinearOperator) -> LinearOperator:
    return LinearOperator(op.space, scipy.linalg.expm(op.matrix))


def unitary_propagator(hamiltonian: LinearOperator, t: float) -> LinearOperator:
    """exp(-i H t) for Hermitian H via its eigendecomposition."""
    if hamiltonian.hermiticity_defect() > HERMITIAN_TOL:
        raise ValidationError("propagator requires a Hermitian generator")
    w, v = np.linalg.eigh(hamiltonian.matrix)
    return LinearOperator(hamiltonian.space, (v * np.exp(-1j * w * t)) @ v.conj().T)


def eigenvalues_hermitian(op: LinearOperator) -> np.ndarray:
    return np.linalg.eigvalsh(0.5 * (op.matrix + op.matrix.conj().T))


def commutator(a: LinearOperator, b: LinearOperator) -> LinearOperator:
    return a @ b - b @ a


def evolve_state(state, u: LinearOperator):
    """Apply a unitary to a ket or a density operator."""
    if isinstance(state, StateVector):
        return state.apply(u)
    m = u.matrix @ state.matrix @ u.matrix.conj().T
    return DensityOperator(state.space, 0.5 * (m + m.conj().T))


def as_density(state) -> DensityOperator:
    if isinstance(state, StateVector):
        return state.projector()
    if isinstance(state, DensityOperator):
        return state
    return DensityOperator.from_operator(state)


def number_diagonal_defect(rho: LinearOperator) -> float:
    """Largest off-diagonal modulus in the product number basis."""
    m = rho.matrix
    if m.shape[0] == 1:
        return 0.0
    return float(np.max(np.abs(m - np.diag(np.diag(m)))))


def top_occupation(state, label: str) -> float:
    """Population of the |n_max> level of mode ``label``."""
    rho = as_density(state) if not isinstance(state, LinearOperator) else state
    red = partial_trace(rho, [label]).matrix
    return float(red[-1, -1].real)
