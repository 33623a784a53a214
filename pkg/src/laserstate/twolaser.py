"""Photodetection of light leaking from two cavities onto a 50:50 beam splitter.

A click at detector 1 with path phase gamma projects the outside field onto
(|1,0> + e^{-i gamma}|0,1>)/sqrt(2); to first order in the leak this applies
the jump operator a + e^{i gamma} b to the inside state.  Detector 2 uses
gamma + pi, i.e. the jump operator a - e^{i gamma} b.

The leak amplitude never enters: every quantity here is conditioned on a
detection, so it cancels.  :func:`brute_force_collapse` keeps an explicit
coupling time instead and serves as an independent check.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateNormalization, NoPhoton, PreconditionError
from .hilbert import (
    CompositeSpace,
    DensityOperator,
    LinearOperator,
    ModeSpace,
    annihilation,
    as_density,
    coherent_state,
    embed,
    number_diagonal_defect,
    partial_trace,
    product_space,
    tensor_density,
    unitary_propagator,
)
from .phase import (
    PhaseDistribution,
    minimal_circular_variance,
    phase_difference_distribution,
    DEFAULT_GRID,
)

DEGENERACY_TOL = 1e-14
DIAGONAL_TOL = 1e-10


@dataclass(frozen=True)
class DetectionEvent:
    detector: int
    gamma: float = 0.0

    def __post_init__(self):
        if self.detector not in (1, 2):
            raise ValueError(f"detector must be 1 or 2, got {self.detector}")

    @property
    def sign(self) -> int:
        return 1 if self.detector == 1 else -1

    @property
    def effective_phase(self) -> float:
        return self.gamma if self.detector == 1 else self.gamma + math.pi


@dataclass(frozen=True, eq=False)
class TwoCavityState:
    """Joint state of both cavities; may carry extra (source) factors."""

    rho: DensityOperator
    mode_a: str = "a"
    mode_b: str = "b"

    def __post_init__(self):
        for lab in (self.mode_a, self.mode_b):
            if not isinstance(self.rho.space.factor(lab), ModeSpace):
                raise ValueError(f"factor {lab!r} is not a field mode")

    @classmethod
    def product(cls, rho_a, rho_b, mode_a: str = "a", mode_b: str = "b") -> "TwoCavityState":
        return cls(tensor_density([as_density(rho_a), as_density(rho_b)]), mode_a, mode_b)

    @property
    def space(self) -> CompositeSpace:
        return self.rho.space

    def reduced(self, label: str) -> DensityOperator:
        return DensityOperator.from_operator(partial_trace(self.rho, [label]))

    def field_state(self) -> LinearOperator:
        return partial_trace(self.rho, [self.mode_a, self.mode_b])

    def phase_distribution(self, grid_size: int = DEFAULT_GRID, **kw) -> PhaseDistribution:
        return phase_difference_distribution(
            self.rho, grid_size=grid_size, mode_a=self.mode_a, mode_b=self.mode_b, **kw
        )


def _lower_left(space: CompositeSpace, label: str, m: np.ndarray) -> np.ndarray:
    """(a on factor ``label``) @ m using the shift structure of a."""
    k = space.index(label)
    dims = space.dims
    t = m.reshape(dims + (m.shape[1],))
    out = np.zeros_like(t)
    d = dims[k]
    shape = [1] * t.ndim
    shape[k] = d - 1
    scale = np.sqrt(np.arange(1, d, dtype=float)).reshape(shape)
    src = [slice(None)] * t.ndim
    dst = [slice(None)] * t.ndim
    src[k] = slice(1, d)
    dst[k] = slice(0, d - 1)
    out[tuple(dst)] = scale * t[tuple(src)]
    return out.reshape(m.shape)


def _jump_left(state: TwoCavityState, event: DetectionEvent, m: np.ndarray) -> np.ndarray:
    # (a + s e^{i gamma} b) @ m, applied factor-wise
    sp = state.space
    coeff = event.sign * np.exp(1j * event.gamma)
    return _lower_left(sp, state.mode_a, m) + coeff * _lower_left(sp, state.mode_b, m)


def jump_operator(state: TwoCavityState, event: DetectionEvent) -> LinearOperator:
    sp = state.space
    a = embed(annihilation(sp.factor(state.mode_a)), sp)
    b = embed(annihilation(sp.factor(state.mode_b)), sp)
    return a + (event.sign * np.exp(1j * event.gamma)) * b


def _unnormalized_collapse(state: TwoCavityState, event: DetectionEvent) -> np.ndarray:
    m_rho = _jump_left(state, event, state.rho.matrix)
    # rho is Hermitian, so M rho M^dag = M (M rho)^dag
    out = _jump_left(state, event, m_rho.conj().T)
    return 0.5 * (out + out.conj().T)


def single_cavity_collapse(rho: DensityOperator, mode: str):
    """Return ``(a rho a^dag / n_bar, n_bar)`` for a click from one cavity."""
    sp = rho.space
    ar = _lower_left(sp, mode, rho.matrix)
    out = _lower_left(sp, mode, ar.conj().T)
    weight = float(np.trace(out).real)
    if weight <= DEGENERACY_TOL:
        raise NoPhoton(f"mean photon number {weight:.3g} in mode {mode!r}")
    out = 0.5 * (out + out.conj().T) / weight
    return DensityOperator(sp, out), weight


def _field_tensor(state: TwoCavityState) -> np.ndarray:
    """Two-mode field state as t[i_a, i_b, j_a, j_b]."""
    f = state.field_state()
    da = state.space.factor(state.mode_a).dim
    db = state.space.factor(state.mode_b).dim
    if f.space.labels[0] == state.mode_a:
        return f.matrix.reshape(da, db, da, db)
    return f.matrix.reshape(db, da, db, da).transpose(1, 0, 3, 2)


def detection_weight(state: TwoCavityState, event: DetectionEvent) -> float:
    """Tr[(a + e^{i g} b) rho (a^dag + e^{-i g} b^dag)] with g the event's effective phase.

    Evaluated as n_a + n_b + 2 Re(e^{i g} <a^dag b>) from the two-mode field state.
    """
    t = _field_tensor(state)
    da, db = t.shape[0], t.shape[1]
    pop = np.einsum("ijij->ij", t).real
    na = np.arange(da)[:, None]
    nb = np.arange(db)[None, :]
    # <a^dag b> = sum_ij sqrt(i+1) sqrt(j) <i, j| rho |i+1, j-1>
    i = np.arange(da - 1)[:, None]
    j = np.arange(1, db)[None, :]
    cross = np.sum(t[i, j, i + 1, j - 1] * np.sqrt(i + 1) * np.sqrt(j))
    coeff = event.sign * np.exp(1j * event.gamma)
    w = float((pop * (na + nb)).sum() + 2 * (coeff * cross).real)
    return max(w, 0.0)


def collapse_first_detection(state: TwoCavityState, event: DetectionEvent) -> TwoCavityState:
    out = _unnormalized_collapse(state, event)
    w = float(np.trace(out).real)
    if w <= DEGENERACY_TOL:
        raise NoPhoton(f"detection weight {w:.3g}: no photon available")
    return TwoCavityState(DensityOperator(state.space, out / w), state.mode_a, state.mode_b)


# --------------------------------------------------------------------------
# closed forms for number-diagonal cavities


@dataclass(frozen=True)
class FieldMoments:
    """Photon-number moments of the two-mode field state."""

    n_a: float
    n_b: float
    n_a2: float
    n_b2: float
    n_ab: float
    sqrt_ab: float


def _field_populations(state: TwoCavityState) -> np.ndarray:
    return np.einsum("ijij->ij", _field_tensor(state)).real


def field_moments(state: TwoCavityState) -> FieldMoments:
    p = _field_populations(state)
    na = np.arange(p.shape[0])[:, None]
    nb = np.arange(p.shape[1])[None, :]
    return FieldMoments(
        n_a=float((p * na).sum()),
        n_b=float((p * nb).sum()),
        n_a2=float((p * na**2).sum()),
        n_b2=float((p * nb**2).sum()),
        n_ab=float((p * na * nb).sum()),
        sqrt_ab=float((p * np.sqrt(na * nb)).sum()),
    )


def require_number_diagonal(state: TwoCavityState) -> None:
    """Closed forms need the two-mode field state diagonal in the number basis."""
    defect = number_diagonal_defect(state.field_state())
    if defect > DIAGONAL_TOL:
        raise PreconditionError(
            f"field state has optical coherences (max off-diagonal {defect:.3g}); closed form invalid"
        )


def analytic_phase_density(state: TwoCavityState, event: DetectionEvent, delta) -> np.ndarray:
    """1/2pi + (1/pi) <sqrt(n_a n_b)> / (n_a + n_b) cos(Delta - gamma_eff)."""
    require_number_diagonal(state)
    m = field_moments(state)
    amp = m.sqrt_ab / (m.n_a + m.n_b)
    return 1.0 / (2 * math.pi) + amp / math.pi * np.cos(np.asarray(delta) - event.effective_phase)


def analytic_ratio(state: TwoCavityState) -> float:
    """P12 / P11 after a first click, for number-diagonal cavities."""
    require_number_diagonal(state)
    m = field_moments(state)
    num = m.n_a2 + m.n_b2 - m.n_a - m.n_b
    return num / (num + 4 * m.n_ab)


def post_collapse_phase_distribution(
    state: TwoCavityState,
    event: DetectionEvent,
    grid_size: int = DEFAULT_GRID,
    window_origin: Optional[float] = None,
    p_max: Optional[int] = None,
) -> PhaseDistribution:
    """Numerical phase-difference density after one click.

    Refuses states with optical coherences, where the cosine closed form
    (:func:`analytic_phase_density`) does not apply.
    """
    require_number_diagonal(state)
    collapsed = collapse_first_detection(state, event)
    if window_origin is None:
        window_origin = event.effective_phase - math.pi
    return collapsed.phase_distribution(grid_size=grid_size, window_origin=window_origin, p_max=p_max)


@dataclass(frozen=True)
class RatioResult:
    p11_weight: float
    p12_weight: float
    ratio: float
    ratio_analytic: Optional[float] = None


def second_detection_ratio(state: TwoCavityState, gamma: float = 0.0) -> RatioResult:
    require_number_diagonal(state)
    first = DetectionEvent(1, gamma)
    rho1 = collapse_first_detection(state, first)
    p11 = detection_weight(rho1, first)
    p12 = detection_weight(rho1, DetectionEvent(2, gamma))
    if p11 <= DEGENERACY_TOL:
        raise NoPhoton("no photon left for a second detection")
    return RatioResult(p11, p12, p12 / p11, analytic_ratio(state))


# --------------------------------------------------------------------------
# sequential detection


@dataclass(frozen=True)
class SimulationResult:
    seed: int
    gamma: float
    events: tuple
    weights1: tuple
    weights2: tuple
    phase_variance_trace: tuple  # index 0 is the initial state, k after event k

    def records(self) -> list:
        rows = [
            {"event_index": 0, "detector": None, "weight1": None, "weight2": None,
             "variance": self.phase_variance_trace[0]}
        ]
        for k, ev in enumerate(self.events, start=1):
            rows.append(
                {
                    "event_index": k,
                    "detector": ev.detector,
                    "weight1": self.weights1[k - 1],
                    "weight2": self.weights2[k - 1],
                    "variance": self.phase_variance_trace[k],
                }
            )
        return rows


def window_variance(state: TwoCavityState, grid_size: int = DEFAULT_GRID) -> float:
    """Phase-difference variance in the 2pi window that minimizes it."""
    dist = state.phase_distribution(grid_size=grid_size, window_origin=-math.pi)
    return minimal_circular_variance(dist)


def sequential_detection_simulation(
    initial: TwoCavityState,
    gamma: float,
    n_events: int,
    rng_seed: int,
    grid_size: int = DEFAULT_GRID,
) -> SimulationResult:
    """Sample ``n_events`` successive clicks, collapsing after each.

    Detector weights are recomputed from the current state every step and a
    detector is drawn by inverse CDF.  The phase variance is taken in the
    window that minimizes it: after mixed clicks the density has two mirror
    peaks and a window centred on either one would count the other as spread.
    """
    total = field_moments(initial)
    if total.n_a + total.n_b < n_events - 1e-9:
        raise NoPhoton(f"mean photon number {total.n_a + total.n_b:.3g} < {n_events} events")
    rng = np.random.default_rng(rng_seed)
    state = initial
    events, w1s, w2s = [], [], []
    trace = [window_variance(state, grid_size)]
    for _ in range(n_events):
        w1 = detection_weight(state, DetectionEvent(1, gamma))
        w2 = detection_weight(state, DetectionEvent(2, gamma))
        if w1 + w2 <= DEGENERACY_TOL:
            raise NoPhoton("cavities exhausted")
        det = 1 if rng.random() < w1 / (w1 + w2) else 2
        ev = DetectionEvent(det, gamma)
        state = collapse_first_detection(state, ev)
        events.append(ev)
        w1s.append(w1)
        w2s.append(w2)
        trace.append(window_variance(state, grid_size))
    return SimulationResult(rng_seed, gamma, tuple(events), tuple(w1s), tuple(w2s), tuple(trace))


def run_seeds(initial: TwoCavityState, gamma: float, n_events: int, seeds: Sequence[int],
              grid_size: int = DEFAULT_GRID, workers: int = 1) -> list:
    """Independent simulations, returned in the order of ``seeds``."""
    def one(s):
        return sequential_detection_simulation(initial, gamma, n_events, s, grid_size)

    if workers <= 1:
        return [one(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, seeds))


# --------------------------------------------------------------------------
# coherent ensembles and retrodiction


@dataclass(frozen=True, eq=False)
class CoherentEnsemble:
    """Coherent states |modulus e^{i theta_i}> with a priori weights P(i)."""

    modulus: float
    phases: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        ph = np.atleast_1d(np.asarray(self.phases, dtype=float))
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if ph.shape != w.shape or ph.size == 0:
            raise ValueError("phases and weights must be non-empty and of equal length")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
            raise ValueError("weights must be non-negative and sum to 1")
        object.__setattr__(self, "phases", ph)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, modulus: float, size: int) -> "CoherentEnsemble":
        return cls(modulus, 2 * math.pi * np.arange(size) / size, np.full(size, 1.0 / size))

    @property
    def amplitudes(self) -> np.ndarray:
        return self.modulus * np.exp(1j * self.phases)

    def projectors(self, space: ModeSpace) -> np.ndarray:
        """Stack of |alpha_i><alpha_i| on ``space``, each tail-checked and renormalized."""
        kets = np.array([coherent_state(al, space).amplitudes for al in self.amplitudes])
        return kets[:, :, None] * kets[:, None, :].conj()

    def density(self, space: ModeSpace) -> DensityOperator:
        m = np.einsum("i,iab->ab", self.weights, self.projectors(space))
        return DensityOperator(space, m)


@dataclass(frozen=True, eq=False)
class RetrodictionResult:
    posterior_weights: np.ndarray  # P(i, k | event), shape (M_a, M_b)
    posterior_density: DensityOperator
    prior_density: DensityOperator


def _mix_product(wts: np.ndarray, proj_a: np.ndarray, proj_b: np.ndarray, space) -> np.ndarray:
    # sum_{i,k} w_ik A_i (x) B_k without forming every Kronecker product
    b_mix = np.einsum("ik,kcd->icd", wts, proj_b)
    t = np.einsum("iab,icd->acbd", proj_a, b_mix)
    return t.reshape(space.dim, space.dim)


def retrodict_coherent_ensemble(
    ens_a: CoherentEnsemble,
    ens_b: CoherentEnsemble,
    event: DetectionEvent,
    space_a: ModeSpace,
    space_b: ModeSpace,
) -> RetrodictionResult:
    """Posterior over coherent-state pairs given one click.

    P(i, k | click) is proportional to P_a(i) P_b(k) |alpha_i + e^{i g} beta_k|^2 and the
    posterior density mixes |alpha_i><alpha_i| (x) |beta_k><beta_k| with those weights.
    """
    al, be = ens_a.amplitudes, ens_b.amplitudes
    coeff = event.sign * np.exp(1j * event.gamma)
    lik = np.abs(al[:, None] + coeff * be[None, :]) ** 2
    post = ens_a.weights[:, None] * ens_b.weights[None, :] * lik
    z = post.sum()
    if z <= DEGENERACY_TOL:
        raise DegenerateNormalization("no coherent-state pair can produce this click")
    post = post / z
    space = product_space(space_a, space_b)
    pa, pb = ens_a.projectors(space_a), ens_b.projectors(space_b)
    prior = np.outer(ens_a.weights, ens_b.weights)
    posterior = DensityOperator(space, _mix_product(post, pa, pb, space))
    prior_rho = DensityOperator(space, _mix_product(prior, pa, pb, space))
    return RetrodictionResult(post, posterior, prior_rho)


# --------------------------------------------------------------------------
# explicit outside-mode oracle


def brute_force_collapse(
    state: TwoCavityState, event: DetectionEvent, kappa_t: float = 1e-2, outside_n_max: int = 2
) -> DensityOperator:
    """Inside state after coupling to vacuum outside modes and projecting onto |f>.

    Evolves under H = i kappa (a_o^dag a - a_o a^dag + b_o^dag b - b_o b^dag)
    for time t with kappa t = ``kappa_t``, then conditions the outside modes on
    (|1,0> + e^{-i g}|0,1>)/sqrt(2).  Agrees with the first-order collapse up
    to O(kappa_t^2).
    """
    oa = ModeSpace("outside_a", outside_n_max)
    ob = ModeSpace("outside_b", outside_n_max)
    inside = state.space
    full = product_space(inside, oa, ob)
    a = embed(annihilation(inside.factor(state.mode_a)), full)
    b = embed(annihilation(inside.factor(state.mode_b)), full)
    ao = embed(annihilation(oa), full)
    bo = embed(annihilation(ob), full)
    x = ao.adjoint() @ a + bo.adjoint() @ b
    h = 1j * (x - x.adjoint())
    u = unitary_propagator(h, kappa_t).matrix
    vac = np.zeros(oa.dim * ob.dim)
    vac[0] = 1.0
    rho0 = np.kron(state.rho.matrix, np.outer(vac, vac))
    rho_t = u @ rho0 @ u.conj().T
    f = np.zeros((oa.dim, ob.dim), dtype=complex)
    f[1, 0] = 1.0
    f[0, 1] = np.exp(-1j * event.effective_phase)
    f = f.reshape(-1) / math.sqrt(2)
    d_in = inside.dim
    t = rho_t.reshape(d_in, oa.dim * ob.dim, d_in, oa.dim * ob.dim)
    cond = np.einsum("o,iojp,p->ij", f.conj(), t, f)
    cond = 0.5 * (cond + cond.conj().T)
    return DensityOperator(inside, cond / np.trace(cond).real)
