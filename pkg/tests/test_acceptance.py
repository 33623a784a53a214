"""Acceptance suite: one test per criterion, summarized at the end of the run."""

import math
import time

import numpy as np
import pytest

from laserstate import jcpulse as jc
from laserstate import prepmeas as pm
from laserstate import sources as src
from laserstate import twolaser as tl
from laserstate.hilbert import (
    DensityOperator,
    LevelSpace,
    LinearOperator,
    ModeSpace,
    as_space,
    coherent_state,
    fock_cutoff,
    fock_state,
    number_diagonal,
    number_diagonal_defect,
    product_space,
)
from laserstate.phase import PhaseDistribution, circular_variance
from oracles import number_ratio_exact, random_density, random_pom

PI2_3 = math.pi**2 / 3


def number_pair(n_a, n_b, pad=0):
    return tl.TwoCavityState.product(fock_state(n_a, ModeSpace("a", n_a + pad)),
                                     fock_state(n_b, ModeSpace("b", n_b + pad)))


def coherent_pair(alpha, beta, n_max):
    return tl.TwoCavityState.product(coherent_state(alpha, ModeSpace("a", n_max)),
                                     coherent_state(beta, ModeSpace("b", n_max)))


@pytest.mark.criterion(1, "post-collapse phase distribution of |n>|n>")
@pytest.mark.parametrize("n", [1, 5, 20])
def test_c01_post_collapse_distribution(n):
    state = number_pair(n, n)
    for det, gamma in ((1, 0.0), (1, 0.7), (2, -1.9)):
        ev = tl.DetectionEvent(det, gamma)
        t0 = time.perf_counter()
        dist = tl.post_collapse_phase_distribution(state, ev, grid_size=4096)
        elapsed = time.perf_counter() - t0
        ref = (1 + np.cos(dist.grid - ev.effective_phase)) / (2 * math.pi)
        err = np.max(np.abs(dist.density - ref))
        print(f"n={n} detector={det} gamma={gamma}: max dev {err:.2e}, {elapsed:.3f} s")
        assert err < 1e-9
        assert elapsed < 1.0


@pytest.mark.criterion(2, "variance narrowing")
def test_c02_variance_narrowing():
    gamma = 0.7
    state = number_pair(5, 5)
    prior = state.phase_distribution(grid_size=4096)
    v0 = circular_variance(prior, gamma)
    post = tl.post_collapse_phase_distribution(state, tl.DetectionEvent(1, gamma), grid_size=4096)
    v1 = circular_variance(post, gamma)
    print(f"prior {v0:.6f} (ref {PI2_3:.6f}), after one click {v1:.6f} (ref {PI2_3 - 2:.6f})")
    assert abs(v0 - PI2_3) < 2e-3
    assert abs(v1 - (PI2_3 - 2)) < 2e-3
    assert abs(circular_variance(PhaseDistribution.uniform(4096), 0.0) - PI2_3) < 2e-3


RATIO_FIXTURES = [(n, n) for n in (1, 2, 3, 4, 5, 7, 10, 15, 20, 30, 50)] + [
    (3, 2), (2, 0), (2, 1), (3, 1), (5, 2), (10, 3), (40, 1), (100, 1), (400, 1), (6, 9), (12, 4), (0, 3),
]


@pytest.mark.criterion(3, "second-detection ratio")
def test_c03_second_detection_ratio():
    assert len(RATIO_FIXTURES) >= 20
    ratios = {}
    for n_a, n_b in RATIO_FIXTURES:
        r = tl.second_detection_ratio(number_pair(n_a, n_b), 0.0)
        assert abs(r.ratio - r.ratio_analytic) < 1e-10
        assert abs(r.ratio - float(number_ratio_exact(n_a, n_b))) < 1e-10
        ratios[(n_a, n_b)] = r.ratio
    print(f"{len(ratios)} fixtures; |1>|1> {ratios[(1, 1)]}, |50>|50> {ratios[(50, 50)]:.10f}, "
          f"|400>|1> {ratios[(400, 1)]:.6f}")
    assert ratios[(1, 1)] == 0.0
    assert abs(ratios[(50, 50)] - 49 / 149) < 1e-10
    diag = [ratios[(n, n)] for n in (1, 2, 3, 4, 5, 7, 10, 15, 20, 30, 50)]
    assert all(x < y < 1 / 3 for x, y in zip(diag, diag[1:]))
    assert 1 / 3 - diag[-1] < 5e-3
    assert abs(ratios[(400, 1)] - 1) < 0.02


@pytest.mark.criterion(4, "coherent-state non-collapse")
def test_c04_coherent_non_collapse():
    # tail rule with a tolerance tight enough for a 1e-10 comparison
    n_max = fock_cutoff(2.0, tail=1e-24)
    rng = np.random.default_rng(4)
    cases = [(2.0, 2.0, 1, 0.0), (2.0, 2.0j, 2, 0.4), (-2.0, 0.0, 1, 1.0), (0.0, 2.0, 2, -2.0)]
    for _ in range(6):
        a, b = 2 * np.sqrt(rng.uniform(size=2)) * np.exp(2j * np.pi * rng.uniform(size=2))
        cases.append((complex(a), complex(b), int(rng.integers(1, 3)), float(rng.uniform(-math.pi, math.pi))))
    worst = 0.0
    for alpha, beta, det, gamma in cases:
        state = coherent_pair(alpha, beta, n_max)
        out = tl.collapse_first_detection(state, tl.DetectionEvent(det, gamma))
        worst = max(worst, float(np.max(np.abs(out.rho.matrix - state.rho.matrix))))
    print(f"n_max {n_max}, {len(cases)} pairs, max deviation {worst:.2e}")
    assert worst < 1e-10


@pytest.mark.criterion(5, "retrodiction equals collapse")
@pytest.mark.parametrize("det,gamma", [(1, 0.0), (2, 1.1)])
def test_c05_retrodiction(det, gamma):
    t0 = time.perf_counter()
    ens = tl.CoherentEnsemble.uniform(2.0, 64)
    sa, sb = ModeSpace("a", 30), ModeSpace("b", 30)
    ev = tl.DetectionEvent(det, gamma)
    res = tl.retrodict_coherent_ensemble(ens, ens, ev, sa, sb)
    collapsed = tl.collapse_first_detection(tl.TwoCavityState(res.prior_density), ev)
    err = float(np.max(np.abs(collapsed.rho.matrix - res.posterior_density.matrix)))
    elapsed = time.perf_counter() - t0
    print(f"detector {det}: max deviation {err:.2e}, {elapsed:.2f} s")
    assert err < 1e-8
    assert elapsed < 10.0


@pytest.mark.criterion(6, "brute-force collapse oracle")
def test_c06_brute_force():
    rng = np.random.default_rng(6)
    sp = product_space(ModeSpace("a", 4), ModeSpace("b", 4))
    v = rng.normal(size=sp.dim) + 1j * rng.normal(size=sp.dim)
    v /= np.linalg.norm(v)
    states = [
        number_pair(3, 2, pad=1),
        tl.TwoCavityState.product(number_diagonal(ModeSpace("a", 4), [0.1, 0.3, 0.3, 0.2, 0.1]),
                                  fock_state(1, ModeSpace("b", 4))),
        tl.TwoCavityState(DensityOperator(sp, random_density(rng, sp.dim))),
        tl.TwoCavityState(DensityOperator(sp, np.outer(v, v.conj()))),
    ]
    worst = 0.0
    for state in states:
        for det in (1, 2):
            ev = tl.DetectionEvent(det, 0.9)
            ref = tl.collapse_first_detection(state, ev).rho.matrix
            bf = tl.brute_force_collapse(state, ev, kappa_t=1e-2).matrix
            worst = max(worst, float(np.max(np.abs(bf - ref))))
    print(f"kappa t = 1e-2, n_max 4: max deviation {worst:.2e}")
    assert worst < 1e-3


@pytest.mark.criterion(7, "source diagonality")
def test_c07_source_diagonality():
    times = [0.0, 0.1, 0.3, 0.7, 1.5, 3.0]
    osc = src.build_oscillator_source(8, 8, 1.0)
    atoms = src.build_atomic_source(3, 5, coupling=1.0)
    worst = 0.0
    for weights in ({3: 1.0}, {1: 0.2, 2: 0.3, 4: 0.5}, {k: 1 / 6 for k in range(6)}):
        for t in times:
            worst = max(worst, number_diagonal_defect(src.number_mixture_field(osc, weights, t)))
    for levels in ("egg", "eeg", "eee", "gge"):
        for t in times:
            rho = src.atomic_source_field(atoms, src.atom_product_state(levels), t)
            worst = max(worst, number_diagonal_defect(rho))
    coh = src.atomic_source_field(atoms, src.atom_superposition_state([0.4, 0.4, 0.4]), 0.3)
    c01 = abs(coh.matrix[0, 1])
    print(f"max off-diagonal for incoherent sources {worst:.2e}; superposition |<0|rho|1>| = {c01:.4f}")
    assert worst < 1e-10
    assert c01 > 1e-3


@pytest.mark.criterion(8, "coherence transfer")
def test_c08_coherence_transfer():
    osc = src.build_oscillator_source(30, 30, 1.0)
    worst_res, worst_arg = 0.0, 0.0
    for mod in (0.3, 1.0, math.sqrt(2)):
        for ph in (0.0, 1.3, -2.6):
            source = coherent_state(mod * np.exp(1j * ph), ModeSpace(src.OSCILLATOR, 30))
            for t in (0.05, 0.1, 0.2, 0.3):
                rep = src.coherence_transfer_check(osc, source, t)
                worst_res = max(worst_res, rep.eigenvalue_residual)
                worst_arg = max(worst_arg, rep.arg_alignment)
    print(f"max eigenvalue residual {worst_res:.2e}, max phase mismatch {worst_arg:.2e}")
    assert worst_res < 1e-3
    assert worst_arg < 1e-6


@pytest.mark.criterion(9, "Jaynes-Cummings phase disruption")
def test_c09_jc_disruption():
    worst = 0.0
    for n in (1, 2, 5, 10):
        res = jc.disrupted_pi_pulse(fock_state(n, ModeSpace("field", n + jc.TRUNCATION_MARGIN)), n)
        worst = max(worst, abs(res.ground_probability - 1))
    alpha = math.sqrt(5.0)
    n_max = max(fock_cutoff(alpha), 5 + jc.TRUNCATION_MARGIN)
    res = jc.disrupted_pi_pulse(coherent_state(alpha * np.exp(0.9j), ModeSpace("field", n_max)), 5)
    worst = max(worst, abs(res.ground_probability - 1))
    rng = np.random.default_rng(9)
    for _ in range(10):
        n_ref = int(rng.integers(1, 6))
        n_max = n_ref + jc.TRUNCATION_MARGIN
        rho = DensityOperator(ModeSpace("field", n_max), random_density(rng, n_max + 1))
        res = jc.disrupted_pi_pulse(rho, n_ref, float(rng.uniform(0.5, 2.0)))
        worst = max(worst, abs(res.ground_probability - 1))
    unitary = max(jc.combined_unitary_identity_check(15, 1.0, n) for n in (1, 2, 5, 10))
    print(f"max |P_g - 1| {worst:.2e}; combined unitary deviation {unitary:.2e}")
    assert worst < 1e-9
    assert unitary < 1e-9


def _random_devices(rng, dim, n_prep, n_meas):
    space = as_space(LevelSpace("q", dim))
    probs = rng.dirichlet(np.ones(n_prep))
    prep = pm.PrepDevice(tuple(
        (f"p{i}", LinearOperator(space, p * random_density(rng, dim, rng.integers(1, dim + 1))))
        for i, p in enumerate(probs)
    ))
    pom = pm.Pom(tuple((f"m{j}", LinearOperator(space, m)) for j, m in enumerate(random_pom(rng, dim, n_meas))))
    return prep, pom


@pytest.mark.criterion(10, "formalism consistency")
def test_c10_bayes_identity():
    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(100):
        dim = int(rng.integers(1, 9))
        prep, pom = _random_devices(rng, dim, int(rng.integers(1, 6)), int(rng.integers(1, 6)))
        rho = pm.density_from_prep(prep)
        for j in pom.labels:
            evidence = pm.predictive_probability(rho, pom, j)
            for i in prep.labels:
                joint = pm.joint_probability(prep, pom, i, j)
                prior = pm.a_priori_preparation_probability(prep, i)
                worst = max(worst, abs(joint - prior * pm.predictive_probability(prep.state(i), pom, j)))
                if evidence > 1e-12:
                    worst = max(worst, abs(joint - evidence * pm.retrodictive_probability(prep, pom[j], i)))
    prep, pom = pm.spin_half_devices("z", "x")
    spin = pm.retrodictive_probability(prep, pom["+x"], "+z")
    print(f"100 random devices: max Bayes defect {worst:.2e}; P(+z|+x) = {spin}")
    assert worst < 1e-10
    assert abs(spin - 0.5) < 1e-12


@pytest.mark.criterion(11, "sequential simulation")
def test_c11_sequential_simulation():
    t0 = time.perf_counter()
    hom = tl.run_seeds(number_pair(1, 1), 0.0, 2, range(100), grid_size=64, workers=4)
    same = sum(r.events[0].detector == r.events[1].detector for r in hom)
    runs = tl.run_seeds(number_pair(20, 20), 0.0, 1, range(200), grid_size=512, workers=4)
    trace = np.mean([r.phase_variance_trace for r in runs], axis=0)
    elapsed = time.perf_counter() - t0
    print(f"|1>|1>: same detector {same}/100; |20>|20>: mean variance {trace[0]:.4f} -> {trace[1]:.4f} "
          f"(threshold {PI2_3 - 1.5:.4f}); {elapsed:.1f} s")
    assert same == 100
    assert abs(trace[0] - PI2_3) < 2e-2
    assert trace[1] < PI2_3 - 1.5
    assert elapsed < 30.0
