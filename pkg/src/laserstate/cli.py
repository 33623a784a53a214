"""Experiment runner.

    laserstate <experiment> [--config cfg.json] [--set key=value ...]
                            [--out path] [--seed N] [--check]

The config file is ``{"experiment": name, "parameters": {...}}``; flags
override it.  Every report carries the analytic reference values next to
the numerical ones, and ``--check`` turns any tolerance breach into exit
status 1.  Configuration errors exit with status 2.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import jcpulse, phase, prepmeas, sources, twolaser
from .hilbert import ModeSpace, coherent_state, fock_cutoff, fock_state, number_diagonal_defect

SIG = 12


class ConfigError(Exception):
    pass


def fmt(x) -> str:
    s = format(float(x), f".{SIG}g")
    if s.lstrip("-").isdigit():
        s += ".0"
    return s


def _round(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (float, np.floating)):
        return float(fmt(x))
    if isinstance(x, (complex, np.complexfloating)):
        return [float(fmt(x.real)), float(fmt(x.imag))]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, dict):
        return {k: _round(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round(v) for v in x]
    return x


def dumps(obj) -> str:
    return json.dumps(_round(obj), sort_keys=False)


@dataclass
class Check:
    name: str
    value: float
    reference: float
    tolerance: float
    mode: str = "abs"  # "abs": |value - reference| <= tol; "below": value < reference

    @property
    def passed(self) -> bool:
        if self.mode == "below":
            return self.value < self.reference
        if self.mode == "above":
            return self.value > self.reference
        return abs(self.value - self.reference) <= self.tolerance

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "reference": self.reference,
            "tolerance": self.tolerance,
            "mode": self.mode,
            "pass": self.passed,
        }


@dataclass
class Outcome:
    text: str
    checks: list = field(default_factory=list)


# --------------------------------------------------------------------------
# parameter validation


def _int(p, key, lo=None, hi=None):
    v = p[key]
    if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
        raise ConfigError(f"{key} must be an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(f"{key} must be >= {lo}, got {v}")
    if hi is not None and v > hi:
        raise ConfigError(f"{key} must be <= {hi}, got {v}")
    return int(v)


def _float(p, key, lo=None):
    v = p[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(f"{key} must be finite")
    if lo is not None and v < lo:
        raise ConfigError(f"{key} must be >= {lo}, got {v}")
    return float(v)


def _int_list(p, key, lo=0):
    v = p[key]
    if isinstance(v, int) and not isinstance(v, bool):
        v = [v]
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{key} must be a non-empty list of integers")
    return [_int({key: x}, key, lo) for x in v]


# --------------------------------------------------------------------------
# experiments


def _number_pair(n_a, n_b):
    return twolaser.TwoCavityState.product(
        fock_state(n_a, ModeSpace("a", n_a)), fock_state(n_b, ModeSpace("b", n_b))
    )


def run_two_laser_ratio(p) -> Outcome:
    """CSV columns: n_a, n_b, ratio_numeric, ratio_analytic (number-state cavities)."""
    fixtures = p["fixtures"]
    if p["n_a"] is not None or p["n_b"] is not None:
        if p["n_a"] is None or p["n_b"] is None:
            raise ConfigError("give both n_a and n_b, or neither")
        fixtures = [[p["n_a"], p["n_b"]]]
    if not isinstance(fixtures, list) or not fixtures:
        raise ConfigError("fixtures must be a non-empty list of [n_a, n_b] pairs")
    pairs = []
    for fx in fixtures:
        if not (isinstance(fx, list) and len(fx) == 2):
            raise ConfigError(f"fixture {fx!r} is not an [n_a, n_b] pair")
        n_a = _int({"n_a": fx[0]}, "n_a", 0, 400)
        n_b = _int({"n_b": fx[1]}, "n_b", 0, 400)
        if n_a + n_b < 2:
            raise ConfigError(f"fixture {fx!r} needs at least two photons in total")
        pairs.append((n_a, n_b))
    gamma = _float(p, "gamma")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n_a", "n_b", "ratio_numeric", "ratio_analytic"])
    checks = []
    for n_a, n_b in pairs:
        r = twolaser.second_detection_ratio(_number_pair(n_a, n_b), gamma)
        w.writerow([n_a, n_b, fmt(r.ratio), fmt(r.ratio_analytic)])
        checks.append(Check(f"ratio[{n_a},{n_b}]", r.ratio, r.ratio_analytic, 1e-10))
    return Outcome(buf.getvalue(), checks)


def run_two_laser_phase(p) -> Outcome:
    """CSV columns: delta_radians, density, density_analytic."""
    n_a = _int(p, "n_a", 0, 200)
    n_b = _int(p, "n_b", 0, 200)
    if n_a + n_b < 1:
        raise ConfigError("need at least one photon")
    grid = _int(p, "grid_size", 8)
    gamma = _float(p, "gamma")
    det = _int(p, "detector", 1, 2)
    p_max = None if p["p_max"] is None else _int(p, "p_max", 1)
    state = _number_pair(n_a, n_b)
    ev = twolaser.DetectionEvent(det, gamma)
    dist = twolaser.post_collapse_phase_distribution(state, ev, grid_size=grid, p_max=p_max)
    ana = twolaser.analytic_phase_density(state, ev, dist.grid)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["delta_radians", "density", "density_analytic"])
    for x, y, z in zip(dist.grid, dist.density, ana):
        w.writerow([fmt(x), fmt(y), fmt(z)])
    m = twolaser.field_moments(state)
    amp = m.sqrt_ab / (m.n_a + m.n_b)
    var = phase.circular_variance(dist, ev.effective_phase)
    checks = [
        Check("pointwise_density", float(np.max(np.abs(dist.density - ana))), 0.0, 1e-9),
        Check("variance", var, math.pi**2 / 3 - 4 * amp, 2e-3),
    ]
    return Outcome(buf.getvalue(), checks)


def run_two_laser_sim(p) -> Outcome:
    """JSON lines: seed, event_index, detector, weight1, weight2, variance, variance_reference."""
    n_a = _int(p, "n_a", 0, 60)
    n_b = _int(p, "n_b", 0, 60)
    n_events = _int(p, "n_events", 1)
    if n_events > n_a + n_b:
        raise ConfigError(f"n_events={n_events} exceeds the {n_a + n_b} photons available")
    gamma = _float(p, "gamma")
    grid = _int(p, "grid_size", 8)
    seed = _int(p, "seed", 0)
    n_seeds = _int(p, "n_seeds", 1)
    workers = _int(p, "workers", 1)
    seeds = [seed + k for k in range(n_seeds)]
    results = twolaser.run_seeds(_number_pair(n_a, n_b), gamma, n_events, seeds, grid, workers)
    lines = []
    checks = []
    ref = {0: math.pi**2 / 3}
    if n_a == n_b and n_a >= 1:
        ref[1] = math.pi**2 / 3 - 2
    for res in results:
        for row in res.records():
            k = row["event_index"]
            row = {"seed": res.seed, **row, "variance_reference": ref.get(k)}
            lines.append(dumps(row))
            if k in ref:
                checks.append(Check(f"variance[seed={res.seed},event={k}]", row["variance"], ref[k], 2e-3))
    return Outcome("\n".join(lines) + "\n", checks)


def run_retrodict(p) -> Outcome:
    n_max = _int(p, "n_max", 1, 80)
    m = _int(p, "n_phases", 1, 256)
    mod_a = _float(p, "modulus_a", 0.0)
    mod_b = _float(p, "modulus_b", 0.0)
    gamma = _float(p, "gamma")
    det = _int(p, "detector", 1, 2)
    for mod in (mod_a, mod_b):
        if fock_cutoff(mod) > n_max:
            raise ConfigError(f"n_max={n_max} too small for coherent modulus {mod} (need {fock_cutoff(mod)})")
    sa, sb = ModeSpace("a", n_max), ModeSpace("b", n_max)
    ev = twolaser.DetectionEvent(det, gamma)
    res = twolaser.retrodict_coherent_ensemble(
        twolaser.CoherentEnsemble.uniform(mod_a, m), twolaser.CoherentEnsemble.uniform(mod_b, m), ev, sa, sb
    )
    collapsed = twolaser.collapse_first_detection(twolaser.TwoCavityState(res.prior_density), ev)
    dev = float(np.max(np.abs(collapsed.rho.matrix - res.posterior_density.matrix)))
    i, k = np.unravel_index(int(np.argmax(res.posterior_weights)), res.posterior_weights.shape)
    ph = 2 * math.pi / m
    diff = (i - k) * ph
    wrapped = (diff - ev.effective_phase + math.pi) % (2 * math.pi) - math.pi
    report = {
        "experiment": "retrodict",
        "n_max": n_max,
        "n_phases": m,
        "modulus_a": mod_a,
        "modulus_b": mod_b,
        "gamma": gamma,
        "detector": det,
        "max_abs_deviation_posterior_vs_collapse": dev,
        "reference_deviation": 0.0,
        "argmax_phase_difference": diff,
        "argmax_phase_difference_reference": ev.effective_phase,
    }
    checks = [
        Check("posterior_equals_collapse", dev, 0.0, 1e-8),
        Check("argmax_phase_difference", wrapped, 0.0, ph),
    ]
    return Outcome(_report(report, checks), checks)


def run_sources(p) -> Outcome:
    t_values = p["times"]
    if not isinstance(t_values, list) or not t_values:
        raise ConfigError("times must be a non-empty list")
    times = [_float({"t": t}, "t", 0.0) for t in t_values]
    lam = _float(p, "lambda", 0.0)
    k = _int(p, "k_atoms", 1, sources.MAX_ATOMS)
    gamma_mod = _float(p, "source_gamma", 0.0)
    gamma_arg = _float(p, "source_phase")
    osc_n = _int(p, "n_max", 4, 60)
    if fock_cutoff(gamma_mod) > osc_n:
        raise ConfigError(f"n_max={osc_n} too small for source amplitude {gamma_mod}")

    osc = sources.build_oscillator_source(osc_n, osc_n, lam)
    weights = {n: 1.0 / 3 for n in (1, 2, 3)}
    atoms = sources.build_atomic_source(k, k + 2, coupling=lam)
    incoherent = sources.atom_product_state("e" * (k - 1) + "g")
    nm_off, at_off = 0.0, 0.0
    for t in times:
        nm_off = max(nm_off, number_diagonal_defect(sources.number_mixture_field(osc, weights, t)))
        at_off = max(at_off, number_diagonal_defect(sources.atomic_source_field(atoms, incoherent, t)))
    sup = sources.atomic_source_field(atoms, sources.atom_superposition_state([0.0] * k), 0.3 / lam if lam else 0.0)
    coh = abs(complex(sup.matrix[0, 1]))
    rep = sources.coherence_transfer_check(
        osc, coherent_state(gamma_mod * np.exp(1j * gamma_arg), ModeSpace(sources.OSCILLATOR, osc_n)),
        min(times[-1], 0.3 / lam if lam else 0.0),
    )
    report = {
        "experiment": "sources",
        "times": times,
        "number_mixture_max_offdiagonal": nm_off,
        "incoherent_atoms_max_offdiagonal": at_off,
        "superposition_atoms_coherence_01": coh,
        "coherence_transfer_residual": rep.eigenvalue_residual,
        "coherence_transfer_arg_mismatch": rep.arg_alignment,
        "coherence_transfer_cross_phase_imag": rep.cross_phase_imag,
        "reference_offdiagonal": 0.0,
    }
    checks = [
        Check("number_mixture_diagonal", nm_off, 0.0, 1e-10),
        Check("incoherent_atoms_diagonal", at_off, 0.0, 1e-10),
        Check("superposition_coherence", coh, 1e-3, 0.0, mode="above"),
        Check("coherence_transfer_residual", rep.eigenvalue_residual, 1e-3, 0.0, mode="below"),
        Check("coherence_transfer_phase", rep.arg_alignment, 0.0, 1e-6),
        Check("cross_phase_real", rep.cross_phase_imag, 0.0, 1e-8),
    ]
    return Outcome(_report(report, checks), checks)


def run_jc_pulse(p) -> Outcome:
    ns = _int_list(p, "n", 1)
    lam = _float(p, "lambda")
    if lam <= 0:
        raise ConfigError("lambda must be > 0")
    alpha2 = _float(p, "alpha_squared", 0.0)
    checks = []
    rows = []
    for n in ns:
        res = jcpulse.disrupted_pi_pulse(fock_state(n, ModeSpace("field", n + jcpulse.TRUNCATION_MARGIN)), n, lam)
        rows.append({"field": f"|{n}>", "n_ref": n, "ground_probability": res.ground_probability,
                     "ground_probability_reference": 1.0})
        checks.append(Check(f"ground[|{n}>]", res.ground_probability, 1.0, 1e-9))
    if alpha2 > 0:
        n_ref = max(1, round(alpha2))
        nmax = max(fock_cutoff(math.sqrt(alpha2)), n_ref + jcpulse.TRUNCATION_MARGIN)
        res = jcpulse.disrupted_pi_pulse(coherent_state(math.sqrt(alpha2), ModeSpace("field", nmax)), n_ref, lam)
        rows.append({"field": f"coherent |alpha|^2={alpha2}", "n_ref": n_ref,
                     "ground_probability": res.ground_probability, "ground_probability_reference": 1.0})
        checks.append(Check("ground[coherent]", res.ground_probability, 1.0, 1e-9))
    dev = jcpulse.combined_unitary_identity_check(max(ns) + jcpulse.TRUNCATION_MARGIN, lam, max(ns))
    checks.append(Check("combined_unitary", dev, 0.0, 1e-9))
    report = {"experiment": "jc-pulse", "lambda": lam, "results": rows,
              "combined_unitary_deviation": dev, "combined_unitary_reference": 0.0}
    return Outcome(_report(report, checks), checks)


def run_spin_example(p) -> Outcome:
    prep, pom = prepmeas.spin_half_devices("z", "x")
    rho = prepmeas.density_from_prep(prep)
    out = {"experiment": "spin-example", "joint": {}, "predictive": {}, "retrodictive": {}}
    checks = []
    for i in prep.labels:
        for j in pom.labels:
            v = prepmeas.joint_probability(prep, pom, i, j)
            out["joint"][f"{i},{j}"] = {"value": v, "reference": 0.25}
            checks.append(Check(f"joint[{i},{j}]", v, 0.25, 1e-10))
    for j in pom.labels:
        v = prepmeas.predictive_probability(rho, pom, j)
        out["predictive"][j] = {"value": v, "reference": 0.5}
        checks.append(Check(f"predictive[{j}]", v, 0.5, 1e-10))
        for i in prep.labels:
            r = prepmeas.retrodictive_probability(prep, pom[j], i)
            out["retrodictive"][f"{i}|{j}"] = {"value": r, "reference": 0.5}
            checks.append(Check(f"retrodictive[{i}|{j}]", r, 0.5, 1e-10))
    return Outcome(_report(out, checks), checks)


def _report(report: dict, checks: list) -> str:
    report = dict(report)
    report["checks"] = [c.as_dict() for c in checks]
    return json.dumps(_round(report), indent=2) + "\n"


@dataclass(frozen=True)
class Experiment:
    run: Callable
    defaults: dict
    help: str


EXPERIMENTS = {
    "two-laser-ratio": Experiment(
        run_two_laser_ratio,
        {"fixtures": [[1, 1], [2, 2], [5, 5], [10, 10], [20, 20], [50, 50], [400, 1]],
         "n_a": None, "n_b": None, "gamma": 0.0},
        "Second-click ratio P12/P11 table (CSV: n_a,n_b,ratio_numeric,ratio_analytic).",
    ),
    "two-laser-phase": Experiment(
        run_two_laser_phase,
        {"n_a": 5, "n_b": 5, "gamma": 0.0, "detector": 1, "grid_size": phase.DEFAULT_GRID, "p_max": None},
        "Phase-difference density after one click (CSV: delta_radians,density,density_analytic).",
    ),
    "two-laser-sim": Experiment(
        run_two_laser_sim,
        {"n_a": 20, "n_b": 20, "gamma": 0.0, "n_events": 10, "grid_size": 1024, "seed": 0,
         "n_seeds": 1, "workers": 1},
        "Sequential detection simulation (JSON lines: seed,event_index,detector,weight1,weight2,"
        "variance,variance_reference).",
    ),
    "retrodict": Experiment(
        run_retrodict,
        {"n_max": 30, "n_phases": 64, "modulus_a": 2.0, "modulus_b": 2.0, "gamma": 0.0, "detector": 1},
        "Coherent-ensemble retrodiction vs. collapse (JSON report).",
    ),
    "sources": Experiment(
        run_sources,
        {"times": [0.1, 0.3, 0.7, 1.5], "lambda": 1.0, "k_atoms": 3, "source_gamma": 1.0,
         "source_phase": 0.7, "n_max": 30},
        "Source diagonality and coherence-transfer report (JSON).",
    ),
    "jc-pulse": Experiment(
        run_jc_pulse,
        {"n": [1, 2, 5, 10], "lambda": 1.0, "alpha_squared": 5.0},
        "Phase-disrupted pi-pulse report (JSON).",
    ),
    "spin-example": Experiment(
        run_spin_example, {}, "Spin-half preparation/measurement probabilities (JSON)."
    ),
}


@dataclass
class ExperimentConfig:
    experiment: str
    parameters: dict

    @classmethod
    def build(cls, experiment: str, parameters: dict) -> "ExperimentConfig":
        if experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {experiment!r}; choose from {sorted(EXPERIMENTS)}")
        defaults = {**EXPERIMENTS[experiment].defaults, "out": None}
        unknown = sorted(set(parameters) - set(defaults))
        if unknown:
            raise ConfigError(f"unknown parameter(s) for {experiment}: {', '.join(unknown)}")
        out = parameters.get("out")
        if out is not None and not (isinstance(out, str) and out):
            raise ConfigError("out must be a non-empty path string")
        return cls(experiment, {**defaults, **parameters})


def load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(data) - {"experiment", "parameters"})
    if unknown:
        raise ConfigError(f"unknown top-level config key(s): {', '.join(unknown)}")
    params = data.get("parameters", {})
    if not isinstance(params, dict):
        raise ConfigError("parameters must be a JSON object")
    return data


def _parse_set(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def _common(parser, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=d, help="JSON config file")
    parser.add_argument("--out", default=d, help="output path (default: stdout)")
    parser.add_argument("--seed", type=int, default=d, help="RNG seed (unsigned 64-bit)")
    parser.add_argument("--check", action="store_true", default=argparse.SUPPRESS if suppress else False,
                        help="exit 1 if any embedded tolerance check fails")
    parser.add_argument("--set", action="append", default=d, metavar="KEY=VALUE",
                        help="override a parameter (value parsed as JSON)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="laserstate", description=__doc__.split("\n\n")[0])
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="experiment", metavar="experiment")
    for name, exp in EXPERIMENTS.items():
        sp = sub.add_parser(name, help=exp.help, description=exp.help)
        _common(sp, suppress=True)
    return parser


def resolve(args) -> ExperimentConfig:
    data = load_config_file(args.config) if args.config else {}
    name = args.experiment or data.get("experiment")
    if not name:
        raise ConfigError("no experiment given (subcommand or config 'experiment' key)")
    if args.experiment and data.get("experiment") not in (None, args.experiment):
        raise ConfigError(f"config is for {data['experiment']!r}, not {args.experiment!r}")
    params = dict(data.get("parameters", {}))
    params.update(_parse_set(args.set))
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        if "seed" not in EXPERIMENTS.get(name, EXPERIMENTS["spin-example"]).defaults:
            raise ConfigError(f"{name} takes no seed")
        params["seed"] = args.seed
    return ExperimentConfig.build(name, params)


def run(config: ExperimentConfig) -> Outcome:
    return EXPERIMENTS[config.experiment].run(config.parameters)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve(args)
        outcome = run(config)
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"laserstate: error: {exc}", file=sys.stderr)
        return 2
    out = args.out or config.parameters.get("out")
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(outcome.text)
    else:
        sys.stdout.write(outcome.text)
    failed = [c for c in outcome.checks if not c.passed]
    for c in failed:
        print(f"FAIL {c.name}: value={fmt(c.value)} reference={fmt(c.reference)} tol={c.tolerance:g}",
              file=sys.stderr)
    if args.check and failed:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
