"""Preparation and measurement devices and the probabilities they imply.

A preparation device is a labelled set of positive operators Lambda_i whose
traces are the a priori preparation probabilities; a measurement device is a
labelled set of positive operators Gamma_j.  Joint, predictive and
retrodictive probabilities all follow from traces of their products.  A
state that is not one of the device's labelled operators simply has no
retrodictive probability: the API only accepts device labels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateNormalization, DimensionMismatch, UnknownLabel, ValidationError
from .hilbert import (
    CompositeSpace,
    DensityOperator,
    LevelSpace,
    LinearOperator,
    ModeSpace,
    as_space,
)

DEGENERACY_TOL = 1e-14
DEVICE_TOL = 1e-10


def _trace_product(a: LinearOperator, b: LinearOperator) -> complex:
    return complex(np.sum(a.matrix * b.matrix.T))


def _min_eig(op: LinearOperator) -> float:
    m = op.matrix
    return float(np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min())


def _normalize_items(items) -> tuple:
    if isinstance(items, dict):
        items = items.items()
    out = tuple((str(lab), op) for lab, op in items)
    labels = [lab for lab, _ in out]
    if len(set(labels)) != len(labels):
        raise ValidationError(f"duplicate labels: {labels}")
    if not out:
        raise ValidationError("a device needs at least one element")
    space = out[0][1].space
    for lab, op in out:
        if op.space != space:
            raise DimensionMismatch(f"element {lab!r} lives on a different space")
    return out


@dataclass(frozen=True, eq=False)
class _Device:
    items: tuple
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "items", _normalize_items(self.items))
        if self.check:
            problems = self.diagnostics()
            if problems:
                detail = ", ".join(f"{k}={v:.3g}" for k, v in problems.items())
                raise ValidationError(f"invalid {type(self).__name__}: {detail}")

    @property
    def space(self) -> CompositeSpace:
        return self.items[0][1].space

    @property
    def labels(self) -> tuple:
        return tuple(lab for lab, _ in self.items)

    def __getitem__(self, label: str) -> LinearOperator:
        for lab, op in self.items:
            if lab == label:
                return op
        raise UnknownLabel(label)

    def total(self) -> LinearOperator:
        m = sum(op.matrix for _, op in self.items)
        return LinearOperator(self.space, m)

    def _positivity_defects(self) -> dict:
        out = {}
        for lab, op in self.items:
            lo = _min_eig(op)
            if lo < -DEVICE_TOL:
                out[f"positivity:{lab}"] = -lo
            herm = op.hermiticity_defect()
            if herm > DEVICE_TOL:
                out[f"hermiticity:{lab}"] = herm
        return out

    def diagnostics(self) -> dict:
        return self._positivity_defects()


class PrepDevice(_Device):
    """Preparation device operators Lambda_i = P(i) rho_i with Tr(sum Lambda_i) = 1."""

    def diagnostics(self) -> dict:
        out = self._positivity_defects()
        defect = abs(self.total().trace() - 1.0)
        if defect > DEVICE_TOL:
            out["normalization"] = defect
        return out

    @classmethod
    def from_states(cls, entries, check: bool = True) -> "PrepDevice":
        """Build from ``(label, probability, rho)`` triples."""
        return cls(tuple((lab, p * rho) for lab, p, rho in entries), check=check)

    def probability(self, label: str) -> float:
        return float(self[label].trace().real)

    def state(self, label: str) -> DensityOperator:
        lam = self[label]
        tr = lam.trace().real
        if tr <= DEGENERACY_TOL:
            raise DegenerateNormalization(f"preparation {label!r} has zero probability")
        return DensityOperator.from_operator(lam / tr)


class MeasurementDevice(_Device):
    """Raw measurement device operators Gamma_j (positivity only)."""


class Pom(MeasurementDevice):
    """Probability operator measure: positive elements summing to the identity."""

    def diagnostics(self) -> dict:
        out = self._positivity_defects()
        total = self.total().matrix
        defect = float(np.max(np.abs(total - np.eye(total.shape[0]))))
        if defect > DEVICE_TOL:
            out["completeness"] = defect
        return out


def validate_prep(prep: PrepDevice) -> dict:
    """Defects of a preparation device as ``{name: max deviation}``; empty if valid."""
    return PrepDevice.diagnostics(prep)


def validate_pom(pom: MeasurementDevice) -> dict:
    """Defects of a POM as ``{name: max deviation}``; empty if valid."""
    return Pom.diagnostics(pom)


def _same_space(a, b):
    if a.space != b.space:
        raise DimensionMismatch(f"spaces differ: {a.space.labels} vs {b.space.labels}")


def joint_probability(prep: PrepDevice, meas: MeasurementDevice, i: str, j: str) -> float:
    """P(i, j) = Tr(Lambda_i Gamma_j) / Tr(Lambda Gamma)."""
    _same_space(prep, meas)
    norm = _trace_product(prep.total(), meas.total()).real
    if norm <= DEGENERACY_TOL:
        raise DegenerateNormalization(f"Tr(Lambda Gamma) = {norm:.3g}")
    return _trace_product(prep[i], meas[j]).real / norm


def a_priori_preparation_probability(prep: PrepDevice, i: str) -> float:
    return prep.probability(i)


def predictive_probability(rho: LinearOperator, pom: MeasurementDevice, j: str) -> float:
    _same_space(rho, pom)
    return _trace_product(rho, pom[j]).real


def retrodictive_probability(prep: PrepDevice, pom_element: LinearOperator, i: str) -> float:
    """P(i | j) = Tr(Lambda_i Pi_j) / Tr(Lambda Pi_j).

    Invariant under positive rescaling of ``pom_element``.
    """
    _same_space(prep, pom_element)
    norm = _trace_product(prep.total(), pom_element).real
    if norm <= DEGENERACY_TOL:
        raise DegenerateNormalization(f"Tr(Lambda Pi) = {norm:.3g}")
    return _trace_product(prep[i], pom_element).real / norm


def density_from_prep(prep: PrepDevice) -> DensityOperator:
    return DensityOperator.from_operator(prep.total())


# --------------------------------------------------------------------------
# JSON serialization


def _factor_to_json(f) -> dict:
    if isinstance(f, ModeSpace):
        return {"label": f.label, "n_max": f.n_max}
    return {"label": f.label, "dim": f.dim}


def _factor_from_json(d: dict):
    if "n_max" in d:
        return ModeSpace(d["label"], int(d["n_max"]))
    return LevelSpace(d["label"], int(d["dim"]))


def _matrix_to_pairs(m: np.ndarray) -> list:
    flat = m.reshape(-1)
    return [[float(z.real), float(z.imag)] for z in flat]


def _pairs_to_matrix(pairs: Sequence, dim: int) -> np.ndarray:
    a = np.array(pairs, dtype=float)
    if a.shape != (dim * dim, 2):
        raise DimensionMismatch(f"expected {dim * dim} [re, im] pairs, got shape {a.shape}")
    return (a[:, 0] + 1j * a[:, 1]).reshape(dim, dim)


_KINDS = {"prep": PrepDevice, "measurement": MeasurementDevice, "pom": Pom}


def device_to_dict(device: _Device) -> dict:
    kind = {PrepDevice: "prep", MeasurementDevice: "measurement", Pom: "pom"}[type(device)]
    return {
        "kind": kind,
        "space": [_factor_to_json(f) for f in device.space.factors],
        "items": [{"label": lab, "matrix": _matrix_to_pairs(op.matrix)} for lab, op in device.items],
    }


def device_from_dict(d: dict, check: bool = True) -> _Device:
    cls = _KINDS[d["kind"]]
    space = as_space(tuple(_factor_from_json(f) for f in d["space"]))
    items = tuple(
        (item["label"], LinearOperator(space, _pairs_to_matrix(item["matrix"], space.dim)))
        for item in d["items"]
    )
    return cls(items, check=check)


def device_to_json(device: _Device) -> str:
    # json writes floats with repr(), so the round trip is bit-exact
    return json.dumps(device_to_dict(device))


def device_from_json(text: str, check: bool = True) -> _Device:
    return device_from_dict(json.loads(text), check=check)


# --------------------------------------------------------------------------
# spin-half fixture


def spin_half_states() -> dict:
    """Kets |+-z>, |+-x>, |+-y> on a two-level space labelled 'spin'."""
    s = 1 / np.sqrt(2)
    vecs = {
        "+z": [1, 0],
        "-z": [0, 1],
        "+x": [s, s],
        "-x": [s, -s],
        "+y": [s, 1j * s],
        "-y": [s, -1j * s],
    }
    return {k: np.array(v, dtype=complex) for k, v in vecs.items()}


def spin_half_devices(basis_prep: str = "z", basis_meas: str = "x"):
    """Equal-probability preparation in one basis and projective POM in another."""
    space = as_space(LevelSpace("spin", 2))
    kets = spin_half_states()

    def proj(k):
        v = kets[k]
        return LinearOperator(space, np.outer(v, v.conj()))

    prep = PrepDevice(tuple((f"{s}{basis_prep}", 0.5 * proj(f"{s}{basis_prep}")) for s in "+-"))
    pom = Pom(tuple((f"{s}{basis_meas}", proj(f"{s}{basis_meas}")) for s in "+-"))
    return prep, pom
