"""Quadratic bosonic Hamiltonians and their dynamical matrices.

A model is the pair ``(h, delta)`` of the Hamiltonian

    H = sum_jk h_jk a_j^+ a_k + delta_jk/2 a_j^+ a_k^+ + delta_jk^*/2 a_j a_k

together with named sensing parameters.  Every parameter is bound linearly:
it carries the derivative matrices ``dh`` and ``ddelta``, so a perturbation
of size ``eps`` maps ``h -> h + eps*dh`` and ``delta -> delta + eps*ddelta``.
All catalog models are affine in their parameters, so this is exact for them.

Units: hbar = 1; time is measured in inverse energy units.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .errors import ModelError, StructureError, UnknownParameterError

SYMMETRY_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def _check_hermitian_pair(h, delta, hname="h", dname="delta"):
    """Raise ModelError naming the first entry breaking h = h^+ or delta = delta^T."""
    scale = max(1.0, float(np.max(np.abs(h), initial=0.0)), float(np.max(np.abs(delta), initial=0.0)))
    tol = SYMMETRY_TOL * scale
    bad = np.abs(h - h.conj().T) > tol
    if bad.any():
        j, k = map(int, np.argwhere(bad)[0])
        raise ModelError(
            f"{hname} is not Hermitian: entry ({j},{k})={h[j, k]!r} but conj of ({k},{j}) is {np.conj(h[k, j])!r}"
        )
    bad = np.abs(delta - delta.T) > tol
    if bad.any():
        j, k = map(int, np.argwhere(bad)[0])
        raise ModelError(
            f"{dname} is not symmetric: entry ({j},{k})={delta[j, k]!r} but ({k},{j})={delta[k, j]!r}"
        )


@dataclass(frozen=True)
class ParamBinding:
    """Derivative of ``(h, delta)`` with respect to one named parameter."""

    name: str
    dh: np.ndarray
    ddelta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dh", _frozen(self.dh))
        object.__setattr__(self, "ddelta", _frozen(self.ddelta))
        if self.dh.shape != self.ddelta.shape or self.dh.ndim != 2 or self.dh.shape[0] != self.dh.shape[1]:
            raise ModelError(f"binding {self.name!r}: dh and ddelta must be equal square matrices")
        try:
            _check_hermitian_pair(self.dh, self.ddelta, "dh", "ddelta")
        except ModelError as exc:
            raise ModelError(f"binding {self.name!r}: {exc}") from None


@dataclass(frozen=True)
class QuadraticModel:
    """Hermitian quadratic bosonic Hamiltonian with named sensing parameters.

    ``catalog`` records the constructor name and keyword arguments for catalog
    models; it is informational and used for serialization.
    """

    n_modes: int
    h: np.ndarray
    delta: np.ndarray
    params: Mapping[str, ParamBinding] = field(default_factory=dict)
    catalog: tuple | None = None

    def __post_init__(self):
        if int(self.n_modes) < 1:
            raise ModelError(f"n_modes must be >= 1, got {self.n_modes}")
        object.__setattr__(self, "n_modes", int(self.n_modes))
        object.__setattr__(self, "h", _frozen(self.h))
        object.__setattr__(self, "delta", _frozen(self.delta))
        shape = (self.n_modes, self.n_modes)
        if self.h.shape != shape or self.delta.shape != shape:
            raise ModelError(f"h and delta must both have shape {shape}")
        if not (np.all(np.isfinite(self.h)) and np.all(np.isfinite(self.delta))):
            raise ModelError("h and delta must be finite")
        _check_hermitian_pair(self.h, self.delta)
        for name, b in self.params.items():
            if b.dh.shape != shape:
                raise ModelError(f"binding {name!r} has shape {b.dh.shape}, expected {shape}")
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))

    def binding(self, name: str) -> ParamBinding:
        try:
            return self.params[name]
        except KeyError:
            known = ", ".join(sorted(self.params)) or "none"
            raise UnknownParameterError(f"unknown parameter {name!r} (bound: {known})") from None

    def perturbed(self, name: str, eps: float) -> "QuadraticModel":
        """Return the model with parameter ``name`` shifted by ``eps``."""
        b = self.binding(name)
        return QuadraticModel(
            self.n_modes, self.h + eps * b.dh, self.delta + eps * b.ddelta, self.params, catalog=None
        )


@dataclass(frozen=True)
class DynamicalMatrix:
    """The 2N x 2N generator ``[[h, delta], [-delta*, -h*]]`` of the mode dynamics."""

    m: np.ndarray

    def __post_init__(self):
        m = _frozen(self.m)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
            raise StructureError(f"dynamical matrix must be 2N x 2N, got shape {m.shape}")
        object.__setattr__(self, "m", m)

    @property
    def dim(self) -> int:
        return self.m.shape[0]

    @property
    def n_modes(self) -> int:
        return self.m.shape[0] // 2


@dataclass(frozen=True)
class CoefficientSchedule:
    """Piecewise-constant time dependence: ``(duration, model)`` segments in time order."""

    segments: tuple

    def __post_init__(self):
        segs = tuple((float(d), m) for d, m in self.segments)
        if not segs:
            raise ModelError("a schedule needs at least one segment")
        n = segs[0][1].n_modes
        for d, m in segs:
            if not d > 0:
                raise ModelError(f"segment durations must be positive, got {d}")
            if m.n_modes != n:
                raise ModelError("all schedule segments must have the same number of modes")
        object.__setattr__(self, "segments", segs)

    @property
    def total_time(self) -> float:
        return sum(d for d, _ in self.segments)


def sigma(axis: str, n_modes: int) -> np.ndarray:
    """``tau_axis (x) I_N`` with ``axis`` one of '0', 'x', 'y', 'z'."""
    tau = {
        "0": np.eye(2),
        "x": np.array([[0, 1], [1, 0]]),
        "y": np.array([[0, -1j], [1j, 0]]),
        "z": np.array([[1, 0], [0, -1]]),
    }[axis]
    return np.kron(tau, np.eye(n_modes)).astype(complex)


def assemble(h, delta) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    delta = np.asarray(delta, dtype=complex)
    return np.block([[h, delta], [-delta.conj(), -h.conj()]])


def build_dynamical_matrix(model: QuadraticModel) -> DynamicalMatrix:
    _check_hermitian_pair(model.h, model.delta)
    return DynamicalMatrix(assemble(model.h, model.delta))


def partial_derivative(model: QuadraticModel, param: str) -> np.ndarray:
    """Derivative of the dynamical matrix with respect to a bound parameter."""
    b = model.binding(param)
    return assemble(b.dh, b.ddelta)


@dataclass(frozen=True)
class SymmetryReport:
    particle_hole: float
    pseudo_hermitian: float
    transpose: float
    tol: float

    @property
    def violations(self) -> dict:
        return {
            "particle_hole": self.particle_hole,
            "pseudo_hermitian": self.pseudo_hermitian,
            "transpose": self.transpose,
        }

    @property
    def passed(self) -> bool:
        return max(self.violations.values()) <= self.tol


def validate_symmetries(H, tol: float = SYMMETRY_TOL) -> SymmetryReport:
    """Check Sx H* Sx = -H, Sz H Sz = H^+ and Sy H Sy = -H^T.

    Violations are max-abs norms relative to ``max(1, max|H|)``.
    """
    m = H.m if isinstance(H, DynamicalMatrix) else np.asarray(H, dtype=complex)
    n = m.shape[0] // 2
    sx, sy, sz = sigma("x", n), sigma("y", n), sigma("z", n)
    scale = max(1.0, float(np.max(np.abs(m))))

    def viol(a):
        return float(np.max(np.abs(a))) / scale

    return SymmetryReport(
        particle_hole=viol(sx @ m.conj() @ sx + m),
        pseudo_hermitian=viol(sz @ m @ sz - m.conj().T),
        transpose=viol(sy @ m @ sy + m.T),
        tol=tol,
    )


def sx_commutator_norm(H) -> float:
    m = H.m if isinstance(H, DynamicalMatrix) else np.asarray(H)
    sx = sigma("x", m.shape[0] // 2)
    return float(np.max(np.abs(m @ sx - sx @ m), initial=0.0))


def block_diagonalize(H, tol: float = SYMMETRY_TOL):
    """Split a Sx-commuting dynamical matrix ``[[A, B], [B, A]]`` into ``A + B`` and ``A - B``.

    These are the blocks reached by the rotation exp(-i pi/4 tau_y) (x) I,
    which maps (tau_x, tau_y, tau_z) to (tau_z, tau_y, -tau_x).
    """
    m = H.m if isinstance(H, DynamicalMatrix) else np.asarray(H, dtype=complex)
    n = m.shape[0] // 2
    comm = sx_commutator_norm(m)
    if comm > tol * max(1.0, float(np.max(np.abs(m)))):
        raise StructureError(f"[H, Sigma_x] != 0 (max commutator entry {comm:.3e}); no block split")
    a, b = m[:n, :n], m[:n, n:]
    return a + b, a - b


def to_rotated(mat: np.ndarray) -> np.ndarray:
    """U^+ M U for the block-diagonalizing rotation (exact up to the halving)."""
    n = mat.shape[0] // 2
    m11, m12, m21, m22 = mat[:n, :n], mat[:n, n:], mat[n:, :n], mat[n:, n:]
    return 0.5 * np.block(
        [
            [m11 + m12 + m21 + m22, -m11 + m12 - m21 + m22],
            [-m11 - m12 + m21 + m22, m11 - m12 - m21 + m22],
        ]
    )


def from_rotated(mat: np.ndarray) -> np.ndarray:
    """U M U^+, the inverse of :func:`to_rotated`."""
    n = mat.shape[0] // 2
    m11, m12, m21, m22 = mat[:n, :n], mat[:n, n:], mat[n:, :n], mat[n:, n:]
    return 0.5 * np.block(
        [
            [m11 - m12 - m21 + m22, m11 + m12 - m21 - m22],
            [m11 - m12 + m21 - m22, m11 + m12 + m21 + m22],
        ]
    )


# --- JSON model description -------------------------------------------------

def _matrix_from_json(rows, n, what):
    try:
        a = np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)
    except (TypeError, ValueError) as exc:
        raise ModelError(f"{what}: expected rows of [re, im] pairs ({exc})") from None
    if a.shape != (n, n):
        raise ModelError(f"{what}: expected shape ({n}, {n}), got {a.shape}")
    return a


def _matrix_to_json(a):
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(a)]


def model_from_dict(doc: dict) -> QuadraticModel:
    """Build a model from the JSON description (inline matrices or a catalog entry)."""
    if "catalog" in doc:
        from . import catalog

        kwargs = {k: v for k, v in doc.items() if k != "catalog"}
        return catalog.build(doc["catalog"], **kwargs)
    try:
        n = int(doc["n_modes"])
        h = _matrix_from_json(doc["h"], n, "h")
        delta = _matrix_from_json(doc["delta"], n, "delta")
    except KeyError as exc:
        raise ModelError(f"model description is missing field {exc}") from None
    params = {}
    for name, stencils in doc.get("params", {}).items():
        dh = np.zeros((n, n), complex)
        dd = np.zeros((n, n), complex)
        for s in stencils:
            target = {"h": dh, "delta": dd}.get(s.get("block"))
            if target is None:
                raise ModelError(f"param {name!r}: stencil block must be 'h' or 'delta'")
            r, c = int(s["row"]), int(s["col"])
            if not (0 <= r < n and 0 <= c < n):
                raise ModelError(f"param {name!r}: stencil index ({r},{c}) out of range")
            target[r, c] += complex(s.get("coeff_re", 0.0), s.get("coeff_im", 0.0))
        params[name] = ParamBinding(name, dh, dd)
    return QuadraticModel(n, h, delta, params)


def model_to_dict(model: QuadraticModel) -> dict:
    if model.catalog is not None:
        name, kwargs = model.catalog
        return {"catalog": name, **kwargs}
    params = {}
    for name, b in model.params.items():
        stencils = []
        for block, mat in (("h", b.dh), ("delta", b.ddelta)):
            for r, c in np.argwhere(mat != 0):
                z = mat[r, c]
                stencils.append(
                    {"block": block, "row": int(r), "col": int(c), "coeff_re": z.real, "coeff_im": z.imag}
                )
        params[name] = stencils
    return {
        "n_modes": model.n_modes,
        "h": _matrix_to_json(model.h),
        "delta": _matrix_to_json(model.delta),
        "params": params,
    }


def load_model(path) -> QuadraticModel:
    with open(Path(path)) as fh:
        return model_from_dict(json.load(fh))
