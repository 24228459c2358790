"""Brute-force reference: quadratic Hamiltonians in a truncated Fock space.

Nothing here touches the dynamical matrix.  The Hamiltonian is assembled
from truncated ladder operators, states are evolved with a dense Hermitian
eigendecomposition, and the QFI comes from the fidelity between states
evolved at two nearby parameter values.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
import scipy.sparse as sp

from .errors import PrecisionFloorError, TruncationError
from .model import QuadraticModel

DIM_LIMIT = 200_000
TAIL_TOL = 1e-8


@dataclass(frozen=True)
class FockBasis:
    """Occupations ``0..cutoff`` per mode, ordered lexicographically with mode 1 slowest."""

    n_modes: int
    cutoff: int
    limit: int = DIM_LIMIT

    def __post_init__(self):
        if self.n_modes < 1 or self.cutoff < 1:
            raise ValueError("need n_modes >= 1 and cutoff >= 1")
        if self.dim > self.limit:
            raise TruncationError(f"Fock dimension {self.dim} exceeds the limit {self.limit}")

    @property
    def dim(self) -> int:
        return (self.cutoff + 1) ** self.n_modes

    def occupations(self) -> np.ndarray:
        """``(dim, n_modes)`` table of occupation numbers in basis order."""
        grids = np.meshgrid(*[np.arange(self.cutoff + 1)] * self.n_modes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def index(self, occ) -> int:
        idx = 0
        for n in occ:
            idx = idx * (self.cutoff + 1) + int(n)
        return idx

    def annihilator(self, mode: int) -> sp.csr_matrix:
        """Truncated ``a_mode`` as a sparse matrix."""
        d = self.cutoff + 1
        a = sp.diags(np.sqrt(np.arange(1, d, dtype=float)), 1, format="csr")
        left = sp.identity(d**mode, format="csr")
        right = sp.identity(d ** (self.n_modes - mode - 1), format="csr")
        return sp.kron(sp.kron(left, a), right, format="csr")


@dataclass(frozen=True)
class DenseState:
    amplitudes: np.ndarray
    basis: FockBasis

    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def tail(self) -> float:
        """Probability on basis states with some mode at the cutoff."""
        top = np.any(self.basis.occupations() == self.basis.cutoff, axis=1)
        return float(np.sum(np.abs(self.amplitudes[top]) ** 2))

    def mean_number(self) -> float:
        n = self.basis.occupations().sum(axis=1)
        return float(np.sum(n * np.abs(self.amplitudes) ** 2) / self.norm())

    def overlap(self, other: "DenseState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


def build_hamiltonian(model: QuadraticModel, basis: FockBasis) -> np.ndarray:
    """Dense ``sum h_jk a_j^+ a_k + delta_jk/2 a_j^+ a_k^+ + delta*_jk/2 a_j a_k``."""
    if basis.n_modes != model.n_modes:
        raise ValueError(f"basis has {basis.n_modes} modes, model has {model.n_modes}")
    a = [basis.annihilator(j) for j in range(model.n_modes)]
    ad = [x.T.tocsr() for x in a]
    H = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    for j in range(model.n_modes):
        for k in range(model.n_modes):
            h, d = model.h[j, k], model.delta[j, k]
            if h != 0:
                H = H + h * (ad[j] @ a[k])
            if d != 0:
                H = H + (d / 2) * (ad[j] @ ad[k]) + (np.conj(d) / 2) * (a[j] @ a[k])
    H = H.toarray()
    return (H + H.conj().T) / 2


def coherent_vector(alpha, basis: FockBasis, tail_tol: float = TAIL_TOL) -> DenseState:
    """Product of truncated coherent expansions, renormalized.

    Refuses when the probability of reaching the cutoff in some mode exceeds
    ``tail_tol``.
    """
    alpha = np.atleast_1d(np.asarray(alpha, complex))
    if alpha.shape != (basis.n_modes,):
        raise ValueError(f"alpha must have {basis.n_modes} entries")
    n = np.arange(basis.cutoff + 1)
    fact = np.sqrt(np.array([float(factorial(int(k))) for k in n]))
    keep = 1.0
    vec = np.ones(1, complex)
    for a in alpha:
        c = np.exp(-abs(a) ** 2 / 2) * a**n / fact
        keep *= float(np.sum(np.abs(c[:-1]) ** 2))
        vec = np.kron(vec, c)
    tail = 1 - keep
    if tail > tail_tol:
        raise TruncationError(
            f"coherent tail {tail:.2e} exceeds {tail_tol:.0e} at cutoff {basis.cutoff}; increase the cutoff"
        )
    vec = vec / np.linalg.norm(vec)
    return DenseState(vec, basis)


class Evolver:
    """Dense ``exp(-i H t)`` through Hermitian eigendecompositions.

    Quadratic Hamiltonians change the total occupation by 0 or 2, so the even
    and odd sectors are diagonalized separately.
    """

    def __init__(self, H: np.ndarray, basis: FockBasis):
        parity = basis.occupations().sum(axis=1) % 2
        self.sectors = []
        for p in (0, 1):
            idx = np.flatnonzero(parity == p)
            if idx.size:
                e, v = np.linalg.eigh(H[np.ix_(idx, idx)])
                self.sectors.append((idx, e, v))

    def __call__(self, state: DenseState, t: float) -> DenseState:
        out = np.zeros_like(state.amplitudes, dtype=complex)
        for idx, e, v in self.sectors:
            c = v.conj().T @ state.amplitudes[idx]
            out[idx] = v @ (np.exp(-1j * e * t) * c)
        return DenseState(out, state.basis)


def evolve(model: QuadraticModel, state: DenseState, t: float, tail_tol: float = TAIL_TOL) -> DenseState:
    out = Evolver(build_hamiltonian(model, state.basis), state.basis)(state, t)
    _check_evolved(out, tail_tol)
    return out


def _check_evolved(state: DenseState, tail_tol: float):
    drift = abs(state.norm() - 1)
    if drift > 1e-8:
        raise ArithmeticError(f"norm drift {drift:.2e} after evolution")
    tail = state.tail()
    if tail > tail_tol:
        raise TruncationError(
            f"evolved tail {tail:.2e} exceeds {tail_tol:.0e} at cutoff {state.basis.cutoff}; increase the cutoff"
        )


def fidelity_qfi(
    model: QuadraticModel,
    param: str,
    t: float,
    state0: DenseState,
    eta0: float = 0.0,
    d_eta: float | None = None,
    tail_tol: float = TAIL_TOL,
) -> float:
    """``8 (1 - |<psi(eta0 - d/2)|psi(eta0 + d/2)>|) / d^2`` with ``psi = exp(-iHt) psi0``.

    ``model`` sits at ``eta0``; only the step default ``1e-4 max(1, |eta0|)``
    depends on it.  A parameter with vanishing derivative gives exactly zero.
    """
    b = model.binding(param)
    if not (np.any(b.dh) or np.any(b.ddelta)):
        return 0.0
    d = 1e-4 * max(1.0, abs(eta0)) if d_eta is None else float(d_eta)
    if d == 0:
        raise ValueError("d_eta must be non-zero")
    states = []
    for sgn in (-0.5, 0.5):
        psi = Evolver(build_hamiltonian(model.perturbed(param, sgn * d), state0.basis), state0.basis)(state0, t)
        _check_evolved(psi, tail_tol)
        states.append(psi)
    gap = 1 - abs(states[0].overlap(states[1]))
    if gap < 1e-12:
        raise PrecisionFloorError(
            f"1 - |overlap| = {gap:.1e} is below the 1e-12 precision floor; try d_eta ~ {d * 10:.1e}"
        )
    return 8 * gap / d**2
