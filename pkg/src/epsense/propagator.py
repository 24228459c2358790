"""Mode propagators ``S(t) = exp(-i H_D t)`` and closed-form references.

The exponential is scipy's scaling-and-squaring Pade scheme, which does not
need a diagonalizable generator and therefore stays accurate exactly at
exceptional points, where the dynamical matrix is defective.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy.linalg import expm

from .errors import ModelError, NumericRangeError, StructureError
from .model import (
    CoefficientSchedule,
    DynamicalMatrix,
    build_dynamical_matrix,
    from_rotated,
    sigma,
    sx_commutator_norm,
    to_rotated,
)

OVERFLOW_LIMIT = 1e150
STRUCTURE_TOL = 1e-10


def _as_matrix(H) -> np.ndarray:
    if isinstance(H, DynamicalMatrix):
        return H.m
    if hasattr(H, "n_modes") and hasattr(H, "delta"):
        return build_dynamical_matrix(H).m
    return np.asarray(H, dtype=complex)


def guarded_expm(a: np.ndarray, what: str = "matrix exponential") -> np.ndarray:
    """``expm(a)``, failing loudly once entries leave the working range."""
    with np.errstate(over="ignore", invalid="ignore"):
        out = expm(a)
    peak = float(np.max(np.abs(out))) if out.size else 0.0
    if not np.isfinite(peak) or peak > OVERFLOW_LIMIT:
        raise NumericRangeError(f"{what}: entries exceed {OVERFLOW_LIMIT:.0e} (max |entry| = {peak:.3e})")
    return out


@dataclass(frozen=True)
class Propagator:
    """``s = S(t)``, a 2N x 2N Bogoliubov matrix ``[[P, Q], [Q*, P*]]``."""

    t: float
    s: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.s.shape[0] // 2

    def symplectic_defect(self) -> float:
        """``max|S^+ Sz S - Sz|`` scaled by ``max(1, max|S|^2)``."""
        sz = sigma("z", self.n_modes)
        d = np.max(np.abs(self.s.conj().T @ sz @ self.s - sz))
        return float(d) / max(1.0, float(np.max(np.abs(self.s))) ** 2)


def propagate(H, t: float) -> Propagator:
    """Evolve the mode operators for time ``t`` under a constant dynamical matrix."""
    t = float(t)
    if not np.isfinite(t):
        raise ValueError(f"time must be finite, got {t}")
    m = _as_matrix(H)
    n = m.shape[0] // 2
    what = f"S(t={t:g})"
    if sx_commutator_norm(m) <= 1e-14 * max(1.0, float(np.max(np.abs(m)))):
        # diag(H+, H-) in the rotated frame: exponentiate the blocks separately
        r = to_rotated(m)
        s = np.zeros_like(r)
        s[:n, :n] = guarded_expm(-1j * t * r[:n, :n], what)
        s[n:, n:] = guarded_expm(-1j * t * r[n:, n:], what)
        return Propagator(t, from_rotated(s))
    return Propagator(t, guarded_expm(-1j * t * m, what))


def propagate_schedule(sched: CoefficientSchedule, t: float) -> Propagator:
    """Time-ordered product over a piecewise-constant schedule (later segments left)."""
    t = float(t)
    total = sched.total_time
    if t < 0 or t > total * (1 + 1e-12):
        raise ValueError(f"t={t} outside schedule duration [0, {total}]")
    n = sched.segments[0][1].n_modes
    s = np.eye(2 * n, dtype=complex)
    elapsed = 0.0
    for dur, model in sched.segments:
        step = min(dur, t - elapsed)
        if step <= 0:
            break
        s = propagate(model, step).s @ s
        elapsed += step
    return Propagator(t, s)


def pq_split(S, tol: float = STRUCTURE_TOL):
    """Return the upper blocks ``(P, Q)`` after checking the ``[[P, Q], [Q*, P*]]`` form."""
    s = S.s if isinstance(S, Propagator) else np.asarray(S, dtype=complex)
    n = s.shape[0] // 2
    p, q = s[:n, :n], s[:n, n:]
    scale = max(1.0, float(np.max(np.abs(s))))
    defect = max(np.max(np.abs(s[n:, :n] - q.conj())), np.max(np.abs(s[n:, n:] - p.conj())))
    if defect > tol * scale:
        raise StructureError(f"propagator is not of the form [[P, Q], [Q*, P*]] (defect {defect:.3e})")
    return p.copy(), q.copy()


# --- closed forms -------------------------------------------------------------

def closed_form_single_mode(delta: float, kappa: float, t: float):
    """``P, Q`` (1x1) for the single-mode squeezed oscillator in all three regimes."""
    gap = delta * delta - kappa * kappa
    if abs(gap) <= 1e-14 * max(delta * delta, kappa * kappa, 1e-300):
        p, q = 1 - 1j * delta * t, kappa * t
    elif gap > 0:
        lam = np.sqrt(gap)
        p = np.cos(lam * t) - 1j * delta / lam * np.sin(lam * t)
        q = kappa / lam * np.sin(lam * t)
    else:
        lam = np.sqrt(-gap)
        p = np.cosh(lam * t) - 1j * delta / lam * np.sinh(lam * t)
        q = kappa / lam * np.sinh(lam * t)
    return np.array([[p]], complex), np.array([[q]], complex)


def closed_form_three_mode_ep(delta: float, t: float):
    """``P, Q`` of the three-mode model at its EP ``kappa1 = kappa3 = sqrt(2) delta``."""
    a, b = delta * t, (delta * t) ** 2
    r2 = np.sqrt(2.0)
    p = np.array([[b / 2 + 1, a, b / 2], [-a, 1 - b, a], [b / 2, -a, b / 2 + 1]], complex)
    q = np.array([[-r2 * a, -b / r2, 0], [b / r2, 0, b / r2], [0, -b / r2, r2 * a]], complex)
    return p, q


def closed_form_bkc_ep(N: int, Omega: float, t: float, J: float | None = None):
    """``P, Q`` of the open Kitaev chain at its N-th order EP ``J = Omega``.

    Entry (j1, j2) with d = |j1 - j2| carries ``(2 Omega t)^d / (2 d!)``, a sign
    ``(-1)^d`` below the diagonal, and for Q an extra ``sgn(j2 - j1)``.
    """
    if J is not None and not np.isclose(J, Omega, rtol=1e-12, atol=0):
        raise ModelError(f"closed_form_bkc_ep requires J == Omega, got J={J}, Omega={Omega}")
    p = np.eye(N, dtype=complex)
    q = np.zeros((N, N), complex)
    x = 2 * Omega * t
    for j1 in range(N):
        for j2 in range(N):
            d = abs(j1 - j2)
            if d == 0:
                continue
            v = x**d / (2 * factorial(d))
            if j1 > j2:
                v *= (-1) ** d
            p[j1, j2] = v
            q[j1, j2] = v * np.sign(j2 - j1)
    return p, q


def scaled_closed_form_bkc(N: int, J: float, Omega: float, t: float):
    """``P, Q`` of the open Kitaev chain for ``|J| > |Omega|`` via a similarity scaling.

    With ``Jt = sqrt(J^2 - Omega^2)`` and ``beta = sqrt((J + Omega)/(J - Omega))``,
    the upper block of the rotated generator is ``Jt B^-1 Sy B`` with
    ``B = diag(beta^k)``, so both blocks share ``St = exp(-i Jt Sy t)`` and
    ``P_mn = St_mn (beta^(n-m) + beta^(m-n))/2``, ``Q_mn = St_mn (beta^(n-m) - beta^(m-n))/2``.
    """
    if not abs(J) > abs(Omega):
        raise ModelError(f"scaled closed form needs |J| > |Omega|, got J={J}, Omega={Omega}")
    jt = np.sqrt((J - Omega) * (J + Omega))
    beta = np.sqrt((J + Omega) / (J - Omega))
    sy = np.zeros((N, N), complex)
    for j in range(N - 1):
        sy[j, j + 1] = 1j
        sy[j + 1, j] = -1j
    st = expm(-1j * jt * t * sy)
    k = np.arange(N)
    diff = k[None, :] - k[:, None]
    up, down = beta ** diff.astype(float), beta ** (-diff.astype(float))
    return st * (up + down) / 2, st * (up - down) / 2
