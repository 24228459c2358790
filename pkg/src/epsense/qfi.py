"""Coefficient matrices and the quantum Fisher information of Gaussian-evolved states.

For ``H(eta)`` quadratic, ``d/deta exp(-iHt) = exp(-iHt) O`` with
``O = -(i/2) X`` and

    X = C0 + sum_kj 2 C1_kj a_k^+ a_j + C2_kj a_k^+ a_j^+ + C2*_kj a_k a_j,

where ``[[C1, C2], [C2*, C1*]] = int_0^t S(y)^+ Sz dH S(y) dy``.  For a pure
state the QFI is ``4 Var(iO) = Var(X)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import ModelError, NumericRangeError, StructureError
from .model import (
    CoefficientSchedule,
    QuadraticModel,
    build_dynamical_matrix,
    from_rotated,
    partial_derivative,
    sigma,
    sx_commutator_norm,
    to_rotated,
)
from .propagator import OVERFLOW_LIMIT, _as_matrix, guarded_expm, propagate

NEGATIVE_QFI_TOL = 1e-8
NORM_TOL = 1e-8


@dataclass(frozen=True)
class CoefficientSet:
    """``c0`` (real scalar), ``c1`` (Hermitian) and ``c2`` (symmetric) at time ``t``."""

    t: float
    c0: complex
    c1: np.ndarray
    c2: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.c1.shape[0]

    def assembled(self) -> np.ndarray:
        return np.block([[self.c1, self.c2], [self.c2.conj(), self.c1.conj()]])


def _c0_weight(dH: np.ndarray) -> np.ndarray:
    """Matrix ``W`` with ``c0 = Tr[(int S^+ W S)_{22}]``."""
    n = dH.shape[0] // 2
    dh, dd = dH[:n, :n], dH[:n, n:]
    return np.block([[2 * dh, dd], [dd.conj(), np.zeros((n, n))]])


def _sandwich_van_loan(Ha, Hb, weights, t):
    """Van Loan form: upper-right blocks of ``exp(t [[-i Ha^+, W], [0, -i Hb]])``.

    These equal ``int exp(-i Ha^+ (t-y)) W exp(-i Hb y)``, and left-multiplying
    by ``Sa(t)^+`` gives the integrals.  That final product cancels large
    entries against each other, so accuracy degrades as the propagator grows.
    """
    n = Ha.shape[0]
    k = len(weights)
    big = np.zeros(((k + 1) * n, (k + 1) * n), complex)
    big[:n, :n] = -1j * Ha.conj().T
    for i, w in enumerate(weights, start=1):
        big[:n, i * n : (i + 1) * n] = w
        big[i * n : (i + 1) * n, i * n : (i + 1) * n] = -1j * Hb
    e = guarded_expm(t * big, f"coefficient integral (t={t:g})")
    sa_dag = guarded_expm(-1j * t * Ha, f"S(t={t:g})").conj().T
    return [sa_dag @ e[:n, i * n : (i + 1) * n] for i in range(1, k + 1)]


def _sandwich_sylvester(Ha, Hb, weights, t):
    """Integrate ``Z' = i Ha^+ Z - i Z Hb`` directly on ``vec Z``.

    With ``L = i Ha^+ (x) I - i I (x) Hb^T`` (row-major vec), the integral
    ``int_0^t exp(L y) vec W dy`` is the last column block of
    ``exp(t [[L, W...], [0, 0]])``.  No large propagator is ever multiplied
    back in, so cancelling parameter points keep full relative accuracy.
    """
    n = Ha.shape[0]
    nn = n * n
    k = len(weights)
    eye = np.eye(n)
    big = np.zeros((nn + k, nn + k), complex)
    big[:nn, :nn] = 1j * np.kron(Ha.conj().T, eye) - 1j * np.kron(eye, Hb.T)
    for i, w in enumerate(weights):
        big[:nn, nn + i] = np.asarray(w, complex).reshape(nn)
    e = guarded_expm(t * big, f"coefficient integral (t={t:g})")
    return [e[:nn, nn + i].reshape(n, n) for i in range(k)]


_KERNELS = {"sylvester": _sandwich_sylvester, "van_loan": _sandwich_van_loan}
METHODS = ("semigroup", "sylvester", "van_loan")
STEP_NORM = 0.5


class _BlockFrame:
    """``H`` and the weights split into diagonal blocks.

    When ``H`` commutes with ``Sx`` it is rotated to ``diag(H+, H-)``, so each
    integral splits into the four pieces ``int Sa^+ W_ab Sb``.  Otherwise the
    single block is ``H`` itself.
    """

    def __init__(self, m, weights, rotate="auto"):
        self.dim = m.shape[0]
        n = self.dim // 2
        scale = max(1.0, float(np.max(np.abs(m))))
        comm = sx_commutator_norm(m)
        if rotate == "auto":
            rotate = comm <= 1e-14 * scale
        elif rotate and comm > 1e-12 * scale:
            raise StructureError("rotated evaluation needs [H, Sigma_x] = 0")
        self.rotated = bool(rotate)
        if self.rotated:
            hr = to_rotated(m)
            self.slices = (slice(0, n), slice(n, 2 * n))
            self.blocks = [hr[:n, :n], hr[n:, n:]]
            wr = np.stack([to_rotated(np.asarray(w, complex)) for w in weights])
        else:
            self.slices = (slice(0, self.dim),)
            self.blocks = [m]
            wr = np.stack([np.asarray(w, complex) for w in weights])
        self.pairs = [(a, b) for a in range(len(self.blocks)) for b in range(len(self.blocks))]
        self.w = {(a, b): wr[:, self.slices[a], self.slices[b]] for a, b in self.pairs}

    def assemble(self, parts):
        """Full-size integrals from per-pair stacks ``parts[(a, b)]``."""
        k = next(iter(parts.values())).shape[0]
        out = np.zeros((k, self.dim, self.dim), complex)
        for a, b in self.pairs:
            out[:, self.slices[a], self.slices[b]] = parts[(a, b)]
        return [from_rotated(o) if self.rotated else o for o in out]

    def single_shot(self, kernel, t):
        parts = {
            (a, b): np.stack(kernel(self.blocks[a], self.blocks[b], list(self.w[(a, b)]), t))
            for a, b in self.pairs
        }
        return self.assemble(parts)

    @staticmethod
    def _check_range(s, acc, t, last_good):
        peak = max(max(float(np.max(np.abs(x))) for x in s), max(float(np.max(np.abs(v))) for v in acc.values()))
        if not np.isfinite(peak) or peak > OVERFLOW_LIMIT:
            raise NumericRangeError(
                f"coefficient integral at t={t:g}: entries exceed {OVERFLOW_LIMIT:.0e}", last_good=last_good or None
            )

    def march(self, times, step_norm=STEP_NORM):
        """Yield ``(t, integrals)`` along increasing ``times`` via the semigroup law.

        ``I(t + tau) = I(t) + S(t)^+ I(tau) S(t)`` with short steps
        (``||H tau||_1 <= step_norm``) whose integrals come from the block
        identity.  Increments have the size of the integrand itself, so no
        large terms cancel.
        """
        nrm = max(float(np.linalg.norm(b, 1)) for b in self.blocks)
        s = [np.eye(b.shape[0], dtype=complex) for b in self.blocks]
        acc = {p: np.zeros_like(w) for p, w in self.w.items()}
        now = 0.0
        for t in times:
            span = t - now
            if span > 0:
                k = max(1, int(np.ceil(span * nrm / step_norm)))
                tau = span / k
                sh = [guarded_expm(-1j * tau * b, f"S(tau={tau:g})") for b in self.blocks]
                ih = {
                    (a, b): np.stack(_sandwich_van_loan(self.blocks[a], self.blocks[b], list(self.w[(a, b)]), tau))
                    for a, b in self.pairs
                }
                # overflow shows up as inf/nan and is caught by the periodic range check
                with np.errstate(over="ignore", invalid="ignore"):
                    for i in range(k):
                        for a, b in self.pairs:
                            acc[(a, b)] += s[a].conj().T @ ih[(a, b)] @ s[b]
                        s = [h @ x for h, x in zip(sh, s)]
                        if i % 256 == 255 or i == k - 1:
                            self._check_range(s, acc, t, now)
                now = t
            yield t, self.assemble(acc)


def sandwich_integrals(H, weights, t, rotate="auto", method="semigroup"):
    """``int_0^t S^+ W S dy`` for each ``W``.

    ``method`` is ``"semigroup"`` (default, short block-identity steps),
    ``"sylvester"`` (one exponential of the vectorized integrand generator) or
    ``"van_loan"`` (one exponential and a final ``S(t)^+`` factor).  The two
    single-shot forms agree with the default at moderate times but lose
    accuracy once ``||H t||`` is large and ``H`` is far from normal.
    """
    return sandwich_series(H, weights, [t], rotate=rotate, method=method)[0]


def sandwich_series(H, weights, times, rotate="auto", method="semigroup"):
    """:func:`sandwich_integrals` at each of ``times`` (any order, all ``>= 0``)."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {list(METHODS)}")
    m = _as_matrix(H)
    times = [float(t) for t in times]
    if any(not np.isfinite(t) or t < 0 for t in times):
        raise ValueError("times must be finite and >= 0")
    frame = _BlockFrame(m, weights, rotate)
    if method != "semigroup":
        return [frame.single_shot(_KERNELS[method], t) for t in times]
    order = np.argsort(times, kind="stable")
    out = [None] * len(times)
    for idx, (_, res) in zip(order, frame.march([times[i] for i in order])):
        out[idx] = res
    return out


def _assemble_set(t, i_main, i_c0, n):
    return CoefficientSet(
        t=float(t),
        c0=complex(np.trace(i_c0[n:, n:])),
        c1=i_main[:n, :n].copy(),
        c2=i_main[:n, n:].copy(),
    )


def _weights(dH):
    n = dH.shape[0] // 2
    return [sigma("z", n) @ dH, _c0_weight(dH)]


def _check_pair(H, dH):
    m = _as_matrix(H)
    dH = np.asarray(dH, complex)
    if dH.shape != m.shape:
        raise ModelError(f"dH shape {dH.shape} does not match H shape {m.shape}")
    return m, dH


def coefficient_series(H, dH, times, rotate="auto", method="semigroup") -> list:
    """Coefficient sets at each of ``times``; one march covers the whole grid."""
    m, dH = _check_pair(H, dH)
    n = m.shape[0] // 2
    res = sandwich_series(m, _weights(dH), times, rotate=rotate, method=method)
    return [_assemble_set(t, a, b, n) for t, (a, b) in zip(times, res)]


def coefficient_matrices(H, dH, t: float, rotate="auto", method="semigroup") -> CoefficientSet:
    """Coefficient matrices ``C0, C1, C2`` at time ``t``."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    return coefficient_series(H, dH, [t], rotate=rotate, method=method)[0]


def model_coefficients(model: QuadraticModel, param: str, t: float, **kw) -> CoefficientSet:
    return coefficient_matrices(build_dynamical_matrix(model), partial_derivative(model, param), t, **kw)


def coefficient_matrices_schedule(sched: CoefficientSchedule, param: str, t: float) -> CoefficientSet:
    """Coefficient matrices for a piecewise-constant schedule.

    Segment ``k`` starting at ``T`` contributes ``S(T)^+ I_k S(T)`` where
    ``I_k`` is its own constant-generator integral over the elapsed part.
    """
    t = float(t)
    if t < 0 or t > sched.total_time * (1 + 1e-12):
        raise ValueError(f"t={t} outside schedule duration [0, {sched.total_time}]")
    n = sched.segments[0][1].n_modes
    s = np.eye(2 * n, dtype=complex)
    i_main = np.zeros((2 * n, 2 * n), complex)
    i_c0 = np.zeros_like(i_main)
    elapsed = 0.0
    for dur, model in sched.segments:
        step = min(dur, t - elapsed)
        if step <= 0:
            break
        m = build_dynamical_matrix(model).m
        dH = partial_derivative(model, param)
        a, b = sandwich_integrals(m, [sigma("z", n) @ dH, _c0_weight(dH)], step)
        i_main += s.conj().T @ a @ s
        i_c0 += s.conj().T @ b @ s
        s = propagate(m, step).s @ s
        elapsed += step
    return _assemble_set(t, i_main, i_c0, n)


def quadrature_coefficients(H, dH, t: float, tol: float = 1e-10, max_level: int = 16) -> CoefficientSet:
    """Independent check: composite Simpson on ``S^+ W S`` with interval doubling.

    Refines until successive estimates differ by less than ``tol`` relative to
    ``max(1, max|I|)``.
    """
    m = _as_matrix(H)
    dH = np.asarray(dH, complex)
    n = m.shape[0] // 2
    w = np.stack([sigma("z", n) @ dH, _c0_weight(dH)])
    if t == 0:
        return _assemble_set(0.0, np.zeros((2 * n, 2 * n)), np.zeros((2 * n, 2 * n)), n)

    def f(y):
        s = expm(-1j * y * m)
        return s.conj().T @ w @ s

    intervals = 8
    ys = np.linspace(0, t, intervals + 1)
    vals = [f(y) for y in ys]
    prev = None
    for _ in range(max_level):
        h = t / intervals
        coef = np.ones(intervals + 1)
        coef[1:-1:2], coef[2:-1:2] = 4, 2
        est = h / 3 * np.tensordot(coef, np.array(vals), axes=1)
        if prev is not None and np.max(np.abs(est - prev)) < tol * max(1.0, float(np.max(np.abs(est)))):
            return _assemble_set(t, est[0], est[1], n)
        prev = est
        mids = [f((k + 0.5) * h) for k in range(intervals)]
        merged = [None] * (2 * intervals + 1)
        merged[::2], merged[1::2] = vals, mids
        vals, intervals = merged, 2 * intervals
    raise RuntimeError(f"quadrature did not converge to {tol} within {max_level} doublings")


# --- states -------------------------------------------------------------------

@dataclass(frozen=True)
class CoherentState:
    """Multimode coherent state ``|alpha_1, ..., alpha_N>``."""

    alpha: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.alpha, complex)).copy()
        if a.ndim != 1 or not np.all(np.isfinite(a)):
            raise ValueError("alpha must be a finite 1-D vector")
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)

    @classmethod
    def vacuum(cls, n_modes: int) -> "CoherentState":
        return cls(np.zeros(n_modes, complex))


def coherent_overlap(a, b) -> complex:
    """``<a|b>`` for multimode coherent states."""
    a, b = np.asarray(a, complex), np.asarray(b, complex)
    return complex(np.exp(-0.5 * (np.vdot(a, a).real + np.vdot(b, b).real) + np.vdot(a, b)))


@dataclass(frozen=True)
class SuperpositionState:
    """``sum_j f_j |alpha^j>`` with the exact (non-orthogonal) normalization."""

    weights: np.ndarray
    alphas: np.ndarray

    def __post_init__(self):
        f = np.atleast_1d(np.asarray(self.weights, complex)).copy()
        a = np.atleast_2d(np.asarray(self.alphas, complex)).copy()
        if a.shape[0] != f.shape[0]:
            raise ValueError("need one alpha vector per weight")
        for j in range(len(a)):
            for k in range(j):
                if np.allclose(a[j], a[k], rtol=0, atol=1e-14):
                    raise ValueError(f"terms {k} and {j} share the same alpha")
        f.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "weights", f)
        object.__setattr__(self, "alphas", a)

    @classmethod
    def normalized(cls, weights, alphas) -> "SuperpositionState":
        raw = cls(weights, alphas)
        return cls(raw.weights / np.sqrt(raw.norm()), raw.alphas)

    def gram(self) -> np.ndarray:
        a = self.alphas
        return np.array([[coherent_overlap(x, y) for y in a] for x in a])

    def norm(self) -> float:
        f = self.weights
        return float(np.real(f.conj() @ self.gram() @ f))


# --- QFI ------------------------------------------------------------------------

def _clamp(F: float) -> float:
    if F < -NEGATIVE_QFI_TOL * max(1.0, abs(F)):
        raise ArithmeticError(f"QFI evaluated to {F:.3e} < 0; inconsistent coefficient matrices")
    return max(F, 0.0)


def qfi_coherent(C: CoefficientSet, st) -> float:
    """``F = 4 B^+ B + 2 Tr(C2^+ C2)`` with ``B = C1 alpha + C2 alpha*``."""
    alpha = st.alpha if isinstance(st, CoherentState) else np.asarray(st, complex)
    if alpha.shape != (C.n_modes,):
        raise ValueError(f"alpha has shape {alpha.shape}, expected ({C.n_modes},)")
    b = C.c1 @ alpha + C.c2 @ alpha.conj()
    F = 4 * np.vdot(b, b).real + 2 * np.vdot(C.c2, C.c2).real
    return _clamp(float(F))


def superposition_moments(C: CoefficientSet, st: SuperpositionState):
    """``(<X>, <X^2>)`` for a superposition of coherent states."""
    if st.alphas.shape[1] != C.n_modes:
        raise ValueError(f"alpha vectors have {st.alphas.shape[1]} modes, expected {C.n_modes}")
    gram = st.gram()
    f = st.weights
    nrm = float(np.real(f.conj() @ gram @ f))
    if abs(nrm - 1) > NORM_TOL:
        raise ValueError(f"superposition is not normalized: <psi|psi> = {nrm:.12g}")
    c1, c2 = C.c1, C.c2
    tr = np.vdot(c2, c2).real
    m1 = m2 = 0.0
    for j, aj in enumerate(st.alphas):
        u = aj.conj()
        for k, ak in enumerate(st.alphas):
            v = ak
            x = C.c0 + 2 * u @ c1 @ v + u @ c2 @ u + v @ c2.conj() @ v
            r = 4 * (u @ c1 + v @ c2.conj()) @ (c1 @ v + c2 @ u) + 2 * tr
            wgt = f[j].conj() * f[k] * gram[j, k]
            m1 += wgt * x
            m2 += wgt * (r + x * x)
    return complex(m1 / nrm), complex(m2 / nrm)


def qfi_superposition_from(C: CoefficientSet, st: SuperpositionState) -> float:
    m1, m2 = superposition_moments(C, st)
    return _clamp(float(np.real(m2 - m1 * m1.conjugate())))


def qfi_superposition(H, dH, t: float, st: SuperpositionState) -> float:
    """QFI of a coherent-state superposition evolved for time ``t``."""
    return qfi_superposition_from(coefficient_matrices(H, dH, t), st)


def particle_number(S, st) -> float:
    """Mean total photon number ``sum_j |(P a + Q a*)_j|^2 + sum_jk |Q_jk|^2``."""
    s = S.s if hasattr(S, "s") else np.asarray(S, complex)
    alpha = st.alpha if isinstance(st, CoherentState) else np.asarray(st, complex)
    n = s.shape[0] // 2
    p, q = s[:n, :n], s[:n, n:]
    mean = p @ alpha + q @ alpha.conj()
    return float(np.vdot(mean, mean).real + np.vdot(q, q).real)


def heisenberg_ratio(F: float, Q: float) -> float:
    if not Q > 0:
        raise ValueError(f"particle number must be positive, got {Q}")
    return F / Q**2


@dataclass(frozen=True)
class QfiPoint:
    t: float
    F: float
    Q: float
    c2_frobenius: float


def _point(model, S, C, st) -> QfiPoint:
    return QfiPoint(C.t, qfi_coherent(C, st), particle_number(S, st), float(np.linalg.norm(C.c2)))


def evaluate(model: QuadraticModel, param: str, t: float, st: CoherentState | None = None) -> QfiPoint:
    """QFI, particle number and ``||C2||_F`` of one (model, t) point."""
    st = st if st is not None else CoherentState.vacuum(model.n_modes)
    return _point(model, propagate(model, t), model_coefficients(model, param, t), st)


def evaluate_times(model, param, times, st=None):
    """Evaluate an increasing time grid with one march.

    Returns ``(points, error)``: on overflow the finished prefix is kept and
    ``error`` is the NumericRangeError carrying ``last_good``; otherwise
    ``error`` is None.
    """
    times = [float(t) for t in times]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("time grid must be non-decreasing")
    st = st if st is not None else CoherentState.vacuum(model.n_modes)
    m = build_dynamical_matrix(model).m
    dH = partial_derivative(model, param)
    n = model.n_modes
    frame = _BlockFrame(m, _weights(dH))
    out = []
    try:
        for t, (a, b) in frame.march(times):
            out.append(_point(model, propagate(m, t), _assemble_set(t, a, b, n), st))
    except NumericRangeError as exc:
        exc.last_good = out[-1].t if out else None
        return out, exc
    return out, None
