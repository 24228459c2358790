"""Spectra of dynamical matrices, exceptional-point orders and power-law fits."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ClusteringError, NumericRangeError
from .model import build_dynamical_matrix, sx_commutator_norm, to_rotated
from .propagator import _as_matrix
from .qfi import CoherentState, evaluate

STABILITY_TOL = 1e-9
RANK_RTOL = 1e-8
MIN_GAP_RATIO = 10.0


def _eigvals_mp(a: np.ndarray, digits: int) -> np.ndarray:
    """Eigenvalues of the (float) matrix ``a`` solved in ``digits``-digit arithmetic."""
    import mpmath

    with mpmath.workdps(digits):
        w = mpmath.eig(mpmath.matrix(a.tolist()), left=False, right=False)
        return np.array([complex(z) for z in w])


def _block_eigvals(m: np.ndarray, digits: int | None = None) -> np.ndarray:
    """Eigenvalues of ``H``; blockwise when ``[H, Sx] = 0``.

    The blocks ``H+-`` of a Sx-commuting dynamical matrix are ``i`` times a
    real matrix, so solving the real problem returns exact conjugate pairs and
    keeps the ``w -> -w*`` closure exact.  Triangular (Jordan-like) blocks also
    return their diagonal exactly.
    """
    n = m.shape[0] // 2
    scale = max(1.0, float(np.max(np.abs(m))))
    eig = np.linalg.eigvals if digits is None else (lambda a: _eigvals_mp(a, digits))
    if sx_commutator_norm(m) <= 1e-14 * scale:
        r = to_rotated(m)
        parts = []
        for blk in (r[:n, :n], r[n:, n:]):
            real = (blk / 1j).real
            if np.max(np.abs((blk / 1j).imag), initial=0.0) <= 1e-14 * scale:
                parts.append(1j * eig(real))
            else:
                parts.append(eig(blk))
        return np.concatenate(parts)
    return eig(m)


def _sorted(w):
    w = np.asarray(w, complex)
    return w[np.lexsort((w.imag, w.real))]


def closure_defect(w) -> float:
    """Largest mismatch after optimally pairing ``w`` with ``-conj(w)``."""
    w = np.asarray(w, complex)
    cost = np.abs(w[:, None] + w.conj()[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max(initial=0.0))


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    max_imag: float
    stable: bool
    closure_defect: float


def spectrum(H, tol: float = STABILITY_TOL, digits: int | None = None) -> SpectrumReport:
    """Sorted eigenvalues with the stability flag ``max|Im w| <= tol``.

    Double-precision eigenvalues of an M-th order EP scatter by about
    ``(1e-16 |H|)^(1/M)``.  Passing ``digits`` solves the same float matrix
    in extended precision (mpmath), which resolves the EP far more sharply
    at a cost of roughly 0.5 s for a 20 x 20 block.
    """
    m = _as_matrix(H)
    w = _sorted(_block_eigvals(m, digits))
    max_imag = float(np.max(np.abs(w.imag), initial=0.0))
    return SpectrumReport(w, max_imag, max_imag <= tol, closure_defect(w))


@dataclass(frozen=True)
class EpReport:
    value: complex
    algebraic_multiplicity: int
    jordan_order: int
    gap_ratio: float


def _clusters(w, tol):
    """Single-linkage groups of eigenvalues closer than ``tol``."""
    n = len(w)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    d = np.abs(w[:, None] - w[None, :])
    for i in range(n):
        for j in range(i + 1, n):
            if d[i, j] <= tol:
                parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [np.array(g) for g in groups.values()], d


def _rank(a: np.ndarray, ref: float) -> int:
    s = np.linalg.svd(a, compute_uv=False)
    return int(np.sum(s > RANK_RTOL * ref))


def ep_order(H, cluster_tol: float) -> list:
    """Cluster the spectrum and measure the largest Jordan block of each cluster.

    ``jordan_order`` is the smallest ``k`` with ``rank((H - l)^k) = 2N - m``;
    singular values below ``1e-8 * sigma_max(H - l)`` count as zero.  Raises
    ClusteringError when the closest pair of clusters is less than ten
    within-cluster diameters apart.
    """
    if not cluster_tol > 0:
        raise ValueError("cluster_tol must be positive")
    m = _as_matrix(H)
    dim = m.shape[0]
    w = _block_eigvals(m)
    groups, d = _clusters(w, cluster_tol)
    within = max((d[np.ix_(g, g)].max() for g in groups), default=0.0)
    between = np.inf
    for i, g in enumerate(groups):
        for h in groups[i + 1 :]:
            between = min(between, d[np.ix_(g, h)].min())
    gap = np.inf if within == 0 else between / within
    if gap < MIN_GAP_RATIO:
        raise ClusteringError(
            f"ambiguous eigenvalue clusters: nearest clusters {between:.3e} apart, "
            f"cluster diameter up to {within:.3e} (ratio {gap:.2f} < {MIN_GAP_RATIO:g}); adjust cluster_tol"
        )
    out = []
    eye = np.eye(dim)
    for g in groups:
        lam = complex(np.mean(w[g]))
        mult = len(g)
        a = m - lam * eye
        ref = max(float(np.linalg.norm(a, 2)), 1e-300)
        power = eye.astype(complex)
        order = mult
        for k in range(1, mult + 1):
            power = power @ a
            if _rank(power, ref**k) <= dim - mult:
                order = k
                break
        out.append(EpReport(lam, mult, order, float(gap)))
    return sorted(out, key=lambda r: (r.value.real, r.value.imag))


@dataclass(frozen=True)
class ResponseReport:
    deltas: np.ndarray
    max_abs: float


def spectrum_response(model, param: str, eps: float, base_value=None, cluster_tol=1e-3) -> ResponseReport:
    """Eigenvalue shifts ``w(eps) - w(0)`` and their maximum modulus.

    Base eigenvalues that cluster within ``cluster_tol`` (relative to the
    matrix scale) are replaced by the cluster mean, so at an EP every shift is
    measured from the common degenerate value.  Shifts are then paired to base
    values by minimum total distance.  ``base_value`` overrides the base.
    """
    m0 = build_dynamical_matrix(model).m
    m1 = build_dynamical_matrix(model.perturbed(param, eps)).m
    w1 = _block_eigvals(m1)
    if base_value is not None:
        deltas = w1 - complex(base_value)
    else:
        w0 = _block_eigvals(m0)
        groups, _ = _clusters(w0, cluster_tol * max(1.0, float(np.max(np.abs(m0)))))
        for g in groups:
            w0[g] = np.mean(w0[g])
        cost = np.abs(w1[:, None] - w0[None, :])
        r, c = linear_sum_assignment(cost)
        deltas = w1[r] - w0[c]
    deltas = _sorted(deltas)
    return ResponseReport(deltas, float(np.max(np.abs(deltas), initial=0.0)))


def bkc_edge_response_roots(N: int, Omega: float, eps: float, theta: float) -> np.ndarray:
    """Roots ``z`` of ``(2 Omega)^2 z^N - eps^2 cos(2 theta) z^(N-2) - 2 eps Omega (cos + sin) = 0``.

    The Kitaev-chain eigenvalue shifts under the edge coupling are ``E = 2 i Omega z``.
    """
    from .catalog import edge_trig

    if eps < 0:
        raise ValueError("eps must be >= 0")
    c, s = edge_trig(theta)
    coeffs = np.zeros(N + 1, complex)
    coeffs[0] = (2 * Omega) ** 2
    coeffs[2] += -(eps**2) * (c * c - s * s)
    coeffs[N] += -2 * eps * Omega * (c + s)
    roots = np.roots(coeffs)
    return np.concatenate([roots, np.zeros(N - len(roots), complex)])


# --- fits ---------------------------------------------------------------------

@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float
    window: tuple
    n_points: int

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "window": [self.window[0], self.window[1]],
            "n_points": self.n_points,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def parse_window(text: str) -> tuple:
    """``"lo:hi"`` to a float pair."""
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise ValueError(f"window must look like lo:hi, got {text!r}") from None
    if not lo < hi:
        raise ValueError(f"window needs lo < hi, got {text!r}")
    return lo, hi


def fit_line(x, y, window) -> FitResult:
    """Least squares ``y = slope x + intercept`` over points with ``lo <= x <= hi``."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    lo, hi = float(window[0]), float(window[1])
    if not lo < hi:
        raise ValueError(f"empty fit window ({lo}, {hi})")
    sel = (x >= lo * (1 - 1e-12)) & (x <= hi * (1 + 1e-12)) if lo > 0 else (x >= lo) & (x <= hi)
    xs, ys = x[sel], y[sel]
    if len(xs) < 3:
        raise ValueError(f"fit window [{lo:g}, {hi:g}] holds {len(xs)} points; need at least 3")
    if np.ptp(xs) == 0:
        raise ValueError("degenerate abscissa: all points share the same x")
    if not np.all(np.isfinite(ys)):
        raise ValueError("non-finite ordinate in fit window")
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else float(np.clip(1 - np.sum(resid**2) / ss_tot, 0.0, 1.0))
    return FitResult(float(slope), float(intercept), r2, (lo, hi), int(len(xs)))


def fit_power_law(x, y, window) -> FitResult:
    """Fit ``ln y = slope ln x + intercept``; ``window`` bounds ``x`` (not its log)."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit needs positive x and y")
    lo, hi = window
    if not 0 < lo < hi:
        raise ValueError(f"power-law window must satisfy 0 < lo < hi, got {window}")
    r = fit_line(np.log(x), np.log(y), (np.log(lo) - 1e-12, np.log(hi) + 1e-12))
    return FitResult(r.slope, r.intercept, r.r_squared, (float(lo), float(hi)), r.n_points)


def qfi_time_exponent(model, param, st, t_grid, window) -> FitResult:
    """Fitted ``d_F`` from ``F(t)`` on ``t_grid`` restricted to ``window``."""
    st = st if st is not None else CoherentState.vacuum(model.n_modes)
    F = [evaluate(model, param, t, st).F for t in t_grid]
    return fit_power_law(t_grid, F, window)


def size_scaling_fit(family, t0: float, N_range, param: str = "eta", st=None, window=None):
    """Semilog fit of ``ln F(t0)`` against ``N``; returns ``(FitResult, Ns, F)``."""
    Ns = [int(n) for n in N_range]
    F = []
    for n in Ns:
        model = family(n)
        state = st(n) if callable(st) else (st or CoherentState.vacuum(n))
        try:
            F.append(evaluate(model, param, t0, state).F)
        except NumericRangeError as exc:
            raise NumericRangeError(f"N={n}, t0={t0:g}: {exc}; try a smaller t0", last_good=None) from None
    F = np.array(F)
    if np.any(F <= 0):
        raise ValueError("size scaling needs F > 0 at every N")
    window = window or (min(Ns), max(Ns))
    return fit_line(Ns, np.log(F), window), np.array(Ns), F
