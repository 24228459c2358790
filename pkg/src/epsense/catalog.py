"""Catalog of the sensor models: single mode, three mode, bosonic Kitaev chain."""

import numpy as np

from .errors import ModelError
from .model import ParamBinding, QuadraticModel


def _binding(name, n, dh=None, ddelta=None):
    z = np.zeros((n, n), complex)
    return ParamBinding(name, z if dh is None else dh, z if ddelta is None else ddelta)


def single_mode(delta, kappa):
    """``delta a^+a + i kappa/2 (a^+^2 - a^2)``; EP at |kappa| = |delta|."""
    h = np.array([[delta]], complex)
    d = np.array([[1j * kappa]])
    params = {
        "kappa": _binding("kappa", 1, ddelta=np.array([[1j]])),
        "delta": _binding("delta", 1, dh=np.array([[1.0 + 0j]])),
    }
    return QuadraticModel(1, h, d, params, catalog=("single_mode", {"delta": delta, "kappa": kappa}))


def _three_mode_hopping(delta):
    return 1j * delta * np.array([[0, 1, 0], [-1, 0, 1], [0, -1, 0]], complex)


def three_mode(delta, kappa1, kappa3):
    """Squeezed-ends chain with pairing ``diag(-i kappa1, 0, i kappa3)``.

    Third-order EP in both blocks at sqrt(2) delta = kappa1 = kappa3.
    """
    h = _three_mode_hopping(delta)
    d = np.diag([-1j * kappa1, 0, 1j * kappa3])
    params = {
        "kappa1": _binding("kappa1", 3, ddelta=np.diag([-1j, 0, 0])),
        "kappa3": _binding("kappa3", 3, ddelta=np.diag([0, 0, 1j])),
        "delta": _binding("delta", 3, dh=_three_mode_hopping(1.0)),
    }
    return QuadraticModel(
        3, h, d, params, catalog=("three_mode", {"delta": delta, "kappa1": kappa1, "kappa3": kappa3})
    )


def three_mode_constrained(delta, eta):
    """Three-mode model with kappa1 = kappa3 = eta driven together."""
    h = _three_mode_hopping(delta)
    d = np.diag([-1j * eta, 0, 1j * eta])
    params = {
        "eta": _binding("eta", 3, ddelta=np.diag([-1j, 0, 1j])),
        "delta": _binding("delta", 3, dh=_three_mode_hopping(1.0)),
    }
    return QuadraticModel(3, h, d, params, catalog=("three_mode_constrained", {"delta": delta, "eta": eta}))


def _chain_matrices(n, J, omega):
    l1 = np.zeros((n, n), complex)
    l2 = np.zeros((n, n), complex)
    for j in range(n - 1):
        l1[j, j + 1] = 1j * J
        l1[j + 1, j] = -1j * J
        l2[j, j + 1] = l2[j + 1, j] = 1j * omega
    return l1, l2


def edge_trig(theta):
    """``(cos, sin)`` of the edge angle, exact in sign and magnitude at multiples of pi/4.

    Plain ``np.cos(3 pi/4) + np.sin(3 pi/4)`` is 1.1e-16 rather than 0, which
    is enough to revive the t^(4N-2) growth that cancels at that angle.
    """
    k = theta / (np.pi / 4)
    if abs(k - round(k)) < 1e-12:
        r = 1 / np.sqrt(2.0)
        c, s = [(1.0, 0.0), (r, r), (0.0, 1.0), (-r, r), (-1.0, 0.0), (-r, -r), (0.0, -1.0), (r, -r)][round(k) % 8]
        return c, s
    return float(np.cos(theta)), float(np.sin(theta))


def _edge_matrices(n, theta):
    c, s = edge_trig(theta)
    dl1 = np.zeros((n, n), complex)
    dl2 = np.zeros((n, n), complex)
    dl1[n - 1, 0] += 1j * s
    dl1[0, n - 1] += -1j * s
    dl2[n - 1, 0] += 1j * c
    dl2[0, n - 1] += 1j * c
    return dl1, dl2


def _check_chain_size(N):
    if int(N) != N or N < 2:
        raise ModelError(f"chain length N must be an integer >= 2, got {N}")
    return int(N)


def kitaev_chain(N, J, Omega):
    """Open bosonic Kitaev chain ``sum_j (iJ a_j^+ a_j+1 + i Omega a_j^+ a_j+1^+ + h.c.)``."""
    n = _check_chain_size(N)
    l1, l2 = _chain_matrices(n, J, Omega)
    dj, _ = _chain_matrices(n, 1.0, 0.0)
    _, dom = _chain_matrices(n, 0.0, 1.0)
    params = {"J": _binding("J", n, dh=dj), "Omega": _binding("Omega", n, ddelta=dom)}
    return QuadraticModel(n, l1, l2, params, catalog=("kitaev_chain", {"N": n, "J": J, "Omega": Omega}))


def kitaev_with_edge(N, J, Omega, eta, theta):
    """Kitaev chain plus the edge coupling between modes 1 and N.

    The coupling ``i eta [sin(theta) a_N^+ a_1 + cos(theta) a_N^+ a_1^+] + h.c.``
    adds (L1)_{N,1} = -(L1)_{1,N} = i eta sin(theta) and
    (L2)_{N,1} = (L2)_{1,N} = i eta cos(theta).
    """
    n = _check_chain_size(N)
    l1, l2 = _chain_matrices(n, J, Omega)
    e1, e2 = _edge_matrices(n, theta)
    dj, _ = _chain_matrices(n, 1.0, 0.0)
    _, dom = _chain_matrices(n, 0.0, 1.0)
    params = {
        "J": _binding("J", n, dh=dj),
        "Omega": _binding("Omega", n, ddelta=dom),
        "eta": _binding("eta", n, dh=e1, ddelta=e2),
    }
    return QuadraticModel(
        n,
        l1 + eta * e1,
        l2 + eta * e2,
        params,
        catalog=("kitaev_with_edge", {"N": n, "J": J, "Omega": Omega, "eta": eta, "theta": theta}),
    )


CONSTRUCTORS = {
    "single_mode": single_mode,
    "three_mode": three_mode,
    "three_mode_constrained": three_mode_constrained,
    "kitaev_chain": kitaev_chain,
    "kitaev_with_edge": kitaev_with_edge,
}


def build(name, **kwargs):
    """Construct a catalog model by name; raises ModelError on bad names or arguments."""
    try:
        ctor = CONSTRUCTORS[name]
    except KeyError:
        raise ModelError(f"unknown catalog model {name!r}; choose from {sorted(CONSTRUCTORS)}") from None
    try:
        return ctor(**kwargs)
    except TypeError as exc:
        raise ModelError(f"catalog model {name!r}: {exc}") from None
