"""Shared fixtures: random catalog instances and the acceptance summary."""

import math

import numpy as np
import pytest

from epsense import catalog

ACCEPTANCE = {}


def random_catalog_model(rng: np.random.Generator):
    """One catalog model with random parameters and the name of a bound parameter."""
    kind = rng.integers(5)
    if kind == 0:
        return catalog.single_mode(rng.uniform(-2, 2), rng.uniform(-2, 2)), "kappa"
    if kind == 1:
        return catalog.three_mode(*rng.uniform(-1.5, 1.5, 3)), str(rng.choice(["kappa1", "kappa3", "delta"]))
    if kind == 2:
        return catalog.three_mode_constrained(*rng.uniform(-1.5, 1.5, 2)), "eta"
    n = int(rng.integers(2, 7))
    J, Om = rng.uniform(-1.5, 1.5, 2)
    if kind == 3:
        return catalog.kitaev_chain(n, J, Om), str(rng.choice(["J", "Omega"]))
    eta, theta = rng.uniform(-0.5, 0.5), rng.uniform(0, 2 * math.pi)
    return catalog.kitaev_with_edge(n, J, Om, eta, theta), str(rng.choice(["J", "Omega", "eta"]))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def record_criterion():
    """Store a one-line verdict for an acceptance criterion."""

    def record(number: int, passed: bool, detail: str):
        ACCEPTANCE[number] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
