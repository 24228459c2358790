import math

import numpy as np
import pytest

from epsense import catalog
from epsense.errors import PrecisionFloorError, TruncationError
from epsense.fock import (
    DenseState,
    Evolver,
    FockBasis,
    build_hamiltonian,
    coherent_vector,
    evolve,
    fidelity_qfi,
)
from epsense.model import ParamBinding, QuadraticModel
from epsense.qfi import CoherentState, evaluate

R2 = math.sqrt(2)


class TestBasis:
    def test_ordering_mode_one_slowest(self):
        b = FockBasis(2, 2)
        occ = b.occupations()
        assert occ[:4].tolist() == [[0, 0], [0, 1], [0, 2], [1, 0]]
        for i, o in enumerate(occ):
            assert b.index(o) == i

    def test_dimension_limit(self):
        with pytest.raises(TruncationError, match="exceeds the limit"):
            FockBasis(4, 30)
        assert FockBasis(3, 14).dim == 15**3

    def test_annihilator_ladder(self):
        b = FockBasis(2, 3)
        a1 = b.annihilator(1).toarray()
        src, dst = b.index([2, 3]), b.index([2, 2])
        assert a1[dst, src] == pytest.approx(math.sqrt(3))


class TestHamiltonian:
    def test_number_operator(self):
        H = build_hamiltonian(catalog.single_mode(0.7, 0.0), FockBasis(1, 2))
        np.testing.assert_allclose(H, np.diag([0, 0.7, 1.4]))

    def test_squeezing_couplings(self):
        kappa = 0.9
        H = build_hamiltonian(catalog.single_mode(0.0, kappa), FockBasis(1, 2))
        nz = {tuple(ix) for ix in np.argwhere(np.abs(H) > 0)}
        assert nz == {(2, 0), (0, 2)}
        assert abs(H[2, 0]) == pytest.approx(kappa / 2 * math.sqrt(2))
        assert H[2, 0] == pytest.approx(1j * kappa / 2 * math.sqrt(2))

    def test_two_site_hop(self):
        J = 0.6
        b = FockBasis(2, 3)
        H = build_hamiltonian(catalog.kitaev_chain(2, J, 0.0), b)
        for n1 in range(3):
            for n2 in range(1, 4):
                got = H[b.index([n1 + 1, n2 - 1]), b.index([n1, n2])]
                assert got == pytest.approx(1j * J * math.sqrt(n1 + 1) * math.sqrt(n2))

    @pytest.mark.parametrize("model", [catalog.three_mode(1, R2, R2), catalog.kitaev_with_edge(3, 1, 0.7, 0.2, 1.1)])
    def test_hermitian(self, model):
        H = build_hamiltonian(model, FockBasis(model.n_modes, 4))
        assert np.max(np.abs(H - H.conj().T)) <= 1e-12

    def test_mode_mismatch(self):
        with pytest.raises(ValueError):
            build_hamiltonian(catalog.single_mode(1, 1), FockBasis(2, 3))


class TestCoherentVector:
    def test_vacuum(self):
        v = coherent_vector([0, 0], FockBasis(2, 5)).amplitudes
        assert v[0] == 1 and np.count_nonzero(v) == 1

    def test_ground_amplitude(self):
        v = coherent_vector([1.0], FockBasis(1, 20)).amplitudes
        assert v[0] == pytest.approx(math.exp(-0.5), abs=1e-12)

    @pytest.mark.parametrize("alpha", [0.3, 1.0, 0.6 - 0.8j])
    def test_mean_number(self, alpha):
        psi = coherent_vector([alpha], FockBasis(1, 30))
        assert psi.mean_number() == pytest.approx(abs(alpha) ** 2, abs=1e-10)

    def test_tail_refusal(self):
        with pytest.raises(TruncationError, match="increase the cutoff"):
            coherent_vector([2.0], FockBasis(1, 8))


class TestEvolution:
    def test_norm_conserved(self):
        model = catalog.kitaev_with_edge(3, 1, 0.5, 0.2, 0.4)
        b = FockBasis(3, 10)
        psi = evolve(model, coherent_vector([0.2, 0, -0.1j], b), 0.4, tail_tol=1e-6)
        assert abs(psi.norm() - 1) <= 1e-8

    def test_matches_dense_expm(self):
        from scipy.linalg import expm

        model = catalog.single_mode(1.0, 0.5)
        b = FockBasis(1, 40)
        psi0 = coherent_vector([0.5], b)
        H = build_hamiltonian(model, b)
        ref = expm(-1j * 0.7 * H) @ psi0.amplitudes
        np.testing.assert_allclose(Evolver(H, b)(psi0, 0.7).amplitudes, ref, atol=1e-12)

    def test_evolved_tail_refusal(self):
        with pytest.raises(TruncationError, match="evolved tail"):
            evolve(catalog.single_mode(1.0, 1.0), coherent_vector([0.0], FockBasis(1, 10)), 3.0)


class TestFidelityQfi:
    def test_unbound_parameter_is_zero(self):
        z = np.zeros((1, 1))
        model = QuadraticModel(1, [[1.0]], [[0.5j]], {"g": ParamBinding("g", z, z)})
        assert fidelity_qfi(model, "g", 1.0, coherent_vector([0.5], FockBasis(1, 30))) == 0.0

    def test_single_mode_ep_unit_time(self):
        model = catalog.single_mode(1.0, 1.0)
        Fo = fidelity_qfi(model, "kappa", 1.0, coherent_vector([0.0], FockBasis(1, 80)), eta0=1.0)
        assert Fo == pytest.approx(evaluate(model, "kappa", 1.0).F, rel=1e-3)
        # value of 2|C2|^2 with C2 = i - 1 - 2i/3
        assert Fo == pytest.approx(2 * (1 + 1 / 9), rel=1e-5)

    @pytest.mark.slow
    def test_three_mode_ep(self):
        # the evolved tail at n_max = 14 is about 2e-4, above the strict default
        model = catalog.three_mode(1.0, R2, R2)
        Fo = fidelity_qfi(model, "kappa1", 0.5, coherent_vector([0, 0, 0], FockBasis(3, 14)), eta0=R2, tail_tol=1e-2)
        assert Fo == pytest.approx(0.48316623263888897, rel=1e-2)
        assert Fo == pytest.approx(evaluate(model, "kappa1", 0.5).F, rel=1e-4)

    def test_step_symmetry(self):
        model = catalog.single_mode(1.0, 0.6)
        psi0 = coherent_vector([0.4], FockBasis(1, 50))
        a = fidelity_qfi(model, "kappa", 0.8, psi0, eta0=0.6, d_eta=1e-3)
        b = fidelity_qfi(model, "kappa", 0.8, psi0, eta0=0.6, d_eta=-1e-3)
        assert a == pytest.approx(b, rel=1e-12)

    def test_richardson_consistency(self):
        model = catalog.single_mode(1.0, 0.6)
        psi0 = coherent_vector([0.4], FockBasis(1, 50))
        exact = evaluate(model, "kappa", 0.8, CoherentState([0.4])).F
        f1, f2 = (fidelity_qfi(model, "kappa", 0.8, psi0, eta0=0.6, d_eta=d) for d in (4e-3, 2e-3))
        extrapolated = (4 * f2 - f1) / 3
        assert abs(f2 - exact) < abs(f1 - exact)
        assert extrapolated == pytest.approx(exact, rel=1e-6)

    def test_precision_floor(self):
        model = catalog.single_mode(1.0, 0.6)
        with pytest.raises(PrecisionFloorError, match="try d_eta"):
            fidelity_qfi(model, "kappa", 0.1, coherent_vector([0.0], FockBasis(1, 30)), d_eta=1e-9)

    def test_zero_step(self):
        with pytest.raises(ValueError):
            fidelity_qfi(catalog.single_mode(1, 1), "kappa", 1.0, coherent_vector([0], FockBasis(1, 30)), d_eta=0)


def test_dense_state_overlap_and_tail():
    b = FockBasis(1, 3)
    s = DenseState(np.array([0, 0, 0, 1], complex), b)
    assert s.tail() == 1.0
    assert s.overlap(s) == 1.0
