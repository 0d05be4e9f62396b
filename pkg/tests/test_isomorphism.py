"""Structural verification checks: semigroup, spectra, embedding, modes."""

from __future__ import annotations

import numpy as np
import pytest
import scipy.linalg

from kqscreen.errors import NumericalError, ValidationError
from kqscreen.isomorphism import (
    LinearTestSystem,
    empirical_gram,
    random_stable_system,
    run_suite,
    spectral_observables,
    verify_eigenfunction_product,
    verify_isometric_embedding,
    verify_mode_preservation,
    verify_semigroup,
)


class TestSemigroup:
    def test_zero_matrix_exact(self):
        sys = LinearTestSystem(np.zeros((3, 3)), np.random.default_rng(0).normal(size=(3, 8)))
        assert verify_semigroup(sys) == 0.0

    def test_rotation_quarter_turns(self):
        # Oracle: closed-form rotation matrices; two quarter turns are -I.
        sys = LinearTestSystem(np.array([[0.0, -1.0], [1.0, 0.0]]),
                               np.random.default_rng(1).normal(size=(2, 10)))
        full_turn = sys.flow(np.pi)
        assert np.abs(full_turn + np.eye(2)).max() < 1e-12
        assert verify_semigroup(sys, t=np.pi / 2, s=np.pi / 2) < 1e-10

    def test_random_stable_systems(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            sys = random_stable_system(rng, int(rng.integers(2, 6)))
            t, s = rng.uniform(0.05, 1.5, 2)
            assert verify_semigroup(sys, t=t, s=s) < 1e-8

    def test_overflowing_flow_rejected(self):
        sys = LinearTestSystem(np.array([[500.0]]), np.ones((1, 2)))
        with pytest.raises(NumericalError, match="overflow"):
            sys.flow(10.0)


class TestEigenfunctionProduct:
    def test_diagonal_system_closed_form(self):
        # phi_1 = x_1 decays at -1, phi_2 = x_2 at -2; the product at -3.
        sys = LinearTestSystem(np.diag([-1.0, -2.0]),
                               np.random.default_rng(3).normal(size=(2, 12)))
        assert verify_eigenfunction_product(sys, 0, 1) < 1e-8

    def test_squared_observable_doubles_exponent(self):
        sys = LinearTestSystem(np.diag([-0.5, -1.5]),
                               np.random.default_rng(4).normal(size=(2, 12)))
        assert verify_eigenfunction_product(sys, 0, 0) < 1e-8

    def test_random_diagonalizable_all_pairs(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            sys = random_stable_system(rng, 4, n_samples=16)
            for i in range(4):
                for j in range(i, 4):
                    assert verify_eigenfunction_product(sys, i, j) < 1e-8

    def test_repeated_eigenvalues_rejected(self):
        sys = LinearTestSystem(np.diag([-1.0, -1.0]), np.ones((2, 4)))
        with pytest.raises(ValidationError, match="repeated"):
            spectral_observables(sys)

    def test_observables_evolve_exponentially(self):
        rng = np.random.default_rng(6)
        sys = random_stable_system(rng, 3, n_samples=10)
        eigs = spectral_observables(sys)
        for t in (0.2, 0.9):
            moved = eigs.values(sys.flow(t) @ sys.samples)
            for i, lam in enumerate(eigs.exponents):
                expected = np.exp(lam * t) * eigs.values(sys.samples)[i]
                assert np.abs(moved[i] - expected).max() < 1e-8


class TestIsometricEmbedding:
    def test_orthonormal_functions_identity_gram(self):
        # Construct observables that are exactly orthonormal under the
        # empirical measure; their embedding Gram must be the identity.
        from kqscreen.isomorphism import EigenfunctionSet

        d, s = 3, 12
        rng = np.random.default_rng(7)
        raw = rng.normal(size=(d, s))
        # Orthonormalize rows under the uniform-weight inner product.
        gram = raw @ raw.T / s
        chol = np.linalg.cholesky(gram)
        values = np.linalg.solve(chol, raw)

        class Direct(EigenfunctionSet):
            def values(self, points):  # noqa: ARG002 - fixed sample values
                return values

        eigs = Direct(exponents=np.array([-1.0, -2.0, -3.0]), left_vectors=np.eye(d))
        deviation, embedding = verify_isometric_embedding(eigs, np.zeros((d, s)), n_qubits=2)
        assert deviation < 1e-12
        assert np.abs(embedding.vectors @ embedding.vectors.conj().T - np.eye(d)).max() < 1e-10

    def test_half_overlap_pair(self):
        # Oracle: 2x2 Cholesky of [[1, .5], [.5, 1]] reproduces the inner
        # product exactly.
        from kqscreen.isomorphism import EigenfunctionSet

        s = 8
        phi1 = np.ones(s)
        phi2 = np.concatenate([np.ones(s // 2) * (0.5 + np.sqrt(0.75)), np.ones(s // 2) * (0.5 - np.sqrt(0.75))])
        values = np.vstack([phi1, phi2])
        gram = empirical_gram(values)
        assert np.abs(gram - np.array([[1.0, 0.5], [0.5, 1.0]])).max() < 1e-12

        class Direct(EigenfunctionSet):
            def values(self, points):  # noqa: ARG002
                return values

        eigs = Direct(exponents=np.array([-1.0, -2.0]), left_vectors=np.eye(2))
        deviation, embedding = verify_isometric_embedding(eigs, np.zeros((2, s)), n_qubits=1)
        assert deviation < 1e-10
        inner = np.vdot(embedding.vectors[0], embedding.vectors[1])
        assert inner == pytest.approx(0.5, abs=1e-10)

    def test_three_functions_two_qubits(self):
        rng = np.random.default_rng(8)
        sys = random_stable_system(rng, 3, n_samples=12)
        eigs = spectral_observables(sys)
        deviation, embedding = verify_isometric_embedding(eigs, sys.samples, n_qubits=2)
        assert deviation < 1e-10
        gram = embedding.vectors @ embedding.vectors.conj().T
        assert np.abs(gram - embedding.gram).max() < 1e-10

    def test_capacity_checked(self):
        rng = np.random.default_rng(9)
        sys = random_stable_system(rng, 3, n_samples=12)
        eigs = spectral_observables(sys)
        with pytest.raises(ValidationError, match="basis states"):
            verify_isometric_embedding(eigs, sys.samples, n_qubits=1)

    def test_dependent_function_named(self):
        from kqscreen.isomorphism import EigenfunctionSet

        values = np.vstack([np.ones(6), 2.0 * np.ones(6)])  # second is dependent

        class Direct(EigenfunctionSet):
            def values(self, points):  # noqa: ARG002
                return values

        eigs = Direct(exponents=np.array([-1.0, -2.0]), left_vectors=np.eye(2))
        with pytest.raises(NumericalError, match="observable 1"):
            verify_isometric_embedding(eigs, np.zeros((2, 6)), n_qubits=1)

    def test_random_grams_hundred_trials(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            d = int(rng.integers(2, 9))
            sys = random_stable_system(rng, d, n_samples=4 * d)
            eigs = spectral_observables(sys)
            deviation, _ = verify_isometric_embedding(eigs, sys.samples, n_qubits=3)
            assert deviation < 1e-10


class TestModePreservation:
    def test_zero_exponent_identity(self):
        assert verify_mode_preservation(np.array([0.0]), 1) < 1e-14

    def test_real_decay_scales_norm(self):
        # Oracle: scalar exponential; the evolution is non-unitary by design.
        from kqscreen.isomorphism import effective_generator

        h = effective_generator(np.array([-1.0]), 2)
        propagator = scipy.linalg.expm(-1j * h * 1.0)
        assert abs(propagator[0, 0] - np.exp(-1.0)) < 1e-12
        assert abs(np.linalg.norm(propagator[:, 0]) - np.exp(-1.0)) < 1e-12
        assert verify_mode_preservation(np.array([-1.0]), 2) < 1e-8

    def test_imaginary_exponent_preserves_norm(self):
        from kqscreen.isomorphism import effective_generator

        omega = 1.3
        h = effective_generator(np.array([1j * omega]), 2)
        for t in (0.5, 1.0, 2.0):
            propagator = scipy.linalg.expm(-1j * h * t)
            assert abs(np.linalg.norm(propagator[:, 0]) - 1.0) < 1e-10
        assert verify_mode_preservation(np.array([1j * omega, -0.4j]), 2) < 1e-8

    def test_complex_decaying_pair(self):
        assert verify_mode_preservation(np.array([-0.3 + 2.0j, -0.3 - 2.0j]), 2) < 1e-8

    def test_perturbation_breaks_check(self):
        deviation = verify_mode_preservation(np.array([-1.0, 0.5j]), 2, perturbation=1e-3)
        assert deviation > 1e-8

    def test_hermitian_compatible_case_through_simulator_path(self):
        # Purely imaginary exponents give a real diagonal generator; the
        # eigendecomposition exponential used by the simulator must agree
        # with the independent Pade route.
        from kqscreen.isomorphism import effective_generator
        from kqscreen.statevector import UnitaryParams, build_unitary

        omegas = np.array([0.8j, -1.1j, 0.3j, 0.0j])
        h = effective_generator(omegas, 4)
        assert np.abs(h - h.conj().T).max() < 1e-15  # Hermitian here

        theta = np.zeros(16)
        theta[:4] = np.real(1j * omegas)
        sim_u = build_unitary(UnitaryParams(2, theta))
        pade_u = scipy.linalg.expm(-1j * h)
        assert np.abs(sim_u - pade_u).max() < 1e-12


class TestSuite:
    def test_default_suite_passes(self):
        results = run_suite(seed=0)
        names = [r.name for r in results]
        assert "semigroup_random_stable" in names
        assert "embedding_isometry_random" in names
        assert "mode_preservation_complex_decay" in names
        for result in results:
            assert result.passed, f"{result.name}: {result.deviation} >= {result.threshold}"

    def test_perturbed_suite_fails_mode_checks(self):
        results = run_suite(seed=0, lambda_perturbation=1e-3)
        failing = {r.name for r in results if not r.passed}
        assert any(name.startswith("mode_preservation") for name in failing)

    def test_report_dicts_have_schema(self):
        for result in run_suite(seed=1):
            doc = result.to_dict()
            assert set(doc) == {"name", "deviation", "threshold", "pass"}
