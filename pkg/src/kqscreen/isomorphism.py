"""Numerical verification of the operator-level structure the pipeline rests on.

Four claims are checked on linear test systems with analytically known
eigenstructure:

1. Flow/evolution families compose additively in time (semigroup law).
2. Products of spectral observables evolve with summed exponents.
3. A finite set of observables embeds isometrically into a qubit register.
4. A diagonal effective generator reproduces each mode's exponential,
   including non-unitary decay for complex exponents.

The matrix exponential here is scipy's Pade scaling-and-squaring routine,
deliberately independent of the eigendecomposition route used by the
statevector simulator, so the two paths can cross-check each other.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import NumericalError, ValidationError

_OVERFLOW_NORM = 1e150


@dataclass
class LinearTestSystem:
    """dx/dt = F x with flow exp(F t), sampled at uniformly weighted points."""

    system_matrix: np.ndarray
    samples: np.ndarray  # (dimension, n_samples)

    def __post_init__(self) -> None:
        self.system_matrix = np.asarray(self.system_matrix, dtype=np.float64)
        self.samples = np.atleast_2d(np.asarray(self.samples))
        d = self.system_matrix.shape[0]
        if self.system_matrix.shape != (d, d):
            raise ValidationError(f"system matrix must be square, got {self.system_matrix.shape}")
        if self.samples.shape[0] != d:
            raise ValidationError(
                f"samples must be ({d}, n), got {self.samples.shape}"
            )

    @property
    def dimension(self) -> int:
        return self.system_matrix.shape[0]

    def flow(self, t: float) -> np.ndarray:
        with np.errstate(over="ignore", invalid="ignore"):
            phi = scipy.linalg.expm(self.system_matrix * t)
        if not np.all(np.isfinite(phi)) or np.max(np.abs(phi)) > _OVERFLOW_NORM:
            raise NumericalError(f"flow at t={t} overflows for this system matrix")
        return phi


def random_stable_system(rng: np.random.Generator, dimension: int, n_samples: int = 32) -> LinearTestSystem:
    """Random system with spectral abscissa < 0 and unit-scale sample points."""
    f = rng.normal(0.0, 1.0, (dimension, dimension))
    abscissa = np.max(np.real(np.linalg.eigvals(f)))
    f -= (abscissa + rng.uniform(0.2, 1.0)) * np.eye(dimension)
    samples = rng.normal(0.0, 1.0, (dimension, n_samples))
    return LinearTestSystem(system_matrix=f, samples=samples)


@dataclass
class EigenfunctionSet:
    """Linear spectral observables phi_i(x) = <w_i, x> for left eigenvectors w_i."""

    exponents: np.ndarray  # eigenvalues lambda_i
    left_vectors: np.ndarray  # columns w_i

    def __post_init__(self) -> None:
        self.exponents = np.asarray(self.exponents, dtype=np.complex128)
        self.left_vectors = np.atleast_2d(np.asarray(self.left_vectors, dtype=np.complex128))

    @property
    def count(self) -> int:
        return self.exponents.size

    def values(self, points: np.ndarray) -> np.ndarray:
        """(count, n_points) matrix of observable values."""
        return self.left_vectors.conj().T @ points


def spectral_observables(sys: LinearTestSystem, distinct_tol: float = 1e-8) -> EigenfunctionSet:
    """Left-eigenvector observables of the system matrix.

    Requires distinct eigenvalues so the linear observables are well defined
    individually.
    """
    evals, vl = scipy.linalg.eig(sys.system_matrix, left=True, right=False)
    gaps = np.abs(evals[:, None] - evals[None, :]) + np.eye(evals.size)
    if np.min(gaps) < distinct_tol:
        raise ValidationError("system matrix has (near-)repeated eigenvalues; observables undefined")
    return EigenfunctionSet(exponents=evals, left_vectors=vl)


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------


def verify_semigroup(
    sys: LinearTestSystem,
    observables: Sequence[Callable[[np.ndarray], np.ndarray]] | None = None,
    t: float = 0.7,
    s: float = 0.4,
) -> float:
    """Max |g(flow(t+s) x) - g(flow(t) flow(s) x)| over observables and samples."""
    if observables is None:
        observables = default_observables(sys.dimension)
    direct = sys.flow(t + s) @ sys.samples
    composed = sys.flow(t) @ (sys.flow(s) @ sys.samples)
    deviation = 0.0
    for g in observables:
        deviation = max(deviation, float(np.max(np.abs(g(direct) - g(composed)))))
    return deviation


def default_observables(dimension: int, seed: int = 0) -> list[Callable[[np.ndarray], np.ndarray]]:
    """Coordinates plus a few fixed random linear and quadratic forms."""
    rng = np.random.default_rng(seed)
    obs: list[Callable[[np.ndarray], np.ndarray]] = []
    for i in range(dimension):
        obs.append(lambda pts, i=i: pts[i])
    for _ in range(3):
        a = rng.normal(0.0, 1.0, dimension)
        obs.append(lambda pts, a=a: a @ pts)
        q = rng.normal(0.0, 1.0, (dimension, dimension))
        obs.append(lambda pts, q=q: np.einsum("ip,ij,jp->p", pts, q, pts))
    return obs


def verify_eigenfunction_product(
    sys: LinearTestSystem,
    i: int,
    j: int,
    t_grid: Sequence[float] = (0.25, 0.5, 1.0),
) -> float:
    """Deviation of phi_i * phi_j from exponential evolution with summed exponent."""
    eigs = spectral_observables(sys)
    lam = eigs.exponents[i] + eigs.exponents[j]
    base = eigs.values(sys.samples)
    product0 = base[i] * base[j]
    deviation = 0.0
    for t in t_grid:
        moved = eigs.values(sys.flow(t) @ sys.samples)
        product_t = moved[i] * moved[j]
        deviation = max(deviation, float(np.max(np.abs(product_t - np.exp(lam * t) * product0))))
    return deviation


@dataclass
class Embedding:
    """Isometric map of observables onto computational basis combinations."""

    exponents: np.ndarray
    vectors: np.ndarray  # (count, 2^n_qubits); row i embeds observable i
    n_qubits: int
    gram: np.ndarray = field(repr=False, default=None)
    # Residual of the orthonormalized observables' Gram against identity;
    # scales with the squared conditioning of the raw Gram, so it carries a
    # looser threshold than the primary isometry deviation.
    ortho_deviation: float = 0.0


def empirical_gram(values: np.ndarray) -> np.ndarray:
    """Gram matrix under uniform sample weights: G_ij = mean_s conj(phi_i) phi_j."""
    n_samples = values.shape[1]
    return (values.conj() @ values.T) / n_samples


def verify_isometric_embedding(
    eigs: EigenfunctionSet, samples: np.ndarray, n_qubits: int
) -> tuple[float, Embedding]:
    """Embed the observables into a 2^n-dim register and bound the Gram mismatch.

    Gram-Schmidt is realized through the Cholesky factor of the empirical
    Gram matrix; orthonormalized observables map to computational basis
    states, so observable i embeds as row i of the factor. Returns
    (max deviation, embedding).
    """
    d = eigs.count
    dim = 2**n_qubits
    if dim < d:
        raise ValidationError(f"need 2^n >= {d} basis states, got {dim}")
    values = eigs.values(np.atleast_2d(samples))
    gram = empirical_gram(values)
    try:
        factor = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        dependent = _first_dependent(gram)
        raise NumericalError(
            f"observable {dependent} is linearly dependent on its predecessors "
            "under the empirical measure"
        ) from None
    # With the inner product conjugate-linear in its first argument, the
    # orthonormalizing coefficients are conj(L)^-1, and observable i embeds
    # as row i of conj(L): then <R_i, R_j> = (L L^H)_ij = G_ij exactly.
    vectors = np.zeros((d, dim), dtype=np.complex128)
    vectors[:, :d] = np.conj(factor)
    embedded_gram = vectors.conj() @ vectors.T
    deviation = float(np.max(np.abs(embedded_gram - gram)))

    # The orthonormalized observables map to computational basis states,
    # whose Gram is exactly identity; check their own empirical Gram too.
    ortho_values = np.linalg.solve(np.conj(factor), values)
    ortho_gram = empirical_gram(ortho_values)
    ortho_deviation = float(np.max(np.abs(ortho_gram - np.eye(d))))
    embedding = Embedding(
        exponents=eigs.exponents,
        vectors=vectors,
        n_qubits=n_qubits,
        gram=gram,
        ortho_deviation=ortho_deviation,
    )
    return deviation, embedding


def _first_dependent(gram: np.ndarray) -> int:
    """Index of the first observable whose Gram leading minor is singular."""
    for size in range(1, gram.shape[0] + 1):
        try:
            np.linalg.cholesky(gram[:size, :size])
        except np.linalg.LinAlgError:
            return size - 1
    return gram.shape[0] - 1


def effective_generator(exponents: np.ndarray, dim: int, perturbation: float = 0.0) -> np.ndarray:
    """Diagonal generator with H[i, i] = 1j * lambda_i; non-Hermitian when complex.

    ``perturbation`` shifts the exponents without shifting the reference
    evolution, for use as a negative control.
    """
    exponents = np.asarray(exponents, dtype=np.complex128)
    h = np.zeros((dim, dim), dtype=np.complex128)
    h[np.arange(exponents.size), np.arange(exponents.size)] = 1j * (exponents + perturbation)
    return h


def verify_mode_preservation(
    exponents: np.ndarray,
    n_qubits: int,
    t_grid: Sequence[float] = (0.25, 0.5, 1.0, 2.0),
    perturbation: float = 0.0,
) -> float:
    """Max over modes and times of ||exp(-i H_eff t)|i> - e^(lambda t)|i>||."""
    exponents = np.asarray(exponents, dtype=np.complex128)
    dim = 2**n_qubits
    if dim < exponents.size:
        raise ValidationError(f"need 2^n >= {exponents.size} basis states, got {dim}")
    h_eff = effective_generator(exponents, dim, perturbation)
    deviation = 0.0
    for t in t_grid:
        propagator = scipy.linalg.expm(-1j * h_eff * t)
        if not np.all(np.isfinite(propagator)):
            raise NumericalError(f"mode propagator overflows at t={t}")
        for i, lam in enumerate(exponents):
            expected = np.zeros(dim, dtype=np.complex128)
            expected[i] = np.exp(lam * t)
            deviation = max(deviation, float(np.linalg.norm(propagator[:, i] - expected)))
    return deviation


# ---------------------------------------------------------------------------
# Suite
# ---------------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    deviation: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.deviation < self.threshold

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "deviation": self.deviation,
            "threshold": self.threshold,
            "pass": self.passed,
        }


def run_suite(seed: int = 0, lambda_perturbation: float = 0.0) -> list[CheckResult]:
    """Run every structural check; thresholds are part of the contract."""
    rng = np.random.default_rng(seed)
    results: list[CheckResult] = []

    # Semigroup law: identity flow, closed-form rotation, random stable systems.
    static = LinearTestSystem(np.zeros((2, 2)), rng.normal(0.0, 1.0, (2, 4)))
    results.append(CheckResult("semigroup_identity_flow", verify_semigroup(static), 1e-8))

    rotation = LinearTestSystem(np.array([[0.0, -1.0], [1.0, 0.0]]), rng.normal(0.0, 1.0, (2, 16)))
    results.append(
        CheckResult("semigroup_quarter_turns", verify_semigroup(rotation, t=np.pi / 2, s=np.pi / 2), 1e-10)
    )

    worst = 0.0
    for _ in range(100):
        sys = random_stable_system(rng, int(rng.integers(2, 6)))
        t, s = rng.uniform(0.05, 1.5, 2)
        worst = max(worst, verify_semigroup(sys, t=t, s=s))
    results.append(CheckResult("semigroup_random_stable", worst, 1e-8))

    # Eigenfunction products: diagonal closed form, then random systems.
    diag_sys = LinearTestSystem(np.diag([-1.0, -2.0]), rng.normal(0.0, 1.0, (2, 16)))
    results.append(
        CheckResult("eigenproduct_diagonal", verify_eigenfunction_product(diag_sys, 0, 1), 1e-8)
    )
    worst = 0.0
    for _ in range(20):
        sys = random_stable_system(rng, 4, n_samples=16)
        for i in range(4):
            for j in range(i, 4):
                worst = max(worst, verify_eigenfunction_product(sys, i, j))
    results.append(CheckResult("eigenproduct_random_pairs", worst, 1e-8))

    # Isometric embedding over random nonsingular Grams.
    worst = 0.0
    worst_ortho = 0.0
    for _ in range(100):
        d = int(rng.integers(2, 9))
        sys = random_stable_system(rng, d, n_samples=4 * d)
        eigs = spectral_observables(sys)
        deviation, embedding = verify_isometric_embedding(eigs, sys.samples, n_qubits=3)
        worst = max(worst, deviation)
        worst_ortho = max(worst_ortho, embedding.ortho_deviation)
    results.append(CheckResult("embedding_isometry_random", worst, 1e-10))
    results.append(CheckResult("embedding_orthonormalization", worst_ortho, 1e-6))

    # Mode preservation: real decay, complex decay, pure phase.
    results.append(
        CheckResult(
            "mode_preservation_real_decay",
            verify_mode_preservation(np.array([-1.0, -0.5]), 2, perturbation=lambda_perturbation),
            1e-8,
        )
    )
    results.append(
        CheckResult(
            "mode_preservation_complex_decay",
            verify_mode_preservation(np.array([-0.3 + 2.0j, -0.3 - 2.0j]), 2, perturbation=lambda_perturbation),
            1e-8,
        )
    )
    results.append(
        CheckResult(
            "mode_preservation_pure_phase",
            verify_mode_preservation(np.array([1.5j, -0.7j]), 2, perturbation=lambda_perturbation),
            1e-8,
        )
    )
    return results
