"""Dense statevector simulation of small qubit registers.

Conventions, fixed for checkpoint portability:

* Qubit 0 is the most significant bit of the basis index.
* Encoding rotations use the full-angle form
  R_y(phi) = [[cos phi, -sin phi], [sin phi, cos phi]], i.e. exp(-i sigma_y phi),
  which rotates by 2*phi relative to the common half-angle gate convention.
* The trainable n-qubit unitary is U = exp(-iH) for a dense Hermitian H
  parameterized by 4^n reals: the 2^n diagonal entries first, then the
  upper-triangle real parts in row-major order, then the matching
  imaginary parts.

Expectations are exact (infinite shots); a sampled estimator is available
separately for experiments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, SizingError, ValidationError

MAX_QUBITS = 12

# Eigenvalue gaps below this are treated as degenerate in the divided
# difference of the exponential.
_DEGENERACY_TOL = 1e-12


@dataclass
class QuantumState:
    """Complex amplitude vector over the computational basis, unit norm."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise CapacityError(f"n_qubits must lie in [1, {MAX_QUBITS}], got {self.n_qubits}")
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (2**self.n_qubits,):
            raise SizingError(
                f"expected {2**self.n_qubits} amplitudes for {self.n_qubits} qubits, "
                f"got shape {self.amplitudes.shape}"
            )
        norm = np.linalg.norm(self.amplitudes)
        if abs(norm - 1.0) > 1e-9:
            raise ValidationError(f"state norm {norm} deviates from 1")


@dataclass
class UnitaryParams:
    """Real parameter vector of the dense Hermitian generator, length 4^n."""

    n_qubits: int
    theta: np.ndarray

    def __post_init__(self) -> None:
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise CapacityError(f"n_qubits must lie in [1, {MAX_QUBITS}], got {self.n_qubits}")
        self.theta = np.asarray(self.theta, dtype=np.float64)
        want = 4**self.n_qubits
        if self.theta.shape != (want,):
            raise SizingError(f"theta must have length {want} for {self.n_qubits} qubits, got {self.theta.shape}")


def encode_angles(angles: np.ndarray) -> QuantumState:
    """Product state from per-qubit Y rotations of |0>: amplitudes cos/sin(phi)."""
    batch = encode_angles_batch(np.asarray(angles, dtype=np.float64)[None, :])
    return QuantumState(n_qubits=len(np.atleast_1d(angles)), amplitudes=batch[0])


def encode_angles_batch(angles: np.ndarray) -> np.ndarray:
    """Vectorized encoding: (batch, n) angles -> (batch, 2^n) complex amplitudes."""
    angles = np.asarray(angles, dtype=np.float64)
    if angles.ndim != 2:
        raise ValidationError(f"expected (batch, n) angles, got shape {angles.shape}")
    n = angles.shape[1]
    if not 1 <= n <= MAX_QUBITS:
        raise CapacityError(f"qubit count must lie in [1, {MAX_QUBITS}], got {n}")
    amps = np.ones((angles.shape[0], 1))
    for q in range(n):
        pair = np.stack([np.cos(angles[:, q]), np.sin(angles[:, q])], axis=1)
        amps = (amps[:, :, None] * pair[:, None, :]).reshape(angles.shape[0], -1)
    return amps.astype(np.complex128)


def hermitian_from_params(params: UnitaryParams) -> np.ndarray:
    """Assemble the dense Hermitian generator from its parameter vector."""
    dim = 2**params.n_qubits
    n_off = dim * (dim - 1) // 2
    theta = params.theta
    h = np.zeros((dim, dim), dtype=np.complex128)
    h[np.diag_indices(dim)] = theta[:dim]
    rows, cols = np.triu_indices(dim, k=1)
    off = theta[dim:dim + n_off] + 1j * theta[dim + n_off:]
    h[rows, cols] = off
    h[cols, rows] = np.conj(off)
    return h


def eig_expm_factors(params: UnitaryParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Eigendecomposition route to U = exp(-iH): returns (U, eigenvalues, eigenvectors)."""
    h = hermitian_from_params(params)
    evals, q = np.linalg.eigh(h)
    u = (q * np.exp(-1j * evals)) @ q.conj().T
    return u, evals, q


def build_unitary(params: UnitaryParams) -> np.ndarray:
    """The trainable unitary exp(-iH(theta))."""
    return eig_expm_factors(params)[0]


def apply_unitary(state: QuantumState, unitary: np.ndarray) -> QuantumState:
    """Left-multiply the amplitudes; norm is preserved by unitarity."""
    unitary = np.asarray(unitary, dtype=np.complex128)
    dim = state.amplitudes.size
    if unitary.shape != (dim, dim):
        raise SizingError(f"unitary shape {unitary.shape} does not match state dimension {dim}")
    return QuantumState(n_qubits=state.n_qubits, amplitudes=unitary @ state.amplitudes)


def z_sign_matrix(n_qubits: int) -> np.ndarray:
    """signs[q, b] = +1 if bit q (MSB order) of basis index b is 0, else -1."""
    basis = np.arange(2**n_qubits)
    shifts = n_qubits - 1 - np.arange(n_qubits)
    bits = (basis[None, :] >> shifts[:, None]) & 1
    return 1.0 - 2.0 * bits


def z_expectations(state: QuantumState) -> np.ndarray:
    """Exact per-qubit Pauli-Z expectation values."""
    probs = np.abs(state.amplitudes) ** 2
    return z_sign_matrix(state.n_qubits) @ probs


def z_expectations_batch(amplitudes: np.ndarray, n_qubits: int) -> np.ndarray:
    """(batch, 2^n) amplitudes -> (batch, n) expectation values."""
    probs = np.abs(amplitudes) ** 2
    return probs @ z_sign_matrix(n_qubits).T


def sample_z_expectations(state: QuantumState, shots: int, seed: int | None = None) -> np.ndarray:
    """Shot-noise estimator of z_expectations; off the default exact path."""
    if shots < 1:
        raise ValidationError(f"shots must be >= 1, got {shots}")
    rng = np.random.default_rng(seed)
    probs = np.abs(state.amplitudes) ** 2
    probs = probs / probs.sum()
    outcomes = rng.choice(probs.size, size=shots, p=probs)
    counts = np.bincount(outcomes, minlength=probs.size).astype(np.float64)
    return z_sign_matrix(state.n_qubits) @ (counts / shots)


# ---------------------------------------------------------------------------
# Analytic parameter gradients
# ---------------------------------------------------------------------------


def _exp_divided_difference(evals: np.ndarray) -> np.ndarray:
    """First divided difference of f(x) = exp(-ix) on the eigenvalue grid.

    F[a, b] = (f(l_a) - f(l_b)) / (l_a - l_b), with the confluent limit
    f'((l_a + l_b)/2) on (near-)degenerate pairs.
    """
    f = np.exp(-1j * evals)
    dl = evals[:, None] - evals[None, :]
    degenerate = np.abs(dl) < _DEGENERACY_TOL
    safe = np.where(degenerate, 1.0, dl)
    quotient = (f[:, None] - f[None, :]) / safe
    midpoint = -1j * np.exp(-1j * 0.5 * (evals[:, None] + evals[None, :]))
    return np.where(degenerate, midpoint, quotient)


def unitary_gradient_from_cotangent(
    evals: np.ndarray, eigvecs: np.ndarray, cotangent: np.ndarray
) -> np.ndarray:
    """Pull a loss cotangent of U back onto the generator parameters.

    ``cotangent`` is the matrix M in dL = 2 Re tr(M^dagger dU); the return
    value is dL/dtheta, ordered like the theta vector. Uses the divided
    difference of the exponential on the eigenbasis of H.
    """
    dim = evals.size
    n_off = dim * (dim - 1) // 2
    coeff = np.conj(eigvecs.conj().T @ cotangent @ eigvecs) * _exp_divided_difference(evals)
    t = eigvecs.conj() @ coeff @ eigvecs.T
    grad = np.empty(dim + 2 * n_off)
    grad[:dim] = 2.0 * np.real(np.diag(t))
    rows, cols = np.triu_indices(dim, k=1)
    upper = t[rows, cols]
    lower = t[cols, rows]
    grad[dim:dim + n_off] = 2.0 * np.real(upper + lower)
    grad[dim + n_off:] = -2.0 * np.imag(upper - lower)
    return grad


def gradient(params: UnitaryParams, angles: np.ndarray, observable_weights: np.ndarray) -> np.ndarray:
    """Exact gradient of sum_q w_q <Z_q> after U(theta) on the encoded state.

    ``observable_weights`` w is the upstream derivative of a smooth loss with
    respect to the expectation vector, so this composes under the chain rule.
    """
    angles = np.asarray(angles, dtype=np.float64)
    weights = np.asarray(observable_weights, dtype=np.float64)
    if angles.shape != (params.n_qubits,) or weights.shape != (params.n_qubits,):
        raise SizingError(
            f"angles and weights must have length {params.n_qubits}, "
            f"got {angles.shape} and {weights.shape}"
        )
    unitary, evals, eigvecs = eig_expm_factors(params)
    psi0 = encode_angles_batch(angles[None, :])[0]
    psi = unitary @ psi0
    # Wirtinger derivative of the loss w.r.t. conj(psi).
    g = (weights @ z_sign_matrix(params.n_qubits)) * psi
    cotangent = np.outer(g, np.conj(psi0))
    return unitary_gradient_from_cotangent(evals, eigvecs, cotangent)


# ---------------------------------------------------------------------------
# Layered ansatz (alternative to the dense generator)
# ---------------------------------------------------------------------------


def _ry_full_angle(phi: float) -> np.ndarray:
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def _single_qubit_op(gate: np.ndarray, qubit: int, n_qubits: int) -> np.ndarray:
    op = np.eye(1, dtype=np.complex128)
    for q in range(n_qubits):
        op = np.kron(op, gate if q == qubit else np.eye(2, dtype=np.complex128))
    return op


def _cnot(control: int, target: int, n_qubits: int) -> np.ndarray:
    dim = 2**n_qubits
    op = np.zeros((dim, dim), dtype=np.complex128)
    c_shift = n_qubits - 1 - control
    t_shift = n_qubits - 1 - target
    for b in range(dim):
        out = b ^ (1 << t_shift) if (b >> c_shift) & 1 else b
        op[out, b] = 1.0
    return op


def layered_unitary(n_qubits: int, params: np.ndarray) -> np.ndarray:
    """L layers of per-qubit Y rotations followed by a CNOT ring.

    ``params`` has shape (layers, n_qubits); a single qubit gets no
    entangler. Provided as a shallow-circuit alternative to the dense
    generator; parameter count is layers * n_qubits.
    """
    params = np.atleast_2d(np.asarray(params, dtype=np.float64))
    dim = 2**n_qubits
    u = np.eye(dim, dtype=np.complex128)
    for layer in params:
        if layer.size != n_qubits:
            raise SizingError(f"each layer needs {n_qubits} angles, got {layer.size}")
        for q in range(n_qubits):
            u = _single_qubit_op(_ry_full_angle(layer[q]), q, n_qubits) @ u
        if n_qubits > 1:
            for q in range(n_qubits):
                u = _cnot(q, (q + 1) % n_qubits, n_qubits) @ u
    return u
