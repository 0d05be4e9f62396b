"""Delay embedding, finite-dimensional generator fit, and residual statistics.

A scalar series is lifted into delay coordinates (a Hankel matrix), reduced
by truncated SVD to rank-r coordinates v(t), and fitted with a linear
generator A so that dv/dt ~ A v using second-order central differences. The
per-step residual norm R(t) = ||dv/dt - A v(t)|| is the anomaly-sensitive
signal; its six summary statistics (mean, std, min, max, skewness, excess
kurtosis) form the feature vector consumed by the classifiers.

The residual energy R(t)^2 is also exposed as an explicit quadratic form of
the augmented coordinate vector [v(t+1); v(t); v(t-1)], which is the
observable-like formulation the downstream quantum processing relies on.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NumericalError, ParseError, SizingError, ValidationError

FEATURE_NAMES = ("f_mean", "f_std", "f_min", "f_max", "f_skew", "f_kurt")
FEATURE_DIM = len(FEATURE_NAMES)

_ZERO_VARIANCE_TOL = 1e-12


@dataclass(frozen=True)
class HankelConfig:
    """Delay-embedding geometry: window size, delay stride, truncation rank."""

    dim: int = 64
    delay: int = 1
    rank: int = 11
    rcond: float = 1e-10

    def __post_init__(self) -> None:
        if self.dim < 2:
            raise SizingError(f"embedding dim must be >= 2, got {self.dim}")
        if self.delay < 1:
            raise SizingError(f"delay must be >= 1, got {self.delay}")
        if self.rank < 1:
            raise SizingError(f"rank must be >= 1, got {self.rank}")
        if self.rank > self.dim:
            raise SizingError(f"rank {self.rank} exceeds embedding dim {self.dim}")

    def n_windows(self, n_samples: int) -> int:
        return n_samples - (self.dim - 1) * self.delay

    def min_samples(self) -> int:
        """Smallest series length for which the full decomposition is defined."""
        return (self.dim - 1) * self.delay + self.rank + 2

    def check_feasible(self, n_samples: int) -> None:
        if n_samples < self.min_samples():
            raise SizingError(
                f"series of length {n_samples} is too short for dim={self.dim}, "
                f"delay={self.delay}, rank={self.rank}; need at least {self.min_samples()} samples"
            )


@dataclass
class KoopmanDecomposition:
    """Truncated delay-coordinate decomposition of one series.

    reduced_coords has shape (rank, n_windows) with one column per time
    step; residuals covers the central-difference interior, i.e. columns
    correspond to time indices 1 .. n_windows - 2.
    """

    config: HankelConfig
    dt: float
    singular_values: np.ndarray
    reduced_coords: np.ndarray
    generator: np.ndarray
    residuals: np.ndarray
    residual_norms: np.ndarray

    @property
    def n_interior(self) -> int:
        return self.residual_norms.size


def build_hankel(samples: np.ndarray, config: HankelConfig) -> np.ndarray:
    """Stack delayed copies of the series: row i is [x_i, x_{i+d}, ..., x_{i+(dim-1)d}]."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        raise ValidationError(f"expected a 1-d series, got shape {x.shape}")
    config.check_feasible(x.size)
    k = config.n_windows(x.size)
    idx = np.arange(k)[:, None] + config.delay * np.arange(config.dim)[None, :]
    return x[idx]


def reduce(hankel: np.ndarray, config: HankelConfig) -> tuple[np.ndarray, np.ndarray]:
    """Truncated SVD of the delay matrix.

    Returns (singular_values, reduced_coords) where reduced_coords is the
    rank x n_windows matrix of time-indexed coordinates; together with the
    discarded left factor it reproduces the best rank-r approximation of
    the delay matrix in Frobenius norm.
    """
    h = np.asarray(hankel, dtype=np.float64)
    r = config.rank
    if r > min(h.shape):
        raise SizingError(f"rank {r} exceeds matrix dims {h.shape}")
    try:
        u, s, _ = np.linalg.svd(h, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    reduced = (u[:, :r] * s[:r]).T
    return s[:r].copy(), reduced


def fit_generator(
    reduced_coords: np.ndarray, dt: float, rcond: float = 1e-10
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Least-squares linear generator for the reduced coordinates.

    Central-difference derivatives are formed on the interior time steps,
    and A solves min ||Vdot - A V||_F via the SVD pseudoinverse. Returns
    (A, residuals, residual_norms), residuals on the interior only.
    """
    v = np.asarray(reduced_coords, dtype=np.float64)
    if v.ndim != 2:
        raise ValidationError(f"reduced_coords must be 2-d, got shape {v.shape}")
    r, k = v.shape
    if k < r + 2:
        raise SizingError(f"need at least rank + 2 = {r + 2} time steps, got {k}")
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    if not np.any(v):
        raise NumericalError("reduced coordinates are identically zero (dead channel)")

    vdot = (v[:, 2:] - v[:, :-2]) / (2.0 * dt)
    v_int = v[:, 1:-1]
    generator = vdot @ np.linalg.pinv(v_int, rcond=rcond)
    residuals = vdot - generator @ v_int
    residual_norms = np.linalg.norm(residuals, axis=0)
    return generator, residuals, residual_norms


def decompose(samples: np.ndarray, dt: float, config: HankelConfig) -> KoopmanDecomposition:
    """Full pipeline for one series: Hankel -> truncated SVD -> generator fit."""
    hankel = build_hankel(samples, config)
    singular_values, reduced = reduce(hankel, config)
    generator, residuals, norms = fit_generator(reduced, dt, rcond=config.rcond)
    return KoopmanDecomposition(
        config=config,
        dt=dt,
        singular_values=singular_values,
        reduced_coords=reduced,
        generator=generator,
        residuals=residuals,
        residual_norms=norms,
    )


def residual_energy(decomp: KoopmanDecomposition, t: int) -> float:
    """Residual energy at interior step t as an explicit quadratic form.

    With vt = [v(t+1); v(t); v(t-1)] and B = [I/(2dt), -A, -I/(2dt)],
    returns vt^T (B^T B) vt, which equals residual_norms[t-1]^2.
    """
    v = decomp.reduced_coords
    k = v.shape[1]
    if not 1 <= t <= k - 2:
        raise IndexError(f"interior index must lie in [1, {k - 2}], got {t}")
    r = v.shape[0]
    eye = np.eye(r) / (2.0 * decomp.dt)
    b = np.hstack([eye, -decomp.generator, -eye])
    vt = np.concatenate([v[:, t + 1], v[:, t], v[:, t - 1]])
    return float(vt @ (b.T @ b) @ vt)


def extract_features(residual_norms: np.ndarray) -> np.ndarray:
    """Six population statistics of the residual-norm sequence.

    (mean, std, min, max, skewness, excess kurtosis); skewness and kurtosis
    are defined as 0 when the standard deviation is negligible.
    """
    x = np.asarray(residual_norms, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise ValidationError("residual_norms must be a nonempty 1-d sequence")
    mu = float(np.mean(x))
    sigma = float(np.std(x))
    if sigma < _ZERO_VARIANCE_TOL:
        skew = 0.0
        kurt = 0.0
    else:
        centered = x - mu
        skew = float(np.mean(centered**3)) / sigma**3
        kurt = float(np.mean(centered**4)) / sigma**4 - 3.0
    return np.array([mu, sigma, float(np.min(x)), float(np.max(x)), skew, kurt])


# ---------------------------------------------------------------------------
# Feature scaling
# ---------------------------------------------------------------------------


@dataclass
class FeatureScaler:
    """Componentwise min-max map onto [0, pi], learned on training features."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self) -> None:
        self.lo = np.asarray(self.lo, dtype=np.float64)
        self.hi = np.asarray(self.hi, dtype=np.float64)
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise ValidationError("scaler bounds must be 1-d arrays of equal length")
        if np.any(self.lo > self.hi):
            raise ValidationError("scaler lower bounds exceed upper bounds")


def fit_scaler(train_features: np.ndarray) -> FeatureScaler:
    """Columnwise bounds from training features only."""
    feats = np.atleast_2d(np.asarray(train_features, dtype=np.float64))
    if feats.size == 0:
        raise ValidationError("cannot fit a scaler on an empty feature set")
    return FeatureScaler(lo=feats.min(axis=0), hi=feats.max(axis=0))


def apply_scaler(scaler: FeatureScaler, raw: np.ndarray) -> np.ndarray:
    """Map features into [0, pi], clamping out-of-range values.

    A degenerate component (hi == lo) maps every input to pi/2.
    """
    x = np.asarray(raw, dtype=np.float64)
    span = scaler.hi - scaler.lo
    degenerate = span == 0.0
    safe_span = np.where(degenerate, 1.0, span)
    scaled = (x - scaler.lo) / safe_span * np.pi
    scaled = np.clip(scaled, 0.0, np.pi)
    return np.where(degenerate, np.pi / 2.0, scaled)


# ---------------------------------------------------------------------------
# Persistence: feature CSV and scaler JSON
# ---------------------------------------------------------------------------


def write_feature_csv(
    path: str | Path,
    shot_ids: list[int],
    channel_ids: list[str],
    labels: list[int],
    features: np.ndarray,
) -> None:
    """One row per record, features in raw (unscaled) form."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    features = np.atleast_2d(features)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["shot_id", "channel_id", "label"] + list(FEATURE_NAMES))
        for sid, cid, lab, row in zip(shot_ids, channel_ids, labels, features):
            writer.writerow([sid, cid, lab] + [repr(float(x)) for x in row])


def read_feature_csv(path: str | Path) -> tuple[list[int], list[str], np.ndarray, np.ndarray]:
    """Returns (shot_ids, channel_ids, labels, features)."""
    path = Path(path)
    expected = ["shot_id", "channel_id", "label"] + list(FEATURE_NAMES)
    shot_ids: list[int] = []
    channel_ids: list[str] = []
    labels: list[int] = []
    rows: list[list[float]] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected:
            raise ParseError(f"{path}: unexpected header {header}, want {expected}")
        for row in reader:
            if len(row) != len(expected):
                raise ParseError(f"{path}: row has {len(row)} fields, want {len(expected)}")
            shot_ids.append(int(row[0]))
            channel_ids.append(row[1])
            labels.append(int(row[2]))
            rows.append([float(x) for x in row[3:]])
    return shot_ids, channel_ids, np.asarray(labels, dtype=int), np.asarray(rows, dtype=np.float64)


def save_scaler(scaler: FeatureScaler, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps({"lo": scaler.lo.tolist(), "hi": scaler.hi.tolist()}, separators=(",", ":")) + "\n"
    )


def load_scaler(path: str | Path) -> FeatureScaler:
    doc = json.loads(Path(path).read_text())
    if "lo" not in doc or "hi" not in doc:
        raise ParseError(f"{path}: scaler JSON must contain 'lo' and 'hi'")
    return FeatureScaler(lo=np.asarray(doc["lo"]), hi=np.asarray(doc["hi"]))
