"""Discharge time-series ingestion, standardization, splitting, and synthesis.

A discharge file is a JSON document with one time vector shared by all
channels::

    {"shot": int, "dt": float, "time": [...], "channels": {"<id>": [...]},
     "anomaly_channels": ["<id>", ...]}

Channels named in ``anomaly_channels`` are labeled 0, all others 1.
Datasets are persisted as newline-delimited JSON, one record per line,
with fields exactly ``shot_id, channel_id, dt, samples, label``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParseError, ValidationError

STANDARDIZE_EPS = 1e-6

# Minimum post-trigger length; the default delay embedding needs
# dim * delay + rank + 2 samples and 256 leaves margin above that.
DEFAULT_MIN_LENGTH = 256

# Sample period used by the synthetic generator (seconds).
SYNTHETIC_DT = 1e-3

ANOMALY_KINDS = ("fringe_jump", "interference_burst", "vibration")


@dataclass
class DischargeRecord:
    """One labeled channel time-series."""

    shot_id: int
    channel_id: str
    dt: float
    samples: np.ndarray
    label: int

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size < 1:
            raise ValidationError(f"samples must be a nonempty 1-d sequence, got shape {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise ValidationError(f"shot {self.shot_id} channel {self.channel_id}: samples contain NaN/Inf")
        if self.label not in (0, 1):
            raise ValidationError(f"label must be 0 or 1, got {self.label!r}")
        if not self.dt > 0:
            raise ValidationError(f"dt must be positive, got {self.dt}")

    @property
    def length(self) -> int:
        return int(self.samples.size)


@dataclass
class Dataset:
    """A collection of records plus the parameters of its train/test split."""

    records: list[DischargeRecord]
    split_seed: int = 0
    train_fraction: float = 0.7


@dataclass
class SyntheticSpec:
    """Parameters of the synthetic discharge generator."""

    n_records: int = 2000
    anomaly_fraction: float = 0.4
    t_range: tuple[int, int] = (2000, 8000)
    anomaly_kinds: tuple[str, ...] = ANOMALY_KINDS
    rng_seed: int = 29

    def __post_init__(self) -> None:
        if self.n_records < 1:
            raise ConfigError("n_records must be >= 1")
        if not 0.0 <= self.anomaly_fraction <= 1.0:
            raise ConfigError("anomaly_fraction must lie in [0, 1]")
        lo, hi = self.t_range
        if lo > hi:
            raise ConfigError(f"t_range {self.t_range} is empty")
        if lo < 64:
            raise ConfigError(f"t_range lower bound {lo} is too short for the waveform shapes (need >= 64)")
        unknown = set(self.anomaly_kinds) - set(ANOMALY_KINDS)
        if unknown:
            raise ConfigError(f"unknown anomaly kinds: {sorted(unknown)}")
        if self.anomaly_fraction > 0 and not self.anomaly_kinds:
            raise ConfigError("anomaly_fraction > 0 requires at least one anomaly kind")


def ingest_discharge_file(
    path: str | Path, min_length: int = DEFAULT_MIN_LENGTH
) -> tuple[list[DischargeRecord], list[tuple[str, str]]]:
    """Parse one discharge file into per-channel records.

    Pre-trigger samples (time < 0) are dropped; trigger time is located from
    the time vector alone. Channels that end up shorter than ``min_length``
    are rejected, not padded. Returns ``(records, skipped)`` where ``skipped``
    lists ``(channel_id, reason)`` pairs.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from exc

    for key in ("shot", "dt", "time", "channels", "anomaly_channels"):
        if key not in doc:
            raise ParseError(f"{path}: missing field '{key}'")
    if not isinstance(doc["shot"], int):
        raise ParseError(f"{path}: field 'shot' must be an integer")
    if not isinstance(doc["dt"], (int, float)) or not doc["dt"] > 0:
        raise ParseError(f"{path}: field 'dt' must be a positive number")
    if not isinstance(doc["channels"], dict) or not doc["channels"]:
        raise ParseError(f"{path}: field 'channels' must be a nonempty object")
    if not isinstance(doc["anomaly_channels"], list):
        raise ParseError(f"{path}: field 'anomaly_channels' must be a list")

    time = np.asarray(doc["time"], dtype=np.float64)
    if time.ndim != 1 or time.size < 1:
        raise ParseError(f"{path}: field 'time' must be a nonempty array")
    if np.any(np.diff(time) <= 0):
        raise ValidationError(f"{path}: time vector is not strictly increasing")

    anomalous = set(doc["anomaly_channels"])
    keep = time >= 0.0

    records: list[DischargeRecord] = []
    skipped: list[tuple[str, str]] = []
    for channel_id, values in doc["channels"].items():
        values = np.asarray(values, dtype=np.float64)
        if values.shape != time.shape:
            raise ParseError(
                f"{path}: channel '{channel_id}' has {values.size} samples, time has {time.size}"
            )
        post = values[keep]
        if post.size == 0:
            skipped.append((channel_id, "no post-trigger samples"))
            continue
        if post.size < min_length:
            skipped.append((channel_id, f"only {post.size} post-trigger samples (minimum {min_length})"))
            continue
        records.append(
            DischargeRecord(
                shot_id=doc["shot"],
                channel_id=channel_id,
                dt=float(doc["dt"]),
                samples=post,
                label=0 if channel_id in anomalous else 1,
            )
        )
    return records, skipped


def standardize(record: DischargeRecord) -> DischargeRecord:
    """Return a copy with samples mapped to (x - mean) / (std + eps).

    Population (1/N) standard deviation; the epsilon guard keeps constant
    signals finite.
    """
    if record.length < 2:
        raise ValidationError(f"standardize needs at least 2 samples, got {record.length}")
    x = record.samples
    mu = float(np.mean(x))
    sigma = float(np.std(x))
    return DischargeRecord(
        shot_id=record.shot_id,
        channel_id=record.channel_id,
        dt=record.dt,
        samples=(x - mu) / (sigma + STANDARDIZE_EPS),
        label=record.label,
    )


def split_dataset(ds: Dataset) -> tuple[list[DischargeRecord], list[DischargeRecord]]:
    """Plain random split: round(train_fraction * N) records go to train.

    Deterministic in ``split_seed``; no stratification.
    """
    n = len(ds.records)
    if n < 2:
        raise ValidationError(f"need at least 2 records to split, got {n}")
    if not 0.0 < ds.train_fraction < 1.0:
        raise ConfigError(f"train_fraction must lie in (0, 1), got {ds.train_fraction}")
    n_train = int(round(ds.train_fraction * n))
    perm = np.random.default_rng(ds.split_seed).permutation(n)
    train_idx = set(perm[:n_train].tolist())
    train = [r for i, r in enumerate(ds.records) if i in train_idx]
    test = [r for i, r in enumerate(ds.records) if i not in train_idx]
    return train, test


def split_indices(n: int, split_seed: int, train_fraction: float) -> tuple[np.ndarray, np.ndarray]:
    """Index-level variant of split_dataset, for callers holding parallel arrays."""
    if n < 2:
        raise ValidationError(f"need at least 2 records to split, got {n}")
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n_train = int(round(train_fraction * n))
    perm = np.random.default_rng(split_seed).permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


# ---------------------------------------------------------------------------
# Synthetic generation
# ---------------------------------------------------------------------------


def _envelope(rng: np.random.Generator, n: int) -> np.ndarray:
    """Smooth ramp-up / flattop / ramp-down shape in [0, 1]."""
    up = max(int(rng.uniform(0.08, 0.2) * n), 2)
    down = max(int(rng.uniform(0.08, 0.2) * n), 2)
    env = np.ones(n)
    env[:up] = 0.5 * (1.0 - np.cos(np.pi * np.arange(up) / up))
    env[n - down:] = 0.5 * (1.0 - np.cos(np.pi * np.arange(down, 0, -1) / down))
    return env


def _normal_signal(rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray, float]:
    """Base discharge waveform: envelope + band-limited oscillation + noise.

    Returns (signal, envelope_component, amplitude).
    """
    t = np.linspace(0.0, 1.0, n)
    amp = float(rng.uniform(0.8, 1.2))
    env = amp * _envelope(rng, n)
    osc = np.zeros(n)
    for _ in range(int(rng.integers(2, 5))):
        f = rng.uniform(3.0, 12.0)
        a = rng.uniform(0.02, 0.06) * amp
        osc += a * np.sin(2.0 * np.pi * f * t + rng.uniform(0.0, 2.0 * np.pi))
    noise_std = float(rng.uniform(0.010, 0.018)) * amp
    x = env + (env / amp) * osc + rng.normal(0.0, noise_std, n)
    return x, env, amp


def _add_fringe_jump(rng: np.random.Generator, x: np.ndarray, env: np.ndarray) -> None:
    """Insert 1..3 step discontinuities, each dominating the jump-free slew."""
    n = x.size
    n_jumps = int(rng.integers(1, 4))
    positions = np.sort(rng.integers(int(0.25 * n), int(0.9 * n), size=n_jumps))
    slew_ref = float(np.max(np.abs(np.diff(x))))
    for pos in positions:
        magnitude = max(4.0 * slew_ref, 3.0 * float(np.std(env)))
        magnitude *= float(rng.uniform(1.0, 1.8))
        sign = -1.0 if rng.random() < 0.5 else 1.0
        x[pos:] += sign * magnitude


def _add_interference_burst(rng: np.random.Generator, x: np.ndarray, amp: float) -> None:
    """Localized high-amplitude noise burst with a smooth window."""
    n = x.size
    width = max(int(rng.uniform(0.02, 0.06) * n), 8)
    start = int(rng.integers(int(0.15 * n), int(0.85 * n) - width))
    window = np.hanning(width)
    burst_std = float(rng.uniform(0.3, 0.9)) * amp
    x[start:start + width] += window * rng.normal(0.0, burst_std, width)


def _smooth_noise(rng: np.random.Generator, n: int, window: int) -> np.ndarray:
    """Band-limited unit-scale noise: moving-average filtered white noise."""
    window = max(window, 2)
    raw = rng.normal(0.0, 1.0, n + window - 1)
    kernel = np.ones(window) / window
    smooth = np.convolve(raw, kernel, mode="valid")
    return smooth / (np.std(smooth) + 1e-12)


def _add_vibration(rng: np.random.Generator, x: np.ndarray, env: np.ndarray, amp: float) -> None:
    """Narrowband sinusoid whose amplitude and phase drift stochastically.

    The stochastic modulation keeps the component outside any fixed
    low-rank linear model, unlike a plain amplitude-modulated tone.
    """
    n = x.size
    t = np.linspace(0.0, 1.0, n)
    f_carrier = rng.uniform(20.0, 60.0)
    a0 = float(rng.uniform(0.15, 0.5)) * amp
    drift = np.clip(1.0 + 0.9 * _smooth_noise(rng, n, n // 24), 0.0, None)
    wobble = np.cumsum(_smooth_noise(rng, n, n // 24)) * (2.0 * np.pi * 6.0 / n)
    phase = 2.0 * np.pi * f_carrier * t + rng.uniform(0.0, 2.0 * np.pi) + wobble
    x += (env / amp) * a0 * drift * np.sin(phase)


_ANOMALY_INJECTORS = {
    "fringe_jump": lambda rng, x, env, amp: _add_fringe_jump(rng, x, env),
    "interference_burst": lambda rng, x, env, amp: _add_interference_burst(rng, x, amp),
    "vibration": lambda rng, x, env, amp: _add_vibration(rng, x, env, amp),
}


def generate_synthetic(spec: SyntheticSpec, split_seed: int = 0, train_fraction: float = 0.7) -> Dataset:
    """Generate a labeled synthetic dataset, deterministic in ``rng_seed``."""
    master = np.random.default_rng(spec.rng_seed)
    n_anomalous = int(round(spec.anomaly_fraction * spec.n_records))
    labels = np.concatenate([np.zeros(n_anomalous, dtype=int), np.ones(spec.n_records - n_anomalous, dtype=int)])
    master.shuffle(labels)

    kinds = tuple(spec.anomaly_kinds)
    records: list[DischargeRecord] = []
    for i in range(spec.n_records):
        rng = np.random.default_rng(master.integers(2**63))
        n = int(rng.integers(spec.t_range[0], spec.t_range[1] + 1))
        x, env, amp = _normal_signal(rng, n)
        if labels[i] == 0:
            kind = kinds[int(rng.integers(len(kinds)))]
            _ANOMALY_INJECTORS[kind](rng, x, env, amp)
        records.append(
            DischargeRecord(
                shot_id=i,
                channel_id="synthetic",
                dt=SYNTHETIC_DT,
                samples=x,
                label=int(labels[i]),
            )
        )
    return Dataset(records=records, split_seed=split_seed, train_fraction=train_fraction)


# ---------------------------------------------------------------------------
# Manifest persistence (newline-delimited JSON)
# ---------------------------------------------------------------------------


def write_manifest(records: list[DischargeRecord], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for r in records:
            line = json.dumps(
                {
                    "shot_id": r.shot_id,
                    "channel_id": r.channel_id,
                    "dt": r.dt,
                    "samples": r.samples.tolist(),
                    "label": r.label,
                },
                separators=(",", ":"),
            )
            fh.write(line + "\n")


def read_manifest(path: str | Path) -> list[DischargeRecord]:
    path = Path(path)
    records = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: not valid JSON ({exc})") from exc
            missing = {"shot_id", "channel_id", "dt", "samples", "label"} - set(doc)
            if missing:
                raise ParseError(f"{path}:{lineno}: missing fields {sorted(missing)}")
            records.append(
                DischargeRecord(
                    shot_id=doc["shot_id"],
                    channel_id=doc["channel_id"],
                    dt=doc["dt"],
                    samples=np.asarray(doc["samples"], dtype=np.float64),
                    label=doc["label"],
                )
            )
    return records
