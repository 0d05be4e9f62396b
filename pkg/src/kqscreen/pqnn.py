"""The parallel-circuit quantum classifier, its MLN baseline, and evaluation.

Forward pipeline (class index 1 = normal):

    features in [0, pi]^6
      -> LayerNorm (no affine)
      -> fixed random affine map h = W_enc z + b
      -> split into k sub-vectors, one per circuit
      -> per circuit: Y-angle encoding, trainable unitary, exact Z expectations
      -> concatenate, LayerNorm
      -> logits by averaging alternate elements

Only the circuit parameters train; the encoding map and the averaging head
stay fixed. Training uses AdamW with decoupled weight decay (zero by
default) on the mean cross-entropy of shuffled mini-batches.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import statevector as sv
from .errors import ConfigError, DataError, NumericalError, SizingError
from .koopman import FeatureScaler

LAYER_NORM_EPS = 1e-5


@dataclass
class PqnnConfig:
    """Architecture sizing; defaults match the reference setup (6 -> 2x3 qubits)."""

    m: int = 6
    k: int = 2
    n: int = 3
    share_params: bool = False
    ansatz: str = "full_unitary"
    layers: int = 3
    norm_eps: float = LAYER_NORM_EPS

    def __post_init__(self) -> None:
        if self.n * self.k != self.m:
            raise ConfigError(f"n * k must equal m under the split encoding, got {self.n}*{self.k} != {self.m}")
        if self.ansatz not in ("full_unitary", "layered"):
            raise ConfigError(f"unknown ansatz {self.ansatz!r}")
        if self.layers < 1:
            raise ConfigError("layers must be >= 1")

    @property
    def n_circuits_stored(self) -> int:
        return 1 if self.share_params else self.k

    @property
    def params_per_circuit(self) -> int:
        if self.ansatz == "layered":
            return self.layers * self.n
        return 4**self.n


@dataclass
class PqnnModel:
    config: PqnnConfig
    w_enc: np.ndarray
    b: np.ndarray
    thetas: np.ndarray  # (n_circuits_stored, params_per_circuit)
    init_seed: int

    @property
    def trainable_count(self) -> int:
        return int(self.thetas.size)

    @property
    def fixed_count(self) -> int:
        return int(self.w_enc.size + self.b.size)

    def theta_for(self, circuit: int) -> np.ndarray:
        return self.thetas[0] if self.config.share_params else self.thetas[circuit]


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 120
    batch_size: int = 64
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    rng_seed: int = 13
    max_steps: int = 1_000_000

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("learning_rate must be positive, batch_size >= 1, epochs >= 0")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")


def layer_norm(x: np.ndarray, eps: float = LAYER_NORM_EPS) -> np.ndarray:
    """Rowwise (x - mean) / sqrt(var + eps), no learnable affine terms."""
    x = np.atleast_2d(x)
    mu = x.mean(axis=1, keepdims=True)
    var = x.var(axis=1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps)


def _layer_norm_backward(x: np.ndarray, grad_out: np.ndarray, eps: float) -> np.ndarray:
    """Jacobian-vector product of layer_norm at x, rowwise."""
    mu = x.mean(axis=1, keepdims=True)
    var = x.var(axis=1, keepdims=True)
    s = np.sqrt(var + eps)
    xhat = (x - mu) / s
    g_mean = grad_out.mean(axis=1, keepdims=True)
    gx_mean = (grad_out * xhat).mean(axis=1, keepdims=True)
    return (grad_out - g_mean - xhat * gx_mean) / s


def head_logits(expectations: np.ndarray, eps: float = LAYER_NORM_EPS) -> np.ndarray:
    """Normalize the concatenated expectations, then average alternate elements."""
    e = layer_norm(np.atleast_2d(expectations), eps)
    return np.stack([e[:, 0::2].mean(axis=1), e[:, 1::2].mean(axis=1)], axis=1)


def init_pqnn(seed: int, config: PqnnConfig | None = None) -> PqnnModel:
    """Fixed Gaussian encoding map (variance 1/m), zero bias, small circuit angles."""
    config = config or PqnnConfig()
    rng = np.random.default_rng(seed)
    w_enc = rng.normal(0.0, np.sqrt(1.0 / config.m), size=(config.n * config.k, config.m))
    b = np.zeros(config.n * config.k)
    thetas = rng.normal(0.0, np.sqrt(0.01), size=(config.n_circuits_stored, config.params_per_circuit))
    return PqnnModel(config=config, w_enc=w_enc, b=b, thetas=thetas, init_seed=seed)


def _circuit_unitary(config: PqnnConfig, theta: np.ndarray) -> np.ndarray:
    if config.ansatz == "layered":
        return sv.layered_unitary(config.n, theta.reshape(config.layers, config.n))
    return sv.build_unitary(sv.UnitaryParams(config.n, theta))


def _encoded_angles(model: PqnnModel, z_scaled: np.ndarray) -> np.ndarray:
    z = np.atleast_2d(np.asarray(z_scaled, dtype=np.float64))
    if z.shape[1] != model.config.m:
        raise SizingError(f"expected feature dimension {model.config.m}, got {z.shape[1]}")
    return layer_norm(z, model.config.norm_eps) @ model.w_enc.T + model.b


def forward(model: PqnnModel, z_scaled: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batch forward pass; returns (logits, latent), both (batch, 2).

    The latent vector is the pre-softmax logit pair, which is also what
    evaluation clusters on.
    """
    cfg = model.config
    h = _encoded_angles(model, z_scaled)
    expectations = np.empty((h.shape[0], cfg.n * cfg.k))
    for j in range(cfg.k):
        angles = h[:, j * cfg.n:(j + 1) * cfg.n]
        psi0 = sv.encode_angles_batch(angles)
        unitary = _circuit_unitary(cfg, model.theta_for(j))
        psi = psi0 @ unitary.T
        expectations[:, j * cfg.n:(j + 1) * cfg.n] = sv.z_expectations_batch(psi, cfg.n)
    logits = head_logits(expectations, cfg.norm_eps)
    return logits, logits.copy()


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean softmax cross-entropy, computed in the log-sum-exp stable form."""
    logits = np.atleast_2d(logits)
    labels = np.atleast_1d(labels).astype(int)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(len(labels)), labels]
    return float(np.mean(log_z - picked))


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    ez = np.exp(shifted)
    return ez / ez.sum(axis=1, keepdims=True)


def pqnn_loss_and_grad(
    model: PqnnModel, z_scaled: np.ndarray, labels: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean batch loss and its gradient w.r.t. the circuit parameters only.

    The per-sample gradients are averaged; for the dense ansatz the average
    is folded into a single cotangent matrix per circuit, for the layered
    ansatz the exact parameter-shift rule is used.
    """
    cfg = model.config
    z = np.atleast_2d(np.asarray(z_scaled, dtype=np.float64))
    labels = np.atleast_1d(labels).astype(int)
    batch = z.shape[0]
    h = _encoded_angles(model, z)

    circuit_cache = []
    expectations = np.empty((batch, cfg.n * cfg.k))
    for j in range(cfg.k):
        angles = h[:, j * cfg.n:(j + 1) * cfg.n]
        psi0 = sv.encode_angles_batch(angles)
        theta = model.theta_for(j)
        if cfg.ansatz == "full_unitary":
            unitary, evals, eigvecs = sv.eig_expm_factors(sv.UnitaryParams(cfg.n, theta))
        else:
            unitary, evals, eigvecs = sv.layered_unitary(cfg.n, theta.reshape(cfg.layers, cfg.n)), None, None
        psi = psi0 @ unitary.T
        expectations[:, j * cfg.n:(j + 1) * cfg.n] = sv.z_expectations_batch(psi, cfg.n)
        circuit_cache.append((angles, psi0, psi, evals, eigvecs))

    logits = head_logits(expectations, cfg.norm_eps)
    loss = cross_entropy(logits, labels)

    # Backward through the fixed head: softmax CE -> averaging -> LayerNorm.
    d_logits = _softmax(logits)
    d_logits[np.arange(batch), labels] -= 1.0
    d_norm = np.empty_like(expectations)
    d_norm[:, 0::2] = d_logits[:, [0]] / (cfg.n * cfg.k / 2)
    d_norm[:, 1::2] = d_logits[:, [1]] / (cfg.n * cfg.k / 2)
    d_expect = _layer_norm_backward(expectations, d_norm, cfg.norm_eps)

    signs = sv.z_sign_matrix(cfg.n)
    grads = np.zeros_like(model.thetas)
    for j in range(cfg.k):
        angles, psi0, psi, evals, eigvecs = circuit_cache[j]
        w = d_expect[:, j * cfg.n:(j + 1) * cfg.n]
        if cfg.ansatz == "full_unitary":
            # Mean-over-batch cotangent; the parameter pullback is linear in it.
            g = (w @ signs) * psi
            cotangent = (g.T @ np.conj(psi0)) / batch
            grad_j = sv.unitary_gradient_from_cotangent(evals, eigvecs, cotangent)
        else:
            grad_j = _layered_shift_gradient(cfg, model.theta_for(j), psi0, w) / batch
        if cfg.share_params:
            grads[0] += grad_j
        else:
            grads[j] = grad_j
    return loss, grads


def _layered_shift_gradient(
    cfg: PqnnConfig, theta: np.ndarray, psi0: np.ndarray, w: np.ndarray
) -> np.ndarray:
    """Parameter-shift gradient of sum over the batch of w . <Z> for the layered ansatz.

    Full-angle rotations have generator eigenvalues +-1, so the exact shift
    is +-pi/4 with unit prefactor.
    """
    grad = np.empty(theta.size)
    for p in range(theta.size):
        shifted = theta.copy()
        shifted[p] += np.pi / 4
        e_plus = sv.z_expectations_batch(psi0 @ sv.layered_unitary(cfg.n, shifted.reshape(cfg.layers, cfg.n)).T, cfg.n)
        shifted[p] -= np.pi / 2
        e_minus = sv.z_expectations_batch(psi0 @ sv.layered_unitary(cfg.n, shifted.reshape(cfg.layers, cfg.n)).T, cfg.n)
        grad[p] = float(np.sum(w * (e_plus - e_minus)))
    return grad


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------


class AdamW:
    """Adam with decoupled weight decay, operating on a dict of arrays."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8, weight_decay: float = 0.0):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.step_count += 1
        bc1 = 1.0 - self.beta1**self.step_count
        bc2 = 1.0 - self.beta2**self.step_count
        for key, p in params.items():
            g = grads[key]
            if key not in self._m:
                self._m[key] = np.zeros_like(p)
                self._v[key] = np.zeros_like(p)
            self._m[key] = self.beta1 * self._m[key] + (1.0 - self.beta1) * g
            self._v[key] = self.beta2 * self._v[key] + (1.0 - self.beta2) * (g * g)
            if self.weight_decay:
                p -= self.lr * self.weight_decay * p
            m_hat = self._m[key] / bc1
            v_hat = self._v[key] / bc2
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


# ---------------------------------------------------------------------------
# Training loops
# ---------------------------------------------------------------------------


def train_pqnn(
    model: PqnnModel,
    train_feats: np.ndarray,
    train_labels: np.ndarray,
    test_feats: np.ndarray,
    test_labels: np.ndarray,
    cfg: TrainConfig,
) -> list[dict]:
    """Optimize the circuit parameters in place; returns per-epoch history.

    The encoding map and bias are asserted unchanged afterwards. Batches are
    reshuffled every epoch, deterministically in the training seed.
    """
    w_enc_before = model.w_enc.tobytes()
    b_before = model.b.tobytes()
    history = _run_training(
        params={"thetas": model.thetas},
        loss_and_grad=lambda xb, yb: _pqnn_batch_adapter(model, xb, yb),
        predict=lambda xb: forward(model, xb)[0],
        train_feats=train_feats,
        train_labels=train_labels,
        test_feats=test_feats,
        test_labels=test_labels,
        cfg=cfg,
    )
    if model.w_enc.tobytes() != w_enc_before or model.b.tobytes() != b_before:
        raise NumericalError("fixed encoding parameters changed during training")
    return history


def _pqnn_batch_adapter(model, xb, yb):
    loss, grads = pqnn_loss_and_grad(model, xb, yb)
    return loss, {"thetas": grads}


def _run_training(params, loss_and_grad, predict, train_feats, train_labels,
                  test_feats, test_labels, cfg: TrainConfig) -> list[dict]:
    train_feats = np.atleast_2d(train_feats)
    train_labels = np.atleast_1d(train_labels).astype(int)
    n = train_feats.shape[0]
    if n == 0:
        raise DataError("training set is empty")
    n_batches = (n + cfg.batch_size - 1) // cfg.batch_size
    if cfg.epochs * n_batches > cfg.max_steps:
        raise ConfigError(
            f"{cfg.epochs} epochs x {n_batches} batches exceeds max_steps={cfg.max_steps}"
        )
    opt = AdamW(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay)
    rng = np.random.default_rng(cfg.rng_seed)
    history: list[dict] = []
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            loss, grads = loss_and_grad(train_feats[idx], train_labels[idx])
            if not np.isfinite(loss):
                raise NumericalError(
                    f"non-finite loss at epoch {epoch}, batch {start // cfg.batch_size}"
                )
            opt.step(params, grads)
            epoch_loss += loss * len(idx)
        test_acc = accuracy(predict(test_feats), test_labels) if len(np.atleast_1d(test_labels)) else float("nan")
        history.append({
            "epoch": epoch,
            "train_loss": epoch_loss / n,
            "test_acc": test_acc,
        })
    return history


def accuracy(logits: np.ndarray, labels: np.ndarray) -> float:
    preds = np.argmax(np.atleast_2d(logits), axis=1)
    return float(np.mean(preds == np.atleast_1d(labels)))


# ---------------------------------------------------------------------------
# MLN baseline
# ---------------------------------------------------------------------------


@dataclass
class MlnModel:
    """Fully trainable tanh network; all parameters optimized."""

    sizes: tuple[int, ...]
    weights: list[np.ndarray] = field(default_factory=list)
    biases: list[np.ndarray] = field(default_factory=list)

    @property
    def trainable_count(self) -> int:
        return int(sum(w.size for w in self.weights) + sum(b.size for b in self.biases))


def init_mln(seed: int, sizes: tuple[int, ...] = (6, 16, 16, 2)) -> MlnModel:
    if sizes[-1] != 2:
        raise ConfigError("the output layer must have 2 logits")
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.normal(0.0, np.sqrt(1.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlnModel(sizes=tuple(sizes), weights=weights, biases=biases)


def mln_forward(model: MlnModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Returns (logits, latent); the latent is the pre-softmax logit pair."""
    a = np.atleast_2d(np.asarray(x, dtype=np.float64))
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        a = np.tanh(a @ w + b)
    logits = a @ model.weights[-1] + model.biases[-1]
    return logits, logits.copy()


def mln_loss_and_grad(model: MlnModel, x: np.ndarray, labels: np.ndarray) -> tuple[float, dict]:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    labels = np.atleast_1d(labels).astype(int)
    batch = x.shape[0]

    activations = [x]
    a = x
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        a = np.tanh(a @ w + b)
        activations.append(a)
    logits = a @ model.weights[-1] + model.biases[-1]
    loss = cross_entropy(logits, labels)

    delta = _softmax(logits)
    delta[np.arange(batch), labels] -= 1.0
    delta /= batch
    grads: dict[str, np.ndarray] = {}
    for layer in range(len(model.weights) - 1, -1, -1):
        grads[f"w{layer}"] = activations[layer].T @ delta
        grads[f"b{layer}"] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ model.weights[layer].T) * (1.0 - activations[layer] ** 2)
    return loss, grads


def train_mln(
    model: MlnModel,
    train_feats: np.ndarray,
    train_labels: np.ndarray,
    test_feats: np.ndarray,
    test_labels: np.ndarray,
    cfg: TrainConfig,
) -> list[dict]:
    """Same optimizer and schedule as the quantum model, all weights trainable."""
    params = {f"w{i}": w for i, w in enumerate(model.weights)}
    params.update({f"b{i}": b for i, b in enumerate(model.biases)})
    return _run_training(
        params=params,
        loss_and_grad=lambda xb, yb: mln_loss_and_grad(model, xb, yb),
        predict=lambda xb: mln_forward(model, xb)[0],
        train_feats=train_feats,
        train_labels=train_labels,
        test_feats=test_feats,
        test_labels=test_labels,
        cfg=cfg,
    )


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


@dataclass
class EvalReport:
    accuracy: float
    confusion: np.ndarray  # rows: true label, cols: predicted
    silhouette: float | None
    latent_vectors: np.ndarray

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "confusion": self.confusion.tolist(),
            "silhouette": self.silhouette,
        }


def silhouette_score(points: np.ndarray, labels: np.ndarray) -> float | None:
    """Mean silhouette with Euclidean distances; None if only one cluster.

    Points with degenerate a = b = 0 contribute 0, and singleton clusters
    contribute 0 for their lone member.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    labels = np.atleast_1d(labels)
    classes = np.unique(labels)
    if classes.size < 2:
        return None
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2))
    scores = np.zeros(len(points))
    masks = {c: labels == c for c in classes}
    for i in range(len(points)):
        own = masks[labels[i]].copy()
        own[i] = False
        if not own.any():
            continue  # singleton cluster
        a = dist[i, own].mean()
        b = min(dist[i, masks[c]].mean() for c in classes if c != labels[i])
        denom = max(a, b)
        scores[i] = (b - a) / denom if denom > 0 else 0.0
    return float(scores.mean())


def evaluate(logits: np.ndarray, latents: np.ndarray, labels: np.ndarray) -> EvalReport:
    """Accuracy, confusion counts, and latent-space silhouette for one model."""
    logits = np.atleast_2d(logits)
    labels = np.atleast_1d(labels).astype(int)
    if len(labels) == 0:
        raise DataError("evaluation set is empty")
    preds = np.argmax(logits, axis=1)
    confusion = np.zeros((2, 2), dtype=int)
    for t, p in zip(labels, preds):
        confusion[t, p] += 1
    return EvalReport(
        accuracy=float(np.trace(confusion) / confusion.sum()),
        confusion=confusion,
        silhouette=silhouette_score(latents, labels),
        latent_vectors=np.atleast_2d(latents),
    )


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(
    path: str | Path,
    model: PqnnModel,
    scaler: FeatureScaler,
    history: list[dict],
    extra_config: dict | None = None,
) -> None:
    """Single JSON document holding the model, scaler, seed, and history."""
    cfg = model.config
    doc = {
        "config": {
            "m": cfg.m, "k": cfg.k, "n": cfg.n,
            "share_params": cfg.share_params,
            "ansatz": cfg.ansatz, "layers": cfg.layers,
            "norm_eps": cfg.norm_eps,
            **(extra_config or {}),
        },
        "w_enc": model.w_enc.tolist(),
        "b": model.b.tolist(),
        "theta": model.thetas.tolist(),
        "scaler": {"lo": scaler.lo.tolist(), "hi": scaler.hi.tolist()},
        "seed": model.init_seed,
        "history": history,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")


def load_checkpoint(path: str | Path) -> tuple[PqnnModel, FeatureScaler, list[dict]]:
    doc = json.loads(Path(path).read_text())
    missing = {"config", "w_enc", "b", "theta", "scaler", "seed", "history"} - set(doc)
    if missing:
        raise DataError(f"{path}: checkpoint missing fields {sorted(missing)}")
    c = doc["config"]
    config = PqnnConfig(
        m=c["m"], k=c["k"], n=c["n"],
        share_params=c.get("share_params", False),
        ansatz=c.get("ansatz", "full_unitary"),
        layers=c.get("layers", 3),
        norm_eps=c.get("norm_eps", LAYER_NORM_EPS),
    )
    model = PqnnModel(
        config=config,
        w_enc=np.asarray(doc["w_enc"], dtype=np.float64),
        b=np.asarray(doc["b"], dtype=np.float64),
        thetas=np.asarray(doc["theta"], dtype=np.float64),
        init_seed=int(doc["seed"]),
    )
    expected = (config.n_circuits_stored, config.params_per_circuit)
    if model.thetas.shape != expected:
        raise DataError(f"{path}: theta shape {model.thetas.shape} does not match config {expected}")
    scaler = FeatureScaler(lo=np.asarray(doc["scaler"]["lo"]), hi=np.asarray(doc["scaler"]["hi"]))
    return model, scaler, doc["history"]


def save_mln_checkpoint(path: str | Path, model: MlnModel, history: list[dict]) -> None:
    doc = {
        "sizes": list(model.sizes),
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "history": history,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")


def load_mln_checkpoint(path: str | Path) -> tuple[MlnModel, list[dict]]:
    doc = json.loads(Path(path).read_text())
    model = MlnModel(
        sizes=tuple(doc["sizes"]),
        weights=[np.asarray(w, dtype=np.float64) for w in doc["weights"]],
        biases=[np.asarray(b, dtype=np.float64) for b in doc["biases"]],
    )
    return model, doc["history"]
