"""Batch pipeline commands: generate, extract, train, eval, screen, verify.

Each command is a plain function of a PipelineConfig so it can be driven
from tests as well as the CLI. All derived artifacts live in the work
directory and embed the configuration hash where their format allows it;
the manifest, feature CSV, and scaler keep their exact documented layouts
and get a sidecar summary instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import koopman, pqnn, records
from .config import PipelineConfig, canonical_json
from .errors import ConfigError, DataError, SizingError, VerificationError
from .isomorphism import run_suite


@dataclass
class CommandSummary:
    name: str
    config_hash: str
    details: dict

    def to_dict(self) -> dict:
        return {"command": self.name, "config_hash": self.config_hash, **self.details}


def _write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(doc) + "\n")


def cmd_generate(cfg: PipelineConfig) -> CommandSummary:
    """Write the synthetic dataset manifest and report label counts."""
    spec = cfg.synthetic.to_spec()
    dataset = records.generate_synthetic(spec, cfg.data.split_seed, cfg.data.train_fraction)
    path = cfg.manifest_path()
    try:
        records.write_manifest(dataset.records, path)
    except OSError as exc:
        raise DataError(f"cannot write manifest to {path}: {exc}") from exc
    labels = [r.label for r in dataset.records]
    details = {
        "manifest": str(path),
        "n_records": len(labels),
        "n_anomalous": int(labels.count(0)),
        "n_normal": int(labels.count(1)),
    }
    return CommandSummary("generate", cfg.config_hash(), details)


def extract_features_for_records(
    recs: list[records.DischargeRecord], cfg: PipelineConfig
) -> tuple[list[records.DischargeRecord], np.ndarray, list[tuple[int, str, str]]]:
    """Standardize and decompose every feasible record.

    Returns (kept records, feature matrix, skipped) where skipped holds
    (shot_id, channel_id, reason) tuples for infeasible records.
    """
    kept: list[records.DischargeRecord] = []
    rows: list[np.ndarray] = []
    skipped: list[tuple[int, str, str]] = []
    for rec in recs:
        try:
            standardized = records.standardize(rec)
            decomp = koopman.decompose(standardized.samples, standardized.dt, cfg.hankel)
        except (SizingError, DataError) as exc:
            skipped.append((rec.shot_id, rec.channel_id, str(exc)))
            continue
        kept.append(rec)
        rows.append(koopman.extract_features(decomp.residual_norms))
    features = np.asarray(rows) if rows else np.empty((0, koopman.FEATURE_DIM))
    return kept, features, skipped


def cmd_extract(cfg: PipelineConfig) -> CommandSummary:
    """Distill the manifest into the feature CSV plus a train-only scaler."""
    manifest = cfg.manifest_path()
    if not manifest.exists():
        raise DataError(f"manifest not found: {manifest} (run generate first)")
    recs = records.read_manifest(manifest)
    kept, features, skipped = extract_features_for_records(recs, cfg)
    if len(kept) < 2:
        raise DataError(f"only {len(kept)} feasible records; cannot build a dataset")

    koopman.write_feature_csv(
        cfg.features_path(),
        [r.shot_id for r in kept],
        [r.channel_id for r in kept],
        [r.label for r in kept],
        features,
    )
    train_idx, _ = records.split_indices(len(kept), cfg.data.split_seed, cfg.data.train_fraction)
    scaler = koopman.fit_scaler(features[train_idx])
    koopman.save_scaler(scaler, cfg.scaler_path())

    details = {
        "features": str(cfg.features_path()),
        "scaler": str(cfg.scaler_path()),
        "n_records": len(kept),
        "n_skipped": len(skipped),
        "skipped": [{"shot_id": s, "channel_id": c, "reason": r} for s, c, r in skipped],
    }
    summary = CommandSummary("extract", cfg.config_hash(), details)
    _write_json(cfg.extract_summary_path(), summary.to_dict())
    return summary


def _load_split_features(cfg: PipelineConfig):
    """Scaled train/test features and labels, split exactly as at extract time."""
    features_path = cfg.features_path()
    scaler_path = cfg.scaler_path()
    if not features_path.exists() or not scaler_path.exists():
        raise DataError(f"features or scaler missing under {cfg.work_dir} (run extract first)")
    _, _, labels, feats = koopman.read_feature_csv(features_path)
    if feats.shape[1] != cfg.model.m:
        raise ConfigError(f"feature dimension {feats.shape[1]} does not match model m={cfg.model.m}")
    scaler = koopman.load_scaler(scaler_path)
    scaled = koopman.apply_scaler(scaler, feats)
    train_idx, test_idx = records.split_indices(len(labels), cfg.data.split_seed, cfg.data.train_fraction)
    return scaled, labels, train_idx, test_idx, scaler


def cmd_train(cfg: PipelineConfig, baseline: str | None = None, figures: bool = True) -> CommandSummary:
    """Train the quantum model (and optionally the MLN baseline) on the features."""
    scaled, labels, train_idx, test_idx, scaler = _load_split_features(cfg)
    x_train, y_train = scaled[train_idx], labels[train_idx]
    x_test, y_test = scaled[test_idx], labels[test_idx]

    model = pqnn.init_pqnn(cfg.model.init_seed, cfg.model.to_pqnn_config())
    history = pqnn.train_pqnn(model, x_train, y_train, x_test, y_test, cfg.train)
    pqnn.save_checkpoint(
        cfg.checkpoint_path(), model, scaler, history,
        extra_config={
            "config_hash": cfg.config_hash(),
            # Feature-extraction geometry, so screening can reproduce the
            # exact features this model was trained on.
            "hankel": {"dim": cfg.hankel.dim, "delay": cfg.hankel.delay,
                       "rank": cfg.hankel.rank, "rcond": cfg.hankel.rcond},
        },
    )
    details: dict = {
        "checkpoint": str(cfg.checkpoint_path()),
        "epochs": len(history),
        "final_test_acc": history[-1]["test_acc"] if history else None,
    }

    if baseline == "mln":
        mln = pqnn.init_mln(cfg.model.mln_init_seed, cfg.model.mln_sizes)
        mln_history = pqnn.train_mln(mln, x_train, y_train, x_test, y_test, cfg.train)
        pqnn.save_mln_checkpoint(cfg.mln_checkpoint_path(), mln, mln_history)
        details["mln_checkpoint"] = str(cfg.mln_checkpoint_path())
        details["mln_final_test_acc"] = mln_history[-1]["test_acc"] if mln_history else None
    elif baseline is not None:
        raise ConfigError(f"unknown baseline {baseline!r}; only 'mln' is available")

    if figures and history:
        from .figures import render_training_curves

        render_training_curves(history, cfg.training_figure_path(), title="Quantum classifier training")
        details["figure"] = str(cfg.training_figure_path())
    return CommandSummary("train", cfg.config_hash(), details)


def cmd_eval(
    cfg: PipelineConfig,
    checkpoint: str | Path | None = None,
    split: str = "test",
    baseline: str | None = None,
    figures: bool = True,
) -> CommandSummary:
    """Emit the metrics report and the latent-vector CSV for one trained model."""
    scaled, labels, train_idx, test_idx, _ = _load_split_features(cfg)
    if split == "test":
        idx = test_idx
    elif split == "train":
        idx = train_idx
    else:
        raise ConfigError(f"split must be 'train' or 'test', got {split!r}")
    x_eval, y_eval = scaled[idx], labels[idx]
    if len(y_eval) == 0:
        raise DataError("evaluation split is empty")

    if baseline == "mln":
        path = Path(checkpoint) if checkpoint else cfg.mln_checkpoint_path()
        if not path.exists():
            raise DataError(f"MLN checkpoint not found: {path}")
        mln, _ = pqnn.load_mln_checkpoint(path)
        logits, latents = pqnn.mln_forward(mln, x_eval)
    elif baseline is None:
        path = Path(checkpoint) if checkpoint else cfg.checkpoint_path()
        if not path.exists():
            raise DataError(f"checkpoint not found: {path}")
        model, _, _ = pqnn.load_checkpoint(path)
        if model.config.m != cfg.model.m:
            raise ConfigError(
                f"checkpoint feature dimension {model.config.m} does not match config m={cfg.model.m}"
            )
        logits, latents = pqnn.forward(model, x_eval)
    else:
        raise ConfigError(f"unknown baseline {baseline!r}; only 'mln' is available")

    report = pqnn.evaluate(logits, latents, y_eval)
    doc = report.to_dict()
    doc["config_hash"] = cfg.config_hash()
    _write_json(cfg.metrics_path(), doc)

    with cfg.latents_path().open("w") as fh:
        fh.write("index,label,latent_0,latent_1\n")
        for i, (lab, vec) in enumerate(zip(y_eval, latents)):
            fh.write(f"{i},{lab},{vec[0]!r},{vec[1]!r}\n")

    details = {
        "metrics": str(cfg.metrics_path()),
        "latents": str(cfg.latents_path()),
        "accuracy": report.accuracy,
        "silhouette": report.silhouette,
    }
    if figures:
        from .figures import render_latent_scatter

        render_latent_scatter(latents, y_eval, cfg.latent_figure_path(), report.silhouette)
        details["figure"] = str(cfg.latent_figure_path())
    return CommandSummary("eval", cfg.config_hash(), details)


def screen_file(cfg: PipelineConfig, checkpoint: str | Path, discharge_path: str | Path) -> list[dict]:
    """Per-channel verdicts for one discharge file using a trained model.

    A channel that cannot be screened (too short for the embedding, no
    post-trigger samples) gets verdict "unscreenable" with the reason.
    """
    path = Path(checkpoint)
    if not path.exists():
        raise DataError(f"checkpoint not found: {path}")
    model, scaler, _ = pqnn.load_checkpoint(path)
    # Prefer the embedding geometry the model was trained with, if recorded.
    stored = json.loads(path.read_text()).get("config", {}).get("hankel")
    hankel = koopman.HankelConfig(**stored) if stored else cfg.hankel
    recs, skipped = records.ingest_discharge_file(discharge_path, min_length=1)

    verdicts: list[dict] = []
    for channel_id, reason in skipped:
        verdicts.append({"channel": channel_id, "p_normal": None, "verdict": "unscreenable", "reason": reason})
    for rec in recs:
        try:
            standardized = records.standardize(rec)
            decomp = koopman.decompose(standardized.samples, standardized.dt, hankel)
        except (SizingError, DataError) as exc:
            verdicts.append(
                {"channel": rec.channel_id, "p_normal": None, "verdict": "unscreenable", "reason": str(exc)}
            )
            continue
        raw = koopman.extract_features(decomp.residual_norms)
        scaled = koopman.apply_scaler(scaler, raw)
        logits, _ = pqnn.forward(model, scaled[None, :])
        p_normal = float(pqnn._softmax(logits)[0, 1])
        verdicts.append({"channel": rec.channel_id, "p_normal": p_normal, "verdict": verdict_from_p(p_normal)})
    return verdicts


def verdict_from_p(p_normal: float) -> str:
    """Threshold at 0.5; ties break conservatively toward anomaly."""
    return "normal" if p_normal > 0.5 else "anomaly"


def cmd_screen(cfg: PipelineConfig, checkpoint: str | Path, discharge_path: str | Path) -> CommandSummary:
    verdicts = screen_file(cfg, checkpoint, discharge_path)
    doc = {"config_hash": cfg.config_hash(), "file": str(discharge_path), "channels": verdicts}
    _write_json(cfg.screen_report_path(), doc)
    details = {"report": str(cfg.screen_report_path()), "channels": verdicts}
    return CommandSummary("screen", cfg.config_hash(), details)


def cmd_verify(cfg: PipelineConfig, lambda_perturbation: float = 0.0) -> CommandSummary:
    """Run the structural verification suite; raises if any check fails."""
    results = run_suite(seed=cfg.verify_seed, lambda_perturbation=lambda_perturbation)
    doc = {
        "config_hash": cfg.config_hash(),
        "checks": [r.to_dict() for r in results],
        "all_passed": all(r.passed for r in results),
    }
    _write_json(cfg.verify_report_path(), doc)
    details = {"report": str(cfg.verify_report_path()), "checks": doc["checks"]}
    summary = CommandSummary("verify", cfg.config_hash(), details)
    if not doc["all_passed"]:
        failed = [r.name for r in results if not r.passed]
        raise VerificationError(f"verification checks failed: {', '.join(failed)}")
    return summary
