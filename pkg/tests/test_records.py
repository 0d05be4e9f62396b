"""Ingestion, standardization, splitting, and synthetic generation."""

from __future__ import annotations

import json
from fractions import Fraction
from math import sqrt

import numpy as np
import pytest

from kqscreen.errors import ConfigError, ParseError, ValidationError
from kqscreen.records import (
    Dataset,
    DischargeRecord,
    SyntheticSpec,
    generate_synthetic,
    ingest_discharge_file,
    read_manifest,
    split_dataset,
    standardize,
    write_manifest,
)


def make_discharge_file(tmp_path, n_channels=11, n_anomalous=3, n_samples=300,
                        t_start=-0.05, dt=1e-3, shot=42):
    time = t_start + dt * np.arange(n_samples)
    rng = np.random.default_rng(1)
    channels = {f"ch{i:02d}": rng.normal(0, 1, n_samples).tolist() for i in range(n_channels)}
    doc = {
        "shot": shot,
        "dt": dt,
        "time": time.tolist(),
        "channels": channels,
        "anomaly_channels": [f"ch{i:02d}" for i in range(n_anomalous)],
    }
    path = tmp_path / f"shot_{shot}.json"
    path.write_text(json.dumps(doc))
    return path


class TestIngest:
    def test_labels_from_anomaly_list(self, tmp_path):
        path = make_discharge_file(tmp_path, n_channels=11, n_anomalous=3)
        records, skipped = ingest_discharge_file(path, min_length=16)
        assert len(records) == 11
        assert not skipped
        labels = [r.label for r in records]
        assert labels.count(0) == 3
        assert labels.count(1) == 8

    def test_time_starting_at_zero_keeps_everything(self, tmp_path):
        path = make_discharge_file(tmp_path, n_samples=64, t_start=0.0)
        records, _ = ingest_discharge_file(path, min_length=16)
        assert all(r.length == 64 for r in records)

    def test_pre_trigger_samples_dropped(self, tmp_path):
        doc = {
            "shot": 1,
            "dt": 0.1,
            "time": [-0.1, 0.0, 0.1],
            "channels": {"a": [5.0, 6.0, 7.0]},
            "anomaly_channels": [],
        }
        path = tmp_path / "shot.json"
        path.write_text(json.dumps(doc))
        records, _ = ingest_discharge_file(path, min_length=1)
        assert records[0].samples.tolist() == [6.0, 7.0]

    def test_missing_field_named(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"shot": 1, "dt": 0.1, "time": [0.0], "channels": {"a": [1.0]}}))
        with pytest.raises(ParseError, match="anomaly_channels"):
            ingest_discharge_file(path)

    def test_length_mismatch_names_channel(self, tmp_path):
        doc = {"shot": 1, "dt": 0.1, "time": [0.0, 0.1], "channels": {"bad_ch": [1.0]},
               "anomaly_channels": []}
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(ParseError, match="bad_ch"):
            ingest_discharge_file(path)

    def test_non_monotonic_time_rejected(self, tmp_path):
        doc = {"shot": 1, "dt": 0.1, "time": [0.0, 0.2, 0.1], "channels": {"a": [1.0, 2.0, 3.0]},
               "anomaly_channels": []}
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(ValidationError, match="increasing"):
            ingest_discharge_file(path)

    def test_all_pre_trigger_channel_skipped_and_counted(self, tmp_path):
        doc = {"shot": 1, "dt": 0.1, "time": [-0.2, -0.1], "channels": {"a": [1.0, 2.0]},
               "anomaly_channels": []}
        path = tmp_path / "pre.json"
        path.write_text(json.dumps(doc))
        records, skipped = ingest_discharge_file(path, min_length=1)
        assert records == []
        assert skipped == [("a", "no post-trigger samples")]

    def test_short_channel_rejected_not_padded(self, tmp_path):
        path = make_discharge_file(tmp_path, n_channels=1, n_anomalous=0, n_samples=100)
        records, skipped = ingest_discharge_file(path, min_length=256)
        assert records == []
        assert len(skipped) == 1
        assert "minimum 256" in skipped[0][1]


class TestStandardize:
    def test_two_point_symmetry(self):
        rec = DischargeRecord(1, "a", 0.1, np.array([1.0, 3.0]), 1)
        out = standardize(rec)
        expected = 1.0 / (1.0 + 1e-6)
        assert out.samples == pytest.approx([-expected, expected], rel=1e-15)

    def test_constant_signal_maps_to_zero(self):
        rec = DischargeRecord(1, "a", 0.1, np.array([5.0, 5.0, 5.0]), 1)
        out = standardize(rec)
        assert out.samples.tolist() == [0.0, 0.0, 0.0]

    def test_against_exact_rational_statistics(self):
        # Independent oracle: exact mean/variance via rationals, then float sqrt.
        values = [0.0, 1.0, 2.0, 9.0]
        fracs = [Fraction(v) for v in values]
        mu = sum(fracs) / len(fracs)
        var = sum((f - mu) ** 2 for f in fracs) / len(fracs)
        sigma = sqrt(float(var))
        expected = [(v - float(mu)) / (sigma + 1e-6) for v in values]

        rec = DischargeRecord(1, "a", 0.1, np.array(values), 0)
        out = standardize(rec)
        assert out.samples == pytest.approx(expected, rel=1e-14)
        assert out.label == 0
        assert out.dt == rec.dt

    def test_idempotent_within_epsilon_effects(self):
        rng = np.random.default_rng(3)
        rec = DischargeRecord(1, "a", 0.1, rng.normal(2.0, 5.0, 400), 1)
        once = standardize(rec)
        twice = standardize(once)
        rel = np.abs(twice.samples - once.samples) / np.maximum(np.abs(once.samples), 1e-12)
        assert np.max(rel) < 1e-5

    def test_too_short_rejected(self):
        rec = DischargeRecord(1, "a", 0.1, np.array([1.0]), 1)
        with pytest.raises(ValidationError):
            standardize(rec)


class TestSplit:
    def _dataset(self, n, seed=0, fraction=0.7):
        recs = [DischargeRecord(i, "c", 0.1, np.array([0.0, 1.0]), 1) for i in range(n)]
        return Dataset(records=recs, split_seed=seed, train_fraction=fraction)

    def test_sizes_round(self):
        train, test = split_dataset(self._dataset(10))
        assert (len(train), len(test)) == (7, 3)

    def test_paper_scale_counts(self):
        train, test = split_dataset(self._dataset(4763))
        assert (len(train), len(test)) == (3334, 1429)

    def test_deterministic_in_seed(self):
        ds = self._dataset(50, seed=9)
        t1, e1 = split_dataset(ds)
        t2, e2 = split_dataset(ds)
        assert [r.shot_id for r in t1] == [r.shot_id for r in t2]
        assert [r.shot_id for r in e1] == [r.shot_id for r in e2]

    def test_partition_is_disjoint_and_complete(self):
        ds = self._dataset(33, seed=4)
        train, test = split_dataset(ds)
        train_ids = {r.shot_id for r in train}
        test_ids = {r.shot_id for r in test}
        assert train_ids.isdisjoint(test_ids)
        assert train_ids | test_ids == set(range(33))

    def test_too_small_rejected(self):
        with pytest.raises(ValidationError):
            split_dataset(self._dataset(1))


class TestSynthetic:
    def test_determinism_byte_identical(self, tmp_path):
        spec = SyntheticSpec(n_records=12, anomaly_fraction=0.5, t_range=(300, 500), rng_seed=7)
        a = generate_synthetic(spec)
        b = generate_synthetic(spec)
        pa, pb = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_manifest(a.records, pa)
        write_manifest(b.records, pb)
        assert pa.read_bytes() == pb.read_bytes()

    def test_zero_fraction_all_normal(self):
        ds = generate_synthetic(SyntheticSpec(n_records=10, anomaly_fraction=0.0, t_range=(300, 400)))
        assert all(r.label == 1 for r in ds.records)

    def test_label_counts_match_fraction(self):
        ds = generate_synthetic(SyntheticSpec(n_records=25, anomaly_fraction=0.4, t_range=(300, 400)))
        n_anomalous = sum(1 for r in ds.records if r.label == 0)
        assert abs(n_anomalous - 0.4 * 25) <= 1

    def test_fringe_jump_dominates_prior_slew(self):
        # Oracle: scan first differences for an index whose step is at least
        # 3x everything before it.
        spec = SyntheticSpec(
            n_records=20, anomaly_fraction=1.0, t_range=(400, 600),
            anomaly_kinds=("fringe_jump",), rng_seed=11,
        )
        ds = generate_synthetic(spec)
        for rec in ds.records:
            diffs = np.abs(np.diff(rec.samples))
            prefix_max = np.maximum.accumulate(diffs)
            found = np.any(diffs[1:] >= 3.0 * prefix_max[:-1])
            assert found, f"record {rec.shot_id} has no dominating step"

    def test_empty_kinds_with_positive_fraction_rejected(self):
        with pytest.raises(ConfigError):
            SyntheticSpec(n_records=5, anomaly_fraction=0.5, anomaly_kinds=())

    def test_record_invariants(self):
        ds = generate_synthetic(SyntheticSpec(n_records=8, anomaly_fraction=0.5, t_range=(300, 400)))
        for rec in ds.records:
            assert np.all(np.isfinite(rec.samples))
            assert rec.label in (0, 1)
            assert 300 <= rec.length <= 400


class TestManifest:
    def test_round_trip_bit_exact(self, tmp_path):
        ds = generate_synthetic(SyntheticSpec(n_records=6, anomaly_fraction=0.5, t_range=(300, 400)))
        path = tmp_path / "m.jsonl"
        write_manifest(ds.records, path)
        loaded = read_manifest(path)
        path2 = tmp_path / "m2.jsonl"
        write_manifest(loaded, path2)
        assert path.read_bytes() == path2.read_bytes()
        for a, b in zip(ds.records, loaded):
            assert a.shot_id == b.shot_id
            assert a.label == b.label
            assert np.array_equal(a.samples, b.samples)

    def test_standardized_round_trip(self, tmp_path):
        # ingest -> standardize -> serialize -> ingest reproduces the
        # serialized form exactly.
        ds = generate_synthetic(SyntheticSpec(n_records=4, anomaly_fraction=0.0, t_range=(300, 350)))
        standardized = [standardize(r) for r in ds.records]
        path = tmp_path / "s.jsonl"
        write_manifest(standardized, path)
        again = read_manifest(path)
        path2 = tmp_path / "s2.jsonl"
        write_manifest(again, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_missing_fields_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"shot_id": 1, "dt": 0.1}\n')
        with pytest.raises(ParseError, match="missing fields"):
            read_manifest(path)


class TestRecordValidation:
    def test_nan_rejected(self):
        with pytest.raises(ValidationError, match="NaN"):
            DischargeRecord(1, "a", 0.1, np.array([1.0, np.nan]), 1)

    def test_bad_label_rejected(self):
        with pytest.raises(ValidationError, match="label"):
            DischargeRecord(1, "a", 0.1, np.array([1.0, 2.0]), 2)

    def test_bad_dt_rejected(self):
        with pytest.raises(ValidationError, match="dt"):
            DischargeRecord(1, "a", 0.0, np.array([1.0, 2.0]), 1)
