import json

import numpy as np
import pytest

from fedhip import client as fc
from fedhip import data as fd
from fedhip import harness
from fedhip.errors import ConfigError


def synth_cfg(**kw):
    base = dict(
        client_count=6,
        alpha=10.0,
        beta=1.0,
        seed=3,
        concentration=0.1,
        synth=fd.SynthSpec(4, 8, 60, 5.0, 1.0, 3),
    )
    base.update(kw)
    return harness.ExperimentConfig(**base)


def strip_timings(report):
    doc = report.to_dict()
    doc.pop("timings")
    return json.dumps(doc, sort_keys=True)


class TestMessageCodec:
    def test_round_trip(self):
        rng = np.random.default_rng(0)
        square = rng.standard_normal((5, 5))
        tall = rng.standard_normal((5, 3))
        back_square, back_tall = harness.unpack_matrix_pair(
            harness.pack_matrix_pair(square, tall)
        )
        np.testing.assert_array_equal(
            back_square, square.astype(np.float32).astype(np.float64)
        )
        np.testing.assert_array_equal(
            back_tall, tall.astype(np.float32).astype(np.float64)
        )

    def test_predicted_size_is_exact(self, tmp_path):
        for m, d in [(4, 2), (7, 3), (32, 10)]:
            payload = harness.pack_matrix_pair(np.eye(m), np.zeros((m, d)))
            assert len(payload) == harness.predicted_message_bytes(m, d)
            path = tmp_path / f"msg_{m}_{d}.bin"
            path.write_bytes(payload)
            assert path.stat().st_size == 16 + 4 * (m * m + m * d)

    def test_m4_d2_payload_is_96_bytes(self):
        payload = harness.pack_matrix_pair(np.eye(4), np.zeros((4, 2)))
        assert len(payload) - harness.MESSAGE_HEADER_BYTES == 96

    def test_garbage_rejected(self):
        with pytest.raises(ConfigError):
            harness.unpack_matrix_pair(b"nonsense")


class TestConfigValidation:
    def test_requires_exactly_one_source(self):
        with pytest.raises(ConfigError):
            harness.ExperimentConfig(client_count=2, alpha=0.0, beta=1.0, seed=0)
        with pytest.raises(ConfigError):
            harness.ExperimentConfig(
                client_count=2, alpha=0.0, beta=1.0, seed=0,
                bundles_dir="x", synth=fd.SynthSpec(2, 4, 10, 1.0, 1.0, 0),
            )

    def test_beta_zero_needs_flag(self):
        with pytest.raises(ConfigError):
            synth_cfg(beta=0.0)
        cfg = synth_cfg(beta=0.0, allow_beta_zero=True)
        assert cfg.beta == 0.0

    def test_negative_alpha_rejected(self):
        with pytest.raises(ConfigError):
            synth_cfg(alpha=-1.0)

    def test_bad_split_ratio(self):
        with pytest.raises(ConfigError):
            synth_cfg(split_ratio=1.0)


class TestRunExperiment:
    def test_single_client_alpha_zero_collapses_to_local_model(self):
        cfg = synth_cfg(client_count=1, alpha=0.0, concentration=1.0)
        report = harness.run_experiment(cfg)

        ds = fd.synth_features(cfg.synth)
        part = fd.dirichlet_partition(ds, 1, cfg.concentration, seed=cfg.seed)
        part = fd.train_test_split(part, cfg.split_ratio, seed=cfg.seed + 1)
        bundle = fd.train_bundle(ds, part, 0)
        art = fc.local_train(bundle, cfg.beta)
        features, labels = fd.test_arrays(ds, part, 0)
        local_acc = fc.accuracy(fc.predict(art.model, features), labels)
        assert report.per_client[0]["acc_personalized"] == local_acc

    def test_deterministic_modulo_wall_clock(self):
        a = harness.run_experiment(synth_cfg())
        b = harness.run_experiment(synth_cfg())
        assert strip_timings(a) == strip_timings(b)

    def test_parallelism_is_bitwise_invariant(self):
        serial = harness.run_experiment(synth_cfg(jobs=1)).to_dict()
        threaded = harness.run_experiment(synth_cfg(jobs=4)).to_dict()
        for doc in (serial, threaded):
            doc.pop("timings")
            doc["config"].pop("jobs")
        assert json.dumps(serial, sort_keys=True) == json.dumps(
            threaded, sort_keys=True
        )

    def test_single_round_message_counts_and_bytes(self):
        cfg = synth_cfg()
        report = harness.run_experiment(cfg)
        assert report.messages == {"uplinks": 6, "downlinks": 6}
        m, d = report.feature_dim, report.class_count
        expected = harness.MESSAGE_HEADER_BYTES + 4 * (m * m + m * d)
        for entry in report.per_client:
            assert entry["uplink_bytes"] == expected
            assert entry["downlink_bytes"] == expected

    def test_schema_validation(self):
        report = harness.run_experiment(synth_cfg())
        doc = report.to_dict()  # validates internally
        import jsonschema

        broken = dict(doc)
        broken.pop("per_client")
        with pytest.raises(jsonschema.ValidationError):
            jsonschema.validate(broken, harness.REPORT_SCHEMA)

    def test_mean_is_arithmetic_mean(self):
        report = harness.run_experiment(synth_cfg())
        accs = [c["acc_personalized"] for c in report.per_client]
        assert report.mean_acc_personalized == pytest.approx(np.mean(accs), abs=1e-15)

    def test_report_written_to_out_dir(self, tmp_path):
        cfg = synth_cfg(out_dir=str(tmp_path / "exp"))
        report = harness.run_experiment(cfg)
        on_disk = json.loads((tmp_path / "exp" / "report.json").read_text())
        assert on_disk == report.to_dict()

    def test_beta_zero_runs_with_full_rank_clients(self):
        # Enough samples per client that every local gram is full rank.
        cfg = synth_cfg(
            client_count=2,
            beta=0.0,
            allow_beta_zero=True,
            concentration=10.0,
            synth=fd.SynthSpec(4, 6, 120, 5.0, 1.0, 0),
        )
        report = harness.run_experiment(cfg)
        assert report.mean_acc_personalized > 0.5

    def test_bundle_dir_source(self, tmp_path):
        ds = fd.synth_features(fd.SynthSpec(3, 6, 50, 5.0, 1.0, 9))
        part = fd.dirichlet_partition(ds, 4, 0.5, seed=9)
        for k in range(4):
            idx = fd.client_indices(part, k)
            bundle = fc.FeatureBundle(
                client_id=k,
                features=ds.features[idx],
                targets=fd.one_hot(ds.labels[idx], 3),
            )
            fd.write_bundle(tmp_path / f"client_{k}.fhip", bundle)
        cfg = harness.ExperimentConfig(
            client_count=4, alpha=5.0, beta=1.0, seed=9,
            bundles_dir=str(tmp_path),
        )
        report = harness.run_experiment(cfg)
        assert report.messages == {"uplinks": 4, "downlinks": 4}
        total = sum(c["n_train"] + c["n_test"] for c in report.per_client)
        assert total == ds.sample_count

    def test_bundle_count_mismatch(self, tmp_path):
        bundle = fc.FeatureBundle(0, np.eye(3), fd.one_hot([0, 1, 2], 3))
        fd.write_bundle(tmp_path / "client_0.fhip", bundle)
        cfg = harness.ExperimentConfig(
            client_count=2, alpha=0.0, beta=1.0, seed=0,
            bundles_dir=str(tmp_path),
        )
        with pytest.raises(ConfigError):
            harness.run_experiment(cfg)


class TestSweep:
    def test_single_point_equals_run(self):
        cfg = synth_cfg()
        only = harness.sweep(cfg, alphas=[cfg.alpha])[0]
        direct = harness.run_experiment(cfg)
        assert strip_timings(only) == strip_timings(direct)

    def test_shared_partition_across_grid(self):
        reports = harness.sweep(synth_cfg(), alphas=[0.0, 5.0, 50.0])
        sizes = [
            tuple(c["n_train"] for c in rep.per_client) for rep in reports
        ]
        assert len(set(sizes)) == 1

    def test_alpha_zero_point_matches_global_column(self):
        reports = harness.sweep(synth_cfg(), alphas=[0.0, 25.0])
        assert reports[0].mean_acc_personalized == reports[0].mean_acc_global

    def test_csv_format(self, tmp_path):
        cfg = synth_cfg(out_dir=str(tmp_path))
        harness.sweep(cfg, alphas=[0.0, 25.0])
        lines = (tmp_path / "sweep.csv").read_text().strip().splitlines()
        assert lines[0] == "alpha,beta,lambda,mean_acc_personalized,mean_acc_global"
        assert len(lines) == 3
        first = lines[1].split(",")
        assert float(first[0]) == 0.0 and float(first[1]) == 1.0

    def test_beta_zero_grid_needs_flag(self):
        with pytest.raises(ConfigError):
            harness.sweep(synth_cfg(), betas=[0.0, 1.0])

    def test_empty_grid(self):
        with pytest.raises(ConfigError):
            harness.sweep(synth_cfg(), alphas=[-1.0])


class TestOverheadReport:
    def test_matches_measured_run(self):
        cfg = synth_cfg()
        predicted = harness.overhead_report(cfg)
        measured = harness.run_experiment(cfg)
        for pred, meas in zip(predicted["per_client"], measured.per_client):
            assert pred["uplink_bytes"] == meas["uplink_bytes"]
            assert pred["downlink_bytes"] == meas["downlink_bytes"]
        assert predicted["server_flops_total"] == measured.overhead["server_flops"]

    def test_documented_flop_model(self):
        doc = harness.overhead_report(synth_cfg())
        assert set(doc["flop_model"]) == {
            "client_phase1",
            "client_phase3",
            "server_absorb",
            "server_derive",
        }

    def test_downlink_equals_uplink_for_all_shapes(self):
        doc = harness.overhead_report(synth_cfg())
        for entry in doc["per_client"]:
            assert entry["uplink_bytes"] == entry["downlink_bytes"]
