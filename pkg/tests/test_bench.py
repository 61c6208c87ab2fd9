import json
import math

import pytest
import yaml

from advice_learn.bench import (
    RESULT_COLUMNS,
    SCHEMA_VERSION,
    ConfigError,
    Constants,
    SweepSpec,
    calibrate_tester,
    generate_instances,
    load_config,
    read_result_rows,
    result_hash,
    rows_hash,
    run_sweep,
    write_csv,
    write_jsonl,
)


def config_mapping(**overrides):
    raw = {
        "sweep": {
            "dims": [8],
            "epsilons": [0.3],
            "etas": [0.1],
            "taus": [0.25],
            "delta": 0.2,
            "trials": 2,
            "seed": 3,
            "advice": [
                {"kind": "exact"},
                {"kind": "sparse", "coords": 2, "magnitude": 0.1},
            ],
        }
    }
    raw.update(overrides)
    return raw


def write_config(tmp_path, raw, name="sweep.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(raw))
    return str(path)


class TestConfigLoading:
    def test_valid_config(self, tmp_path):
        spec = load_config(write_config(tmp_path, config_mapping()))
        assert spec.dims == (8,)
        assert spec.trials == 2
        assert spec.constants == Constants()
        assert len(spec.grid()) == 2

    def test_grid_is_cross_product(self, tmp_path):
        raw = config_mapping()
        raw["sweep"]["dims"] = [8, 12]
        raw["sweep"]["epsilons"] = [0.3, 0.4, 0.5]
        spec = load_config(write_config(tmp_path, raw))
        assert len(spec.grid()) == 2 * 3 * 1 * 1 * 2

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="not found"):
            load_config("/nonexistent/sweep.yaml")

    def test_invalid_yaml(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("sweep: [unclosed")
        with pytest.raises(ConfigError, match="YAML"):
            load_config(str(path))

    def test_missing_sweep_section(self, tmp_path):
        with pytest.raises(ConfigError, match="sweep"):
            load_config(write_config(tmp_path, {"constants": {}}))

    def test_field_paths_in_errors(self, tmp_path):
        raw = config_mapping()
        raw["sweep"]["taus"] = [0.7]
        with pytest.raises(ConfigError, match=r"sweep\.taus\[0\]"):
            load_config(write_config(tmp_path, raw))
        exc = None
        try:
            load_config(write_config(tmp_path, raw))
        except ConfigError as e:
            exc = e
        assert exc.field == "sweep.taus[0]"

    def test_advice_kind_validated(self, tmp_path):
        raw = config_mapping()
        raw["sweep"]["advice"] = [{"kind": "psychic"}]
        with pytest.raises(ConfigError, match=r"advice\[0\]\.kind"):
            load_config(write_config(tmp_path, raw))

    def test_sparse_coords_vs_dim(self, tmp_path):
        raw = config_mapping()
        raw["sweep"]["advice"] = [{"kind": "sparse", "coords": 9, "magnitude": 0.1}]
        with pytest.raises(ConfigError, match="exceeds smallest dim"):
            load_config(write_config(tmp_path, raw))

    def test_balanced_adversary_lam_floor(self, tmp_path):
        raw = config_mapping()
        raw["sweep"]["dims"] = [20_000]
        raw["sweep"]["advice"] = [
            {"kind": "adversarial", "family": "balanced", "epsilon": 0.1, "lam": 5.0}
        ]
        with pytest.raises(ConfigError, match="100"):
            load_config(write_config(tmp_path, raw))

    def test_unknown_constant_rejected(self, tmp_path):
        raw = config_mapping(constants={"warp_factor": 9})
        with pytest.raises(ConfigError, match="warp_factor"):
            load_config(write_config(tmp_path, raw))

    def test_constant_ranges(self, tmp_path):
        raw = config_mapping(constants={"threshold_factor": 3.2})
        with pytest.raises(ConfigError, match="threshold_factor"):
            load_config(write_config(tmp_path, raw))

    def test_schedule_feasibility(self, tmp_path):
        # at d = 1 the ladder base already reaches the ceiling
        raw = config_mapping()
        raw["sweep"]["dims"] = [1]
        raw["sweep"]["advice"] = [{"kind": "exact"}]
        with pytest.raises(ConfigError, match="infeasible"):
            load_config(write_config(tmp_path, raw))


class TestSweep:
    def _spec(self, tmp_path, **kw):
        return load_config(write_config(tmp_path, config_mapping(**kw)))

    def test_row_count_and_order(self, tmp_path):
        spec = self._spec(tmp_path)
        rows = run_sweep(spec)
        assert len(rows) == 4
        assert [(r["grid_index"], r["trial"]) for r in rows] == [
            (0, 0),
            (0, 1),
            (1, 0),
            (1, 1),
        ]

    def test_rows_carry_all_columns(self, tmp_path):
        rows = run_sweep(self._spec(tmp_path))
        for row in rows:
            assert set(RESULT_COLUMNS) <= set(row)
            assert row["schema_version"] == SCHEMA_VERSION
            assert row["master_seed"] == 3
            assert row["d"] == 8
            assert row["realized_tv"] is not None  # d <= 24 enumerates TV

    def test_exact_advice_row_semantics(self, tmp_path):
        rows = run_sweep(self._spec(tmp_path))
        exact = [r for r in rows if r["advice_kind"] == "exact"]
        assert len(exact) == 2
        for row in exact:
            assert row["true_l1"] == 0.0
            assert row["samples_total"] == row["samples_stage1"] + row["samples_stage2"]

    def test_workers_do_not_change_results(self, tmp_path):
        spec = self._spec(tmp_path)
        serial = run_sweep(spec, workers=1)
        parallel = run_sweep(spec, workers=3)
        assert rows_hash(serial) == rows_hash(parallel)

    def test_seed_changes_results(self, tmp_path):
        raw = config_mapping()
        spec_a = load_config(write_config(tmp_path, raw, "a.yaml"))
        raw["sweep"]["seed"] = 4
        spec_b = load_config(write_config(tmp_path, raw, "b.yaml"))
        assert rows_hash(run_sweep(spec_a)) != rows_hash(run_sweep(spec_b))

    def test_corner_advice_is_far(self, tmp_path):
        raw = config_mapping()
        raw["sweep"]["advice"] = [{"kind": "corner"}]
        rows = run_sweep(load_config(write_config(tmp_path, raw)))
        for row in rows:
            # every coordinate of the corner is at least 0.5 from balanced p
            assert row["true_l1"] >= 0.5 * 8

    def test_dense_advice_l1_budget(self, tmp_path):
        raw = config_mapping()
        raw["sweep"]["advice"] = [{"kind": "dense", "l1_budget": 0.8}]
        rows = run_sweep(load_config(write_config(tmp_path, raw)))
        for row in rows:
            assert row["true_l1"] == pytest.approx(0.8, abs=1e-9)

    def test_adversarial_unbalanced_l1(self, tmp_path):
        raw = config_mapping()
        raw["sweep"]["dims"] = [40]
        raw["sweep"]["advice"] = [
            {"kind": "adversarial", "family": "unbalanced", "epsilon": 0.5, "subset_size": 8}
        ]
        rows = run_sweep(load_config(write_config(tmp_path, raw)))
        for row in rows:
            assert row["true_l1"] == pytest.approx(8 * 0.5 / 40, rel=1e-12)


class TestPersistence:
    def _rows(self, tmp_path):
        return run_sweep(load_config(write_config(tmp_path, config_mapping())))

    def test_csv_roundtrip(self, tmp_path):
        rows = self._rows(tmp_path)
        path = str(tmp_path / "out.csv")
        write_csv(rows, path)
        back = read_result_rows(path)
        assert len(back) == len(rows)
        assert list(back[0].keys()) == list(RESULT_COLUMNS)
        assert back[0]["branch"] == rows[0]["branch"]
        assert back[2]["advice_kind"] == "sparse"

    def test_jsonl_lines(self, tmp_path):
        rows = self._rows(tmp_path)
        path = str(tmp_path / "out.jsonl")
        write_jsonl(rows, path)
        lines = open(path).read().splitlines()
        assert len(lines) == len(rows)
        parsed = json.loads(lines[0])
        assert list(parsed.keys()) == list(RESULT_COLUMNS)
        assert parsed["d"] == 8

    def test_hash_ignores_duration(self, tmp_path):
        rows = self._rows(tmp_path)
        base = rows_hash(rows)
        mutated = [dict(r) for r in rows]
        mutated[0]["duration_s"] = 1e9
        assert rows_hash(mutated) == base
        mutated[0]["samples_total"] += 1
        assert rows_hash(mutated) != base

    def test_file_hash_matches_row_hash(self, tmp_path):
        rows = self._rows(tmp_path)
        path = str(tmp_path / "out.csv")
        write_csv(rows, path)
        assert result_hash(path) == rows_hash(rows)

    def test_booleans_and_none_serialize_stably(self, tmp_path):
        rows = self._rows(tmp_path)
        path = str(tmp_path / "out.csv")
        write_csv(rows, path)
        back = read_result_rows(path)
        assert back[0]["advice_returned"] in ("true", "false")
        assert back[0]["lambda_hat"] != "None"


class TestCalibration:
    def test_report_structure_and_recommendation(self):
        report = calibrate_tester(64, 0.25, trials=100, seed=5, c_values=(0.5, 1.0))
        assert report.distances == (0.0, 0.25, 0.5, 0.75)
        assert [row["c"] for row in report.rows] == [0.5, 1.0]
        for row in report.rows:
            assert len(row["accept_rates"]) == 4
            assert all(0.0 <= r <= 1.0 for r in row["accept_rates"])
        # recommendation is the smallest c meeting the 1/4 error budget at
        # both decision boundaries, judged from the measured rates
        expected = None
        for row in report.rows:
            r0, _, r2, _ = row["accept_rates"]
            if 1.0 - r0 <= 0.25 and r2 <= 0.25:
                expected = row["c"]
                break
        assert report.recommended_c == expected
        assert expected is not None

    def test_rates_fall_with_distance_at_default_c(self):
        report = calibrate_tester(64, 0.25, trials=100, seed=6, c_values=(1.0,))
        r0, _, r2, r3 = report.rows[0]["accept_rates"]
        assert r0 >= 0.75
        assert r2 <= 0.25
        assert r3 <= r0

    def test_trials_floor(self):
        with pytest.raises(ValueError, match="100"):
            calibrate_tester(64, 0.25, trials=99, seed=0)

    def test_unrealizable_distances(self):
        with pytest.raises(ValueError, match="realizable"):
            calibrate_tester(4, 1.5, trials=100, seed=0)


class TestInstanceGeneration:
    def test_unbalanced_payload(self):
        payload = generate_instances(
            "unbalanced", d=40, seed=1, epsilon=0.5, subset_size=8, m_sets=3, min_symdiff=4
        )
        assert payload["family"] == "unbalanced"
        assert len(payload["sets"]) == 3
        assert len(payload["pairs"]) == 3
        for pair in payload["pairs"]:
            assert len(pair["p"]) == 40
            assert pair["true_l1"] == pytest.approx(8 * 0.5 / 40, rel=1e-12)

    def test_balanced_payload(self):
        payload = generate_instances("balanced", d=10_500, seed=2, epsilon=0.1, lam=10.0)
        assert payload["subset_size"] == math.ceil(100 / 0.01)
        assert payload["pairs"][0]["true_l1"] == pytest.approx(10.0, abs=1e-9)

    def test_family_argument_requirements(self):
        with pytest.raises(ValueError, match="subset_size"):
            generate_instances("unbalanced", d=40, seed=0, epsilon=0.5)
        with pytest.raises(ValueError, match="lam"):
            generate_instances("balanced", d=10_500, seed=0, epsilon=0.1)
        with pytest.raises(ValueError, match="unknown family"):
            generate_instances("spooky", d=40, seed=0, epsilon=0.5)
