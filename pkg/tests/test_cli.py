import json
import math
import os

import pytest

from peakstop import cli
from peakstop.cli import ConfigError, load_config, main, parse_config, validate_report


def write_config(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


BERNOULLI = {"lattice": {"h": 1.0, "atoms": [[1, 0.6], [-1, 0.4]]}}
BM = {"levy": {"gamma": 0.0, "sigma2": 1.0}}


class TestConfigParsing:
    def test_verify_roundtrip(self, tmp_path):
        cfg = load_config(
            write_config(
                tmp_path,
                {"task": "verify", "model": BERNOULLI, "reward": {"kind": "indicator0"},
                 "horizon": 10},
            )
        )
        assert cfg.task == "verify" and cfg.model_kind == "lattice"
        assert cfg.horizon == 10

    def test_rational_masses(self, tmp_path):
        cfg = load_config(
            write_config(
                tmp_path,
                {"task": "classify",
                 "model": {"lattice": {"h": 1, "atoms": [[3, "1/3"], [-1, "2/3"]]}},
                 "horizon": 2},
            )
        )
        assert cfg.model.is_exact()

    def test_levy_pieces(self, tmp_path):
        cfg = load_config(
            write_config(
                tmp_path,
                {"task": "classify",
                 "model": {"levy": {"gamma": 3.0, "sigma2": 0.0, "nu": {"pieces": [
                     {"interval": [0, None], "form": "power", "c": 2.0, "alpha": 0.5},
                     {"interval": ["-inf", 0], "form": "power", "c": 1.0, "alpha": 0.5},
                 ]}}},
                 "horizon": 1.0},
            )
        )
        assert not cfg.model.nu.is_finite()

    def test_json_error_carries_line(self, tmp_path):
        p = tmp_path / "broken.json"
        p.write_text('{"task": "verify",\n  "model": }')
        with pytest.raises(ConfigError, match=r":2:"):
            load_config(str(p))

    def test_unknown_task(self):
        with pytest.raises(ConfigError, match="task"):
            parse_config({"task": "dance", "model": BERNOULLI, "horizon": 1})

    def test_solve_rejects_levy_model(self):
        with pytest.raises(ConfigError, match="lattice"):
            parse_config({"task": "solve", "model": BM, "horizon": 1.0})

    def test_stochastic_task_needs_seed(self):
        with pytest.raises(ConfigError, match="seed"):
            parse_config({"task": "battery", "model": BM,
                          "reward": {"kind": "exponential"}, "horizon": 1.0})

    def test_bad_reward_kind(self):
        with pytest.raises(ConfigError, match="reward"):
            parse_config({"task": "verify", "model": BERNOULLI, "horizon": 5,
                          "reward": {"kind": "cubic"}})

    def test_lattice_horizon_must_be_integer(self):
        with pytest.raises(ConfigError, match="horizon"):
            parse_config({"task": "verify", "model": BERNOULLI, "horizon": 5.5})


class TestTasks:
    def test_verify_pass(self, tmp_path):
        code = main([
            "verify", "--config",
            write_config(tmp_path, {"task": "verify", "model": BERNOULLI,
                                    "reward": {"kind": "indicator0"}, "horizon": 8}),
            "--out", str(tmp_path / "out"), "--quiet",
        ])
        assert code == 0
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        validate_report(report)
        assert report["report"]["designated_rule"] == "stop_at_end"

    def test_solve_outputs(self, tmp_path):
        code = main([
            "solve", "--config",
            write_config(tmp_path, {"task": "solve", "model": BERNOULLI,
                                    "reward": {"kind": "indicator0"}, "horizon": 6}),
            "--out", str(tmp_path / "out"), "--quiet",
        ])
        assert code == 0
        out = tmp_path / "out"
        assert (out / "value_table.csv").exists()
        assert (out / "value_heatmap.svg").exists()
        assert (out / "stop_region.svg").exists()
        header = (out / "value_table.csv").read_text().splitlines()[0]
        assert header == "n,z,V,stop"

    def test_classify_neither_walk(self, tmp_path):
        code = main([
            "classify", "--config",
            write_config(tmp_path, {
                "task": "classify",
                "model": {"lattice": {"h": 1, "atoms": [[3, "1/3"], [-1, "2/3"]]}},
                "horizon": 2,
            }),
            "--out", str(tmp_path / "out"), "--quiet",
        ])
        assert code == 0
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["classification"]["skew"] == "neither"

    def test_classify_stable_reports_limit(self, tmp_path):
        code = main([
            "classify", "--config",
            write_config(tmp_path, {
                "task": "classify",
                "model": {"levy": {"gamma": 3.0, "sigma2": 0.0, "nu": {"pieces": [
                    {"interval": [0, None], "form": "power", "c": 2.0, "alpha": 0.5},
                    {"interval": [None, 0], "form": "power", "c": 1.0, "alpha": 0.5},
                ]}}},
                "horizon": 1.0,
            }),
            "--out", str(tmp_path / "out"), "--quiet",
        ])
        assert code == 0
        cls = json.loads((tmp_path / "out" / "report.json").read_text())["classification"]
        assert cls["srss"] and cls["L"] == pytest.approx(2.0)

    def test_suite_csv_columns(self, tmp_path):
        code = main([
            "suite", "--config",
            write_config(tmp_path, {"task": "suite", "model": BERNOULLI,
                                    "reward": {"kind": "indicator0"}, "horizon": 6,
                                    "z_levels": [0, 1, 2], "reversal_n": 4}),
            "--out", str(tmp_path / "out"), "--quiet",
        ])
        assert code == 0
        lines = (tmp_path / "out" / "dominance.csv").read_text().splitlines()
        assert lines[0] == "k,z,G,D,slack"
        assert (tmp_path / "out" / "coupling.csv").read_text().splitlines()[0] == \
            "step,dual_step,p"

    def test_battery_task(self, tmp_path):
        code = main([
            "battery", "--config",
            write_config(tmp_path, {
                "task": "battery", "model": BERNOULLI,
                "reward": {"kind": "indicator0"}, "horizon": 6,
                "seed": 11, "paths": 2000,
            }),
            "--out", str(tmp_path / "out"), "--quiet",
        ])
        assert code == 0
        assert (tmp_path / "out" / "battery.svg").exists()
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert len(report["battery"]["rows"]) == 12

    def test_reversal_lattice_exact(self, tmp_path):
        code = main([
            "reversal", "--config",
            write_config(tmp_path, {"task": "reversal", "model": BERNOULLI,
                                    "horizon": 5, "reversal_n": 6}),
            "--out", str(tmp_path / "out"), "--quiet",
        ])
        assert code == 0

    def test_simulate_lattice_paths_csv(self, tmp_path):
        code = main([
            "simulate", "--config",
            write_config(tmp_path, {"task": "simulate", "model": BERNOULLI,
                                    "horizon": 6, "seed": 3, "paths": 200,
                                    "dump_paths": 2}),
            "--out", str(tmp_path / "out"), "--quiet",
        ])
        assert code == 0
        lines = (tmp_path / "out" / "paths.csv").read_text().splitlines()
        assert lines[0] == "path,t,X,M"
        assert len(lines) == 1 + 2 * 7

    def test_seed_override(self, tmp_path):
        cfgp = write_config(tmp_path, {
            "task": "battery", "model": BERNOULLI,
            "reward": {"kind": "indicator0"}, "horizon": 6,
            "seed": 11, "paths": 2000,
        })
        main(["battery", "--config", cfgp, "--out", str(tmp_path / "a"),
              "--seed", "99", "--quiet"])
        report = json.loads((tmp_path / "a" / "report.json").read_text())
        assert report["seed"] == 99


class TestExitCodes:
    def test_config_error_is_2(self, tmp_path):
        assert main([
            "solve", "--config",
            write_config(tmp_path, {"task": "solve", "model": BM, "horizon": 1.0}),
            "--out", str(tmp_path / "out"), "--quiet",
        ]) == 2

    def test_task_mismatch_is_2(self, tmp_path):
        assert main([
            "verify", "--config",
            write_config(tmp_path, {"task": "solve", "model": BERNOULLI, "horizon": 3}),
            "--out", str(tmp_path / "out"), "--quiet",
        ]) == 2

    def test_precondition_maps_to_2(self, tmp_path):
        # neither-skew walk has no designated trivial rule to verify
        assert main([
            "verify", "--config",
            write_config(tmp_path, {
                "task": "verify",
                "model": {"lattice": {"h": 1, "atoms": [[3, "1/3"], [-1, "2/3"]]}},
                "reward": {"kind": "indicator0"}, "horizon": 4,
            }),
            "--out", str(tmp_path / "out"), "--quiet",
        ]) == 2

    def test_resource_guard_is_3(self, tmp_path):
        assert main([
            "battery", "--config",
            write_config(tmp_path, {
                "task": "battery",
                "model": {"levy": {"gamma": 0.0, "sigma2": 0.0, "nu": {"pieces": [
                    {"interval": [0, None], "form": "power", "c": 1.0, "alpha": 1.5},
                    {"interval": [None, 0], "form": "power", "c": 1.0, "alpha": 1.5},
                ]}}},
                "reward": {"kind": "exponential"},
                "horizon": 1.0, "seed": 5, "paths": 200,
                "scheme": {"mode": "truncated", "level": 6, "eps_seed": 0.5},
            }),
            "--out", str(tmp_path / "out"), "--quiet",
        ]) == 3


class TestDeterminism:
    def test_battery_outputs_byte_identical(self, tmp_path):
        cfgp = write_config(tmp_path, {
            "task": "battery", "model": BERNOULLI,
            "reward": {"kind": "indicator0"}, "horizon": 6,
            "seed": 11, "paths": 2000,
        })
        main(["battery", "--config", cfgp, "--out", str(tmp_path / "a"), "--quiet"])
        main(["battery", "--config", cfgp, "--out", str(tmp_path / "b"), "--quiet"])
        for name in ("report.json", "battery.csv", "battery.svg"):
            assert (tmp_path / "a" / name).read_bytes() == (
                tmp_path / "b" / name
            ).read_bytes()

    def test_simulate_levy_byte_identical(self, tmp_path):
        cfgp = write_config(tmp_path, {
            "task": "simulate", "model": BM, "horizon": 1.0,
            "seed": 4, "paths": 300, "dump_paths": 2,
            "scheme": {"dt": 0.05},
        })
        main(["simulate", "--config", cfgp, "--out", str(tmp_path / "a"), "--quiet"])
        main(["simulate", "--config", cfgp, "--out", str(tmp_path / "b"), "--quiet"])
        for name in ("report.json", "paths.csv", "path.svg"):
            assert (tmp_path / "a" / name).read_bytes() == (
                tmp_path / "b" / name
            ).read_bytes()


class TestReportValidation:
    def test_missing_key_detected(self):
        with pytest.raises(ConfigError):
            validate_report({"task": "verify", "passed": True})

    def test_boolean_passed_required(self):
        with pytest.raises(ConfigError):
            validate_report({"task": "classify", "passed": "yes",
                             "classification": {}})

    def test_bundled_configs_parse(self):
        cfg_dir = os.path.join(os.path.dirname(__file__), "..", "configs")
        names = sorted(os.listdir(cfg_dir))
        assert names, "bundled configs missing"
        for name in names:
            load_config(os.path.join(cfg_dir, name))
