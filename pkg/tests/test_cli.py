"""Config ingestion, report emission, exit codes, determinism."""

import json

import pytest
import yaml

from jetcontact.cli import (
    ConfigError,
    EXIT_INPUT_ERROR,
    EXIT_REFUTED,
    EXIT_VERIFIED,
    build_config,
    main,
    run,
)

FOCK_PAIR = {
    "bundles": [
        {"label": "a", "dimension": 2, "gram": [["exp(z1*zb1 + z2*zb2)"]]},
        {"label": "b", "dimension": 2, "gram": [["exp(z1*zb1 + z2*zb2)"]]},
    ]
}


def write_config(tmp_path, payload, name="run.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(payload), encoding="utf-8")
    return str(path)


class TestConfig:
    def test_minimal_along_z(self):
        cfg = build_config(
            {"task": "along-z", "order": 2, "points": [[0.0, 0.1]], **FOCK_PAIR}
        )
        assert cfg.order == 2
        assert cfg.points == [(0j, 0.1 + 0j)]

    def test_unknown_task(self):
        with pytest.raises(ConfigError, match="task"):
            build_config({"task": "frobnicate"})

    def test_missing_points(self):
        with pytest.raises(ConfigError, match="points"):
            build_config({"task": "pointwise", "order": 1, **FOCK_PAIR})

    def test_complex_point_formats(self):
        cfg = build_config(
            {
                "task": "pointwise",
                "order": 1,
                "points": [[0.5, "0.1+0.2i"], [[0.0, 0.0], 0.3]],
                **FOCK_PAIR,
            }
        )
        assert cfg.points[0][1] == pytest.approx(0.1 + 0.2j)
        assert cfg.points[1][0] == 0.0

    def test_off_slice_point_rejected(self):
        with pytest.raises(ConfigError, match="z1"):
            build_config(
                {"task": "along-z", "order": 1, "points": [[0.2, 0.0]], **FOCK_PAIR}
            )

    def test_grid_expansion(self):
        cfg = build_config(
            {
                "task": "along-z",
                "order": 1,
                "grid": {"z2": {"re": [-0.2, 0.2], "count_re": 5}},
                **FOCK_PAIR,
            }
        )
        assert len(cfg.points) == 5
        assert all(p[0] == 0.0 for p in cfg.points)

    def test_bad_expression_located(self):
        with pytest.raises(ConfigError, match="bundles\\[0\\]"):
            build_config(
                {
                    "task": "curvature",
                    "order": 1,
                    "points": [[0.0]],
                    "bundles": [{"label": "x", "dimension": 1, "gram": [["1 +* z1"]]}],
                }
            )

    def test_env_var_default_tolerance(self, monkeypatch):
        monkeypatch.setenv("JETCONTACT_TOLERANCE", "1e-6")
        cfg = build_config(
            {"task": "pointwise", "order": 1, "points": [[0.0, 0.0]], **FOCK_PAIR}
        )
        assert cfg.tolerance == 1e-6


class TestRun:
    def test_identical_bundles_verified(self):
        cfg = build_config(
            {"task": "along-z", "order": 2, "points": [[0.0, 0.1]], **FOCK_PAIR}
        )
        doc = run(cfg)
        assert doc["verdict"] == "verified"
        assert doc["exit_code"] == EXIT_VERIFIED
        assert doc["schema_version"] == "1"
        residuals = doc["results"]["points"][0]["residuals"]
        assert max(residuals.values()) < 1e-12

    def test_bergman_mismatch_refuted(self):
        cfg = build_config(
            {
                "task": "pointwise",
                "order": 1,
                "points": [[0.0]],
                "candidate": "1",
                "bundles": [
                    {"label": "b1", "dimension": 1, "gram": [["pow(1 - z1*zb1, -1)"]]},
                    {"label": "b2", "dimension": 1, "gram": [["pow(1 - z1*zb1, -2)"]]},
                ],
            }
        )
        doc = run(cfg)
        assert doc["verdict"] == "refuted"
        assert doc["exit_code"] == EXIT_REFUTED

    def test_appendix_task(self):
        cfg = build_config({"task": "verify-appendix", "appendix_bound": 5, "seed": 3})
        doc = run(cfg)
        assert doc["verdict"] == "verified"
        assert all(c["passed"] for c in doc["results"]["checks"])

    def test_rkhs_task(self):
        cfg = build_config(
            {
                "task": "rkhs-quotient",
                "order": 2,
                "points": [[0.0]],
                "bundles": [
                    {"label": "hardy", "dimension": 1, "gram": [["pow(1 - z1*zb1, -1)"]]},
                    {"label": "fock", "dimension": 1, "gram": [["exp(z1*zb1)"]]},
                ],
            }
        )
        doc = run(cfg)
        assert doc["verdict"] == "refuted"
        assert doc["results"]["agreement"] is True

    def test_recursions_task(self):
        cfg = build_config(
            {
                "task": "verify-recursions",
                "order": 2,
                "points": [[0.1, -0.2]],
                "tolerance": 1e-9,
                "bundles": [
                    {
                        "label": "c",
                        "dimension": 2,
                        "gram": [["exp(z1*zb1 + 0.5*z2*zb2) + 0.2*z1*z2*zb1*zb2"]],
                    }
                ],
            }
        )
        doc = run(cfg)
        assert doc["verdict"] == "verified"

    def test_curvature_task_values(self):
        cfg = build_config(
            {
                "task": "curvature",
                "order": 1,
                "points": [[0.0]],
                "bundles": [
                    {"label": "b3", "dimension": 1, "gram": [["pow(1 - z1*zb1, -3)"]]}
                ],
            }
        )
        doc = run(cfg)
        assert doc["verdict"] == "completed"
        k = doc["results"]["points"][0]["curvature"]["K(1,1bar)"]
        assert k[0][0][0] == pytest.approx(3.0)

    def test_determinism(self):
        payload = {
            "task": "rkhs-quotient",
            "order": 2,
            "seed": 9,
            "points": [[0.0]],
            "bundles": [
                {"label": "hardy", "dimension": 1, "gram": [["pow(1 - z1*zb1, -1)"]]},
                {"label": "fock", "dimension": 1, "gram": [["exp(z1*zb1)"]]},
            ],
        }
        a = json.dumps(run(build_config(payload)), sort_keys=True)
        b = json.dumps(run(build_config(payload)), sort_keys=True)
        assert a == b


class TestShippedConfigs:
    CONFIG_CODES = [
        ("alongz-fock-pair.yaml", EXIT_VERIFIED),
        ("pointwise-bergman-weights.yaml", EXIT_REFUTED),
        ("rkhs-hardy-vs-fock.yaml", EXIT_REFUTED),
        ("verify-appendix.yaml", EXIT_VERIFIED),
        ("curvature-bergman3.yaml", EXIT_VERIFIED),
    ]

    @pytest.mark.parametrize("name,expected", CONFIG_CODES)
    def test_sample_config(self, name, expected, tmp_path):
        import pathlib

        config = pathlib.Path(__file__).resolve().parent.parent / "configs" / name
        out = tmp_path / "report.json"
        assert main(["--config", str(config), "--out", str(out)]) == expected
        assert json.loads(out.read_text())["schema_version"] == "1"


class TestMain:
    def test_end_to_end_report_file(self, tmp_path):
        path = write_config(
            tmp_path,
            {"task": "along-z", "order": 1, "points": [[0.0, 0.1]], **FOCK_PAIR},
        )
        out = tmp_path / "report.json"
        code = main(["--config", path, "--out", str(out)])
        assert code == EXIT_VERIFIED
        doc = json.loads(out.read_text())
        assert doc["verdict"] == "verified"
        assert doc["tool"]["name"] == "jetcontact"

    def test_overrides(self, tmp_path):
        path = write_config(
            tmp_path,
            {
                "task": "rkhs-quotient",
                "order": 1,
                "points": [[0.0]],
                "bundles": [
                    {"label": "hardy", "dimension": 1, "gram": [["pow(1 - z1*zb1, -1)"]]},
                    {"label": "fock", "dimension": 1, "gram": [["exp(z1*zb1)"]]},
                ],
            },
        )
        out = tmp_path / "r.json"
        assert main(["--config", path, "--out", str(out)]) == EXIT_VERIFIED
        assert main(["--config", path, "--order", "2", "--out", str(out)]) == EXIT_REFUTED

    def test_missing_config_is_input_error(self, tmp_path):
        assert main(["--config", str(tmp_path / "nope.yaml")]) == EXIT_INPUT_ERROR

    def test_invalid_yaml_is_input_error(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("task: [unclosed", encoding="utf-8")
        assert main(["--config", str(path)]) == EXIT_INPUT_ERROR

    def test_singular_center_is_input_error(self, tmp_path):
        path = write_config(
            tmp_path,
            {
                "task": "curvature",
                "order": 1,
                "points": [[1.0]],
                "bundles": [
                    {"label": "b", "dimension": 1, "gram": [["pow(1 - z1*zb1, -1)"]]}
                ],
            },
        )
        assert main(["--config", path]) == EXIT_INPUT_ERROR

    def test_byte_identical_reports(self, tmp_path):
        path = write_config(
            tmp_path,
            {
                "task": "verify-appendix",
                "appendix_bound": 4,
                "seed": 21,
            },
        )
        out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
        main(["--config", path, "--out", str(out1)])
        main(["--config", path, "--out", str(out2)])
        assert out1.read_bytes() == out2.read_bytes()
