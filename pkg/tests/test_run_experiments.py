import argparse
import json

import numpy as np
import pandas as pd
import pytest
import yaml

from experiments.run_experiments import (
    EXIT_OK, EXIT_UNSUPPORTED, EXIT_USAGE, parse_body, parse_floats, parse_ints, run,
)
from geometry.convex_body import body_to_dict, ellipsoid
from utils.config_loader import PROJECT_ROOT
from utils.errors import DomainError


class TestParsers:

    def test_numbers(self):
        assert parse_floats("0.1, 0.2,") == [0.1, 0.2]
        assert parse_ints("100,1e3") == [100, 1000]
        with pytest.raises(argparse.ArgumentTypeError):
            parse_floats("a,b")

    def test_ball(self):
        body = parse_body("ball:0.5", 2)
        assert body.kind == "ball"
        assert body.radius == pytest.approx(0.5)
        assert np.allclose(body.center, [0.5, 0.5])

    def test_ellipsoid(self):
        body = parse_body("ellipsoid:0.2,0.1", 2)
        assert np.allclose(np.diag(body.sigma), [0.04, 0.01])
        with pytest.raises(DomainError):
            parse_body("ellipsoid:0.2", 2)

    def test_perturbed(self):
        body = parse_body("perturbed:3,0.05,0;4,0,0.02", 2)
        assert not body.symmetric
        with pytest.raises(DomainError):
            parse_body("perturbed:3,0.05", 2)

    def test_json(self, tmp_path):
        path = tmp_path / "body.json"
        path.write_text(json.dumps(body_to_dict(ellipsoid(np.diag([0.04, 0.09]), center=[0.5, 0.5]))))
        assert parse_body(f"json:{path}", 2).kind == "ellipsoid"

    def test_unknown(self):
        with pytest.raises(DomainError):
            parse_body("cube", 2)


class TestCommandLine:

    def test_cylinder(self, tmp_path):
        code = run(["cylinder", "--x", "0,0", "--alpha", "0", "--r", "0.1", "--T", "1", "--out-dir", str(tmp_path)])
        assert code == EXIT_OK
        summary = json.loads((tmp_path / "cylinder_summary.json").read_text())
        assert summary["results"]["count"] == 2
        assert summary["schema_version"] == "1.0"
        assert summary["command"] == "cylinder"

    def test_cylinder_oracle_dump(self, tmp_path):
        code = run(["cylinder", "--random", "5", "--T", "3", "--out-dir", str(tmp_path)])
        assert code == EXIT_OK
        frame = pd.read_csv(tmp_path / "cylinder_samples.csv")
        assert len(frame) == 5
        assert (frame["count"] == frame["bruteforce"]).all()

    def test_discrepancy_sample(self, tmp_path):
        code = run(["discrepancy-sample", "--N", "200", "--samples", "3", "--out-dir", str(tmp_path)])
        assert code == EXIT_OK
        frame = pd.read_csv(tmp_path / "discrepancy-sample_samples.csv")
        assert list(frame["sample_id"]) == [0, 1, 2]

    def test_limit_sample(self, tmp_path):
        code = run(["limit-sample", "--M", "2", "--P-max", "4", "--samples", "2", "--n-haar", "10000",
                    "--out-dir", str(tmp_path)])
        assert code == EXIT_OK
        summary = json.loads((tmp_path / "limit-sample_summary.json").read_text())
        assert summary["results"]["limit_config"]["variant"] == "translation_sym"
        assert set(summary["flags"]) == {"short_flags", "resampled", "skipped_terms"}

    def test_unknown_flag(self, tmp_path):
        assert run(["kesten", "--r", "0.4", "--N", "10", "--bogus", "--out-dir", str(tmp_path)]) == EXIT_USAGE

    def test_unsupported_dimension(self, tmp_path):
        code = run(["flow", "--d", "3", "--T", "10", "--samples", "2", "--out-dir", str(tmp_path)])
        assert code == EXIT_UNSUPPORTED

    def test_domain_error(self, tmp_path):
        assert run(["cylinder", "--out-dir", str(tmp_path)]) == EXIT_USAGE

    def test_missing_config(self, tmp_path):
        empty = tmp_path / "conf"
        empty.mkdir()
        assert run(["cylinder", "--x", "0,0", "--config", str(empty), "--out-dir", str(tmp_path)]) == EXIT_USAGE

    def test_cutoff_defaults_follow_the_config(self, tmp_path):
        settings = yaml.safe_load((PROJECT_ROOT / "config" / "config.yaml").read_text())
        settings["limit_law"].update({"M": 2, "P_max": 4})
        settings["sampling"]["n_haar"] = 10_000
        settings["logging"]["log_to_file"] = False
        conf = tmp_path / "conf"
        conf.mkdir()
        (conf / "config.yaml").write_text(yaml.safe_dump(settings))

        code = run(["limit-sample", "--samples", "2", "--config", str(conf), "--out-dir", str(tmp_path)])
        assert code == EXIT_OK
        echoed = json.loads((tmp_path / "limit-sample_summary.json").read_text())["results"]["limit_config"]
        assert (echoed["M"], echoed["P_max"], echoed["n_haar"]) == (2, 4, 10_000)

    def test_parametric_compare_at_default_scales(self, tmp_path):
        code = run(["compare", "--parametric", "--N", "200", "--samples", "12", "--limit-samples", "4",
                    "--M", "1", "--P-max", "2", "--n-haar", "10000", "--out-dir", str(tmp_path)])
        assert code == EXIT_OK
        frame = pd.read_csv(tmp_path / "compare_samples.csv")
        assert (frame["source"] == "orbit").sum() == 12
