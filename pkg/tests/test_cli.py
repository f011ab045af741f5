"""Command line contract: exit codes, determinism, config validation."""

import json
import math
import os

import numpy as np
import pytest

from levyham import cli
from levyham.config import load_config
from levyham.errors import ConfigError

QUICK = """
[sim]
h = 0.05
delta = 5e-3
horizon = 4.0
n_replicas = 40
n_save = 9
seed = 3
"""


def write(tmp_path, text, name="exp.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestConfig:
    def test_defaults_load(self):
        cfg = load_config(text="")
        assert cfg.levy["kind"] == "slice"
        assert cfg.model["potential"] == "double_well_poly"

    def test_unknown_key_line_numbered(self, tmp_path):
        path = write(tmp_path, "[levy]\nkind = slice\nbogus = 3\n")
        with pytest.raises(ConfigError) as err:
            load_config(path)
        assert "line 3" in str(err.value)
        assert "bogus" in str(err.value)

    def test_unknown_section(self, tmp_path):
        path = write(tmp_path, "[nope]\nx = 1\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_bad_value_type(self, tmp_path):
        path = write(tmp_path, "[sim]\nh = fast\n")
        with pytest.raises(ConfigError) as err:
            load_config(path)
        assert "line 2" in str(err.value)

    def test_physics_validation(self, tmp_path):
        path = write(tmp_path, "[levy]\ntheta = 1.5\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_hash_stable_and_sensitive(self, tmp_path):
        a = load_config(write(tmp_path, QUICK, "a.cfg"))
        b = load_config(write(tmp_path, QUICK, "b.cfg"))
        c = load_config(write(tmp_path, QUICK.replace("seed = 3", "seed = 4"), "c.cfg"))
        assert a.config_hash() == b.config_hash()
        assert a.config_hash() != c.config_hash()

    def test_stable_kind_with_certificate(self):
        cfg = load_config(text="[levy]\nkind = stable\nalpha0 = 1.5\n"
                               "slice_c = 1.0\nslice_theta0 = 0.4\n")
        spec = cfg.build_levy()
        assert spec.slice_part.theta0 == 0.4


class TestExitCodes:
    def test_usage_error_is_one(self, tmp_path):
        path = write(tmp_path, "[levy]\nbogus = 1\n")
        code = cli.main(["constants", "--config", path, "--out", str(tmp_path)])
        assert code == 1

    def test_constants_benchmark(self, tmp_path):
        code = cli.main(["constants", "--out", str(tmp_path)])
        assert code == 0
        payload = json.loads((tmp_path / "constants.json").read_text())
        assert payload["log_rate"] > -math.inf
        assert payload["positivity_violations"] == []
        assert (tmp_path / "profile_curve.csv").exists()
        assert (tmp_path / "run_manifest.json").exists()

    def test_verify_broken_certificate_fails(self, tmp_path):
        # a potential too shallow for the default unit growth constant
        path = write(tmp_path, "[model]\npotential = quadratic\npot_k = 0.5\n")
        code = cli.main(["verify", "--which", "B1", "--config", path,
                         "--out", str(tmp_path)])
        assert code == 2
        payload = json.loads((tmp_path / "verify_B1.json").read_text())
        assert not payload["passed"]
        assert payload["growth_slack"] < 0

    def test_verify_quadratic_manual_certificate_passes(self, tmp_path):
        path = write(tmp_path, "[model]\npotential = quadratic\npot_k = 1.0\n")
        code = cli.main(["verify", "--which", "B1", "--config", path,
                         "--out", str(tmp_path)])
        assert code == 0

    def test_constants_degenerate_system_flagged(self, tmp_path):
        # zero damping and zero force weight kill the quadratic-form window
        path = write(tmp_path, "[model]\nalpha_damp = 0.0\nbeta = 0.0\n")
        code = cli.main(["constants", "--config", path, "--out", str(tmp_path)])
        assert code == 2

    def test_rate_zero_horizon_insufficient(self, tmp_path):
        path = write(tmp_path, "[sim]\nhorizon = 0.0\nn_save = 1\nn_replicas = 4\n")
        code = cli.main(["rate", "--config", path, "--out", str(tmp_path)])
        assert code == 2
        payload = json.loads((tmp_path / "rate.json").read_text())
        assert payload["error"] == "InsufficientDecay"

    def test_rate_quick_run(self, tmp_path):
        path = write(tmp_path, QUICK)
        code = cli.main(["rate", "--config", path, "--out", str(tmp_path)])
        assert code == 0
        payload = json.loads((tmp_path / "rate.json").read_text())
        assert payload["lambda_fit"] > 0
        header = (tmp_path / "decay_curve.csv").read_text().splitlines()[0]
        assert header == "t,mean,se,log_mean"


class TestDeterminism:
    def test_rate_outputs_bitwise_stable(self, tmp_path):
        path = write(tmp_path, QUICK)
        out1 = tmp_path / "r1"
        out2 = tmp_path / "r2"
        for out in (out1, out2):
            assert cli.main(["rate", "--config", path, "--out", str(out)]) == 0
        assert (out1 / "rate.json").read_bytes() == (out2 / "rate.json").read_bytes()
        assert (out1 / "decay_curve.csv").read_bytes() == \
            (out2 / "decay_curve.csv").read_bytes()

    def test_seed_changes_output(self, tmp_path):
        path = write(tmp_path, QUICK)
        out1 = tmp_path / "s1"
        out2 = tmp_path / "s2"
        assert cli.main(["rate", "--config", path, "--out", str(out1)]) == 0
        assert cli.main(["rate", "--config", path, "--seed", "99",
                         "--out", str(out2)]) == 0
        assert (out1 / "rate.json").read_bytes() != (out2 / "rate.json").read_bytes()


class TestCouple:
    def test_trajectory_columns(self, tmp_path):
        path = write(tmp_path, QUICK)
        code = cli.main(["couple", "--config", path, "--replicas", "2",
                         "--out", str(tmp_path)])
        assert code == 0
        files = sorted(p for p in os.listdir(tmp_path) if p.startswith("trajectory_"))
        assert files == ["trajectory_0000.csv", "trajectory_0001.csv"]
        lines = (tmp_path / files[0]).read_text().splitlines()
        assert lines[0] == "t,x,v,xp,vp,r,psi_tilde"
        first = np.array([float(tok) for tok in lines[1].split(",")])
        assert first[0] == 0.0
        assert first[-1] > 0  # off-diagonal start has positive cost


class TestEquilibriumCmd:
    def test_quick_run(self, tmp_path):
        path = write(tmp_path, QUICK)
        code = cli.main(["equilibrium", "--config", path, "--replicas", "20",
                         "--out", str(tmp_path)])
        assert code == 0
        payload = json.loads((tmp_path / "equilibrium.json").read_text())
        assert "cross_distance" in payload and "stationarity_distance" in payload
