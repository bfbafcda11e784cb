"""Run configuration and the command-line interface."""

import json

import numpy as np
import pytest

from mtjsnn.cli import main
from mtjsnn.config import RunConfig
from mtjsnn.errors import ConfigError


class TestRunConfig:
    def test_defaults_match_device_tables(self):
        cfg = RunConfig()
        assert cfg.device.r_p == 1.21e6
        assert cfg.device.r_ap == 2.5e6
        assert cfg.device.theta_sh == 0.3
        assert cfg.device.r_hm == 400.0
        assert cfg.device.v_dd == 1.0
        assert cfg.network.p_max == 0.064
        assert cfg.network.steps_per_image == 340
        assert cfg.network.tau_0 == 50
        assert cfg.network.tau_inh == 50
        assert cfg.network.tau_plus == 4.5
        assert cfg.network.tau_minus == 5.0
        assert cfg.network.eta_plus == 0.03
        assert cfg.network.eta_minus == 0.01
        assert cfg.magnetics.m_s == 1.0e6
        assert cfg.magnetics.alpha == 0.0122

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError, match="section"):
            RunConfig.from_dict({"nope": {}})

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="device.bogus"):
            RunConfig.from_dict({"device": {"bogus": 1}})

    def test_round_trip(self, tmp_path):
        cfg = RunConfig.from_dict({"device": {"w_mtj": 40e-9}})
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg.to_dict()))
        again = RunConfig.from_file(path)
        assert again.device.w_mtj == 40e-9
        assert again.to_dict() == cfg.to_dict()

    def test_overrides(self):
        cfg = RunConfig()
        cfg.apply_overrides(["network.seed=99", "device.w_mtj=4e-08"])
        assert cfg.network.seed == 99
        assert cfg.device.w_mtj == 4e-8
        with pytest.raises(ConfigError):
            cfg.apply_overrides(["badpair"])
        with pytest.raises(ConfigError):
            cfg.apply_overrides(["device.nope=1"])

    def test_invalid_json_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            RunConfig.from_file(path)


def run_in(workdir, argv):
    """Run the CLI with the default relative out_dir from ``workdir``.

    Keeps the resolved config identical across runs in different
    directories, which is what the byte-identical contract is about.
    """
    import os
    workdir.mkdir(exist_ok=True)
    old = os.getcwd()
    os.chdir(workdir)
    try:
        return main(argv)
    finally:
        os.chdir(old)


class TestCliExitCodes:
    def test_config_error_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"nope": {}}')
        code = main(["calibrate", "--config", str(bad),
                     "--set", f"io.out_dir={json.dumps(str(tmp_path))}"])
        assert code == 2

    def test_io_error_exit_3(self, tmp_path):
        code = main(["energy-report", "--events", str(tmp_path / "missing.csv.gz"),
                     "--set", f"io.out_dir={json.dumps(str(tmp_path))}"])
        assert code == 3

    def test_numerical_error_exit_4(self, tmp_path):
        # unreachable barrier target
        code = main(["calibrate", "--eb", "1e9",
                     "--set", f"io.out_dir={json.dumps(str(tmp_path))}"])
        assert code == 4


class TestCalibrateCli:
    def test_report_contents(self, tmp_path):
        code = main(["calibrate", "--set", f"io.out_dir={json.dumps(str(tmp_path))}"])
        assert code == 0
        report = json.loads((tmp_path / "calibration.json").read_text())
        assert report["version"]
        assert report["config"]["device"]["r_hm"] == 400.0
        points = {p["EB_kT"]: p for p in report["calibrations"]}
        assert set(points) == {10.0, 20.0, 30.0}
        for eb, p in points.items():
            assert p["achieved_kT"] == pytest.approx(eb, abs=1e-6)
        assert points[10.0]["thickness_m"] == pytest.approx(0.8e-9)
        assert points[30.0]["thickness_m"] == pytest.approx(1.5e-9)


class TestPulseDemoCli:
    def test_trajectory_artifact(self, tmp_path):
        code = main(["pulse-demo", "--amplitude-ua", "30", "--n-pulses", "2",
                     "--on", "1e-9", "--off", "0.5e-9",
                     "--set", f"io.out_dir={json.dumps(str(tmp_path))}"])
        assert code == 0
        lines = (tmp_path / "pulse_demo.csv").read_text().splitlines()
        assert lines[0] == "time_s,m_x,m_y,m_z"
        assert len(lines) > 100
        meta = json.loads((tmp_path / "pulse_demo.meta.json").read_text())
        assert meta["amplitude_charge_A"] == pytest.approx(30e-6)
        assert len(meta["pulses"]) == 2


SWEEP_ARGS = ["sweep", "--eb", "20", "--tpw", "0.5e-9", "--trials", "250",
              "--seed", "42", "--set", "sweep.points=12"]


@pytest.fixture(scope="module")
def coarse_sweep_dir(tmp_path_factory):
    """A small real sweep reused by the train/test CLI checks."""
    out = tmp_path_factory.mktemp("cli_sweep")
    assert run_in(out, SWEEP_ARGS) == 0
    return out


class TestSweepCli:
    def test_artifacts_and_worker_independence(self, coarse_sweep_dir, tmp_path):
        table = json.loads((coarse_sweep_dir / "sweep.json").read_text())
        assert table["meta"]["seed"] == 42
        assert table["meta"]["stamp"]["config"]["sweep"]["points"] == 12
        ps = [c["p"] for c in table["cells"]]
        assert min(ps) == 0.0 and max(ps) > 0.97
        # rerun with two workers: byte-identical artifacts
        other = tmp_path / "w2"
        assert run_in(other, SWEEP_ARGS + ["--workers", "2"]) == 0
        assert ((coarse_sweep_dir / "sweep.json").read_bytes()
                == (other / "sweep.json").read_bytes())
        assert ((coarse_sweep_dir / "sweep.csv").read_bytes()
                == (other / "sweep.csv").read_bytes())


class TestTrainTestCli:
    def test_train_test_energy_chain(self, coarse_sweep_dir, tmp_path):
        table = str(coarse_sweep_dir / "sweep.json")
        out1 = tmp_path / "run1"
        out2 = tmp_path / "run2"
        train_args = ["train", "--table", table, "--dataset", "synth",
                      "--images", "3", "--data-seed", "5",
                      "--set", "network.steps_per_image=120"]
        for out in (out1, out2):
            assert run_in(out, train_args) == 0
        # determinism: training artifacts byte-identical under a fixed seed
        for name in ("train_checkpoint.json", "train_stats.json", "train_raster.csv",
                     "train_events.csv.gz"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name

        stats = json.loads((out1 / "train_stats.json").read_text())
        assert stats["n_images"] == 6
        assert stats["energy"]["spikes"] >= 0
        v_row = stats["v_row_V"]

        code = run_in(out1, ["test", "--table", table, "--dataset", "synth",
                             "--images", "2", "--data-seed", "6", "--checkpoint",
                             str(out1 / "train_checkpoint.json"),
                             "--set", "network.steps_per_image=120",
                             "--set", f"network.v_row={v_row}"])
        assert code == 0
        result = json.loads((out1 / "test_stats.json").read_text())
        assert 0.0 <= result["accuracy"] <= 1.0
        assert len(result["predictions"]) == 4

        code = run_in(out1, ["energy-report",
                             "--events", str(out1 / "train_events.csv.gz"),
                             "--stats", str(out1 / "train_stats.json")])
        assert code == 0
        report = json.loads((out1 / "energy_report.json").read_text())
        for key in ("write_fj", "read_fj", "reset_fj"):
            assert report["energy"][key] == pytest.approx(stats["energy"][key], rel=1e-9)
        assert report["energy"]["spikes"] == stats["energy"]["spikes"]
        assert report["verified_against"].endswith("train_stats.json")

    def test_missing_v_row_is_config_error(self, coarse_sweep_dir, tmp_path):
        table = str(coarse_sweep_dir / "sweep.json")
        ckpt = tmp_path / "ck.json"
        from mtjsnn.snn import SynapseMatrix, save_checkpoint
        save_checkpoint(ckpt, SynapseMatrix(levels=np.full((784, 9), 8)), 1, 1)
        code = main(["test", "--table", table, "--checkpoint", str(ckpt),
                     "--set", f"io.out_dir={json.dumps(str(tmp_path))}"])
        assert code == 2
