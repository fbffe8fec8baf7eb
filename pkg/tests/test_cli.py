import json
import os
import subprocess
import sys

import numpy as np
import pytest

from frailty_shapes import cli
from frailty_shapes.verify import Check, CriterionResult

POISSON_CFG = {"family": {"family": "poisson", "params": {"eta": 2.0}}}
EXP_HAZARD = {"hazard": "exponential", "params": {"rate": 1.0}}


def write_cfg(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def run_main(argv, capsys):
    rc = cli.main(argv)
    captured = capsys.readouterr()
    return rc, captured.out, captured.err


class TestCurveCommand:
    def test_writes_csv_and_sidecar(self, tmp_path, capsys):
        out = tmp_path / "c.csv"
        cfg = write_cfg(tmp_path, "curve_cfg.json", {
            **POISSON_CFG,
            "grid": {"start": 0.0, "stop": 2.0, "points": 5},
            "out": str(out),
        })
        rc, _, err = run_main(["curve", "--config", cfg], capsys)
        assert rc == 0 and err == ""
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "lambda,rfv,crf"
        assert len(lines) == 6
        sidecar = json.loads(out.with_suffix(".json").read_text())
        assert sidecar["tail"] == "IncreasingToInfinity"
        assert sidecar["family"]["family"] == "poisson"

    def test_out_flag_overrides_config(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "curve_cfg.json", {
            **POISSON_CFG,
            "grid": {"start": 0.0, "stop": 1.0, "points": 3},
            "out": str(tmp_path / "ignored.csv"),
        })
        target = tmp_path / "flag.csv"
        rc, _, _ = run_main(["curve", "--config", cfg, "--out", str(target)],
                            capsys)
        assert rc == 0
        assert target.exists()
        assert not (tmp_path / "ignored.csv").exists()

    @pytest.mark.parametrize("grid", [
        {"start": 2.0, "stop": 1.0, "points": 5},
        {"start": -1.0, "stop": 1.0, "points": 5},
        {"start": 0.0, "stop": 1.0, "points": 1},
        {"start": 0.0, "stop": 1.0},
    ])
    def test_bad_grid_exits_two(self, tmp_path, capsys, grid):
        cfg = write_cfg(tmp_path, "curve_cfg.json", {**POISSON_CFG, "grid": grid,
                                             "out": str(tmp_path / "c.csv")})
        rc, _, err = run_main(["curve", "--config", cfg], capsys)
        assert rc == 2
        payload = json.loads(err)
        assert set(payload) == {"error", "message"}

    def test_missing_config_exits_two(self, capsys):
        rc, _, err = run_main(["curve"], capsys)
        assert rc == 2
        assert json.loads(err)["error"] == "ParameterOutOfRange"

    def test_malformed_json_exits_two(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        rc, _, err = run_main(["curve", "--config", str(bad)], capsys)
        assert rc == 2
        assert json.loads(err)["error"] == "JSONDecodeError"

    def test_unknown_family_exits_two(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "curve_cfg.json", {
            "family": {"family": "cauchy", "params": {}},
            "out": str(tmp_path / "c.csv"),
        })
        rc, _, err = run_main(["curve", "--config", cfg], capsys)
        assert rc == 2
        assert json.loads(err)["error"] == "UnsupportedFamily"


class TestOracleCommand:
    def test_csv_and_max_diff(self, tmp_path, capsys):
        out = tmp_path / "o.csv"
        cfg = write_cfg(tmp_path, "oracle_cfg.json", {
            "family": {"family": "negbin", "params": {"pi": 0.5, "nu": 2.0}},
            "grid": {"start": 0.0, "stop": 3.0, "points": 7},
            "out": str(out),
        })
        rc, _, _ = run_main(["oracle", "--config", cfg], capsys)
        assert rc == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "lambda,rfv_laplace,rfv_oracle,rel_diff"
        body = np.array([r.split(",") for r in lines[1:]], dtype=float)
        assert body.shape == (7, 4)
        sidecar = json.loads(out.with_suffix(".json").read_text())
        assert sidecar["max_rel_diff"] < 1e-8
        assert body[:, 3].max() == pytest.approx(sidecar["max_rel_diff"])


class TestFig2Command:
    def test_writes_four_sets(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "fig2_cfg.json", {
            "out_dir": str(tmp_path),
            "grid": {"start": 0.0, "stop": 2.0, "points": 9},
        })
        rc, _, _ = run_main(["fig2", "--config", cfg], capsys)
        assert rc == 0
        for name in ("set1", "set2", "set3", "set4"):
            csv = tmp_path / f"fig2_{name}.csv"
            assert csv.exists()
            assert csv.read_text().startswith("lambda,rfv,crf\n")
            assert (tmp_path / f"fig2_{name}.json").exists()


class TestSimulateCommand:
    def _config(self, tmp_path, seed=7):
        return write_cfg(tmp_path, "sim_cfg.json", {
            "sim": {
                "family": {"family": "poisson", "params": {"eta": 2.0}},
                "hazards": [EXP_HAZARD],
                "n_clusters": 400,
                "seed": seed,
            },
            "summary_times": [[0.5]],
            "out": str(tmp_path / "s.csv"),
        })

    def test_csv_and_summary(self, tmp_path, capsys):
        rc, _, _ = run_main(["simulate", "--config", self._config(tmp_path)],
                            capsys)
        assert rc == 0
        lines = (tmp_path / "s.csv").read_text().strip().split("\n")
        assert lines[0] == "cluster_id,z,t_1,censored"
        assert len(lines) == 401
        summary = json.loads((tmp_path / "s.json").read_text())
        assert summary["n_clusters"] == 400
        assert summary["seed"] == 7
        assert summary["at_risk"][0]["t"] == [0.5]

    def test_seed_flag_overrides(self, tmp_path, capsys):
        cfg = self._config(tmp_path, seed=7)
        run_main(["simulate", "--config", cfg], capsys)
        first = (tmp_path / "s.csv").read_text()
        run_main(["simulate", "--config", cfg, "--seed", "8"], capsys)
        second = (tmp_path / "s.csv").read_text()
        assert first != second
        assert json.loads((tmp_path / "s.json").read_text())["seed"] == 8

    def test_rerun_is_byte_identical(self, tmp_path, capsys):
        cfg = self._config(tmp_path)
        run_main(["simulate", "--config", cfg], capsys)
        first = (tmp_path / "s.csv").read_bytes()
        run_main(["simulate", "--config", cfg], capsys)
        assert (tmp_path / "s.csv").read_bytes() == first


class TestCorrelatedCommand:
    def test_csv_schema_and_sidecar(self, tmp_path, capsys):
        out = tmp_path / "corr.csv"
        cfg = write_cfg(tmp_path, "corr_cfg.json", {
            "model": {
                "etas": [1.0, 2.0],
                "w_dist": {"family": "gamma",
                           "params": {"mean": 1.0, "variance": 0.5}},
                "hazards": [EXP_HAZARD, EXP_HAZARD],
            },
            "grid": {"start": 0.0, "stop": 3.0, "points": 13},
            "out": str(out),
        })
        rc, _, _ = run_main(["correlated", "--config", cfg], capsys)
        assert rc == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "d,crf"
        crf = np.array([r.split(",")[1] for r in lines[1:]], dtype=float)
        np.testing.assert_allclose(crf, 1.5, rtol=1e-12)
        sidecar = json.loads(out.with_suffix(".json").read_text())
        assert sidecar["limit_crf"] == pytest.approx(1.5)
        pair = sidecar["frailty_correlations"][0]
        assert pair["correlation"] == pytest.approx(1.0 / np.sqrt(6.0))


class TestPiecewiseCommand:
    def test_grid_defaults_to_final_segment(self, tmp_path, capsys):
        out = tmp_path / "pw.csv"
        cfg = write_cfg(tmp_path, "pw_cfg.json", {
            "model": {
                "cutpoints": [0.5],
                "segment_families": [
                    {"family": "negbin", "params": {"pi": 0.5, "nu": 2.0}},
                    {"family": "poisson", "params": {"eta": 2.0}},
                ],
                "hazards": [EXP_HAZARD],
            },
            "grid": {"start": 0.5, "stop": 2.0, "points": 7},
            "out": str(out),
        })
        rc, _, _ = run_main(["piecewise", "--config", cfg], capsys)
        assert rc == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "t,rfv,crf"
        assert len(lines) == 8
        sidecar = json.loads(out.with_suffix(".json").read_text())
        assert sidecar["coupling"] == "independent"
        assert sidecar["tail"] == "IncreasingToInfinity"

    def test_grid_before_final_segment_exits_two(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "pw_cfg.json", {
            "model": {
                "cutpoints": [1.0],
                "segment_families": [
                    {"family": "poisson", "params": {"eta": 2.0}},
                    {"family": "poisson", "params": {"eta": 2.0}},
                ],
                "hazards": [EXP_HAZARD],
            },
            "grid": {"start": 0.2, "stop": 2.0, "points": 4},
            "out": str(tmp_path / "pw.csv"),
        })
        rc, _, err = run_main(["piecewise", "--config", cfg], capsys)
        assert rc == 2
        assert json.loads(err)["error"] == "ParameterOutOfRange"


class TestTimevaryingCommand:
    def test_csv_schema(self, tmp_path, capsys):
        out = tmp_path / "tv.csv"
        cfg = write_cfg(tmp_path, "tv_cfg.json", {
            "inner": {"family": "poisson", "params": {"eta": 4.0}},
            "shift": {"shift": "exp_half", "eta": 4.0},
            "grid": {"start": 0.0, "stop": 10.0, "points": 6},
            "out": str(out),
        })
        rc, _, _ = run_main(["timevarying", "--config", cfg], capsys)
        assert rc == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "lambda,rfv,crf"
        row0 = lines[1].split(",")
        assert float(row0[1]) == pytest.approx(1.0 / 16.0)


class TestVerifyCommand:
    def test_single_criterion_report(self, tmp_path, capsys):
        rc, out, _ = run_main(["verify", "--only", "tail_limits",
                               "--out", str(tmp_path / "report.json")], capsys)
        assert rc == 0
        payload = json.loads(out)
        assert payload["passed"] is True
        assert [c["name"] for c in payload["criteria"]] == ["tail_limits"]
        on_disk = json.loads((tmp_path / "report.json").read_text())
        assert on_disk == payload

    def test_unknown_criterion_exits_two(self, capsys):
        rc, _, err = run_main(["verify", "--only", "no_such_criterion"], capsys)
        assert rc == 2
        assert "no_such_criterion" in json.loads(err)["message"]

    def test_failing_criterion_exits_one(self, capsys, monkeypatch):
        fail = CriterionResult(
            name="tail_limits", passed=False, seconds=0.0,
            checks=[Check(label="synthetic", passed=False, detail="forced")])
        monkeypatch.setattr(cli, "run_all", lambda only=None: [fail])
        rc, out, _ = run_main(["verify"], capsys)
        assert rc == 1
        assert json.loads(out)["passed"] is False


class TestEnvironment:
    def test_thread_cap_validated(self, capsys, monkeypatch):
        monkeypatch.setenv("FRAILTY_SHAPES_THREADS", "zero")
        rc, _, err = run_main(["verify", "--only", "tail_limits"], capsys)
        assert rc == 2
        assert json.loads(err)["error"] == "ParameterOutOfRange"

    def test_thread_cap_applied(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("FRAILTY_SHAPES_THREADS", "1")
        cfg = write_cfg(tmp_path, "curve_cfg.json", {
            **POISSON_CFG,
            "grid": {"start": 0.0, "stop": 1.0, "points": 3},
            "out": str(tmp_path / "c.csv"),
        })
        try:
            rc, _, _ = run_main(["curve", "--config", cfg], capsys)
        finally:
            from frailty_shapes import _kernels
            _kernels.set_thread_cap(10_000)  # lift the cap for later tests
        assert rc == 0


SUBPROCESS_ENV = {k: v for k, v in os.environ.items()
                  if k not in ("FRAILTY_SHAPES_BACKEND", "FRAILTY_SHAPES_THREADS")}


def test_module_entry_point_end_to_end(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "family": {"family": "negbin", "params": {"pi": 0.5, "nu": 2.0}},
        "grid": {"start": 0.0, "stop": 2.0, "points": 5},
        "out": str(tmp_path / "a.csv"),
    }))
    cmd = [sys.executable, "-m", "frailty_shapes", "curve", "--config", str(cfg)]
    proc = subprocess.run(cmd, capture_output=True, env=SUBPROCESS_ENV)
    assert proc.returncode == 0, proc.stderr.decode()
    first = (tmp_path / "a.csv").read_bytes()

    # same run on the numpy backend: close numerically, zero drama
    env = dict(SUBPROCESS_ENV, FRAILTY_SHAPES_BACKEND="numpy",
               FRAILTY_SHAPES_THREADS="2")
    proc = subprocess.run(cmd + ["--out", str(tmp_path / "b.csv")],
                          capture_output=True, env=env)
    assert proc.returncode == 0, proc.stderr.decode()
    a = np.genfromtxt(tmp_path / "a.csv", delimiter=",", skip_header=1)
    b = np.genfromtxt(tmp_path / "b.csv", delimiter=",", skip_header=1)
    np.testing.assert_allclose(a, b, rtol=1e-12)
    assert first == (tmp_path / "a.csv").read_bytes()  # untouched by second run
