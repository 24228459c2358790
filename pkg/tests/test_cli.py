import json
import math

import pytest

from epsense import presets
from epsense.cli import EXIT_IO, EXIT_MISS, EXIT_MODEL, EXIT_OK, EXIT_RANGE, ExperimentConfig, ConfigError, main

R2 = math.sqrt(2)


def write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# ")
    header = json.loads(lines[0][2:])
    cols = lines[1].split(",")
    rows = [dict(zip(cols, ln.split(","))) for ln in lines[2:]]
    return header, cols, rows


@pytest.fixture
def qfi_cfg():
    return {
        "kind": "qfi",
        "label": "three_mode",
        "model": presets.THREE_MODE_EP,
        "param": "kappa1",
        "t_grid": [1.0, 1000.0, 16],
        "window": [100.0, 1000.0],
        "expect": {"slope": 10.0, "tol": 0.15},
    }


class TestValidate:
    def test_kitaev_reports_order_four(self, tmp_path, capsys):
        f = write(tmp_path / "m.json", {"catalog": "kitaev_chain", "N": 4, "J": 1.0, "Omega": 1.0})
        assert main(["validate", f]) == EXIT_OK
        out = capsys.readouterr().out
        assert "multiplicity 8, EP order 4" in out

    def test_three_mode_extended_precision(self, tmp_path, capsys):
        f = write(tmp_path / "m.json", {"catalog": "three_mode", "delta": 1.0, "kappa1": R2, "kappa3": R2})
        assert main(["validate", f, "--digits", "30"]) == EXIT_OK
        assert "EP order 3" in capsys.readouterr().out

    def test_corrupted_h(self, tmp_path, capsys):
        doc = {"n_modes": 2, "h": [[[1, 0], [0.5, 0]], [[0.4, 0], [2, 0]]], "delta": [[[0, 0], [0, 0]], [[0, 0], [0, 0]]]}
        assert main(["validate", write(tmp_path / "m.json", doc)]) == EXIT_MODEL
        assert "(0,1)" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["validate", str(tmp_path / "absent.json")]) == EXIT_IO

    def test_bad_json(self, tmp_path):
        (tmp_path / "m.json").write_text("{not json")
        assert main(["validate", str(tmp_path / "m.json")]) == EXIT_IO


class TestQfiSweep:
    def test_fit_and_sidecar(self, tmp_path, qfi_cfg):
        out = tmp_path / "run.csv"
        assert main(["qfi-sweep", "-c", write(tmp_path / "c.json", qfi_cfg), "--out", str(out)]) == EXIT_OK
        header, cols, rows = read_csv(out)
        assert cols == ["model_id", "param", "t", "F", "Q", "c2_frobenius"]
        assert header["model"]["catalog"] == "three_mode" and len(rows) == 16
        fit = json.loads(out.with_suffix(".fit.json").read_text())
        assert fit["slope"] == pytest.approx(10.0, abs=0.15)
        assert fit["window"] == [100.0, 1000.0] and fit["n_points"] == 6

    def test_deterministic_across_jobs(self, tmp_path, qfi_cfg):
        cfg = write(tmp_path / "c.json", qfi_cfg)
        outs = []
        for jobs in ("1", "1", "3"):
            out = tmp_path / f"run{len(outs)}.csv"
            assert main(["qfi-sweep", "-c", cfg, "--out", str(out), "--jobs", jobs]) == EXIT_OK
            outs.append(out.read_bytes())
        assert outs[0] == outs[1] == outs[2]

    def test_expectation_miss(self, tmp_path, qfi_cfg):
        qfi_cfg["expect"] = {"slope": 8.0, "tol": 0.1}
        assert main(["qfi-sweep", "-c", write(tmp_path / "c.json", qfi_cfg), "--out", str(tmp_path / "o.csv")]) == EXIT_MISS

    def test_window_override(self, tmp_path, qfi_cfg):
        out = tmp_path / "o.csv"
        qfi_cfg.pop("expect")
        assert main(["qfi-sweep", "-c", write(tmp_path / "c.json", qfi_cfg), "--out", str(out), "--window", "10:1000"]) == 0
        assert json.loads(out.with_suffix(".fit.json").read_text())["window"] == [10.0, 1000.0]

    def test_single_point_grid_with_window(self, tmp_path, qfi_cfg, capsys):
        qfi_cfg["t_grid"] = [5.0, 5.0, 1]
        assert main(["qfi-sweep", "-c", write(tmp_path / "c.json", qfi_cfg)]) == EXIT_IO
        assert "needs >= 3 grid points" in capsys.readouterr().err

    def test_overflow_partial_csv(self, tmp_path, capsys):
        cfg = {
            "kind": "qfi",
            "model": {"catalog": "single_mode", "delta": 1.0, "kappa": 2.0},
            "param": "kappa",
            "t_grid": [1.0, 1000.0, 4],
        }
        out = tmp_path / "o.csv"
        assert main(["qfi-sweep", "-c", write(tmp_path / "c.json", cfg), "--out", str(out)]) == EXIT_RANGE
        _, _, rows = read_csv(out)
        assert [float(r["t"]) for r in rows] == [1.0, 10.0, 100.0]
        assert "last good t: 100.0" in capsys.readouterr().err

    def test_unknown_parameter(self, tmp_path, qfi_cfg):
        qfi_cfg["param"] = "gamma"
        assert main(["qfi-sweep", "-c", write(tmp_path / "c.json", qfi_cfg)]) == EXIT_MODEL

    def test_kind_mismatch(self, tmp_path, qfi_cfg):
        assert main(["spectrum-sweep", "-c", write(tmp_path / "c.json", qfi_cfg)]) == EXIT_IO

    def test_stdout_output(self, tmp_path, qfi_cfg, capsys):
        qfi_cfg.update(t_grid=[1.0, 10.0, 3], window=None, expect=None)
        assert main(["qfi-sweep", "-c", write(tmp_path / "c.json", qfi_cfg)]) == EXIT_OK
        out = capsys.readouterr().out.splitlines()
        assert out[0].startswith("# {") and out[1].startswith("model_id") and len(out) == 5


class TestSpectrumSweep:
    def test_constrained_square_root(self, tmp_path):
        cfg = presets.preset("fig2a")[1]
        out = tmp_path / "s.csv"
        assert main(["spectrum-sweep", "-c", write(tmp_path / "c.json", cfg), "--out", str(out)]) == EXIT_OK
        _, cols, rows = read_csv(out)
        assert cols == ["epsilon", "max_abs_domega"] and len(rows) == 13
        assert json.loads(out.with_suffix(".fit.json").read_text())["slope"] == pytest.approx(0.5, abs=0.02)


class TestSizeSweep:
    def test_no_pairing_flat(self, tmp_path):
        cfg = {
            "kind": "size",
            "family": presets.bkc_edge(None, Omega=0.0),
            "param": "eta",
            "n_range": [4, 19],
            "t0": 200.0,
            "expect": {"slope": 0.0, "tol": 0.3},
        }
        out = tmp_path / "n.csv"
        assert main(["size-sweep", "-c", write(tmp_path / "c.json", cfg), "--out", str(out)]) == EXIT_OK
        _, cols, rows = read_csv(out)
        assert cols == ["N", "t0", "F", "Q", "lnF"] and [r["N"] for r in rows] == [str(n) for n in range(4, 20)]

    def test_overflow_suggests_smaller_t0(self, tmp_path, capsys):
        cfg = {"kind": "size", "family": presets.bkc_edge(None, Omega=0.99), "param": "eta", "n_range": [78, 80], "t0": 1000.0}
        assert main(["size-sweep", "-c", write(tmp_path / "c.json", cfg), "--out", str(tmp_path / "n.csv")]) == EXIT_RANGE
        assert "smaller t0" in capsys.readouterr().err

    def test_missing_fields(self, tmp_path):
        assert main(["size-sweep", "-c", write(tmp_path / "c.json", {"kind": "size", "param": "eta"})]) == EXIT_IO


class TestOracleCompare:
    def test_single_point(self, tmp_path, capsys):
        cfg = {
            "kind": "oracle",
            "points": [
                {"model": {"catalog": "single_mode", "delta": 1.0, "kappa": 1.0}, "param": "kappa", "eta0": 1.0, "t": 1.0, "alpha": [0.0], "cutoff": 80}
            ],
        }
        out = tmp_path / "o.csv"
        assert main(["oracle-compare", "-c", write(tmp_path / "c.json", cfg), "--out", str(out)]) == EXIT_OK
        _, cols, rows = read_csv(out)
        assert float(rows[0]["rel_err"]) < 1e-3

    def test_threshold_miss(self, tmp_path):
        cfg = {
            "kind": "oracle",
            "threshold": 1e-12,
            "points": [
                {"model": {"catalog": "single_mode", "delta": 1.0, "kappa": 1.0}, "param": "kappa", "eta0": 1.0, "t": 0.5, "alpha": [0.0], "cutoff": 80}
            ],
        }
        assert main(["oracle-compare", "-c", write(tmp_path / "c.json", cfg), "--out", str(tmp_path / "o.csv")]) == EXIT_MISS

    def test_truncation_is_io_error(self, tmp_path):
        cfg = {
            "kind": "oracle",
            "points": [{"model": {"catalog": "single_mode", "delta": 1.0, "kappa": 1.0}, "param": "kappa", "t": 3.0, "cutoff": 10}],
        }
        assert main(["oracle-compare", "-c", write(tmp_path / "c.json", cfg)]) == EXIT_IO


class TestReproduce:
    def test_fig3b(self, tmp_path, capsys):
        assert main(["reproduce", "fig3b", "--out", str(tmp_path)]) == EXIT_OK
        assert (tmp_path / "fig3b_N20.fit.json").exists()
        err = capsys.readouterr().err
        assert err.count("PASS") == 2 and "FAIL" not in err

    def test_unknown_figure(self):
        assert main(["reproduce", "fig9"]) == EXIT_IO


class TestConfig:
    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            ExperimentConfig.from_dict({"kind": "qfi", "colour": 1})

    def test_bad_window(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"kind": "qfi", "window": [5, 1]})

    def test_presets_are_valid(self):
        for name in presets.PRESETS:
            for doc in presets.preset(name):
                assert ExperimentConfig.from_dict(doc).expect

    def test_preset_copy_is_independent(self):
        presets.preset("fig2a")[0]["param"] = "x"
        assert presets.PRESETS["fig2a"][0]["param"] == "kappa1"
