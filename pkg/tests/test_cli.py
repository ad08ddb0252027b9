"""Command line runs on small configurations: reports, exit codes and files."""

import csv
import json
import math

import numpy as np
import pytest

from lcepi import ConfigError
from lcepi.cli import main
from lcepi.config import ExperimentConfig, default_config_path, load_config
from lcepi.epiflow import CSV_COLUMNS
from lcepi.runner import FUNCTIONAL_COLUMNS, VERDICT_COLUMNS, ExitCode, run_verify


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    cap = capsys.readouterr()
    return code, cap.out, cap.err


GAUSS = [{"name": "M1", "family": "Gaussian", "params": {"sigma": 1}},
         {"name": "M2", "family": "Gaussian", "params": {"sigma": 2}}]


class TestFunctionals:
    def test_gaussian_and_gamma(self, tmp_path, capsys):
        cfg = {"densities": [GAUSS[1], {"name": "G6", "family": "Gamma", "params": {"shape": 6}}]}
        code, out, _ = _run(capsys, "functionals", "--config", _write(tmp_path, cfg))
        assert code == 0
        rows = {r["name"]: r for r in json.loads(out)["functionals"]}
        m2 = rows["M2"]
        assert abs(m2["H"] - 0.5 * math.log(2 * math.pi * math.e * 2)) <= 1e-4
        np.testing.assert_allclose(m2["H"], 1.765512, atol=1e-4)
        np.testing.assert_allclose([m2["I"], m2["J"]], [0.5, 0.25], atol=1e-4)
        np.testing.assert_allclose(rows["G6"]["J"], 5 / 24, rtol=1e-4)
        assert "spot_check" in m2 and m2["spot_check"]["max_score_error"] < 1e-3

    def test_empty(self, tmp_path, capsys):
        code, out, _ = _run(capsys, "functionals", "--config", _write(tmp_path, {"densities": []}))
        assert code == 0
        assert json.loads(out)["functionals"] == []

    def test_seed_only_moves_spot_checks(self, tmp_path, capsys):
        path = _write(tmp_path, {"densities": [GAUSS[0]], "spot_checks": 3})
        _, a, _ = _run(capsys, "functionals", "--config", path, "--seed", "1")
        _, b, _ = _run(capsys, "functionals", "--config", path, "--seed", "2")
        ra, rb = json.loads(a)["functionals"][0], json.loads(b)["functionals"][0]
        assert ra["spot_check"]["points"] != rb["spot_check"]["points"]
        assert ra["H"] == rb["H"] and ra["J"] == rb["J"]


class TestVerify:
    def test_all_gaussian_near_equality(self, tmp_path, capsys):
        cfg = {"densities": GAUSS,
               "verify": {"pairs": [{"f": "M1", "g": "M2", "ab": [[1, 2]]}], "singles": ["M1"]}}
        code, out, _ = _run(capsys, "verify", "--config", _write(tmp_path, cfg))
        rep = json.loads(out)
        assert code == 0 and rep["verdicts"]
        for v in rep["verdicts"]:
            assert v["near_equality"] and v["holds"], v["name"]
            assert isinstance(v["noise"], float)

    def test_mixed_log_concave_hold(self, tmp_path, capsys):
        cfg = {"densities": [{"name": "G6", "family": "Gamma", "params": {"shape": 6}},
                             {"name": "Lo", "family": "Logistic"}],
               "verify": {"pairs": [["G6", "Lo"]], "ab": [[1, 1], [1, 2]]}}
        code, out, _ = _run(capsys, "verify", "--config", _write(tmp_path, cfg))
        rep = json.loads(out)
        assert code == 0
        assert all(v["holds"] for v in rep["verdicts"])
        assert {v["name"] for v in rep["verdicts"]} >= {"INE_MAIN", "NEW1", "NEW11", "EX1", "MEAN1"}

    def test_mixture_precondition_reported(self, tmp_path, capsys):
        cfg = {"densities": [{"name": "mix", "family": "gaussian_mixture",
                              "params": {"centers": [-3, 3], "sigma": 1}},
                             {"name": "G3", "family": "Gamma", "params": {"shape": 3}}],
               "verify": {"pairs": [["mix", "G3"]], "singles": [], "ab": [[1, 1]]}}
        code, out, err = _run(capsys, "verify", "--config", _write(tmp_path, cfg))
        rep = json.loads(out)
        kinds = {(e["kind"], e["where"].split()[0]) for e in rep["errors"]}
        assert ("precondition", "INE_MAIN") in kinds
        assert code == 0
        assert "precondition" in err

    def test_selection(self, tmp_path, capsys):
        cfg = {"densities": GAUSS, "verify": {"pairs": [["M1", "M2"]], "singles": [],
                                              "inequalities": ["EPI"]}}
        _, out, _ = _run(capsys, "verify", "--config", _write(tmp_path, cfg))
        assert {v["name"] for v in json.loads(out)["verdicts"]} == {"EPI"}

    def test_violation_exit_code(self, monkeypatch):
        from lcepi import runner

        cfg = ExperimentConfig.from_dict({"densities": GAUSS,
                                          "verify": {"pairs": [["M1", "M2"]], "singles": []}})
        real = runner._verdict_row

        def flip(v, label, **kw):
            row = real(v, label, **kw)
            row["status"] = "violated"
            return row

        monkeypatch.setattr(runner, "_verdict_row", flip)
        assert run_verify(cfg).exit_code == ExitCode.VIOLATION


class TestFlow:
    def test_gaussian_flat(self, tmp_path, capsys):
        cfg = {"densities": [GAUSS[0]],
               "flow": {"pairs": [{"f": "M1", "g": "M1", "kappa": [0.5]}],
                        "mesh": {"final": 4}, "horizon": 50}}
        code, out, _ = _run(capsys, "flow", "--config", _write(tmp_path, cfg), "--workers", "2")
        rep = json.loads(out)
        assert code == 0
        lam = [r["lambda"] for r in rep["flows"][0]["rows"]]
        assert np.ptp(lam) <= 1e-6
        np.testing.assert_allclose(lam, 0.5 * math.log(2), atol=1e-6)
        s = rep["strengthened"][0]
        assert abs(s["R"] - 1) <= 1e-6

    def test_nongaussian_decreasing(self, tmp_path, capsys):
        cfg = {"densities": [{"name": "G3", "family": "Gamma", "params": {"shape": 3}},
                             {"name": "Lo", "family": "Logistic"}],
               "flow": {"pairs": [{"f": "G3", "g": "Lo", "kappa": [0.5], "strengthened": False}]}}
        code, out, _ = _run(capsys, "flow", "--config", _write(tmp_path, cfg), "--workers", "4")
        fl = json.loads(out)["flows"][0]
        assert code == 0 and all(fl["checks"].values())
        lam = np.array([r["lambda"] for r in fl["rows"]])
        assert lam[0] > lam[-1]

    def test_horizon_too_short_warns(self, tmp_path, capsys):
        cfg = {"densities": [{"name": "G6", "family": "Gamma", "params": {"shape": 6}},
                             {"name": "Lo", "family": "Logistic"}],
               "flow": {"pairs": [{"f": "G6", "g": "Lo", "kappa": [0.5]}],
                        "mesh": {"final": 2}, "horizon": 5}}
        code, out, err = _run(capsys, "flow", "--config", _write(tmp_path, cfg), "--workers", "4")
        rep = json.loads(out)
        assert code == 0
        assert rep["strengthened"][0]["partial"]
        assert any("horizon too short" in w for w in rep["warnings"])
        assert "warning" in err

    def test_oversized_flow_is_resolution_error(self, tmp_path, capsys):
        cfg = {"densities": [{"name": "M1_2d", "family": "Gaussian", "params": {"sigma": 1}, "dim": 2}],
               "flow": {"pairs": [{"f": "M1_2d", "g": "M1_2d", "kappa": [0.5]}]}}
        code, out, _ = _run(capsys, "flow", "--config", _write(tmp_path, cfg))
        assert code == ExitCode.RESOLUTION
        assert {e["kind"] for e in json.loads(out)["errors"]} == {"resolution"}

    def test_optimal_kappa_id(self, tmp_path, capsys):
        cfg = {"densities": GAUSS,
               "flow": {"pairs": [{"f": "M1", "g": "M2", "kappa": ["optimal"], "strengthened": False}],
                        "mesh": {"final": 1}}}
        _, out, _ = _run(capsys, "flow", "--config", _write(tmp_path, cfg))
        fl = json.loads(out)["flows"][0]
        np.testing.assert_allclose(fl["kappa"], 1 / 3, rtol=1e-6)
        assert fl["id"] == "M1|M2@kappa=optimal"


class TestOutputs:
    CFG = {"densities": GAUSS + [{"name": "Lo", "family": "Logistic"}],
           "verify": {"pairs": [["M1", "Lo"]], "ab": [[1, 1]]},
           "flow": {"pairs": [{"f": "M1", "g": "Lo", "kappa": [0.5], "strengthened": False}],
                    "mesh": {"final": 1}},
           "spot_checks": 2}

    def test_deterministic_json(self, tmp_path, capsys):
        path = _write(tmp_path, self.CFG)
        a, b = tmp_path / "a", tmp_path / "b"
        assert _run(capsys, "report", "--config", path, "--out", a, "--workers", "3")[0] == 0
        assert _run(capsys, "report", "--config", path, "--out", b)[0] == 0
        assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
        meta = json.loads((a / "report.meta.json").read_text())
        assert set(meta["timings"]) == {"functionals", "verify", "flow"}
        assert "timings" not in json.loads((a / "report.json").read_text())

    def test_config_echo(self, tmp_path, capsys):
        _, out, _ = _run(capsys, "functionals", "--config", _write(tmp_path, self.CFG),
                         "--spacing", "0.02")
        rep = json.loads(out)
        assert rep["config"]["grid"]["spacing"] == 0.02
        assert [d["name"] for d in rep["config"]["densities"]] == ["M1", "M2", "Lo"]

    def test_csv(self, tmp_path, capsys):
        code, _, _ = _run(capsys, "report", "--config", _write(tmp_path, self.CFG),
                          "--out", tmp_path / "o", "--format", "csv")
        assert code == 0
        out = tmp_path / "o"
        heads = {}
        for name in ("report.functionals.csv", "report.verdicts.csv", "report.flow0.csv"):
            with open(out / name) as fh:
                heads[name] = tuple(next(csv.reader(fh)))
        assert heads["report.functionals.csv"] == FUNCTIONAL_COLUMNS
        assert heads["report.verdicts.csv"] == VERDICT_COLUMNS
        assert heads["report.flow0.csv"] == CSV_COLUMNS

    def test_csv_needs_out(self, tmp_path, capsys):
        code, _, err = _run(capsys, "functionals", "--config", _write(tmp_path, {"densities": []}),
                            "--format", "csv")
        assert code == ExitCode.CONFIG and "--out" in err


class TestConfigErrors:
    @pytest.mark.parametrize("cfg,field", [
        ({"densities": [{"name": "x", "family": "Beta", "params": {}}]}, "densities[0]"),
        ({"densities": [{"name": "g", "family": "Gamma", "params": {"shape": 0.5}}]}, "densities[0]"),
        ({"densities": GAUSS, "bogus": 1}, "bogus"),
        ({"densities": GAUSS, "verify": {"pairs": [["M1", "M9"]]}}, "verify.pairs"),
        ({"densities": GAUSS, "flow": {"pairs": [{"f": "M1", "g": "M2", "kappa": 2}]}},
         "flow.pairs[0].kappa"),
        ({"densities": GAUSS + GAUSS[:1]}, "densities"),
        ({"densities": GAUSS, "grid": {"spacing": -1}}, "grid.spacing"),
    ])
    def test_exit_two(self, tmp_path, capsys, cfg, field):
        code, _, err = _run(capsys, "verify", "--config", _write(tmp_path, cfg))
        assert code == ExitCode.CONFIG
        assert field in err

    def test_malformed_json(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        assert _run(capsys, "functionals", "--config", p)[0] == ExitCode.CONFIG

    def test_missing_file(self, tmp_path, capsys):
        assert _run(capsys, "functionals", "--config", tmp_path / "nope.json")[0] == ExitCode.CONFIG

    def test_load_raises(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(_write(tmp_path, {"densities": "nope"}))


class TestDefaultBundle:
    def test_loads(self):
        cfg = load_config(None)
        assert default_config_path().exists()
        names = {d.name for d in cfg.densities}
        assert {"G3", "G6", "Lo", "Gu", "W2", "bimodal", "GuLo_2d"} <= names
        assert len(cfg.flow_pairs) == 5
