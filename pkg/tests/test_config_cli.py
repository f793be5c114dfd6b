import csv
import glob
import json
import os

import pytest

from isoga.cli import EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK, _scaled, convergence_rows, main
from isoga.config import load_config, parse_refine
from isoga.errors import ConfigError, InputError

CASES_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "cases")


class TestConfig:
    @pytest.mark.parametrize("path", sorted(glob.glob(os.path.join(CASES_DIR, "*.json"))))
    def test_shipped_cases_validate(self, path):
        assert load_config(path).case

    def test_common_keys_become_overrides(self):
        cfg = load_config({"case": "poisson-1d", "params": {"degree": 2}, "quad": 5, "output": {"dir": "x"}})
        assert cfg.overrides == {"degree": 2, "quad": 5}
        assert cfg.output == {"dir": "x"}

    @pytest.mark.parametrize("data,path", [
        ({"case": "nope"}, "$.case"),
        ({"case": "poisson-1d", "params": {"degree": 0}}, "$.params.degree"),
        ({"case": "poisson-1d", "foo": 1}, "$.foo"),
        ({"case": "poisson-1d", "refine": [{"type": "x"}]}, "$.refine[0].type"),
        ({}, "$"),
    ])
    def test_error_paths(self, data, path):
        with pytest.raises(ConfigError) as exc:
            load_config(data)
        assert exc.value.path == path

    def test_bad_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text('{"case": ')
        with pytest.raises(ConfigError, match="line 1"):
            load_config(p)

    def test_refine_flag(self):
        assert parse_refine("p:1,h:2") == [{"type": "p", "by": 1}, {"type": "h", "levels": 2}]
        assert parse_refine("k:3") == [{"type": "k", "by": 1, "levels": 3}]
        for bad in ("h", "x:1", "h:-1"):
            with pytest.raises(ConfigError):
                parse_refine(bad)


class TestConvergence:
    @pytest.mark.parametrize("p", [1, 2])
    def test_poisson_rates(self, p):
        rows = convergence_rows("poisson-1d", 3, {"degree": p})
        assert [r["elements"] for r in rows] == ["4", "8", "16"]
        assert rows[0]["rate"] == ""
        for r in rows[1:]:
            assert r["rate"] == pytest.approx(p + 1, abs=0.02)

    def test_odd_counts_stay_odd(self):
        assert _scaled([15, 15], 2) == [63, 63]
        assert _scaled(4, 3) == 32

    def test_unknown_case(self):
        with pytest.raises(InputError):
            convergence_rows("edge-crack", 2)
        with pytest.raises(InputError):
            convergence_rows("poisson-1d", 0)


class TestCli:
    def test_run_writes_outputs(self, tmp_path, capsys):
        code = main(["run", os.path.join(CASES_DIR, "poisson1d.json"), "--out", str(tmp_path)])
        assert code == EXIT_OK
        assert "l2_error" in capsys.readouterr().out
        rows = list(csv.DictReader(open(tmp_path / "metrics.csv")))
        assert {r["metric"] for r in rows} >= {"l2_error", "h1_error"}
        assert (tmp_path / "poisson-1d.vtu").exists()

    def test_flags_override_config(self, tmp_path):
        main(["run", "--case", "poisson-1d", "--order", "2", "--out", str(tmp_path)])
        rows = list(csv.DictReader(open(tmp_path / "metrics.csv")))
        assert rows[0]["p"] == "2" and rows[0]["dofs"] == "6"

    def test_convergence_csv(self, tmp_path, capsys):
        code = main(["convergence", "poisson-1d", "--levels", "2", "--order", "2", "--out", str(tmp_path)])
        assert code == EXIT_OK
        rows = list(csv.DictReader(open(tmp_path / "convergence_poisson-1d.csv")))
        assert len(rows) == 2 and float(rows[1]["rate"]) == pytest.approx(3.0, abs=1e-6)
        assert "rate 3.000" in capsys.readouterr().out

    def test_input_errors_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"case": "poisson-1d", "params": {"degree": 0}}))
        assert main(["run", str(bad)]) == EXIT_INPUT
        assert "$.params.degree" in capsys.readouterr().err
        assert main(["run"]) == EXIT_INPUT
        assert main(["run", "--case", "poisson-1d", "--refine", "z:1"]) == EXIT_INPUT
        assert main(["bogus"]) == EXIT_INPUT

    def test_numerical_failure_exit_1(self, tmp_path, capsys):
        # no supports: the stiffness matrix is singular
        data = json.load(open(os.path.join(CASES_DIR, "cantilever.json")))
        data["params"]["bcs"] = []
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps(data))
        assert main(["run", str(cfg), "--out", str(tmp_path)]) == EXIT_NUMERICAL
        assert "SingularMatrixError" in capsys.readouterr().err

    def test_formulation_error_is_input_error(self, tmp_path):
        # a linear basis cannot carry the rotation-free plate
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"case": "clamped-plate", "params": {"degree": 1, "elements": [4, 4]}}))
        assert main(["run", str(cfg), "--out", str(tmp_path)]) == EXIT_INPUT

    def test_verify_single_criterion(self, tmp_path, capsys):
        report = tmp_path / "r.json"
        assert main(["verify", "--criteria", "2", "--report", str(report)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "criterion 2 PASS" in out
        assert json.load(open(report))[0]["passed"] is True

    def test_help(self, capsys):
        assert main(["--help"]) == EXIT_OK
        assert "convergence" in capsys.readouterr().out
