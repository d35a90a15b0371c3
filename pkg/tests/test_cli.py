import csv
import io
import json
import math
import subprocess
import sys

import pytest

from infobounds import golden
from infobounds.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main, parse_bound_token


def run(capsys, *argv):
    try:
        code = main([str(a) for a in argv])
    except SystemExit as exc:  # argparse rejects malformed flags itself
        code = exc.code
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def copy_file(write_problem):
    return write_problem(golden.copy_channel(), "copy.json")


@pytest.fixture
def gibbs_file(write_problem):
    return write_problem(golden.gibbs_golden(), "gibbs.json")


@pytest.fixture
def indep_file(write_problem):
    return write_problem(golden.independent(), "independent.json")


class TestMeasures:
    def test_copy(self, capsys, copy_file):
        code, out, _ = run(capsys, "measures", "--problem", copy_file)
        assert code == EXIT_OK
        assert json.loads(out)["mutual_information"] == pytest.approx(math.log(2), abs=1e-15)

    def test_independent_all_zero(self, capsys, indep_file):
        _, out, _ = run(capsys, "measures", "--problem", indep_file)
        assert all(v == 0 for v in json.loads(out).values())

    def test_csv(self, capsys, copy_file):
        _, out, _ = run(capsys, "measures", "--problem", copy_file, "--format", "csv")
        rows = list(csv.reader(io.StringIO(out)))
        assert rows[0] == ["measure", "value"]
        assert float(dict(rows[1:])["maximal_leakage"]) == math.log(2)

    def test_malformed_loss(self, capsys, write_problem):
        doc = {
            "instances": ["0", "1"], "hypotheses": ["0", "1"], "p_z": [0.5, 0.5],
            "loss": [[0, 1], [1]], "learner": {"kind": "gibbs", "beta": 1}, "n": 1,
        }
        code, _, err = run(capsys, "measures", "--problem", write_problem(doc))
        assert code == EXIT_USAGE
        assert "'loss'" in err and "line" in err

    def test_budget(self, capsys, write_problem):
        path = write_problem(golden.extended_gibbs(2, 2.0))
        code, _, err = run(capsys, "measures", "--problem", path, "--n", 15)
        assert code == EXIT_USAGE and "enumeration too large" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "measures", "--problem", tmp_path / "none.json")
        assert code == EXIT_USAGE

    def test_out_file(self, capsys, copy_file, tmp_path):
        target = tmp_path / "m.json"
        code, out, _ = run(capsys, "measures", "--problem", copy_file, "--out", target)
        assert code == EXIT_OK and out == ""
        assert "mutual_information" in json.loads(target.read_text())


class TestBound:
    def test_moment(self, capsys, copy_file):
        _, out, _ = run(capsys, "bound", "--problem", copy_file, "--bound", "single_draw_moment",
                        "--delta", 0.1, "--m", 2)
        doc = json.loads(out)
        assert doc["epsilon"] == pytest.approx(1.358102, abs=5e-7)
        assert doc["params"]["m"] == 2.0

    def test_strong_converse_optimize(self, capsys, copy_file):
        _, out, _ = run(capsys, "bound", "--problem", copy_file, "--bound", "strong_converse",
                        "--gamma", "optimize", "--delta", 0.1)
        doc = json.loads(out)
        assert doc["epsilon"] == pytest.approx(1.358102, abs=5e-7)
        assert doc["detail"]["gamma"] == pytest.approx(0.693147, abs=5e-7)
        assert doc["detail"]["gamma_policy"] == "optimized"

    def test_alpha_one(self, capsys, copy_file):
        code, _, err = run(capsys, "bound", "--problem", copy_file, "--bound", "baseline_alpha",
                           "--alpha", 1, "--delta", 0.1)
        assert code == EXIT_USAGE and "alpha out of range" in err

    def test_infeasible_is_data(self, capsys, copy_file):
        code, out, _ = run(capsys, "bound", "--problem", copy_file, "--bound", "strong_converse",
                           "--gamma", math.log(2), "--delta", 0.1)
        doc = json.loads(out)
        assert code == EXIT_OK
        assert doc["epsilon"] == "inf" and doc["feasible"] is False

    def test_m_inf_routing(self, capsys, copy_file):
        _, out, _ = run(capsys, "bound", "--problem", copy_file, "--bound", "single_draw_moment",
                        "--delta", 0.1, "--m", "inf")
        assert json.loads(out)["bound_id"] == "single_draw_m_inf"

    def test_degenerate_sigma_flag(self, capsys, write_problem):
        path = write_problem(golden.independent(constant_loss=True))
        _, out, _ = run(capsys, "bound", "--problem", path, "--bound", "average")
        assert json.loads(out)["detail"]["sigma_degenerate"] is True

    def test_epsilon_scale(self, capsys, copy_file):
        args = ["bound", "--problem", copy_file, "--bound", "single_draw_leakage", "--delta", 0.1]
        full = json.loads(run(capsys, *args)[1])["epsilon"]
        half = json.loads(run(capsys, *args, "--epsilon-scale", 0.5)[1])["epsilon"]
        assert half == full * 0.5

    @pytest.mark.parametrize("bad", [["--delta", "1.5"], ["--delta", "nan"], ["--m", "0"]])
    def test_invalid_params(self, capsys, copy_file, bad):
        code, _, _ = run(capsys, "bound", "--problem", copy_file, "--bound", "single_draw_moment",
                         "--delta", 0.1, "--m", 2, *bad)
        assert code == EXIT_USAGE

    def test_unknown_bound(self, capsys, copy_file):
        code, _, err = run(capsys, "bound", "--problem", copy_file, "--bound", "nope")
        assert code == EXIT_USAGE and "invalid choice" in err

    def test_csv(self, capsys, copy_file):
        _, out, _ = run(capsys, "bound", "--problem", copy_file, "--bound", "average", "--format", "csv")
        rows = dict(list(csv.reader(io.StringIO(out)))[1:])
        assert float(rows["epsilon"]) == pytest.approx(math.sqrt(0.5 * math.log(2)))


class TestVerify:
    def test_gibbs_passes(self, capsys, gibbs_file):
        code, out, _ = run(capsys, "verify", "--problem", gibbs_file)
        assert code == EXIT_OK and json.loads(out)["passed"] is True

    def test_negative_control(self, capsys, gibbs_file):
        code, out, _ = run(capsys, "verify", "--problem", gibbs_file, "--epsilon-scale", 0.5)
        assert code == EXIT_FAIL and json.loads(out)["passed"] is False

    def test_independent(self, capsys, indep_file):
        code, _, _ = run(capsys, "verify", "--problem", indep_file)
        assert code == EXIT_OK

    def test_subset_and_grid(self, capsys, gibbs_file):
        _, out, _ = run(capsys, "verify", "--problem", gibbs_file, "--suite", "ordering,coverage",
                        "--delta-grid", "0.2")
        doc = json.loads(out)
        assert set(doc["checks"]) == {"ordering", "coverage"}
        assert {row["delta"] for row in doc["checks"]["coverage"]} == {0.2}

    def test_unknown_check(self, capsys, gibbs_file):
        code, _, err = run(capsys, "verify", "--problem", gibbs_file, "--suite", "theorem2")
        assert code == EXIT_USAGE and "unknown check" in err

    def test_budget_needs_mc(self, capsys, write_problem):
        path = write_problem(golden.extended_gibbs(2, 2.0))
        code, _, err = run(capsys, "verify", "--problem", path, "--n", 15)
        assert code == EXIT_USAGE and "--mc" in err

    def test_mc_beyond_budget(self, capsys, write_problem):
        path = write_problem(golden.extended_gibbs(2, 2.0))
        argv = ["verify", "--problem", path, "--n", 15, "--mc", "--bound", "single_draw_leakage",
                "--epsilon", 0.4, "--samples", 2000, "--seed", 9]
        code, out, _ = run(capsys, *argv)
        assert code == EXIT_OK
        assert json.loads(out)["monte_carlo"]["samples"] == 2000
        assert run(capsys, *argv)[1] == out

    def test_mc_beyond_budget_needs_epsilon(self, capsys, write_problem):
        path = write_problem(golden.extended_gibbs(2, 2.0))
        code, _, err = run(capsys, "verify", "--problem", path, "--n", 15, "--mc",
                           "--bound", "single_draw_leakage")
        assert code == EXIT_USAGE and "--epsilon" in err

    def test_mc_not_estimable(self, capsys, gibbs_file):
        code, _, err = run(capsys, "verify", "--problem", gibbs_file, "--suite", "ordering", "--mc",
                           "--bound", "pac_bayes_data", "--samples", 1000)
        assert code == EXIT_USAGE and "not MC-estimable" in err


class TestSweep:
    def test_delta_sweep(self, capsys, copy_file):
        _, out, _ = run(capsys, "sweep", "--problem", copy_file, "--axis", "delta",
                        "--values", "0.5,0.2,0.1,0.05,0.01",
                        "--bounds", "baseline_mi,single_draw_moment(m=2),single_draw_leakage")
        rows = list(csv.DictReader(io.StringIO(out)))
        assert list(rows[0]) == ["axis", "value", "bound_id", "epsilon", "feasible", "I", "M_m", "L", "I_max", "reason"]
        assert len(rows) == 15
        eps = {}
        for r in rows:
            eps.setdefault(r["bound_id"], []).append(float(r["epsilon"]))
        growth = {b: v[-1] / v[0] for b, v in eps.items()}
        assert max(growth, key=growth.get) == "baseline_mi"

    def test_m_sweep_monotone(self, capsys, copy_file):
        _, out, _ = run(capsys, "sweep", "--problem", copy_file, "--axis", "m", "--values", "1,2,4,8,inf",
                        "--bounds", "single_draw_moment", "--delta", 0.1)
        rows = list(csv.DictReader(io.StringIO(out)))
        eps = [float(r["epsilon"]) for r in rows]
        assert all(a >= b for a, b in zip(eps, eps[1:]))
        assert rows[-1]["bound_id"] == "single_draw_m_inf" and rows[-1]["value"] == "inf"

    def test_invalid_cell(self, capsys, copy_file):
        _, out, _ = run(capsys, "sweep", "--problem", copy_file, "--axis", "delta", "--values", "0.1,1.5",
                        "--bounds", "baseline_mi")
        rows = list(csv.DictReader(io.StringIO(out)))
        assert rows[1]["feasible"] == "false" and rows[1]["reason"]

    def test_empty_values(self, capsys, copy_file):
        code, _, err = run(capsys, "sweep", "--problem", copy_file, "--axis", "delta", "--values", "",
                           "--bounds", "baseline_mi")
        assert code == EXIT_USAGE and "nonempty" in err

    def test_sweep_file_and_workers(self, capsys, gibbs_file, tmp_path):
        sweep = tmp_path / "sweep.json"
        sweep.write_text(json.dumps({"axis": "n", "values": [1, 2, 3, 0.5], "fixed": {"delta": 0.05},
                                     "bounds": ["strong_converse", "rederived_moment(m=4)"]}))
        one = run(capsys, "sweep", "--problem", gibbs_file, "--sweep", sweep)[1]
        four = run(capsys, "sweep", "--problem", gibbs_file, "--sweep", sweep, "--workers", 4)[1]
        assert one == four
        rows = list(csv.DictReader(io.StringIO(one)))
        assert [r["value"] for r in rows] == ["1.0", "1.0", "2.0", "2.0", "3.0", "3.0", "0.5", "0.5"]
        assert rows[-1]["reason"] == "n must be a positive integer"

    def test_csv_round_trip(self, capsys, gibbs_file):
        _, out, _ = run(capsys, "sweep", "--problem", gibbs_file, "--axis", "beta", "--values", "0.3,1,7",
                        "--bounds", "single_draw_leakage")
        from infobounds.bounds import single_draw_leakage_bound

        rows = list(csv.DictReader(io.StringIO(out)))
        for r in rows:
            model = golden.gibbs_golden().with_learner(beta=float(r["value"])).build()
            assert float(r["epsilon"]) == single_draw_leakage_bound(model, 0.1, 0.5, 2).epsilon


class TestTokens:
    def test_parse(self):
        assert parse_bound_token("single_draw_moment(m=2)") == ("single_draw_moment", {"m": 2.0})
        assert parse_bound_token("single_draw_moment(m=inf)")[1]["m"] == math.inf
        assert parse_bound_token(" strong_converse(gamma=optimize) ")[1] == {"gamma": "optimize"}

    @pytest.mark.parametrize("bad", ["nope", "baseline_alpha(beta=2)", "single_draw_moment(m=2"])
    def test_invalid(self, bad):
        with pytest.raises(Exception):
            parse_bound_token(bad)


def test_console_script_deterministic(copy_file):
    cmd = [sys.executable, "-m", "infobounds.cli", "measures", "--problem", copy_file]
    a = subprocess.run(cmd, capture_output=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert a == b and b"mutual_information" in a
