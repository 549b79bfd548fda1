import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from qcm.cli import main
from qcm.constructions import generic_confounder
from qcm.demos import DEMOS
from qcm.io import model_to_json, write_json
from qcm.report import compare_reports
from qcm.shipped import fixture_path

GOLDEN = Path(__file__).parent / "golden"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv, "--json")
    return code, json.loads(out)


class TestValidate:
    def test_incoherent_fork_fixture_passes(self, capsys):
        code, out, _ = run(capsys, "validate", fixture_path("fig3_incoherent.json"))
        assert code == 0 and out.strip().endswith("PASS")

    def test_generic_confounder_fixture_fails(self, capsys):
        code, rep = run_json(capsys, "validate", fixture_path("fig7_generic_fail.json"))
        assert code == 1
        assert max(rep["residuals"].values()) > 1e-3

    def test_malformed_json(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{")
        code, _, err = run(capsys, "validate", bad)
        assert code == 2 and "invalid JSON" in err

    def test_missing_file(self, capsys, tmp_path):
        assert run(capsys, "validate", tmp_path / "nope.json")[0] == 2

    def test_channel_file(self, capsys):
        assert run(capsys, "validate", fixture_path("coherent_copy.json"))[0] == 0

    def test_classical_file(self, capsys, tmp_path):
        doc = {"nodes": [{"name": "X", "card": 2}, {"name": "Y", "card": 2}], "edges": [["X", "Y"]],
               "cpds": [{"target": "X", "table": [0.5, 0.5]},
                        {"target": "Y", "parents": ["X"], "table": [[0.9, 0.2], [0.1, 0.8]]}]}
        path = tmp_path / "c.json"
        write_json(path, doc)
        assert run(capsys, "validate", path)[0] == 0


class TestQci:
    def test_incoherent_copy(self, capsys):
        code, rep = run_json(capsys, "qci", fixture_path("incoherent_copy.json"))
        assert code == 0
        assert rep["blocks"] == [[1, 1], [1, 1]]
        assert all(rep["details"]["verdicts"].values())

    def test_coherent_copy(self, capsys):
        code, rep = run_json(capsys, "qci", fixture_path("coherent_copy.json"))
        assert code == 1
        assert not any(rep["details"]["verdicts"].values())
        assert rep["residuals"]["cmi"] == pytest.approx(1.0, abs=1e-9)

    def test_condition4_fixture(self, capsys):
        code, rep = run_json(capsys, "qci", fixture_path("condition4_seed0.json"), "--mode", "decompose")
        assert code == 0
        assert rep["residuals"]["reconstruction"] <= 1e-8

    def test_three_outputs(self, capsys):
        code, rep = run_json(capsys, "qci", fixture_path("incoherent_copy3.json"))
        assert code == 0 and rep["blocks"] == [[1, 1, 1], [1, 1, 1]]

    @pytest.mark.parametrize("mode", ["factorization", "cmi"])
    def test_single_mode(self, capsys, mode):
        code, rep = run_json(capsys, "qci", fixture_path("incoherent_copy.json"), "--mode", mode)
        assert code == 0 and list(rep["details"]["verdicts"]) == [mode]

    def test_model_file_is_not_a_channel(self, capsys):
        assert run(capsys, "qci", fixture_path("fig3_incoherent.json"))[0] == 2


class TestDecomposeDilate:
    def test_decompose(self, capsys):
        code, rep = run_json(capsys, "decompose", fixture_path("condition4_seed0.json"))
        assert code == 0 and rep["seed"] == 0 and "basis" in rep["details"]

    def test_decompose_fails_on_coherent(self, capsys):
        assert run(capsys, "decompose", fixture_path("coherent_copy.json"))[0] == 1

    def test_dilate(self, capsys):
        code, rep = run_json(capsys, "dilate", fixture_path("incoherent_copy.json"))
        assert code == 0
        assert rep["residuals"]["reproduction"] <= 1e-8

    def test_dilate_fails_on_coherent(self, capsys):
        assert run(capsys, "dilate", fixture_path("coherent_copy.json"))[0] == 1


class TestProbs:
    def test_incoherent_fork(self, capsys):
        code, rep = run_json(capsys, "probs", fixture_path("fig3_incoherent.json"))
        assert code == 0
        p = rep["probabilities"]
        assert p["0,0"] == pytest.approx(0.5) and p["1,1"] == pytest.approx(0.5)
        assert p["0,1"] == pytest.approx(0, abs=1e-12)

    def test_plan_omitting_nodes(self, capsys):
        code, rep = run_json(capsys, "probs", fixture_path("fig3_incoherent.json"),
                             "--plan", fixture_path("plan_b_only.json"))
        assert code == 0
        assert rep["details"]["nodes"] == ["B"]
        assert sum(rep["probabilities"].values()) == pytest.approx(1)

    def test_repreparation(self, capsys):
        code, rep = run_json(capsys, "probs", fixture_path("chain_reprepare.json"))
        assert code == 0
        assert rep["probabilities"]["do1,1"] == pytest.approx(1)

    def test_coherent_x_plan(self, capsys):
        code, rep = run_json(capsys, "probs", fixture_path("coherent_fork.json"),
                             "--plan", fixture_path("plan_x_basis.json"))
        assert code == 0
        assert rep["probabilities"]["+,+"] == pytest.approx(0.5)
        assert rep["probabilities"]["+,-"] == pytest.approx(0, abs=1e-12)

    def test_invalid_model(self, capsys, tmp_path):
        path = tmp_path / "m.json"
        write_json(path, model_to_json(generic_confounder(np.random.default_rng(1))))
        assert run(capsys, "probs", path)[0] == 1


class TestUpdate:
    def test_incoherent(self, capsys):
        code, rep = run_json(capsys, "update", fixture_path("fig3_incoherent.json"), "--observed", "B=0")
        assert code == 0
        assert rep["probabilities"]["0"] == pytest.approx(1)

    def test_coherent_x(self, capsys):
        code, rep = run_json(capsys, "update", fixture_path("coherent_fork.json"), "--observed", "B=-")
        assert code == 0
        assert rep["probabilities"]["-"] == pytest.approx(1)

    def test_bad_observation_syntax(self, capsys):
        assert run(capsys, "update", fixture_path("fig3_incoherent.json"), "--observed", "B")[0] == 2

    def test_non_fork_model_rejected(self, capsys):
        assert run(capsys, "update", fixture_path("chain_reprepare.json"), "--observed", "B=0")[0] == 1


@pytest.mark.parametrize("name", sorted(DEMOS))
def test_demo_matches_golden(capsys, name):
    code, rep = run_json(capsys, "demo", name, "--seed", "0")
    assert code == 0 and rep["passed"]
    golden = json.loads((GOLDEN / f"{name}.json").read_text())
    assert compare_reports(rep, golden, tol=1e-9) == []


def test_json_flag_before_subcommand(capsys):
    code = main(["--json", "demo", "cnot-influence"])
    assert code == 0 and json.loads(capsys.readouterr().out)["passed"]


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "qcm", "demo", "cnot-influence"], capture_output=True, text=True)
    assert out.returncode == 0
    assert out.stdout.strip().endswith("PASS")
