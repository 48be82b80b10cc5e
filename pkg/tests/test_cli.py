import json
import shutil
import subprocess
import sys

import pytest

from heckeendo.cli import main
from heckeendo.goldens import check_demazure_sign


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv, "--format", "json")
    return code, json.loads(out)


def test_analyze_json(capsys):
    code, rep = run_json(capsys, "analyze", "--preset", "klein")
    assert code == 0
    assert rep["schema_version"] == 1
    assert rep["cosets"]["size"] == 6
    assert rep["verdict"] == "irreducible"
    assert rep["congruence"]["block_bound"] == 1
    assert rep["errors"] == []
    assert "timings" not in rep
    # two factors -beta^2, with a3 = 2 w2 - a1 - 2 a2 in this basis
    assert rep["torsion"]["x_P"] == "(a1)^2 * (-a1 - 2*a2 + 2*w2)^2"


def test_analyze_timings_and_text(capsys):
    code, rep = run_json(capsys, "analyze", "--preset", "a2-p3", "--timings")
    assert code == 0 and "first_column_space" in rep["timings"]
    code, text, _ = run(capsys, "analyze", "--preset", "a2-p3", "--oracle")
    assert code == 0
    assert "oracle:" in text


def test_analyze_deterministic(capsys):
    a = run(capsys, "analyze", "--preset", "a3-p2", "--oracle", "--localized", "--format", "json")[1]
    b = run(capsys, "analyze", "--preset", "a3-p2", "--oracle", "--localized", "--format", "json")[1]
    assert a == b


def test_oracle_refusal_is_an_error(capsys):
    code, rep = run_json(capsys, "analyze", "--preset", "so8", "--oracle")
    assert code == 1
    assert any(e.startswith("oracle:") for e in rep["errors"])
    assert "oracle" not in rep


def test_oracle_needs_prime(capsys):
    code, rep = run_json(capsys, "analyze", "--type", "A", "--rank", "2", "--parabolic", "2",
                         "--prime", "Z", "--oracle")
    assert code == 1 and rep["errors"] == ["oracle: needs a prime"]
    assert rep["config"]["prime"] is None


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "case.cfg"
    cfg.write_text("# a comment\ntype = A\nrank = 3\nparabolic = 2,3\nprime = 3\n")
    code, rep = run_json(capsys, "analyze", "--config", str(cfg))
    assert code == 0
    assert rep["config"]["rank"] == 3 and rep["config"]["prime"] == 3
    code, rep = run_json(capsys, "analyze", "--config", str(cfg), "--prime", "2", "--parabolic", "1,3")
    assert rep["config"]["prime"] == 2 and rep["config"]["parabolic"] == [1, 3]


def test_bad_config(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    code, _, err = run(capsys, "analyze", "--config", str(cfg))
    assert code == 2 and "cannot read" in err
    code, _, err = run(capsys, "analyze", "--prime", "4")
    assert code == 2 and "not prime" in err
    code, _, err = run(capsys, "analyze", "--type", "A", "--rank", "2", "--parabolic", "5")
    assert code == 2
    code, _, err = run(capsys, "analyze", "--type", "E", "--rank", "5")
    assert code == 2
    code, _, err = run(capsys, "analyze", "--preset", "nope")
    assert code == 2 and "unknown preset" in err


def test_custom_lattice_file(tmp_path, capsys):
    f = tmp_path / "weights.lat"
    f.write_text("labels = w1, w2\nroot1 = 2, -1\nroot2 = -1, 2\npairing1 = 1, 0\npairing2 = 0, 1\n")
    code, rep = run_json(capsys, "analyze", "--type", "A", "--rank", "2", "--parabolic", "2",
                         "--lattice", str(f), "--prime", "3")
    assert code == 0
    assert rep["lattice"] == {"name": "weights", "labels": ["w1", "w2"]}
    code, _, err = run(capsys, "analyze", "--lattice", str(tmp_path / "missing.lat"))
    assert code == 2 and "unknown lattice" in err


def test_hasse_and_coset_table(capsys):
    code, rep = run_json(capsys, "hasse", "--type", "A", "--rank", "2", "--parabolic", "2")
    assert code == 0
    assert [c["name"] for c in rep["cosets"]["classes"]] == ["1", "s1", "s2s1"]
    code, rep = run_json(capsys, "coset-table", "--preset", "a5-p2")
    assert rep["classes"][1] == "s1"
    assert rep["table"][0] == [0, 1, 2, 3, 4, 5]
    code, text, _ = run(capsys, "coset-table", "--preset", "a2-p3")
    assert text.splitlines()[0] == "1 s1 s2s1"


def test_demazure_image(capsys):
    code, rep = run_json(capsys, "demazure-image", "--type", "A", "--rank", "3", "--parabolic", "",
                         "--prime", "2", "--word", "3,2,1", "--degree", "3")
    assert code == 0 and rep["basis"] == ["1"]
    code, rep = run_json(capsys, "demazure-image", "--type", "A", "--rank", "3", "--prime", "2",
                         "--word", "2,1,3", "--degree", "3")
    assert rep["basis"] == []
    code, _, err = run(capsys, "demazure-image", "--prime", "Z", "--word", "1", "--degree", "1")
    assert code == 2


def test_emit_localized(capsys):
    code, text, _ = run(capsys, "emit-localized", "--type", "A", "--rank", "2", "--parabolic", "2")
    assert code == 0
    assert "a1 | b0 - b1" in text
    code, rep = run_json(capsys, "emit-localized", "--type", "A", "--rank", "2", "--parabolic", "2",
                         "--uncleared", "--all-classes")
    assert len(rep["equations"]) == 3
    assert rep["unknowns"] == ["c0", "c1"]


def test_membership_exit_codes(capsys):
    base = ["membership", "--type", "A", "--rank", "2", "--parabolic", "2"]
    code, rep = run_json(capsys, *base, "--value", "1=a1^2*(a1+a2)^2")
    assert code == 0 and rep["passed"]
    code, rep = run_json(capsys, *base, "--value", "1=a1")
    assert code == 1
    assert ["1", "a1 + a2"] in rep["failures"]
    code, rep = run_json(capsys, *base, "--value", "1=a1", "--narrow")
    assert code == 0
    code, _, err = run(capsys, *base, "--value", "s9=a1")
    assert code == 2


def test_list_presets(capsys):
    code, rep = run_json(capsys, "list-presets")
    assert code == 0
    assert {"klein", "hspin8", "pgo8", "so8", "a5-p2", "a5-p3"} <= set(rep["cases"])
    assert "D4-HSpin8" in rep["lattices"]


def test_flipped_sign_fixture_fails():
    assert all(r.passed for r in check_demazure_sign())
    flipped = check_demazure_sign(sign=-1)
    assert flipped and not any(r.passed for r in flipped)


def test_reproduce_exit_status_reflects_rows(capsys, monkeypatch):
    import heckeendo.cli as cli
    monkeypatch.setattr(cli, "run_goldens", lambda: check_demazure_sign())
    code, rep = run_json(capsys, "reproduce-paper")
    assert code == 0 and rep["all_passed"]
    monkeypatch.setattr(cli, "run_goldens", lambda: check_demazure_sign(sign=-1))
    code, text, _ = run(capsys, "reproduce-paper")
    assert code == 1
    assert "FAIL" in text and "expected" in text


def test_out_file(tmp_path, capsys):
    out = tmp_path / "r.json"
    code, text, _ = run(capsys, "hasse", "--preset", "a1-p2", "--format", "json", "--out", str(out))
    assert code == 0 and text == ""
    assert json.loads(out.read_text())["cosets"]["size"] == 2


@pytest.mark.skipif(shutil.which("heckeendo") is None, reason="console script not installed")
def test_console_script():
    r = subprocess.run(["heckeendo", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "heckeendo" in r.stdout


def test_module_entry():
    r = subprocess.run([sys.executable, "-m", "heckeendo.cli", "list-presets"], capture_output=True, text=True)
    assert r.returncode == 0 and "klein" in r.stdout
