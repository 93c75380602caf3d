import json
import subprocess
import sys
from pathlib import Path

import pytest

from teleplan import cli
from teleplan import plansearch as ps
from teleplan import statekit as sk
from teleplan import stateparse as sp
from teleplan.errors import NumericError

MALFORMED = sorted((Path(__file__).parent / "data" / "malformed").glob("*.txt"))


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_proc(*argv):
    return subprocess.run([sys.executable, "-m", "teleplan", *argv], capture_output=True, text=True,
                          check=False)


# -- entropies ---------------------------------------------------------------------


def test_entropies_ghz4(capsys):
    code, out, _ = run(capsys, "entropies", "-e", "ghz(4)")
    assert code == 0
    rows = out.strip().splitlines()
    assert len(rows) == 14
    assert all(r.split()[-1] == "1.000000000" for r in rows)
    assert rows[0].split()[0] == "A" and rows[-1].split()[0] == "B,C,D"


def test_entropies_toast4(capsys):
    code, out, _ = run(capsys, "entropies", "--family", "toast", "4", "--format", "doc")
    assert code == 0
    doc = json.loads(out)
    for row in doc["entropies"]:
        m = len(row["subset"])
        assert row["ebits"] == pytest.approx(m * (4 - m), abs=1e-9)


def test_entropies_cell_granularity(capsys):
    code, out, _ = run(capsys, "entropies", "-e", "toast(3)", "--granularity", "cell")
    assert code == 0
    assert len(out.strip().splitlines()) == 62
    assert "A1,B1" in out


def test_entropies_state_file(tmp_path, capsys):
    f = tmp_path / "bell.txt"
    f.write_text(sp.render(sk.epr()))
    code, out, _ = run(capsys, "entropies", "--state", str(f))
    assert code == 0 and out.split() == ["A", "1.000000000", "B", "1.000000000"]


@pytest.mark.parametrize("path", MALFORMED, ids=lambda p: p.stem)
def test_malformed_exit_1(path, capsys):
    code, out, err = run(capsys, "entropies", "--state", str(path))
    assert code == 1
    assert out == ""
    assert err.startswith("parse error: ")
    assert err.split(": ")[1].count(":") == 1  # line:col


# -- plan -------------------------------------------------------------------------


def test_plan_bundle4(capsys):
    code, out, _ = run(capsys, "plan", "--protocol", "p1", "-e", "pairs(A-B,B-C,B-C,C-D)", "--format", "doc")
    assert code == 0
    doc = json.loads(out)
    assert doc["total_ebits"] == pytest.approx(4.0, abs=1e-9)
    assert doc["protocol"] == "P1"
    assert "naive_baseline" in doc


def test_plan_bundle4_rooted_at_c(capsys):
    code, out, _ = run(capsys, "plan", "--family", "bundle4", "--root", "C")
    assert code == 0
    assert "{A,B} C -> B  2.000000000" in out
    assert "total_ebits 4.000000000" in out
    assert "naive(C) 5.000000000" in out


def test_plan_p2_toast3(capsys):
    code, out, _ = run(capsys, "plan", "--protocol", "p2", "-e", "toast(3)", "--format", "doc")
    doc = json.loads(out)
    assert code == 0
    assert doc["total_ebits"] == pytest.approx(3.0, abs=1e-9)
    assert len(doc["steps"]) == 3
    assert all(s["cost_ebits"] == pytest.approx(1.0, abs=1e-9) for s in doc["steps"])


def test_plan_ghz5(capsys):
    code, out, _ = run(capsys, "plan", "--protocol", "p1", "-e", "ghz(5)")
    assert code == 0 and "total_ebits 4.000000000" in out


def test_plan_naive_root(capsys):
    code, out, _ = run(capsys, "plan", "--protocol", "naive", "--family", "bundle4", "--root", "C")
    assert code == 0 and "total_ebits 5.000000000" in out


def test_plan_route_party(capsys):
    code, out, _ = run(capsys, "plan", "--protocol", "route", "-e", "toast(3)")
    assert code == 0 and "total_ebits 4.000000000" in out


def test_plan_p3_with_embedding_file(tmp_path, capsys):
    s = sk.epsilon_toast(0.0)
    f = tmp_path / "emb.txt"
    f.write_text(sp.format_embeddings([sk.ancilla_embedding_5to8(p) for p in range(3)], s))
    code, out, _ = run(capsys, "plan", "--protocol", "p3", "-e", "etoast(0)", "--embeddings", str(f),
                       "--prune", "on")
    assert code == 0
    assert "layout isometry-extended" in out
    assert "total_ebits 3.000000000" in out


def test_plan_p3_needs_embeddings(capsys):
    code, _, err = run(capsys, "plan", "--protocol", "p3", "-e", "etoast(0)")
    assert code == 1 and "--embeddings" in err


def test_plan_unknown_root(capsys):
    code, _, err = run(capsys, "plan", "-e", "ghz(3)", "--root", "Z")
    assert code == 1 and "unknown party" in err


# -- validate ---------------------------------------------------------------------


def test_validate_ghz_range(capsys):
    code, out, _ = run(capsys, "validate", "ghz", "3..8")
    assert code == 0
    assert out.count("PASS") >= 18 and "FAIL" not in out


def test_validate_toast_range(capsys):
    code, out, _ = run(capsys, "validate", "toast", "3..5")
    assert code == 0 and "FAIL" not in out


def test_validate_etoast_list(capsys):
    code, out, _ = run(capsys, "validate", "etoast", "0,0.001", "--prune", "on")
    assert code == 0 and "FAIL" not in out


def test_emitted_plan_revalidates(tmp_path, capsys):
    for argv in (["-e", "pairs(A-B,B-C,B-C,C-D)"], ["--protocol", "p2", "-e", "toast(3)"],
                 ["--protocol", "naive", "-e", "toast(4)"]):
        code, out, _ = run(capsys, "plan", *argv, "--format", "doc")
        assert code == 0
        f = tmp_path / "plan.json"
        f.write_text(out)
        code, out, _ = run(capsys, "validate", "--plan", str(f))
        assert code == 0, out


def test_tampered_plan_exit_5(tmp_path, capsys):
    _, out, _ = run(capsys, "plan", "--protocol", "p2", "-e", "toast(3)", "--format", "doc")
    doc = json.loads(out)
    doc["total_ebits"] = 2.5
    f = tmp_path / "plan.json"
    f.write_text(json.dumps(doc))
    code, out, _ = run(capsys, "validate", "--plan", str(f))
    assert code == 5
    assert "total mismatch" in out and "recomputed total 3.000000000" in out

    doc = json.loads(f.read_text())
    doc["total_ebits"] = 3.0
    doc["steps"][0]["from"] = "B" if doc["steps"][0]["from"] != "B" else "C"
    f.write_text(json.dumps(doc))
    code, out, _ = run(capsys, "validate", "--plan", str(f))
    assert code == 5 and "cell not at source" in out


def test_validate_malformed_plan_doc(tmp_path, capsys):
    f = tmp_path / "plan.json"
    f.write_text("{not json")
    code, _, _ = run(capsys, "validate", "--plan", str(f))
    assert code == 1


# -- bounds ---------------------------------------------------------------------------


def test_bounds_ghz3(capsys):
    code, out, _ = run(capsys, "bounds", "ghz", "3")
    assert code == 0
    assert out.splitlines()[0] == "1.5 < E_F ≤ 2"
    assert "P1 computed = 2.000000000" in out


def test_bounds_ghz3_doc(capsys):
    code, out, _ = run(capsys, "bounds", "ghz", "3", "--format", "doc")
    doc = json.loads(out)
    assert (doc["lower"], doc["lower_open"], doc["upper"], doc["upper_open"]) == (1.5, True, 2.0, False)


def test_bounds_toast4(capsys):
    code, out, _ = run(capsys, "bounds", "toast", "4")
    assert code == 0
    assert out.splitlines()[0] == "E_F = 6; P1 = 9; ratio P1/E_F = 1.5"


def test_bounds_n1_usage_error(capsys):
    code, _, err = run(capsys, "bounds", "ghz", "1")
    assert code == 1 and err.startswith("usage error")


# -- exit codes -----------------------------------------------------------------------


@pytest.mark.parametrize("argv", [
    [],
    ["plan"],
    ["plan", "-e", "ghz(3)", "--protocol", "p9"],
    ["plan", "-e", "ghz(3)", "--family", "ghz", "3"],
    ["entropies", "-e", "ghz(3)", "--tol", "0"],
    ["entropies", "-e", "ghz(3)", "--workers", "0"],
    ["entropies", "--state", "/nonexistent/file"],
    ["validate"],
    ["validate", "ghz", "x..y"],
])
def test_usage_errors_exit_1(argv, capsys):
    code, _, err = run(capsys, *argv)
    assert code == 1 and err


def test_dimension_cap_exit_2(capsys):
    code, _, err = run(capsys, "entropies", "-e", "ghz(12)", "--max-dim", "1024")
    assert code == 2 and "dimension cap" in err
    code, _, _ = run(capsys, "plan", "--protocol", "p2", "-e", "toast(5)")
    assert code == 2  # 20 cells exceed the route-search limit


def test_numeric_failure_exit_3(capsys, monkeypatch):
    def broken(*a, **k):
        raise NumericError("eigenvalue -1e-3 below tolerance")

    monkeypatch.setattr(sk, "cut_entropy_table", broken)
    code, _, err = run(capsys, "entropies", "-e", "ghz(3)")
    assert code == 3 and "numeric failure" in err


def test_budget_exit_4(capsys, monkeypatch):
    real = ps.route_search

    def tight(state, layout, config=ps.SearchConfig(), **kw):
        cfg = ps.SearchConfig(tol=config.tol, prune=config.prune, max_expanded=3)
        return real(state, layout, cfg, **kw)

    monkeypatch.setattr(ps, "route_search", tight)
    code, _, err = run(capsys, "plan", "--protocol", "route", "-e", "toast(3)", "--granularity", "cell")
    assert code == 4 and "budget" in err


# -- determinism and the installed entry point ------------------------------------------------


def test_doc_output_byte_identical_across_runs_and_workers():
    args = ["plan", "--protocol", "p2", "-e", "toast(3)", "--format", "doc"]
    first = run_proc(*args, "--workers", "1")
    second = run_proc(*args, "--workers", "1")
    third = run_proc(*args, "--workers", "4")
    assert first.returncode == 0
    assert first.stdout == second.stdout == third.stdout


def test_entropies_byte_identical_across_workers(capsys):
    outs = []
    for w in ("1", "3"):
        code, out, _ = run(capsys, "entropies", "--family", "toast", "4", "--workers", w, "--format", "doc")
        assert code == 0
        outs.append(out)
    assert outs[0] == outs[1]


def test_subprocess_parse_error_position():
    r = run_proc("entropies", "-e", "ghz(3")
    assert r.returncode == 1
    assert r.stderr.startswith("parse error: 1:")
    assert r.stdout == ""
