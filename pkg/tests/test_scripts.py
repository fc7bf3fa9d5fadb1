import csv
import io
import runpy
import sys
from pathlib import Path

import pytest

SCRIPTS = Path(__file__).resolve().parents[1] / "scripts"


def _run(name, argv, capsys):
    old = sys.argv
    sys.argv = [name, *argv]
    try:
        with pytest.raises(SystemExit) as exc:
            runpy.run_path(str(SCRIPTS / name), run_name="__main__")
    finally:
        sys.argv = old
    return exc.value.code, list(csv.DictReader(io.StringIO(capsys.readouterr().out)))


def test_regret_sweep_script(capsys):
    code, rows = _run("regret_sweep.py", [str(SCRIPTS / "configs" / "sweep_small.json")], capsys)
    assert code == 0
    assert [r["policy"] for r in rows] == ["etc", "alg1", "alg2", "alg2", "alg3", "alg4"]
    assert all(r["error"] == "" for r in rows)


def test_sq_matrix_script(capsys):
    code, rows = _run("sq_matrix.py", ["--tau", "0.1", "--rho", "0.2", "--delta", "0.01", "--trials", "500"], capsys)
    assert code == 0 and len(rows) == 1 and rows[0]["certified"] == "1"
