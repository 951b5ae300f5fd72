import json
import os
import subprocess
import sys

import pytest

from mixedlinear.cli import main


def run(*argv):
    return main(list(argv))


def test_gen_writes_instance(tmp_path):
    out = tmp_path / "inst.json"
    assert run("gen", "--p", "4", "--k", "2", "--n", "50", "--seed", "1", "--out", str(out)) == 0
    blob = json.loads(out.read_text())
    assert blob["dataset"]["n"] == 50 and blob["dataset"]["p"] == 4
    assert len(blob["params"]["betas"]) == 2


def test_gen_then_solve(tmp_path, capsys):
    inst = tmp_path / "inst.json"
    run("gen", "--p", "5", "--k", "2", "--n", "600", "--out", str(inst))
    capsys.readouterr()
    assert run("solve", "--data", str(inst), "--init", "oracle") == 0
    report = json.loads(capsys.readouterr().out)
    assert report["termination_reason"] == "exact_recovery"
    assert report["error_report"]["error"] <= 1e-10


def test_solve_generated_instance(capsys):
    assert run("solve", "--p", "5", "--k", "2", "--n", "800") == 0
    report = json.loads(capsys.readouterr().out)
    assert set(report) >= {"estimates", "iterations", "termination_reason", "error_report", "init_error"}


def test_trace_outputs(tmp_path, capsys):
    out = tmp_path / "t.json"
    assert run("trace", "--p", "5", "--k", "2", "--n", "400", "--trials", "3", "--init", "tensor,random",
               "--out", str(out)) == 0
    payload = json.loads(out.read_text())
    assert len(payload["trials"]) == 6
    assert out.with_suffix(".csv").read_text().startswith("cell,trial,init,iteration")
    assert "tensor:" in capsys.readouterr().out


def test_grid_outputs(tmp_path):
    out = tmp_path / "g.csv"
    assert run("grid", "--p", "5", "--k", "2", "--n", "40*p,80*p", "--trials", "3", "--out", str(out)) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 3
    assert lines[1].startswith("200,5,2,3,")
    assert (tmp_path / "g.meta.json").exists()


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"p": 6, "k": 2, "n": 30, "seed": 5}))
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run("gen", "--config", str(cfg), "--out", str(a))
    run("gen", "--config", str(cfg), "--n", "40", "--out", str(b))
    assert json.loads(a.read_text())["dataset"]["n"] == 30
    assert json.loads(b.read_text())["dataset"]["n"] == 40
    assert json.loads(b.read_text())["dataset"]["p"] == 6


def test_bad_arguments_exit_1(tmp_path):
    assert run("gen", "--p", "2", "--k", "3") == 1
    with pytest.raises(SystemExit) as info:
        run("gen", "--bogus")
    assert info.value.code == 1
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"colour": "red"}))
    assert run("gen", "--config", str(cfg)) == 1


def test_numerical_failure_exit_2(tmp_path):
    blob = {"dataset": {"seed": None, "n": 20, "p": 3, "xs": [[1.0, 0.0, 0.0]] * 20, "ys": [0.0] * 20,
                        "labels": [0] * 20}}
    path = tmp_path / "zero.json"
    path.write_text(json.dumps(blob))
    assert run("solve", "--data", str(path), "--k", "2", "--L", "5", "--N", "3") == 2


def test_io_failure_exit_3(tmp_path):
    assert run("gen", "--n", "10", "--out", str(tmp_path / "missing" / "x.json")) == 3
    assert run("solve", "--data", str(tmp_path / "nope.json")) == 3


COMMANDS = {
    "gen": ["--p", "5", "--k", "2", "--n", "200"],
    "solve": ["--p", "5", "--k", "2", "--n", "400"],
    "trace": ["--p", "5", "--k", "2", "--n", "400", "--trials", "2", "--init", "tensor,random"],
    "grid": ["--p", "5", "--k", "2", "--n", "300", "--trials", "2"],
}


def _run_subprocess(command, out, threads, workers, cwd):
    env = dict(os.environ, OMP_NUM_THREADS=str(threads), OPENBLAS_NUM_THREADS=str(threads),
               MKL_NUM_THREADS=str(threads))
    argv = [sys.executable, "-m", "mixedlinear.cli", command, *COMMANDS[command], "--out", out.name,
            "--workers", str(workers)]
    subprocess.run(argv, check=True, env=env, capture_output=True, cwd=cwd)


@pytest.mark.parametrize("command", sorted(COMMANDS))
def test_byte_identical_reruns_across_threads(tmp_path, command):
    name = "out.csv" if command == "grid" else "out.json"
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    _run_subprocess(command, tmp_path / "a" / name, threads=1, workers=1, cwd=tmp_path / "a")
    _run_subprocess(command, tmp_path / "b" / name, threads=4, workers=2, cwd=tmp_path / "b")
    files = sorted(f.name for f in (tmp_path / "a").iterdir())
    assert files == sorted(f.name for f in (tmp_path / "b").iterdir())
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f
