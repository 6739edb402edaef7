import io
import json
import os

import numpy as np
import pytest

from anita import harness, verify
from anita.harness import (
    ConfigError,
    RunConfig,
    build_problem,
    format_trace_csv,
    interpolate_gap,
    main,
    passes_to,
    read_trace_csv,
    run_experiment,
)
from anita.solvers import RunResult, TraceRecord

SMALL = "synth:200,10,3,0.1,0.5"


def test_csv_row_format():
    text = format_trace_csv([TraceRecord(5, 1010, 0.125, 0)], 1000)
    header, row = text.splitlines()
    assert header == "iter,grads,passes,gap,wall_ns"
    assert row == "5,1010,1.01,1.2500000000000000e-01,0"
    assert "\r" not in text


def test_empty_trace_is_header_only():
    assert format_trace_csv([], 10) == "iter,grads,passes,gap,wall_ns\n"


def test_csv_round_trip(tmp_path):
    trace = [TraceRecord(0, 100, 0.6931471805599453, 0), TraceRecord(7, 214, 1.0000000000000002e-17, 12),
             TraceRecord(9, 318, 0.0, 0)]
    path = tmp_path / "t.csv"
    harness.emit_trace_csv(RunResult("gd", np.zeros(1), trace, 318, None, 100), path)
    assert read_trace_csv(path) == trace


def test_read_rejects_other_files(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_trace_csv(path)


def test_emit_to_unwritable_path(tmp_path):
    with pytest.raises(OSError):
        harness.emit_trace_csv(RunResult("gd", np.zeros(1), [], 0, None, 1), tmp_path / "no" / "x.csv")


def test_passes_to_and_interpolation():
    trace = [TraceRecord(0, 100, 1.0), TraceRecord(1, 200, 0.5), TraceRecord(2, 400, 1e-4)]
    assert passes_to(trace, 100, 0.5) == 2.0
    assert passes_to(trace, 100, 1e-3) == 4.0
    assert passes_to(trace, 100, 1e-6) is None
    got = interpolate_gap(trace, np.array([0, 100, 150, 300, 400, 500]))
    np.testing.assert_allclose(got[1:5], [1.0, 0.75, 0.5 + (1e-4 - 0.5) / 2, 1e-4])
    assert np.isnan(got[0]) and np.isnan(got[5])


def test_gd_seed_sweep_has_zero_spread():
    summary = run_experiment(RunConfig(problem=SMALL, algorithms=["gd"], budget_passes=10,
                                       seeds=[1, 2, 3]))
    agg = summary["algorithms"]["gd"]
    assert all(s == 0.0 for s in agg["std_gap"] if s is not None)
    assert summary["schema"] == harness.SCHEMA_VERSION
    assert summary["problem"]["n"] == 200


def test_experiment_files_are_byte_identical(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        run_experiment(RunConfig(problem=SMALL, algorithms=["anita-gc", "svrg"], budget_passes=5,
                                 seeds=[1, 2], log_every=7, out_dir=str(out)))
        outs.append(out)
    names = sorted(os.listdir(outs[0]))
    assert names == ["anita-gc_seed1.csv", "anita-gc_seed2.csv", "summary.json",
                     "svrg_seed1.csv", "svrg_seed2.csv"]
    for name in names:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_parallel_workers_match_serial(tmp_path):
    cfg = dict(problem=SMALL, algorithms=["anita-gc"], budget_passes=5, seeds=[4, 5])
    serial = run_experiment(RunConfig(**cfg))
    parallel = run_experiment(RunConfig(**cfg, workers=2))
    assert json.dumps(serial) == json.dumps(parallel)


def test_fstar_cache_is_used(tmp_path):
    cache = tmp_path / "fstar.txt"
    cfg = RunConfig(problem=SMALL, algorithms=["gd"], budget_passes=2, fstar_cache=str(cache))
    first = run_experiment(cfg)
    assert cache.exists()
    assert run_experiment(cfg)["problem"]["f_star"] == first["problem"]["f_star"]


@pytest.mark.parametrize("kwargs", [
    dict(algorithms=[]),
    dict(algorithms=["sgd"]),
    dict(algorithms=["anita-sc"], lam=0.0),
    dict(lam=-1.0),
    dict(stage1="maybe"),
    dict(seeds=[]),
    dict(budget_passes=0.5),
    dict(grid_step_passes=0),
])
def test_config_validation(kwargs):
    base = dict(problem=SMALL, algorithms=["gd"], budget_passes=2)
    base.update(kwargs)
    with pytest.raises(ConfigError):
        RunConfig(**base)


@pytest.mark.parametrize("spec", ["nope", "synth:1,2", "synth:a,b,c,d,e"])
def test_bad_problem_spec(spec):
    with pytest.raises(ConfigError):
        build_problem(spec)


def test_libsvm_problem_is_normalized(tmp_path):
    path = tmp_path / "d.svm"
    path.write_text("1 1:3 2:4\n-1 2:2\n")
    p = build_problem(f"libsvm:{path}")
    assert p.smoothness_L == pytest.approx(0.25)
    raw = build_problem(f"libsvm:{path}", normalize=False)
    assert raw.smoothness_L == pytest.approx(25 / 4)


def test_cli_run(tmp_path, capsys):
    code = main(["run", "--problem", SMALL, "--algo", "gd,anita-gc", "--budget-passes", "5",
                 "--seeds", "2", "--out", str(tmp_path)])
    assert code == harness.EXIT_OK
    assert "anita-gc" in capsys.readouterr().out
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["problem"]["seeds"] == [0, 1]


@pytest.mark.parametrize("argv", [
    ["run", "--problem", SMALL, "--algo", "anita-sc", "--out", "x"],
    ["run", "--problem", "libsvm:/does/not/exist", "--out", "x"],
    ["run", "--problem", SMALL, "--budget-passes", "0.5", "--out", "x"],
])
def test_cli_config_errors(tmp_path, argv, capsys):
    argv = [a if a != "x" else str(tmp_path) for a in argv]
    assert main(argv) == harness.EXIT_CONFIG
    assert "error" in capsys.readouterr().err


def test_cli_malformed_libsvm(tmp_path):
    bad = tmp_path / "bad.svm"
    bad.write_text("1 2:1 1:1\n")
    assert main(["run", "--problem", f"libsvm:{bad}", "--out", str(tmp_path / "o")]) == harness.EXIT_CONFIG


def test_cli_verify_subset(capsys):
    assert main(["verify", "--only", "1,9"]) == harness.EXIT_OK
    out = capsys.readouterr().out
    assert "[PASS]  1" in out and "[PASS]  9" in out


def test_empty_registry_fails():
    buf = io.StringIO()
    report = verify.verify_suite([], stream=buf)
    assert not report.passed
    assert "no checks registered" in buf.getvalue()


def test_runtime_limit_is_enforced():
    slow = verify.Check(99, "too slow", 0.0, lambda ctx: (True, "ok", "ok"))
    assert not slow.run(verify.Context()).passed


@pytest.mark.slow
def test_inflated_stepsize_is_caught(capsys):
    # the general convex bound check must notice an 8x stepsize
    assert main(["verify", "--only", "5", "--eta-scale", "8"]) == harness.EXIT_CHECK_FAILED
    assert "[FAIL]  5" in capsys.readouterr().out
