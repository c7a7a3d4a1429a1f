import io
import subprocess
import sys
import time

import pytest

from nonexpansive.cli import main


def run(argv, tmp_path):
    out = io.StringIO()
    code = main([*argv, "--out-dir", str(tmp_path)], stdout=out)
    return code, out.getvalue()


def test_table1_default(tmp_path):
    start = time.perf_counter()
    code, out = run(["table1"], tmp_path)
    assert time.perf_counter() - start < 1.0
    assert code == 0
    row10 = next(l for l in out.splitlines() if l.split()[:1] == ["10"])
    assert row10.split() == ["10", "0.000268547", "9.66018e-6"]
    assert "golden check passed: 40 cells" in out
    assert "seed = 0" in out
    for name in ("table1.csv", "table1_noor.dat", "table1_thakur.dat", "table1.config"):
        assert (tmp_path / name).exists()
    assert (tmp_path / "table1.csv").read_bytes().count(b"\r") == 0


def test_table1_single_row(tmp_path):
    code, out = run(["table1", "--iterations", "1"], tmp_path)
    assert code == 0
    rows = [l.split() for l in out.splitlines() if l and not l.startswith(("#", "  n"))]
    assert rows == [["1", "0.9", "0.9"]]


def test_table1_from_fixed_point(tmp_path):
    code, out = run(["table1", "--x1", "0"], tmp_path)
    assert code == 0
    assert "golden check skipped" in out
    rows = [l.split() for l in out.splitlines() if l and l[0] == " " and not l.strip().startswith("n")]
    assert all(r[1:] == ["0", "0"] for r in rows) and len(rows) == 20


def test_table1_csv_format(tmp_path):
    code, out = run(["table1", "--format", "csv"], tmp_path)
    assert code == 0
    assert out.splitlines()[0] == "n,noor,thakur"


def test_run_thakur(tmp_path):
    code, out = run(
        ["run", "--scheme", "thakur", "--map", "paper_example", "--x1", "0.9",
         "--a", "0.85", "--b", "0.65", "--c", "0.45", "--n", "20"], tmp_path)
    assert code == 0
    final = float(next(l for l in out.splitlines() if l.startswith("final_x")).split("=")[1])
    assert f"{final:.6g}" == "2.90796e-11"
    assert "stop_reason = max_iterations" in out
    assert (tmp_path / "trace_thakur.csv").read_text().startswith("n,x,residual,error\n")


def test_run_picard_expression(tmp_path):
    # N is the index of the last iterate, so ten halvings of x_1 = 1 give x_11
    code, out = run(["run", "--scheme", "picard", "--map-expr", "x/2", "--domain", "0,1",
                     "--x1", "1", "--n", "11"], tmp_path)
    assert code == 0
    assert f"final_x = {2.0**-10:.17g}" in out


def test_run_rejects_x1_outside(tmp_path, capsys):
    code, _ = run(["run", "--scheme", "noor", "--map", "paper_example", "--x1", "2"], tmp_path)
    assert code == 2
    assert "outside the domain" in capsys.readouterr().err


def test_run_strict_schedule(tmp_path):
    code, out = run(["run", "--map", "paper_example", "--x1", "0.9", "--strict-schedule"], tmp_path)
    assert code == 0 and "equal_parameter_constraint = violated" in out
    code, out = run(["run", "--map", "paper_example", "--x1", "0.9", "--a", "0.7", "--b", "0.7",
                     "--c", "0.7", "--strict-schedule"], tmp_path)
    assert "equal_parameter_constraint = holds" in out


def test_run_bad_schedule(tmp_path, capsys):
    code, _ = run(["run", "--map", "paper_example", "--x1", "0.9", "--a", "1.2"], tmp_path)
    assert code == 2
    assert "outside the open interval" in capsys.readouterr().err


def test_check_condition_C(tmp_path):
    code, out = run(["check", "--condition", "C", "--map", "paper_example", "--seed", "7"], tmp_path)
    assert code == 1
    assert "witness.x = (1)" in out
    assert "witness.y = (0.80000000000000004)" in out


def test_check_Da_two_thirds(tmp_path):
    code, out = run(["check", "--condition", "Da", "--a", "0.6666666666666666",
                     "--map", "paper_example"], tmp_path)
    assert code == 0
    assert "verdict = no_counterexample_found" in out


def test_check_quasi_identity(tmp_path):
    code, _ = run(["check", "--condition", "quasi", "--map", "identity"], tmp_path)
    assert code == 0


def test_check_I_needs_h(tmp_path):
    code, _ = run(["check", "--condition", "I", "--map", "paper_example"], tmp_path)
    assert code == 2


@pytest.mark.parametrize("argv", [[], ["bogus"], ["run", "--n", "abc"], ["check", "--condition", "Z"]])
def test_usage_errors(argv):
    assert main(argv, stdout=io.StringIO()) == 2


def test_unknown_mapping(tmp_path):
    code, _ = run(["run", "--map", "nope", "--x1", "0.5"], tmp_path)
    assert code == 2


def test_compare(tmp_path):
    code, out = run(["compare", "--schemes", "picard,mann,noor,thakur", "--map", "paper_example",
                     "--x1", "0.9", "--n", "15"], tmp_path)
    assert code == 0
    assert out.splitlines()[0].split() == ["n", "picard", "mann", "noor", "thakur"]
    assert "# thakur: rate = " in out
    assert (tmp_path / "compare_mann.dat").exists()


def test_rerun_from_emitted_config(tmp_path):
    first, second = tmp_path / "first", tmp_path / "second"
    argv = ["run", "--scheme", "noor", "--map-expr", "x < 0.5 ? x/3 : x/2", "--domain", "0,1",
            "--fixed-points", "0", "--x1", "0.7", "--a", "1/(n+1)", "--n", "30", "--seed", "5"]
    code, out1 = run(argv, first)
    assert code == 0
    config = first / "run.config"
    text = config.read_text()
    assert "[mapping]" in text and "seed = 5" in text
    code, out2 = run(["run", "--config", str(config)], second)
    assert code == 0
    assert out1 == out2
    assert (first / "trace_noor.csv").read_bytes() == (second / "trace_noor.csv").read_bytes()


def test_rerun_check_from_config(tmp_path):
    code, out1 = run(["check", "--condition", "Da", "--a", "0.51", "--map", "paper_example",
                      "--budget", "200", "--seed", "3"], tmp_path / "a")
    code2, out2 = run(["check", "--config", str(tmp_path / "a" / "check.config")], tmp_path / "b")
    assert code == code2 == 1
    assert out1 == out2


def test_config_file_with_mapping_and_run(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(
        "[mapping]\nid = pe\ndim = 1\ndomain = 0,1\nexpr = x == 1 ? 5/8 : x/2\nfixed_points = 0\n\n"
        "[run]\ncommand = run\nmap = pe\nscheme = thakur\nx1 = 0.9\nn = 20\n"
    )
    code, out = run(["run", "--config", str(cfg)], tmp_path / "o")
    assert code == 0
    final = float(next(l for l in out.splitlines() if l.startswith("final_x")).split("=")[1])
    assert f"{final:.6g}" == "2.90796e-11"
    # flags override config values
    code, out = run(["run", "--config", str(cfg), "--scheme", "noor"], tmp_path / "o")
    final = float(next(l for l in out.splitlines() if l.startswith("final_x")).split("=")[1])
    assert f"{final:.6g}" == "3.25168e-08"
    # a config written for another subcommand is refused
    code, _ = run(["check", "--config", str(cfg)], tmp_path / "o")
    assert code == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "nonexpansive", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "table1" in proc.stdout and "check" in proc.stdout
