import subprocess
import sys

import pytest

from thetanorm import __version__
from thetanorm.cli import decades, number, run


def body(text):
    return [line for line in text.splitlines() if not line.startswith("#")]


def header(text):
    out = {}
    for line in text.splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition("=")
            out[k] = v
    return out


def run_to(tmp_path, name, *argv):
    path = tmp_path / name
    assert run([*argv, "--out", str(path)]) == 0
    return path.read_text()


def test_stream_example(capsys):
    assert run(["stream", "--f", "omega", "--base", "10", "--force-K", "1", "--max", "6"]) == 0
    out = capsys.readouterr().out
    assert body(out) == ["011112"]
    h = header(out)
    assert h["synthetic_K"] == "true" and h["force_K"] == "1" and h["version"] == __version__


def test_census_of_stream(tmp_path):
    run_to(tmp_path, "s.txt", "stream", "--f", "omega", "--base", "10", "--force-K", "1", "--max", "6")
    out = run_to(tmp_path, "c.csv", "census", "--in", str(tmp_path / "s.txt"), "--base", "10", "--k", "1")
    rows = dict(line.split(",")[:2] for line in body(out)[1:-1])
    assert {k: int(v) for k, v in rows.items() if int(v)} == {"0": 1, "1": 4, "2": 1}
    assert body(out)[-1].startswith("TOTAL,6,")
    assert "chi2_per_position" in header(out)


def test_binary_stream_census(tmp_path):
    path = tmp_path / "s.bin"
    assert run(["stream", "--f", "Omega", "--base", "2", "--force-K", "3", "--max", "1000",
                "--format", "binary", "--out", str(path)]) == 0
    assert path.read_bytes()[:2] == b"TD"
    assert "synthetic_K" in header((tmp_path / "s.bin.cfg").read_text())
    text = run_to(tmp_path, "s.txt", "stream", "--f", "Omega", "--base", "2", "--force-K", "3", "--max", "1000")
    a = run_to(tmp_path, "a.csv", "census", "--in", str(path), "--k", "2")
    b = run_to(tmp_path, "b.csv", "census", "--in", str(tmp_path / "s.txt"), "--base", "2", "--k", "2")
    assert body(a) == body(b) and len(body(text)[0]) == 3000


def test_expsum_liouville(capsys):
    assert run(["expsum", "--f", "Omega", "--base", "2", "--m", "1", "--a", "1", "--max", "10"]) == 0
    out = capsys.readouterr().out
    lines = body(out)
    assert lines[0].startswith("x,S_re,S_im")
    assert lines[1].startswith("10,0.0,0.0,")


def test_expsum_phase_and_grid(capsys):
    assert run(["expsum", "--f", "omega", "--decades", "2:4", "--predict", "phase"]) == 0
    lines = body(capsys.readouterr().out)
    assert [line.split(",")[0] for line in lines[1:]] == ["100", "1000", "10000"]


def test_sieve_and_scientific_notation(tmp_path):
    out = run_to(tmp_path, "v.csv", "sieve", "--f", "Omega", "--max", "1e1")
    assert body(out) == ["n,value", "1,0", "2,1", "3,1", "4,2", "5,1", "6,2", "7,1", "8,3", "9,2", "10,2"]
    assert number("1e8") == 10**8 and decades("3:5") == [1000, 10**4, 10**5]


def test_count_classify_ek_bias(tmp_path):
    out = run_to(tmp_path, "n.csv", "count", "--f", "omega", "--force-K", "1", "--block", "1", "--max", "6")
    assert body(out)[1] == "6,4,4,0,0,0"
    out = run_to(tmp_path, "k.csv", "classify", "--f", "Omega", "--c", "1", "--grid", "1000,10000")
    assert header(out)["weak_verdict"] == "consistent-with-WA"
    out = run_to(tmp_path, "e.csv", "ekstats", "--f", "omega", "--max", "10")
    assert body(out)[:4] == ["value,count", "0,1", "1,7", "2,2"]
    out = run_to(tmp_path, "b.csv", "biasdemo", "--f", "omega", "--max", "1000")
    assert body(out)[1].startswith("0,1000,")


def test_spec_file(tmp_path):
    spec = tmp_path / "f.spec"
    spec.write_text("mode = completely-additive\nc = 1\n2 = 3\n")
    out = run_to(tmp_path, "v.csv", "sieve", "--f", str(spec), "--max", "4")
    assert body(out)[1:] == ["1,0", "2,3", "3,1", "4,6"]


@pytest.mark.parametrize("argv", [
    ["sieve", "--f", "nosuch", "--max", "10"],
    ["sieve", "--f", "omega"],
    ["stream", "--f", "omega", "--base", "1", "--max", "10"],
    ["count", "--f", "omega", "--force-K", "1", "--block", "12", "--max", "10"],
    ["expsum", "--f", "omega", "--a", "0", "--max", "10"],
    ["sieve", "--f", "omega", "--max", "1.5"],
    ["frobnicate"],
    ["sieve", "--f", "omega", "--max", "10", "--threads", "0"],
])
def test_config_errors_exit_2(argv, capsys):
    assert run(argv) == 2
    assert "error" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["sieve", "--f", "omega", "--max", "1e6", "--memory-budget", "1000"],
    ["stream", "--f", "omega", "--force-K", "4", "--max", "1000", "--memory-budget", "100"],
    ["expsum", "--f", "omega", "--m", "10", "--max", "100"],
])
def test_resource_errors_exit_3(argv, capsys):
    assert run(argv) == 3
    assert "error" in capsys.readouterr().err


def test_determinism_and_header_roundtrip(tmp_path):
    argv = ["expsum", "--f", "omega", "--decades", "3:5", "--P", "1e4"]
    a = run_to(tmp_path, "a.csv", *argv, "--threads", "1")
    b = run_to(tmp_path, "b.csv", *argv, "--threads", "3")
    assert a == b
    h = header(a)
    assert (h["f"], h["decades"], h["P"], h["base"], h["a"], h["m"]) == ("omega", "1000,10000,100000",
                                                                         "10000", "10", "1", "1")
    # the echoed config reproduces the run
    again = ["expsum", "--f", h["f"], "--grid", h["decades"], "--P", h["P"], "--base", h["base"],
             "--a", h["a"], "--m", h["m"], "--predict", h["predict"]]
    assert body(run_to(tmp_path, "c.csv", *again)) == body(a)


def test_console_script_module():
    res = subprocess.run([sys.executable, "-c", "from thetanorm.cli import main; main()", "stream", "--f", "omega",
                          "--force-K", "1", "--max", "6"], capture_output=True, text=True)
    assert res.returncode == 0 and body(res.stdout) == ["011112"]
