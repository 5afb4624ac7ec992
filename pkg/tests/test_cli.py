import json
import subprocess
import sys

import pytest

from conftest import HALT, build
from rvsoc import cli, fuzz

HELLO = """
    li s0, 0x40000000
    la a0, msg
    sw a0, 0x14(s0)
    li a0, 6
    sw a0, 0x18(s0)
    li a0, 2
    sw a0, 0x10(s0)
    li a0, 3
    sw a0, 0x40(s0)
msg: .ascii "hello\\n"
"""


@pytest.fixture
def image(tmp_path):
    def put(data, name="img.bin"):
        p = tmp_path / name
        p.write_bytes(data)
        return str(p)
    return put


def test_console_passthrough_and_exit_code(image, capfdbinary):
    assert cli.main(["--ram", image(build(HELLO))]) == 3
    assert capfdbinary.readouterr().out == b"hello\n"


def test_assembly_source_image(tmp_path, capfdbinary):
    p = tmp_path / "hello.S"
    p.write_text(HELLO)
    assert cli.main(["--ram", str(p)]) == 3
    assert capfdbinary.readouterr().out == b"hello\n"


def test_limit_and_stats(image, tmp_path):
    out = tmp_path / "s.json"
    assert cli.main(["--ram", image(build("nop\n" + HALT)), "--max-insns", "50", "--stats", str(out)]) == 0
    s = json.loads(out.read_text())
    assert s["retired"] == 50 and s["cycles"] > 400


def test_stats_text_to_stderr(image, capsys):
    cli.main(["--ram", image(build(HALT)), "--max-insns", "5", "--stats", "-"])
    assert "retired        5" in capsys.readouterr().err


def test_bad_inputs(tmp_path, capsys):
    assert cli.main([]) == 1
    assert cli.main(["--ram", str(tmp_path / "nope.bin")]) == 1
    assert cli.main(["--ram", str(tmp_path / "nope.bin"), "--miss-penalty", "-1"]) == 1
    assert "error" in capsys.readouterr().err


def test_simulation_fault_exit(image, capsys):
    assert cli.main(["--ram", image(build("li t0, 0x30000000\njr t0\n"))]) == 2
    assert "simulation fault" in capsys.readouterr().err


def test_trace_and_lockstep(image, tmp_path):
    prog = image(fuzz.generate(11, body_len=200).image)
    t1, t2 = tmp_path / "a.txt", tmp_path / "b.txt"
    assert cli.main(["--ram", prog, "--max-insns", "800", "--trace", str(t1), "--lockstep"]) == 0
    assert cli.main(["--ram", prog, "--max-insns", "800", "--trace", str(t2), "--no-cache",
                     "--no-fetch-buffer", "--miss-penalty", "30"]) == 0
    assert t1.read_text() == t2.read_text()
    assert len(t1.read_text().splitlines()) >= 800


def test_checkpoint_split(image, tmp_path):
    prog = image(fuzz.generate(12, body_len=200).image)
    full, a, b = (tmp_path / n for n in ("full.txt", "a.txt", "b.txt"))
    ck = tmp_path / "k.ckpt"
    cli.main(["--ram", prog, "--max-insns", "600", "--trace", str(full)])
    cli.main(["--ram", prog, "--max-insns", "250", "--trace", str(a), "--checkpoint-out", str(ck)])
    assert cli.main(["--restore", str(ck), "--max-insns", "350", "--trace", str(b)]) == 0
    assert a.read_text() + b.read_text() == full.read_text()
    assert cli.main(["--restore", str(ck), "--no-cache"]) == 1


def test_stdin_script(image, tmp_path):
    src = """
    li s0, 0x40000000
    li t1, 3
wait:
    lw a0, 8(s0)
    andi a0, a0, 0xff
    bltu a0, t1, wait
    lw a0, 4(s0)
    sw a0, 0(s0)
    lw a0, 4(s0)
    sw a0, 0(s0)
    lw a0, 4(s0)
    sw a0, 0(s0)
    sw zero, 0x40(s0)
"""
    script = tmp_path / "in.txt"
    script.write_bytes(b"abc")
    r = subprocess.run([sys.executable, "-m", "rvsoc", "--ram", image(build(src)), "--stdin", str(script)],
                       capture_output=True, timeout=120)
    assert r.returncode == 0 and r.stdout == b"abc"
    r = subprocess.run([sys.executable, "-m", "rvsoc", "--ram", image(build(src)), "--stdin", "-"],
                       input=b"xyz", capture_output=True, timeout=120)
    assert r.returncode == 0 and r.stdout == b"xyz"


def test_firmware_option(tmp_path, image, capfdbinary):
    fw = tmp_path / "fw.S"
    # a firmware that answers every request by printing '!'
    fw.write_text("li s0, 0x40000000\nli a0, '!'\nsw a0, 0(s0)\nsw zero, 0x20(s0)\nj .\n")
    assert cli.main(["--ram", image(build(HELLO)), "--firmware", str(fw)]) == 3
    assert capfdbinary.readouterr().out == b"!"


def test_divergence_exit_code(image, monkeypatch, capsys):
    from rvsoc import backend, harness
    monkeypatch.setattr(backend, "harness", harness)
    monkeypatch.setattr(backend, "Machine", harness.Machine)
    monkeypatch.setattr(backend, "Config", harness.Config)
    orig = harness.Machine._start_lockstep

    def corrupt(self):
        orig(self)
        self.oracle.state.x[5] = 1
    monkeypatch.setattr(harness.Machine, "_start_lockstep", corrupt)
    assert cli.main(["--ram", image(build("nop\n" + HALT)), "--lockstep", "--max-insns", "5"]) == 3
    assert "divergence" in capsys.readouterr().err
