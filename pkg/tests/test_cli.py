import json
import socket
import subprocess
import sys
import threading

import pytest

from splitmesh.cli import EXIT_CONFIG, EXIT_MISMATCH, EXIT_OK, EXIT_RUNTIME, main
from splitmesh.data.tensorfile import read_nt
from splitmesh.harness.experiment import METRICS_SCHEMA


def write_config(tmp_path, **kw):
    raw = {"preset": "covid", "clients": 3, "ratio": "7:2:1", "epochs": 1}
    raw.update(kw)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(raw))
    return str(p)


def test_validate(tmp_path, capsys):
    assert main(["validate", "--config", write_config(tmp_path)]) == EXIT_OK
    assert capsys.readouterr().out.startswith("ok:")


def test_bad_ratio_is_config_error(tmp_path, capsys):
    assert main(["validate", "--config", write_config(tmp_path, ratio="1:1")]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["run-local", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG


def test_run_local_and_oracle(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["run-local", "--config", cfg, "--out", str(tmp_path / "o"), "--epochs", "2"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith(METRICS_SCHEMA) and len(out.splitlines()) == 4
    assert (tmp_path / "o" / "metrics.csv").read_text() == out
    assert main(["oracle", "--config", cfg]) == EXIT_OK
    assert "-oracle-n1-" in capsys.readouterr().out


def test_compare_pass_and_mismatch(tmp_path, capsys):
    cfg = write_config(tmp_path, preset="cholesterol")
    assert main(["compare", "--config", cfg]) == EXIT_OK
    assert capsys.readouterr().out.startswith("PASS")
    assert main(["compare", "--config", cfg, "--oracle-lr", "0.01"]) == EXIT_MISMATCH
    assert capsys.readouterr().out.startswith("FAIL")


def test_sweep_exit_codes(tmp_path, capsys):
    cfg = write_config(tmp_path, preset="cholesterol", dataset={"kind": "synthetic", "n": 40})
    assert main(["sweep", "--config", cfg, "--grid", "1:1,1:1:1", "--out", str(tmp_path / "s")]) == EXIT_OK
    assert (tmp_path / "s" / "table.csv").exists()
    assert main(["sweep", "--config", cfg, "--grid", "30:1:1"]) == EXIT_RUNTIME
    assert main(["sweep", "--config", cfg, "--grid", "1:x"]) == EXIT_CONFIG


def test_privacy(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["privacy", "--config", cfg, "--samples", "2", "--out", str(tmp_path / "p")]) == EXIT_OK
    assert len(capsys.readouterr().out.splitlines()) == 1 + 2 * 4
    assert read_nt(tmp_path / "p" / "sample001_feature.nt").shape == (4, 8, 8)
    flat = write_config(tmp_path, preset="cholesterol")
    assert main(["privacy", "--config", flat, "--out", str(tmp_path / "q")]) == EXIT_RUNTIME


def test_preset(capsys):
    assert main(["preset", "mura", "--scale", "paper"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["model"]["input_shape"] == [1, 224, 224]
    assert main(["preset", "nope"]) == EXIT_CONFIG


def test_convert_pgm(tmp_path, capsys):
    src = tmp_path / "a.pgm"
    src.write_bytes(b"P5\n4 2\n255\n" + bytes(range(0, 240, 30)))
    assert main(["convert-pgm", str(src), str(tmp_path / "a.nt")]) == EXIT_OK
    assert read_nt(tmp_path / "a.nt").shape == (1, 2, 4)
    assert main(["convert-pgm", str(src), str(tmp_path / "b.nt"), "--size", "4x8"]) == EXIT_OK
    assert read_nt(tmp_path / "b.nt").shape == (1, 4, 8)
    assert main(["convert-pgm", str(src), str(tmp_path / "c.nt"), "--size", "big"]) == EXIT_CONFIG


def test_gradcheck(capsys):
    assert main(["gradcheck"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 12 and all(line.startswith("PASS") for line in lines)


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def test_server_and_client_processes(tmp_path, capsys):
    cfg = write_config(tmp_path, preset="cholesterol", timeout=30)
    addr = f"127.0.0.1:{free_port()}"
    procs = [subprocess.Popen([sys.executable, "-m", "splitmesh", "client", "--config", cfg, "--shard", str(i),
                               "--connect", addr], stdout=subprocess.PIPE, stderr=subprocess.PIPE)
             for i in range(3)]
    rc = []
    t = threading.Thread(target=lambda: rc.append(main(["server", "--config", cfg, "--listen", addr])))
    t.start()
    t.join(60)
    outs = [p.communicate(timeout=60) for p in procs]
    assert rc == [EXIT_OK]
    assert all(p.returncode == 0 for p in procs), [o[1] for o in outs]
    served = capsys.readouterr().out
    assert main(["run-local", "--config", cfg]) == EXIT_OK
    local = capsys.readouterr().out
    strip = lambda text: [line.rsplit(",", 1)[0] for line in text.splitlines()]  # drop wall_seconds
    assert strip(served) == strip(local)


@pytest.mark.parametrize("argv", [["--help"], []])
def test_argparse_exit(argv):
    with pytest.raises(SystemExit):
        main(argv)
