import json
import subprocess
import sys

import pytest

from varfrac.app.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, OUTPUT_ENV, main
from varfrac.app.config import parse_config
from varfrac.app.presets import get_preset

SMALL_FISHER = ["-o", "geometry.spacing=1", "-o", "time.t_end=2", "-o", "time.dt=0.5", "-o", "engine.ell=2"]


def test_print_config_round_trips(capsys):
    assert main(["preset", "fisher-1d", "--print-config", "-o", "orders.alpha2=1.8"]) == EXIT_OK
    cfg = parse_config(capsys.readouterr().out)
    assert cfg == get_preset("fisher-1d", {"orders.alpha2": "1.8"})


def test_preset_run_writes_snapshots(tmp_path, capsys):
    code = main(["preset", "fisher-1d", *SMALL_FISHER, "--out", str(tmp_path), "--snapshot-every", "1"])
    assert code == EXIT_OK
    info = json.loads(capsys.readouterr().out)
    assert info["steps"] == 4 and info["average_picard"] >= 1
    assert sorted(p.name for p in tmp_path.iterdir()) == [f"snapshot_{k:07d}.txt" for k in (0, 2, 4)]


def test_output_directory_from_environment(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    assert main(["preset", "fisher-1d", *SMALL_FISHER]) == EXIT_OK
    assert len(list((tmp_path / "env").iterdir())) == 1  # snapshot_every = 5 > t_end, only t = 0


def test_simulate_config_file(tmp_path, capsys):
    cfg = get_preset("br-cable-1d", {"geometry.length": "0.5", "geometry.spacing": "0.05",
                                     "regions.split": "0.25", "time.t_end": "40", "output.probes": "0.45"})
    path = tmp_path / "cable.ini"
    path.write_text(cfg.to_text())
    assert main(["--threads", "1", "simulate", str(path)]) == EXIT_OK
    info = json.loads(capsys.readouterr().out)
    assert list(info["arrival_ms"]) == ["0.45"]
    assert info["arrival_ms"]["0.45"] is not None


def test_threshold_command(tmp_path, capsys):
    cfg = get_preset("br-cable-1d", {"geometry.length": "1.0", "geometry.spacing": "0.05",
                                     "regions.split": "0.5", "time.t_end": "120", "output.probes": ""})
    path = tmp_path / "cable.ini"
    path.write_text(cfg.to_text())
    assert main(["threshold", str(path), "--rel-tol", "0.1"]) == EXIT_OK
    info = json.loads(capsys.readouterr().out)
    assert info["lower"] < info["threshold"]
    assert info["threshold_over_chi"] == pytest.approx(info["threshold"] / 2000.0)


@pytest.mark.parametrize("argv", [
    ["preset", "fisher-1d", "-o", "orders.alpha1=2.5"],
    ["preset", "fisher-1d", "-o", "orders.nope=1"],
    ["preset", "br-heart-3d"],
    ["simulate", "/nonexistent/config.ini"],
    ["--threads", "0", "preset", "fisher-1d", "--print-config"],
])
def test_configuration_errors(argv, capsys):
    assert main(argv) == EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_bad_config_line_reported(tmp_path, capsys):
    path = tmp_path / "bad.ini"
    path.write_text("[problem]\nkind = fisher\n[time]\ndt = soon\n")
    assert main(["simulate", str(path)]) == EXIT_CONFIG
    assert "line 4" in capsys.readouterr().err


def test_numerical_failure(capsys):
    argv = ["preset", "fisher-1d", *SMALL_FISHER, "-o", "picard.max_iter=1", "-o", "picard.tol=1e-14"]
    assert main(argv) == EXIT_NUMERICAL
    assert "Picard" in capsys.readouterr().err


def test_threshold_bracket_failure_is_numerical(tmp_path, capsys):
    cfg = get_preset("br-cable-1d", {"geometry.length": "1.0", "geometry.spacing": "0.05",
                                     "regions.split": "0.5", "time.t_end": "60"})
    path = tmp_path / "cable.ini"
    path.write_text(cfg.to_text())
    assert main(["threshold", str(path), "--upper", "10"]) == EXIT_NUMERICAL


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "varfrac.app.cli", "preset", "nope"], capture_output=True, text=True)
    assert out.returncode == 2  # argparse rejects the choice
    out = subprocess.run([sys.executable, "-m", "varfrac.app.cli", "preset", "fisher-1d", "--print-config"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "[orders]" in out.stdout


@pytest.mark.parametrize("argv", [["--threads", "2", "--out", "d", "preset", "fisher-1d"],
                                  ["preset", "fisher-1d", "--threads", "2", "--out", "d"]])
def test_options_before_or_after_subcommand(argv):
    from varfrac.app.cli import build_parser

    args = build_parser().parse_args(argv)
    assert args.threads == 2 and str(args.out) == "d"
