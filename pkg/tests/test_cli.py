"""Command line: exit-code discipline, csv stability, live serve smoke."""

import json
import os
import re
import signal
import subprocess
import sys
import time

import httpx
import pytest
from click.testing import CliRunner

from homeostat import memfile
from homeostat.cli import main
from homeostat.memory import append_session, apply_rewrite, empty_store


@pytest.fixture()
def runner():
    return CliRunner()


def store_file(tmp_path, name="m.hsm") -> str:
    store = apply_rewrite(empty_store(), "deep layer")
    store, _ = append_session(store, "first session")
    path = str(tmp_path / name)
    memfile.save(store, path)
    return path


class TestGate:
    def test_canonical_output(self, runner):
        result = runner.invoke(main, ["gate", "-d", "0.02", "-f", "0.975"])
        assert result.exit_code == 0
        assert "gate_position      125000" in result.output
        assert "effective_trigger  62500" in result.output

    def test_window_warning(self, runner):
        result = runner.invoke(
            main, ["gate", "-d", "0.02", "-f", "0.975", "-w", "100000"]
        )
        assert result.exit_code == 0
        assert "unreachable" in result.output

    def test_zero_degradation_is_usage_error(self, runner):
        result = runner.invoke(main, ["gate", "-d", "0", "-f", "0.975"])
        assert result.exit_code == 2

    def test_csv_format_parses_back(self, runner):
        result = runner.invoke(
            main,
            ["gate", "-d", "0.02", "-f", "0.975", "-w", "100000", "--format", "csv"],
        )
        assert result.exit_code == 0
        header, row = result.output.strip().split("\n")
        record = dict(zip(header.split(","), row.split(",")))
        assert record["gate_position"] == "125000"
        assert record["effective_trigger"] == "62500"
        assert record["gate_unreachable"] == "true"

    def test_plot_written(self, runner, tmp_path):
        out = str(tmp_path / "curve.png")
        result = runner.invoke(
            main, ["gate", "-d", "0.02", "-f", "0.975", "--plot", out]
        )
        assert result.exit_code == 0
        assert os.path.getsize(out) > 1_000


class TestSimulate:
    def test_preset_to_file_with_chart(self, runner, tmp_path):
        csv_path = str(tmp_path / "d.csv")
        png_path = str(tmp_path / "d.png")
        result = runner.invoke(
            main, ["simulate", "--preset", "fig2", "--out", csv_path,
                   "--plot", png_path]
        )
        assert result.exit_code == 0
        lines = open(csv_path).read().strip().split("\n")
        append_rows = [l for l in lines if l.startswith("62,append_only")]
        assert append_rows and append_rows[0].split(",")[2] == "16740"
        assert os.path.getsize(png_path) > 1_000

    def test_stdout_when_no_out(self, runner):
        result = runner.invoke(main, ["simulate", "--sessions", "3",
                                      "--growth", "100"])
        assert result.exit_code == 0
        assert result.output.startswith("session,strategy,")

    def test_zero_sessions_is_usage_error(self, runner):
        result = runner.invoke(main, ["simulate", "--sessions", "0"])
        assert result.exit_code == 2

    def test_same_seed_identical_files(self, runner, tmp_path):
        paths = [str(tmp_path / f"run{i}.csv") for i in range(2)]
        for path in paths:
            result = runner.invoke(main, [
                "simulate", "--sessions", "25", "--growth-mean", "600",
                "--growth-spread", "250", "--seed", "5", "--out", path,
            ])
            assert result.exit_code == 0
        assert open(paths[0], "rb").read() == open(paths[1], "rb").read()


class TestLint:
    def test_clean_file_exit_zero(self, runner, tmp_path):
        result = runner.invoke(main, ["lint", store_file(tmp_path)])
        assert result.exit_code == 0
        assert "clean" in result.output

    def test_bom_exit_one(self, runner, tmp_path):
        path = store_file(tmp_path)
        with open(path, "rb") as fh:
            data = fh.read()
        with open(path, "wb") as fh:
            fh.write(b"\xef\xbb\xbf" + data)
        result = runner.invoke(main, ["lint", path])
        assert result.exit_code == 1
        assert "ENCODING_BOM" in result.output

    def test_corrupt_marker_exit_one_with_offset(self, runner, tmp_path):
        path = store_file(tmp_path)
        with open(path, "rb") as fh:
            data = fh.read()
        with open(path, "wb") as fh:
            fh.write(data.replace(b"===DEEP_MEMORY", b"===DEEP_MEMoRY", 1))
        result = runner.invoke(main, ["lint", path])
        assert result.exit_code == 1
        assert "MARKER_CORRUPT" in result.output
        assert "offset=" in result.output

    def test_unreadable_exit_two(self, runner, tmp_path):
        result = runner.invoke(main, ["lint", str(tmp_path / "nope.hsm")])
        assert result.exit_code == 2


class TestConfigFile:
    def test_config_supplies_defaults_flags_win(self, runner, tmp_path):
        config = tmp_path / "homeostat.json"
        config.write_text(json.dumps({
            "gate": {"degradation": 0.02, "fidelity-target": 0.975,
                     "trigger-fraction": 0.25},
        }))
        result = runner.invoke(main, ["--config", str(config), "gate"])
        assert result.exit_code == 0
        assert "31250" in result.output  # trigger fraction from config
        result = runner.invoke(
            main, ["--config", str(config), "gate", "-t", "0.5"]
        )
        assert "62500" in result.output  # explicit flag wins

    def test_unknown_config_key_is_usage_error(self, runner, tmp_path):
        config = tmp_path / "bad.json"
        config.write_text(json.dumps({"gate": {"degradatino": 0.02}}))
        result = runner.invoke(
            main, ["--config", str(config), "gate", "-d", "0.02", "-f", "0.9"]
        )
        assert result.exit_code == 2


class TestStatus:
    def test_unreachable_service_exits_one(self, runner):
        result = runner.invoke(main, ["status", "--url", "http://127.0.0.1:9"])
        assert result.exit_code == 1
        assert "cannot reach service" in result.output


class TestServe:
    def test_bom_store_fails_startup(self, runner, tmp_path):
        path = tmp_path / "bom.hsm"
        path.write_bytes(b"\xef\xbb\xbf" + memfile.render(empty_store()))
        result = runner.invoke(main, ["serve", "--store", str(path),
                                      "--bind", "127.0.0.1:0"])
        assert result.exit_code == 1
        assert "ENCODING_BOM" in result.output

    def test_missing_store_without_create(self, runner, tmp_path):
        result = runner.invoke(main, ["serve", "--store",
                                      str(tmp_path / "missing.hsm"),
                                      "--bind", "127.0.0.1:0"])
        assert result.exit_code == 1

    def test_live_server_round_trip(self, tmp_path):
        """serve --create starts, answers /v1/status, persists on SIGINT."""
        store = str(tmp_path / "live.hsm")
        proc = subprocess.Popen(
            [sys.executable, "-m", "homeostat.cli", "serve", "--store", store,
             "--create", "--bind", "127.0.0.1:0"],
            stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True,
        )
        try:
            line = proc.stdout.readline()
            match = re.search(r"http://127\.0\.0\.1:(\d+)", line)
            assert match, f"no address announced: {line!r}"
            base = f"http://127.0.0.1:{match.group(1)}"
            deadline = time.time() + 10
            status = None
            while time.time() < deadline:
                try:
                    status = httpx.get(base + "/v1/status", timeout=2.0).json()
                    break
                except httpx.HTTPError:
                    time.sleep(0.1)
            assert status is not None and status["phase"] == "accumulating"
            r = httpx.post(base + "/v1/sessions",
                           json={"content": "hello from the cli test"},
                           timeout=5.0)
            assert r.status_code == 200
            report = subprocess.run(
                [sys.executable, "-m", "homeostat.cli", "status", "--url", base],
                capture_output=True, text=True, timeout=15,
            )
            assert report.returncode == 0
            assert "accumulating" in report.stdout
            assert "gate_position" in report.stdout
        finally:
            proc.send_signal(signal.SIGINT)
            proc.wait(timeout=10)
        assert proc.returncode == 0
        stored = memfile.load(store)
        assert stored.recent and stored.recent[0].content == "hello from the cli test"
