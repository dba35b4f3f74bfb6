import hashlib
import json
import socket
import subprocess
import sys
import time

import numpy as np
import pytest

from ssvepkit import dataio
from ssvepkit.cli import main
from ssvepkit.sigmodel import EegWindow


def digest_dir(path):
    h = hashlib.sha256()
    for p in sorted(path.glob("*.csv")):
        h.update(p.read_bytes())
    return h.hexdigest()


def simulate(tmp_path, *extra):
    out = tmp_path / "data"
    rc = main(["--output-dir", str(out), "simulate", "--duration", "10", *extra])
    assert rc == 0
    return out / "manifest.json"


class TestSimulate:
    def test_default_four_trials(self, tmp_path):
        manifest = simulate(tmp_path)
        dataset = dataio.load_session(manifest)
        assert len(dataset.trials) == 4

    def test_zero_trials_is_usage_error(self, tmp_path):
        rc = main(["--output-dir", str(tmp_path), "simulate", "--trials", "0"])
        assert rc == 1

    def test_seed_reproducibility(self, tmp_path):
        a = simulate(tmp_path / "a", "--trials", "1")
        b = simulate(tmp_path / "b", "--trials", "1")
        assert digest_dir(a.parent) == digest_dir(b.parent)


class TestAnalyze:
    def test_feature_rows_and_columns(self, tmp_path):
        out = tmp_path / "data"
        rc = main(["--output-dir", str(out), "simulate", "--trials", "1",
                   "--duration", "60"])
        assert rc == 0
        rc = main(["--output-dir", str(out), "analyze",
                   "--manifest", str(out / "manifest.json"), "--window", "2"])
        assert rc == 0
        lines = (out / "features_w2.csv").read_text().strip().splitlines()
        header = lines[0].split(",")
        assert len(header) == 2 + 3  # probe count + 3
        assert len(lines) - 1 == 60  # 30 windows per 60 s trial, two trials

    def test_high_snr_clusters_separable(self, tmp_path):
        out = tmp_path / "data"
        main(["--output-dir", str(out), "simulate", "--trials", "2",
              "--duration", "20", "--profile", "high"])
        main(["--output-dir", str(out), "train",
              "--manifest", str(out / "manifest.json")])
        rc = main(["--output-dir", str(out), "eval",
                   "--manifest", str(out / "manifest.json"),
                   "--classifier", str(out / "classifier.json"),
                   "--window", "2"])
        assert rc == 0
        report = json.loads((out / "eval_report.json").read_text())
        assert report["2"]["accuracy"] >= 0.95


class TestTrainEval:
    def test_single_class_data_exits_2(self, tmp_path):
        out = tmp_path / "solo"
        out.mkdir()
        config = dataio.SessionConfig(probe_freqs=(15.0,))
        from ssvepkit import synthgen
        manifest = synthgen.generate_session(config, out, per_freq_trials=2,
                                             duration_s=10.0, seed=4)
        rc = main(["--output-dir", str(out), "train", "--manifest", str(manifest)])
        assert rc == 2

    def test_train_eval_deterministic(self, tmp_path):
        manifest = simulate(tmp_path, "--trials", "3")
        out = manifest.parent
        for sub in ("r1", "r2"):
            rc = main(["--output-dir", str(out / sub), "train",
                       "--manifest", str(manifest)])
            assert rc == 0
            rc = main(["--output-dir", str(out / sub), "eval",
                       "--manifest", str(manifest),
                       "--classifier", str(out / sub / "classifier.json")])
            assert rc == 0
        assert (out / "r1" / "eval_report.json").read_text() == (
            out / "r2" / "eval_report.json"
        ).read_text()

    def test_eval_reports_per_window_length(self, tmp_path):
        manifest = simulate(tmp_path, "--trials", "2")
        out = manifest.parent
        main(["--output-dir", str(out), "train", "--manifest", str(manifest)])
        rc = main(["--output-dir", str(out), "eval", "--manifest", str(manifest),
                   "--classifier", str(out / "classifier.json"),
                   "--window", "1", "2"])
        assert rc == 0
        report = json.loads((out / "eval_report.json").read_text())
        assert set(report) == {"1", "2"}
        for doc in report.values():
            assert {"accuracy", "confusion", "n_windows", "window_length_s",
                    "itr_bits_per_min"} <= set(doc)


class TestPsd:
    def test_pure_tone(self, tmp_path):
        t = np.arange(512 * 10) / 512
        w = EegWindow(samples=np.sin(2 * np.pi * 15 * t), fs=512.0)
        trial = tmp_path / "tone.csv"
        dataio.write_trial_csv(w, trial)
        rc = main(["--output-dir", str(tmp_path), "psd", "--input", str(trial)])
        assert rc == 0
        lines = (tmp_path / "tone_psd.csv").read_text().strip().splitlines()[1:]
        rows = [tuple(map(float, ln.split(","))) for ln in lines]
        peak = max(rows, key=lambda r: r[1])[0]
        assert abs(peak - 15.0) < 0.1

    def test_too_short_exits_2(self, tmp_path):
        w = EegWindow(samples=np.arange(32, dtype=float), fs=512.0)
        trial = tmp_path / "short.csv"
        dataio.write_trial_csv(w, trial)
        rc = main(["--output-dir", str(tmp_path), "psd", "--input", str(trial)])
        assert rc == 2

    def test_missing_file_exits_2(self, tmp_path):
        rc = main(["--output-dir", str(tmp_path), "psd", "--input",
                   str(tmp_path / "nope.csv")])
        assert rc == 2


class TestServeReplay:
    def test_bad_port_exits_1(self, tmp_path):
        manifest = simulate(tmp_path, "--trials", "1")
        rc = main(["--output-dir", str(tmp_path), "replay",
                   "--manifest", str(manifest), "--connect", "127.0.0.1:notaport"])
        assert rc == 1

    def test_unreachable_daemon_exits_1(self, tmp_path):
        manifest = simulate(tmp_path, "--trials", "1")
        with socket.socket() as s:  # grab a port that nothing serves
            s.bind(("127.0.0.1", 0))
            port = s.getsockname()[1]
        rc = main(["--output-dir", str(tmp_path), "replay",
                   "--manifest", str(manifest), "--connect", f"127.0.0.1:{port}"])
        assert rc == 1

    def test_replay_to_daemon_produces_decisions(self, tmp_path):
        manifest = simulate(tmp_path, "--trials", "1", "--profile", "high")
        with socket.socket() as s:
            s.bind(("127.0.0.1", 0))
            port = s.getsockname()[1]
        proc = subprocess.Popen(
            [sys.executable, "-m", "ssvepkit.cli", "serve",
             "--listen", f"127.0.0.1:{port}", "--window", "2", "--hop", "0.5"],
            stdout=subprocess.PIPE, stderr=subprocess.PIPE,
        )
        try:
            for _ in range(100):
                try:
                    socket.create_connection(("127.0.0.1", port), timeout=0.2).close()
                    break
                except OSError:
                    time.sleep(0.1)
            else:
                pytest.fail("daemon did not come up")
            rc = main(["--output-dir", str(tmp_path), "replay",
                       "--manifest", str(manifest),
                       "--connect", f"127.0.0.1:{port}"])
            assert rc == 0
            events = [json.loads(ln) for ln in
                      (tmp_path / "replay_events.jsonl").read_text().splitlines()]
            decided = [e for e in events
                       if e["type"] == "decision" and not e.get("undecided")]
            assert decided
        finally:
            proc.terminate()
            proc.wait(timeout=5)
