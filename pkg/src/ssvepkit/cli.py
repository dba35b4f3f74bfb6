"""Command-line entry point: simulate, analyze, train, eval, psd, serve, replay.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

import numpy as np

from ssvepkit import dataio, pipeline, streamd, synthgen
from ssvepkit.dataio import DataError, SessionConfig
from ssvepkit.pipeline import LinearClassifier, PipelineError, WindowPolicy
from ssvepkit.sigmodel import SigModelError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class UsageError(Exception):
    pass


def _load_config(path: str | None) -> SessionConfig:
    if path is None:
        return SessionConfig()
    try:
        return SessionConfig.from_dict(json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot load config {path}: {exc}") from exc


def _parse_listen(value: str) -> tuple[str, int]:
    host, sep, port = value.rpartition(":")
    if not sep or not port.isdigit():
        raise UsageError(f"--listen/--connect expects host:port, got {value!r}")
    return host or "127.0.0.1", int(port)


def _out_dir(args) -> Path:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _labeled_feature_records(dataset, config, policy):
    """Feature records for every labeled trial, trial order preserved."""
    per_trial = []
    for entry, window in dataset.trials:
        windows = pipeline.segment(window, policy)
        records = pipeline.extract_features(
            windows,
            dataset.probe_freqs,
            config.n_harmonics,
            config.ar_order,
            true_freq=entry.freq,
            trial_id=entry.trial_id,
        )
        per_trial.append((entry.freq, records))
    return per_trial


def cmd_simulate(args) -> int:
    if args.trials < 1:
        raise UsageError(f"--trials must be >= 1, got {args.trials}")
    if args.duration <= 0:
        raise UsageError(f"--duration must be positive, got {args.duration}")
    config = _load_config(args.config)
    out = _out_dir(args)
    manifest = synthgen.generate_session(
        config,
        out,
        per_freq_trials=args.trials,
        duration_s=args.duration,
        snr_profile=args.profile,
        seed=args.seed,
    )
    print(f"wrote {len(config.probe_freqs) * args.trials} trials, manifest {manifest}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    config = _load_config(args.config)
    dataset = dataio.load_session(args.manifest)
    policy = WindowPolicy(args.window, args.hop)
    out = _out_dir(args)
    per_trial = _labeled_feature_records(dataset, config, policy)
    probe_freqs = sorted(dataset.probe_freqs)
    path = out / f"features_w{args.window:g}.csv"
    header = ["trial_id", "window_index", "true_freq"] + [f"T_{f:g}" for f in probe_freqs]
    lines = [",".join(header)]
    n = 0
    for _freq, records in per_trial:
        for r in records:
            row = [r.trial_id or "", str(r.window_index), "" if r.true_freq is None else f"{r.true_freq:g}"]
            row += [f"{r.t_values[f]:.9g}" for f in probe_freqs]
            lines.append(",".join(row))
            n += 1
    path.write_text("\n".join(lines) + "\n")
    print(f"wrote {n} feature rows to {path}")
    return EXIT_OK


def cmd_train(args) -> int:
    config = _load_config(args.config)
    dataset = dataio.load_session(args.manifest)
    policy = WindowPolicy(args.window)
    out = _out_dir(args)
    per_trial = _labeled_feature_records(dataset, config, policy)
    train_trials, _ = pipeline.first_trial_split(per_trial)
    train_records = [r for _freq, records in train_trials for r in records]
    classifier = pipeline.train_classifier(train_records)
    path = out / "classifier.json"
    path.write_text(json.dumps(classifier.to_dict(), indent=2) + "\n")
    print(f"trained on {len(train_records)} windows (first trial per frequency); wrote {path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    config = _load_config(args.config)
    dataset = dataio.load_session(args.manifest)
    try:
        classifier = LinearClassifier.from_dict(json.loads(Path(args.classifier).read_text()))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise DataError(f"cannot load classifier {args.classifier}: {exc}") from exc
    out = _out_dir(args)
    reports = {}
    for window_s in args.window:
        policy = WindowPolicy(window_s)
        per_trial = _labeled_feature_records(dataset, config, policy)
        _, test_trials = pipeline.first_trial_split(per_trial)
        test_records = [r for _freq, records in test_trials for r in records]
        report = pipeline.evaluate(classifier, test_records, window_s)
        reports[f"{window_s:g}"] = json.loads(report.to_json())
        print(
            f"{window_s:g} s windows: accuracy {report.accuracy:.1%} "
            f"({report.n_windows} windows, {report.itr_bits_per_min:.2f} bits/min)"
        )
    path = out / "eval_report.json"
    path.write_text(json.dumps(reports, indent=2) + "\n")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_psd(args) -> int:
    from ssvepkit.sigmodel import psd_via_autocorrelation

    window = dataio.read_trial_csv(args.input)
    try:
        psd = psd_via_autocorrelation(window)
    except SigModelError as exc:
        raise DataError(str(exc)) from exc
    out = _out_dir(args)
    path = out / (Path(args.input).stem + "_psd.csv")
    lines = ["freq_hz,power"]
    lines += [f"{f:.6f},{p:.9g}" for f, p in zip(psd.freqs, psd.power)]
    path.write_text("\n".join(lines) + "\n")
    peak = psd.freqs[int(np.argmax(psd.power))]
    print(f"wrote {path} ({psd.freqs.size} bins, peak at {peak:.2f} Hz)")
    return EXIT_OK


def _stream_config(args, config: SessionConfig) -> streamd.StreamConfig:
    return streamd.StreamConfig.from_session_config(
        config,
        window_s=args.window,
        hop_s=args.hop,
        smoother_depth=args.smoother_depth,
    )


def cmd_serve(args) -> int:
    host, port = _parse_listen(args.listen)
    config = _load_config(args.config)
    classifier = None
    if args.classifier:
        classifier = LinearClassifier.from_dict(json.loads(Path(args.classifier).read_text()))
    server = streamd.StreamServer(_stream_config(args, config), classifier)

    async def run():
        await server.start(host, port, ws_port=args.ws_port)
        print(f"listening on {host}:{server.port}" + (f", ws {args.ws_port}" if args.ws_port else ""))
        try:
            await asyncio.Event().wait()
        finally:
            await server.stop()

    try:
        asyncio.run(run())
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def cmd_replay(args) -> int:
    host, port = _parse_listen(args.connect)
    dataset = dataio.load_session(args.manifest)
    out = _out_dir(args)

    async def run():
        return await streamd.stream_dataset(
            host, port, dataset, batch_size=args.batch, realtime=args.realtime
        )

    try:
        events = asyncio.run(run())
    except OSError as exc:
        raise UsageError(f"cannot connect to {host}:{port}: {exc}") from exc
    path = out / "replay_events.jsonl"
    path.write_text("".join(json.dumps(e) + "\n" for e in events))
    decisions = [e for e in events if e.get("type") == "decision" and not e.get("undecided")]
    print(f"wrote {len(events)} events ({len(decisions)} decisions) to {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssvepkit",
        description="Single-channel SSVEP detection toolkit",
    )
    parser.add_argument("--config", help="session config JSON")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--output-dir", default=".", help="directory for all outputs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic labeled session")
    p.add_argument("--trials", type=int, default=2, help="trials per stimulation frequency")
    p.add_argument("--duration", type=float, default=30.0, help="trial length in seconds")
    p.add_argument("--profile", default="high", choices=sorted(synthgen.SNR_PROFILES))
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="windowed feature extraction to CSV")
    p.add_argument("--manifest", required=True)
    p.add_argument("--window", type=float, default=2.0)
    p.add_argument("--hop", type=float, default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("train", help="train the linear classifier (first trial per frequency)")
    p.add_argument("--manifest", required=True)
    p.add_argument("--window", type=float, default=2.0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a classifier on the held-out trials")
    p.add_argument("--manifest", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--window", type=float, nargs="+", default=[1.0, 2.0])
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("psd", help="autocorrelation PSD of a trial to CSV")
    p.add_argument("--input", required=True, help="trial CSV")
    p.set_defaults(func=cmd_psd)

    p = sub.add_parser("serve", help="run the streaming detection daemon")
    p.add_argument("--listen", default="127.0.0.1:8765")
    p.add_argument("--ws-port", type=int, default=None, help="browser WebSocket port")
    p.add_argument("--classifier", default=None)
    p.add_argument("--window", type=float, default=2.0)
    p.add_argument("--hop", type=float, default=0.5)
    p.add_argument("--smoother-depth", type=int, default=3)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("replay", help="stream a dataset into a running daemon")
    p.add_argument("--manifest", required=True)
    p.add_argument("--connect", default="127.0.0.1:8765")
    p.add_argument("--batch", type=int, default=streamd.DEFAULT_BATCH_SIZE)
    p.add_argument("--realtime", action="store_true")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, PipelineError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SigModelError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
