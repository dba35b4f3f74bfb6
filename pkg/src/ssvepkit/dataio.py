"""Dataset persistence: trial CSV files, session manifests, configuration."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ssvepkit.sigmodel import EegWindow

MANIFEST_VERSION = "1"

# Defaults mirror the experimental setup this toolkit models: 512 Hz
# sampling, probes at 12/15 Hz with two harmonics, 60 Hz display refresh.
DEFAULT_FS = 512.0
DEFAULT_PROBE_FREQS = (12.0, 15.0)
DEFAULT_N_HARMONICS = 2
DEFAULT_AR_ORDER = 20
DEFAULT_WINDOW_LENGTHS_S = (1.0, 2.0)
DEFAULT_REFRESH_HZ = 60.0
DEFAULT_DUTIES = {12.0: 0.4, 15.0: 0.5}


class DataError(ValueError):
    """Malformed trial files, manifests or configuration."""


@dataclass(frozen=True)
class SessionConfig:
    fs: float = DEFAULT_FS
    probe_freqs: tuple = DEFAULT_PROBE_FREQS
    n_harmonics: int = DEFAULT_N_HARMONICS
    ar_order: int = DEFAULT_AR_ORDER
    window_lengths_s: tuple = DEFAULT_WINDOW_LENGTHS_S
    refresh_hz: float = DEFAULT_REFRESH_HZ
    duties: dict = field(default_factory=lambda: dict(DEFAULT_DUTIES))

    def __post_init__(self):
        if not self.probe_freqs:
            raise DataError("at least one probe frequency is required")
        if self.fs <= 0 or self.n_harmonics < 1 or self.ar_order < 1:
            raise DataError("invalid session configuration")

    def to_dict(self) -> dict:
        return {
            "fs": self.fs,
            "probe_freqs": list(self.probe_freqs),
            "n_harmonics": self.n_harmonics,
            "ar_order": self.ar_order,
            "window_lengths_s": list(self.window_lengths_s),
            "refresh_hz": self.refresh_hz,
            "duties": {str(k): v for k, v in self.duties.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SessionConfig":
        return cls(
            fs=float(d.get("fs", DEFAULT_FS)),
            probe_freqs=tuple(float(f) for f in d.get("probe_freqs", DEFAULT_PROBE_FREQS)),
            n_harmonics=int(d.get("n_harmonics", DEFAULT_N_HARMONICS)),
            ar_order=int(d.get("ar_order", DEFAULT_AR_ORDER)),
            window_lengths_s=tuple(
                float(w) for w in d.get("window_lengths_s", DEFAULT_WINDOW_LENGTHS_S)
            ),
            refresh_hz=float(d.get("refresh_hz", DEFAULT_REFRESH_HZ)),
            duties={float(k): float(v) for k, v in d.get("duties", DEFAULT_DUTIES).items()},
        )


@dataclass(frozen=True)
class TrialManifestEntry:
    trial_id: str
    freq: float | None
    file: str
    duration_s: float
    seed: int | None = None
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Dataset:
    """A loaded session: manifest metadata plus trial signals, in manifest
    order (order is meaningful: first trial per frequency is the training
    trial)."""

    fs: float
    probe_freqs: tuple
    trials: tuple  # of (TrialManifestEntry, EegWindow)
    extras: dict = field(default_factory=dict)


def write_trial_csv(window: EegWindow, path) -> None:
    """Write a trial as a `t,uv` CSV with LF line endings."""
    lines = ["t,uv"]
    t = np.arange(window.n_samples) / window.fs + window.t0
    # 12 significant digits keeps the read/write round trip below 1e-9
    # relative error per sample.
    for ti, v in zip(t, window.samples):
        lines.append(f"{ti:.6f},{v:.12g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_trial_csv(path, expected_fs: float | None = None) -> EegWindow:
    """Read a `t,uv` trial CSV; fs is inferred from the median timestamp
    spacing and cross-checked against expected_fs when given (0.1%)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read trial file {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines or lines[0].strip() != "t,uv":
        raise DataError(f"{path}:1: expected header 't,uv'")
    times = []
    values = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: expected two comma-separated fields")
        try:
            t = float(parts[0])
            v = float(parts[1])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: malformed number: {exc}") from exc
        if not (np.isfinite(t) and np.isfinite(v)):
            raise DataError(f"{path}:{lineno}: non-finite value")
        times.append(t)
        values.append(v)
    if len(values) < 2:
        raise DataError(f"{path}: need at least 2 samples, got {len(values)}")
    times = np.asarray(times)
    deltas = np.diff(times)
    if np.any(deltas <= 0):
        bad = int(np.argmax(deltas <= 0)) + 3
        raise DataError(f"{path}:{bad}: timestamps not strictly increasing")
    dt = float(np.median(deltas))
    # Timestamps must sit on a uniform 1/fs grid within 1e-6 s (printed with
    # 6 decimals, so per-row rounding error is at most 5e-7).
    grid = times[0] + np.arange(times.size) * (times[-1] - times[0]) / (times.size - 1)
    dev = np.abs(times - grid)
    if np.any(dev > 1e-6):
        bad = int(np.argmax(dev > 1e-6)) + 2
        raise DataError(f"{path}:{bad}: timestamp off the uniform 1/fs grid")
    fs = 1.0 / dt
    if expected_fs is not None and abs(fs - expected_fs) > 1e-3 * expected_fs:
        raise DataError(
            f"{path}: inferred fs {fs:.3f} Hz deviates from manifest fs {expected_fs} Hz"
        )
    # Snap to the manifest rate when consistent; median-of-deltas carries
    # float formatting jitter.
    if expected_fs is not None:
        fs = expected_fs
    return EegWindow(samples=np.asarray(values), fs=fs, t0=float(times[0]))


_KNOWN_TRIAL_KEYS = {"trial_id", "freq", "file", "duration_s", "seed"}
_KNOWN_MANIFEST_KEYS = {"version", "fs", "probe_freqs", "trials"}


def write_manifest(
    manifest_path,
    fs: float,
    probe_freqs,
    entries: list[TrialManifestEntry],
    extras: dict | None = None,
) -> None:
    doc = {
        "version": MANIFEST_VERSION,
        "fs": fs,
        "probe_freqs": list(probe_freqs),
        "trials": [
            {
                "trial_id": e.trial_id,
                "freq": e.freq,
                "file": e.file,
                "duration_s": e.duration_s,
                "seed": e.seed,
                **e.extras,
            }
            for e in entries
        ],
    }
    if extras:
        doc.update(extras)
    Path(manifest_path).write_text(
        json.dumps(doc, indent=2) + "\n", encoding="utf-8"
    )


def load_session(manifest_path) -> Dataset:
    """Load a session dataset; trials are returned in manifest order."""
    manifest_path = Path(manifest_path)
    try:
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read manifest {manifest_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{manifest_path}: invalid JSON: {exc}") from exc
    version = doc.get("version")
    if version != MANIFEST_VERSION:
        raise DataError(
            f"{manifest_path}: unsupported manifest version {version!r}, "
            f"expected {MANIFEST_VERSION!r}"
        )
    try:
        fs = float(doc["fs"])
        probe_freqs = tuple(float(f) for f in doc["probe_freqs"])
        trial_docs = doc["trials"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{manifest_path}: malformed manifest: {exc}") from exc

    trials = []
    for td in trial_docs:
        entry = TrialManifestEntry(
            trial_id=str(td["trial_id"]),
            freq=None if td.get("freq") is None else float(td["freq"]),
            file=str(td["file"]),
            duration_s=float(td["duration_s"]),
            seed=None if td.get("seed") is None else int(td["seed"]),
            extras={k: v for k, v in td.items() if k not in _KNOWN_TRIAL_KEYS},
        )
        trial_path = manifest_path.parent / entry.file
        if not trial_path.exists():
            raise DataError(
                f"{manifest_path}: trial {entry.trial_id!r} references missing file "
                f"{entry.file!r}"
            )
        window = read_trial_csv(trial_path, expected_fs=fs)
        expected_rows = round(entry.duration_s * fs)
        if window.n_samples != expected_rows:
            raise DataError(
                f"{trial_path}: {window.n_samples} samples, manifest implies "
                f"{expected_rows}"
            )
        trials.append((entry, window))
    extras = {k: v for k, v in doc.items() if k not in _KNOWN_MANIFEST_KEYS}
    return Dataset(fs=fs, probe_freqs=probe_freqs, trials=tuple(trials), extras=extras)
