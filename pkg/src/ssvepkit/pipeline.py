"""Windowing, feature extraction, classification and reporting.

Mirrors the offline protocol: non-overlapping windows, the per-window
feature triple <true frequency, T at each probe frequency>, a least-squares
binary classifier trained on the first trial per frequency, and accuracy /
ITR reporting. A consecutive-agreement smoother is provided for live use
only; it never feeds the reported accuracies.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ssvepkit.sigmodel import EegWindow, t_statistic


class PipelineError(ValueError):
    pass


@dataclass(frozen=True)
class WindowPolicy:
    length_s: float
    hop_s: float | None = None  # None -> non-overlapping (hop = length)
    drop_partial: bool = True

    def __post_init__(self):
        hop = self.length_s if self.hop_s is None else self.hop_s
        object.__setattr__(self, "hop_s", hop)
        if not self.length_s > 0:
            raise PipelineError(f"window length must be positive, got {self.length_s}")
        if not 0 < hop <= self.length_s:
            raise PipelineError(
                f"hop must be in (0, length]; got hop={hop}, length={self.length_s}"
            )


@dataclass(frozen=True)
class FeatureRecord:
    t_values: dict  # probe frequency -> T
    true_freq: float | None = None
    trial_id: str | None = None
    window_index: int = 0

    def argmax_freq(self) -> float:
        """Probe frequency with the largest T; ties go to the smaller freq."""
        best = None
        for f in sorted(self.t_values):
            if best is None or self.t_values[f] > self.t_values[best]:
                best = f
        return best


@dataclass(frozen=True)
class LinearClassifier:
    """Least-squares binary classifier on (T per probe frequency, 1).

    classes are the two frequency labels sorted ascending; a positive linear
    response predicts classes[1], negative classes[0], and an exact zero
    resolves deterministically to the smaller label.
    """

    probe_freqs: tuple
    classes: tuple
    weights: np.ndarray  # len(probe_freqs) feature weights + bias, last entry
    degenerate: bool = False

    def response(self, record: FeatureRecord) -> float:
        x = [record.t_values[f] for f in self.probe_freqs]
        x.append(1.0)
        return float(np.dot(self.weights, x))

    def predict(self, record: FeatureRecord) -> float:
        return self.classes[1] if self.response(record) > 0 else self.classes[0]

    def to_dict(self) -> dict:
        return {
            "probe_freqs": list(self.probe_freqs),
            "classes": list(self.classes),
            "weights": [float(w) for w in self.weights],
            "degenerate": self.degenerate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearClassifier":
        return cls(
            probe_freqs=tuple(float(f) for f in d["probe_freqs"]),
            classes=tuple(float(c) for c in d["classes"]),
            weights=np.asarray(d["weights"], dtype=float),
            degenerate=bool(d.get("degenerate", False)),
        )


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    confusion: tuple  # 2x2 counts, rows true class, cols predicted
    n_windows: int
    window_length_s: float
    itr_bits_per_min: float
    classes: tuple = ()

    def to_json(self) -> str:
        return json.dumps(
            {
                "accuracy": self.accuracy,
                "confusion": [list(row) for row in self.confusion],
                "n_windows": self.n_windows,
                "window_length_s": self.window_length_s,
                "itr_bits_per_min": self.itr_bits_per_min,
                "classes": list(self.classes),
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        d = json.loads(text)
        return cls(
            accuracy=d["accuracy"],
            confusion=tuple(tuple(row) for row in d["confusion"]),
            n_windows=d["n_windows"],
            window_length_s=d["window_length_s"],
            itr_bits_per_min=d["itr_bits_per_min"],
            classes=tuple(d.get("classes", ())),
        )


def segment(recording: EegWindow, policy: WindowPolicy) -> list[EegWindow]:
    """Cut a recording into fixed-length windows at the policy's hop."""
    win = round(policy.length_s * recording.fs)
    hop = round(policy.hop_s * recording.fs)
    if win < 2 or hop < 1:
        raise PipelineError("window policy degenerates below one sample")
    n = recording.n_samples
    if n < win:
        raise PipelineError(
            f"recording of {n} samples shorter than one {win}-sample window"
        )
    out = []
    start = 0
    while start + win <= n:
        out.append(
            EegWindow(
                samples=recording.samples[start : start + win],
                fs=recording.fs,
                t0=recording.t0 + start / recording.fs,
            )
        )
        start += hop
    # drop_partial=False keeps a trailing ramp only if it still fills a
    # window ending at the recording tail.
    if not policy.drop_partial and out and start < n:
        out.append(
            EegWindow(
                samples=recording.samples[n - win :],
                fs=recording.fs,
                t0=recording.t0 + (n - win) / recording.fs,
            )
        )
    return out


def extract_features(
    windows,
    probe_freqs,
    n_harmonics: int,
    ar_order: int,
    true_freq: float | None = None,
    trial_id: str | None = None,
) -> list[FeatureRecord]:
    """One FeatureRecord per window: T at every probe frequency, irrespective
    of the actual stimulation frequency."""
    probe_freqs = tuple(probe_freqs)
    if not probe_freqs:
        raise PipelineError("probe frequency set must be non-empty")
    records = []
    for i, w in enumerate(windows):
        t_values = {
            float(f): t_statistic(w, f, n_harmonics, ar_order) for f in probe_freqs
        }
        records.append(
            FeatureRecord(
                t_values=t_values,
                true_freq=true_freq,
                trial_id=trial_id,
                window_index=i,
            )
        )
    return records


def first_trial_split(labeled_trials):
    """Split (label, item) pairs trial-ordered: the first trial seen for each
    label trains, the rest test. No shuffling; order is the acquisition
    order."""
    seen = set()
    train, test = [], []
    for label, item in labeled_trials:
        if label not in seen:
            seen.add(label)
            train.append((label, item))
        else:
            test.append((label, item))
    return train, test


def train_classifier(train: list[FeatureRecord]) -> LinearClassifier:
    """Fit +-1 targets on (T values, 1) by least squares."""
    if len(train) < 2:
        raise PipelineError(f"need >= 2 training records, got {len(train)}")
    labels = sorted({r.true_freq for r in train})
    if None in labels or len(labels) != 2:
        raise PipelineError(
            f"training needs exactly two labeled classes, got {labels}"
        )
    classes = tuple(labels)
    probe_freqs = tuple(sorted(train[0].t_values))
    for r in train:
        if tuple(sorted(r.t_values)) != probe_freqs:
            raise PipelineError("probe frequency set differs across records")
    x = np.array(
        [[r.t_values[f] for f in probe_freqs] + [1.0] for r in train]
    )
    y = np.array([1.0 if r.true_freq == classes[1] else -1.0 for r in train])

    features = x[:, :-1]
    if np.allclose(features, features[0], atol=1e-12):
        # Features carry no class information; fall back to the majority
        # class (ties to the smaller label via the zero-response rule).
        n_pos = int(np.sum(y > 0))
        n_neg = len(y) - n_pos
        bias = 1.0 if n_pos > n_neg else (-1.0 if n_neg > n_pos else 0.0)
        w = np.zeros(len(probe_freqs) + 1)
        w[-1] = bias
        return LinearClassifier(
            probe_freqs=probe_freqs, classes=classes, weights=w, degenerate=True
        )

    # lstsq handles singular normal equations via the pseudoinverse.
    w, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
    return LinearClassifier(
        probe_freqs=probe_freqs,
        classes=classes,
        weights=w,
        degenerate=bool(rank < x.shape[1]),
    )


def evaluate(
    classifier: LinearClassifier,
    test: list[FeatureRecord],
    window_length_s: float,
) -> EvalReport:
    """Per-window prediction vs true label; accuracy, confusion and ITR."""
    if not test:
        raise PipelineError("test set is empty")
    classes = classifier.classes
    confusion = [[0, 0], [0, 0]]
    for r in test:
        if r.true_freq not in classes:
            raise PipelineError(
                f"record labeled {r.true_freq}, classifier knows {classes}"
            )
        pred = classifier.predict(r)
        confusion[classes.index(r.true_freq)][classes.index(pred)] += 1
    n = len(test)
    correct = confusion[0][0] + confusion[1][1]
    accuracy = correct / n
    itr = itr_bits_per_min(len(classes), accuracy, window_length_s)
    return EvalReport(
        accuracy=accuracy,
        confusion=tuple(tuple(row) for row in confusion),
        n_windows=n,
        window_length_s=window_length_s,
        itr_bits_per_min=itr,
        classes=classes,
    )


def sliding_smoother(records, depth: int):
    """Consecutive-agreement smoothing of per-window winners.

    Yields, per record, the argmax frequency once it has won `depth`
    consecutive windows, else None (undecided). Live-mode feature only;
    offline accuracy reporting never uses it.
    """
    if depth < 1:
        raise PipelineError(f"smoother depth must be >= 1, got {depth}")
    streak_freq = None
    streak_len = 0
    for r in records:
        winner = r.argmax_freq()
        if winner == streak_freq:
            streak_len += 1
        else:
            streak_freq = winner
            streak_len = 1
        yield streak_freq if streak_len >= depth else None


def itr_bits_per_min(n_classes: int, accuracy: float, decision_period_s: float) -> float:
    """Information transfer rate (bits/min) for an N-class decision every
    decision_period_s seconds; clamped at 0 below chance."""
    if n_classes < 2:
        raise PipelineError(f"need >= 2 classes, got {n_classes}")
    if not 0.0 <= accuracy <= 1.0:
        raise PipelineError(f"accuracy must be in [0, 1], got {accuracy}")
    if not decision_period_s > 0:
        raise PipelineError(f"decision period must be positive, got {decision_period_s}")
    p = accuracy
    if p < 1.0 / n_classes:
        return 0.0  # below chance: the formula turns positive again there
    bits = math.log2(n_classes)
    if p > 0:
        bits += p * math.log2(p)
    if p < 1:
        bits += (1 - p) * math.log2((1 - p) / (n_classes - 1))
    return max(0.0, bits) * 60.0 / decision_period_s
