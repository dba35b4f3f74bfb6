"""Synthetic single-channel EEG: SSVEP sinusoids over AR background noise.

The generator realizes the same signal model the detector assumes (harmonic
sinusoids + broadband background + white measurement noise), so it serves as
the toolkit's ground-truth oracle. Frame-locked stimulus schedules for a
fixed-refresh display live here too.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal as sps

from ssvepkit import dataio
from ssvepkit.sigmodel import ArModel, EegWindow

BURN_IN_FACTOR = 10


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class SsvepSpec:
    freq: float
    harmonic_amps: tuple
    harmonic_phases: tuple = ()

    def __post_init__(self):
        amps = tuple(float(a) for a in self.harmonic_amps)
        phases = tuple(float(p) for p in self.harmonic_phases)
        if not phases:
            phases = (0.0,) * len(amps)
        if len(phases) != len(amps):
            raise SynthError("need one phase per harmonic amplitude")
        if any(a < 0 for a in amps):
            raise SynthError("harmonic amplitudes must be nonnegative")
        object.__setattr__(self, "harmonic_amps", amps)
        object.__setattr__(self, "harmonic_phases", tuple(p % (2 * np.pi) for p in phases))


@dataclass(frozen=True)
class NoiseSpec:
    ar_model: ArModel
    white_std: float = 0.0

    def __post_init__(self):
        if self.white_std < 0:
            raise SynthError("white noise std must be nonnegative")


@dataclass(frozen=True)
class FrameSchedule:
    refresh_hz: float
    pattern: tuple  # repeating on(1)/off(0) frame list
    effective_freq: float
    duty: float


def default_background_ar(order: int = 20, seed: int = 7, target_std: float = 1.0) -> ArModel:
    """A fixed stable AR model with broadband low-pass character and unit
    output standard deviation, used as the standard synthetic EEG
    background."""
    if order % 2 != 0 or order < 2:
        raise SynthError("background AR order must be even and >= 2")
    rng = np.random.default_rng(seed)
    radii = rng.uniform(0.3, 0.75, order // 2)
    angles = rng.uniform(0.02 * np.pi, 0.7 * np.pi, order // 2)
    roots = radii * np.exp(1j * angles)
    poly = np.poly(np.concatenate([roots, roots.conj()])).real
    # Normalize: process variance is the spectral mean of 1/|A(e^{iw})|^2.
    omega = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
    a_eval = np.polyval(poly[::-1], np.exp(-1j * omega))  # 1 + sum a_j e^{-iwj}
    var_unit = float(np.mean(1.0 / np.abs(a_eval) ** 2))
    return ArModel(
        order=order, coeffs=poly[1:], innovation_var=target_std**2 / var_unit
    )


def ar_background(model: ArModel, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """AR-filtered Gaussian innovations with burn-in discarded."""
    burn = BURN_IN_FACTOR * max(model.order, 1)
    e = rng.standard_normal(n_samples + burn) * np.sqrt(model.innovation_var)
    x = sps.lfilter([1.0], np.concatenate([[1.0], model.coeffs]), e)
    return x[burn:]


def pink_background(n_samples: int, rng: np.random.Generator, alpha: float = 1.0) -> np.ndarray:
    """1/f^alpha noise via spectral shaping; model-mismatch alternative to
    the AR background."""
    nfft = 1 << int(np.ceil(np.log2(max(n_samples, 2))))
    spec = rng.standard_normal(nfft // 2 + 1) + 1j * rng.standard_normal(nfft // 2 + 1)
    f = np.arange(nfft // 2 + 1, dtype=float)
    f[0] = 1.0
    spec /= f ** (alpha / 2.0)
    spec[0] = 0.0
    x = np.fft.irfft(spec, nfft)[:n_samples]
    return x / x.std()


def ssvep_component(spec: SsvepSpec, n_samples: int, fs: float) -> np.ndarray:
    t = np.arange(n_samples) / fs
    out = np.zeros(n_samples)
    for k, (a, phi) in enumerate(zip(spec.harmonic_amps, spec.harmonic_phases), start=1):
        out += a * np.sin(2 * np.pi * k * spec.freq * t + phi)
    return out


def quantize(samples: np.ndarray, n_bits: int = 12, full_scale: float = 100.0) -> np.ndarray:
    """Uniform quantizer over [-full_scale, full_scale], mimicking a low-bit
    acquisition front end. Off by default in generation."""
    levels = 2**n_bits
    step = 2 * full_scale / levels
    clipped = np.clip(samples, -full_scale, full_scale - step)
    return np.round(clipped / step) * step


def bandpass(samples: np.ndarray, fs: float, lo: float = 3.0, hi: float = 100.0) -> np.ndarray:
    """4th-order forward-backward band-pass, approximating the acquisition
    device's analog front end. Off by default."""
    sos = sps.butter(4, [lo, hi], btype="bandpass", fs=fs, output="sos")
    return sps.sosfiltfilt(sos, samples)


def generate_trial(
    ssvep: SsvepSpec | None,
    noise: NoiseSpec,
    duration_s: float,
    fs: float,
    seed: int,
    quantize_bits: int | None = None,
    bandpass_hz: tuple | None = None,
) -> EegWindow:
    """One synthetic trial; same seed gives bit-identical output."""
    n = round(duration_s * fs)
    if n < 2:
        raise SynthError(f"duration {duration_s}s at {fs} Hz yields {n} samples")
    rng = np.random.default_rng(seed)
    x = ar_background(noise.ar_model, n, rng)
    if noise.white_std > 0:
        x = x + noise.white_std * rng.standard_normal(n)
    if ssvep is not None:
        x = x + ssvep_component(ssvep, n, fs)
    if bandpass_hz is not None:
        x = bandpass(x, fs, *bandpass_hz)
    if quantize_bits is not None:
        x = quantize(x, quantize_bits)
    return EegWindow(samples=x, fs=fs, t0=0.0)


def frame_schedule(target_freq: float, refresh_hz: float, duty: float) -> FrameSchedule:
    """Frame-locked flicker pattern: the display refresh must divide into an
    integer number of frames per flicker period (vsync lock); the requested
    duty is rounded to the nearest whole-frame duty."""
    if not (target_freq > 0 and refresh_hz > 0):
        raise SynthError("frequencies must be positive")
    period = refresh_hz / target_freq
    if abs(period - round(period)) > 1e-9:
        raise SynthError(
            f"{target_freq} Hz needs {period:.3f} frames per period at "
            f"{refresh_hz} Hz refresh; vsync-locked flicker requires an integer "
            "frame count"
        )
    period = round(period)
    if not 0 < duty < 1:
        raise SynthError(f"duty must be in (0, 1), got {duty}")
    n_on = round(duty * period)
    n_on = min(max(n_on, 1), period - 1)
    pattern = (1,) * n_on + (0,) * (period - n_on)
    return FrameSchedule(
        refresh_hz=float(refresh_hz),
        pattern=pattern,
        effective_freq=refresh_hz / period,
        duty=n_on / period,
    )


@dataclass(frozen=True)
class SnrProfile:
    """Harmonic amplitudes relative to the background; free parameters of the
    synthetic protocol, swept in acceptance tests."""

    name: str
    harmonic_amps: tuple
    white_std: float = 0.5

    def scaled(self, factor: float) -> "SnrProfile":
        return SnrProfile(
            name=f"{self.name}*{factor:g}",
            harmonic_amps=tuple(a * factor for a in self.harmonic_amps),
            white_std=self.white_std,
        )


SNR_PROFILES = {
    "high": SnrProfile("high", (1.0, 0.5)),
    "moderate": SnrProfile("moderate", (0.3, 0.15)),
    "low": SnrProfile("low", (0.12, 0.06)),
    "zero": SnrProfile("zero", (0.0, 0.0)),
}


def generate_session(
    config: dataio.SessionConfig,
    out_dir,
    per_freq_trials: int = 2,
    duration_s: float = 30.0,
    snr_profile: SnrProfile | str = "high",
    seed: int = 0,
) -> Path:
    """Generate a labeled multi-trial dataset on disk, returning the manifest
    path. Trial order interleaves frequencies round by round, so the first
    trial per frequency (the training trial downstream) comes first."""
    if isinstance(snr_profile, str):
        try:
            snr_profile = SNR_PROFILES[snr_profile]
        except KeyError:
            raise SynthError(
                f"unknown SNR profile {snr_profile!r}; choose from {sorted(SNR_PROFILES)}"
            ) from None
    if per_freq_trials < 1:
        raise SynthError(f"need >= 1 trial per frequency, got {per_freq_trials}")
    if not config.probe_freqs:
        raise SynthError("config lists no stimulation frequencies")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    background = default_background_ar(order=config.ar_order)
    root = np.random.SeedSequence(seed)
    entries = []
    for round_idx in range(per_freq_trials):
        for freq in config.probe_freqs:
            trial_seed = int(root.spawn(1)[0].generate_state(1)[0])
            spec = None
            if any(a > 0 for a in snr_profile.harmonic_amps):
                spec = SsvepSpec(freq=freq, harmonic_amps=snr_profile.harmonic_amps)
            window = generate_trial(
                spec,
                NoiseSpec(ar_model=background, white_std=snr_profile.white_std),
                duration_s,
                config.fs,
                trial_seed,
            )
            trial_id = f"trial{round_idx:02d}_f{freq:g}"
            fname = f"{trial_id}.csv"
            dataio.write_trial_csv(window, out_dir / fname)
            entries.append(
                dataio.TrialManifestEntry(
                    trial_id=trial_id,
                    freq=float(freq),
                    file=fname,
                    duration_s=float(duration_s),
                    seed=trial_seed,
                    extras={"snr_profile": snr_profile.name},
                )
            )
    manifest_path = out_dir / "manifest.json"
    dataio.write_manifest(
        manifest_path,
        config.fs,
        config.probe_freqs,
        entries,
        extras={"config": config.to_dict(), "seed": seed},
    )
    return manifest_path
