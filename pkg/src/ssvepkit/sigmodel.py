"""Core numerical kernels for single-channel SSVEP detection.

Implements the harmonic reference basis, SSVEP projection/removal, harmonic
power estimation, AR background fitting (Levinson-Durbin on the biased
autocovariance) and the noise-normalized T statistic, plus an
autocorrelation-based PSD utility.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "EegWindow",
    "HarmonicBasis",
    "ArModel",
    "Psd",
    "TStatResult",
    "SigModelError",
    "NyquistError",
    "DimensionError",
    "RankDeficientError",
    "IllConditionedError",
    "build_reference_basis",
    "project_out_ssvep",
    "ssvep_power",
    "autocovariance",
    "levinson_durbin",
    "ar_noise_at_harmonic",
    "t_statistic",
    "t_statistic_detailed",
    "psd_via_autocorrelation",
]

# Global power calibration for the T statistic. Unit-norm basis columns make
# P_k scale-consistent; the N_t/2 raw-column energy is folded back in inside
# t_statistic so that the pi*N_t/4 noise normalization yields a null mean
# near 4/pi. This constant absorbs any residual bias; fixed by the Monte
# Carlo null test.
DEFAULT_CALIBRATION = 1.0

# Relative variance floor applied to the per-harmonic noise estimate:
# floor = VARIANCE_FLOOR_REL * r(0) * N_t.
VARIANCE_FLOOR_REL = 1e-12


class SigModelError(ValueError):
    """Base class for signal-model errors."""


class NyquistError(SigModelError):
    """A requested harmonic lies at or above the Nyquist frequency."""


class DimensionError(SigModelError):
    """Mismatched window/basis dimensions or degenerate sizes."""


class RankDeficientError(SigModelError):
    """The basis Gram matrix X'X is numerically rank deficient."""


class IllConditionedError(SigModelError):
    """Autocovariance sequence is not usable for AR fitting."""


@dataclass(frozen=True)
class EegWindow:
    """A fixed-rate single-channel signal segment.

    samples are unit-agnostic (microvolt scale in practice); t0 is the window
    start offset in seconds.
    """

    samples: np.ndarray
    fs: float
    t0: float = 0.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or samples.size < 2:
            raise DimensionError(
                f"window needs >= 2 samples in one channel, got shape {samples.shape}"
            )
        if not self.fs > 0:
            raise SigModelError(f"sampling rate must be positive, got {self.fs}")
        if not np.all(np.isfinite(samples)):
            raise SigModelError("window contains non-finite samples")

    @property
    def n_samples(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.fs


@dataclass(frozen=True)
class HarmonicBasis:
    """Reference matrix of unit-norm sin/cos column pairs at k*freq.

    ``columns`` is N_t x 2*N_h; ``raw_norms`` holds the Euclidean norms the
    raw (unnormalized) sinusoid columns had before normalization, needed to
    recover absolute power.
    """

    freq: float
    n_harmonics: int
    fs: float
    n_samples: int
    columns: np.ndarray
    raw_norms: np.ndarray = field(repr=False, default=None)


@dataclass(frozen=True)
class ArModel:
    """AR(p) parameters in the convention x_t + sum_j a_j x_{t-j} = e_t."""

    order: int
    coeffs: np.ndarray
    innovation_var: float

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        object.__setattr__(self, "coeffs", coeffs)
        if coeffs.size != self.order:
            raise SigModelError("coefficient count must equal the model order")
        if self.innovation_var < 0:
            raise SigModelError("innovation variance must be nonnegative")


@dataclass(frozen=True)
class Psd:
    freqs: np.ndarray
    power: np.ndarray


@dataclass(frozen=True)
class TStatResult:
    """T statistic with per-harmonic breakdown and clamping metadata."""

    t: float
    harmonic_powers: np.ndarray
    noise_levels: np.ndarray
    noise_floor_clamped: bool
    ar_model: ArModel


def build_reference_basis(
    freq: float, fs: float, n_samples: int, n_harmonics: int
) -> HarmonicBasis:
    """Build the N_t x 2*N_h reference matrix of sin/cos pairs at k*freq.

    Columns are unit Euclidean norm; raises NyquistError when any harmonic
    reaches fs/2.
    """
    if n_harmonics < 1:
        raise SigModelError(f"need at least one harmonic, got {n_harmonics}")
    if n_samples < 2:
        raise DimensionError(f"degenerate window length {n_samples}")
    if not (freq > 0 and fs > 0):
        raise SigModelError("freq and fs must be positive")
    if n_harmonics * freq >= fs / 2:
        raise NyquistError(
            f"harmonic {n_harmonics} of {freq} Hz is at/above Nyquist ({fs / 2} Hz)"
        )
    t = np.arange(n_samples) / fs
    cols = np.empty((n_samples, 2 * n_harmonics))
    for k in range(1, n_harmonics + 1):
        phase = 2.0 * np.pi * k * freq * t
        cols[:, 2 * k - 2] = np.sin(phase)
        cols[:, 2 * k - 1] = np.cos(phase)
    raw_norms = np.linalg.norm(cols, axis=0)
    cols /= raw_norms
    return HarmonicBasis(
        freq=float(freq),
        n_harmonics=int(n_harmonics),
        fs=float(fs),
        n_samples=int(n_samples),
        columns=cols,
        raw_norms=raw_norms,
    )


@lru_cache(maxsize=64)
def _cached_basis(freq: float, fs: float, n_samples: int, n_harmonics: int) -> HarmonicBasis:
    return build_reference_basis(freq, fs, n_samples, n_harmonics)


def project_out_ssvep(window: EegWindow, basis: HarmonicBasis) -> EegWindow:
    """Remove the stimulus-correlated subspace: s_tilde = s - X (X'X)^-1 X' s."""
    if window.n_samples != basis.n_samples:
        raise DimensionError(
            f"window has {window.n_samples} samples, basis expects {basis.n_samples}"
        )
    x = basis.columns
    gram = x.T @ x
    # Unit-norm columns: a rank-deficient Gram shows up as a tiny eigenvalue.
    if np.linalg.cond(gram) > 1e12:
        raise RankDeficientError(
            "basis columns are numerically linearly dependent; refusing to regularize"
        )
    coef = np.linalg.solve(gram, x.T @ window.samples)
    residual = window.samples - x @ coef
    return EegWindow(samples=residual, fs=window.fs, t0=window.t0)


def ssvep_power(window: EegWindow, basis: HarmonicBasis, harmonic: int) -> float:
    """Estimated SSVEP power at the given harmonic: squared projection onto
    that harmonic's unit-norm sin/cos pair."""
    if not 1 <= harmonic <= basis.n_harmonics:
        raise SigModelError(
            f"harmonic {harmonic} out of range 1..{basis.n_harmonics}"
        )
    if window.n_samples != basis.n_samples:
        raise DimensionError(
            f"window has {window.n_samples} samples, basis expects {basis.n_samples}"
        )
    pair = basis.columns[:, 2 * harmonic - 2 : 2 * harmonic]
    proj = pair.T @ window.samples
    return float(proj @ proj)


def autocovariance(window: EegWindow, max_lag: int) -> np.ndarray:
    """Biased autocovariance r(0)..r(max_lag) of the mean-removed signal.

    Computed by zero-padded FFT (Wiener-Khinchin); the biased (divide by N_t)
    estimate keeps the sequence positive semidefinite.
    """
    n = window.n_samples
    if not 0 <= max_lag < n:
        raise SigModelError(f"max_lag {max_lag} must be in [0, {n - 1}]")
    x = window.samples - window.samples.mean()
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(spec * np.conj(spec), nfft)[: max_lag + 1] / n
    return acov


def levinson_durbin(autocov: np.ndarray, order: int) -> ArModel:
    """Solve the Yule-Walker equations by Levinson-Durbin recursion.

    Returns coefficients in the 1 + sum_j a_j z^-j convention and the final
    prediction-error power as innovation variance.
    """
    r = np.asarray(autocov, dtype=float)
    if order < 0:
        raise SigModelError(f"order must be nonnegative, got {order}")
    if r.size < order + 1:
        raise SigModelError(
            f"need autocovariance up to lag {order}, got {r.size - 1}"
        )
    if not r[0] > 0:
        raise IllConditionedError(f"r(0) must be positive, got {r[0]}")
    # Predictor convention x_t = sum_j a_j x_{t-j} + e_t; negated on return.
    a = np.zeros(order)
    err = r[0]
    for m in range(1, order + 1):
        k = (r[m] - a[: m - 1] @ r[m - 1 : 0 : -1]) / err
        if not np.isfinite(k) or abs(k) >= 1.0:
            raise IllConditionedError(
                f"reflection coefficient |k_{m}| = {abs(k):.6g} >= 1; "
                "autocovariance is not positive definite"
            )
        a[: m - 1] -= k * a[: m - 1][::-1].copy()
        a[m - 1] = k
        err *= 1.0 - k * k
        if err <= 0:
            raise IllConditionedError(
                f"prediction error became nonpositive at order {m}"
            )
    return ArModel(order=order, coeffs=-a, innovation_var=float(err))


def ar_noise_at_harmonic(
    model: ArModel, n_samples: int, freq: float, harmonic: int, fs: float
) -> float:
    """AR-interpolated noise level at harmonic k of freq:

        sigma_k^2 = (pi*N_t/4) * sigma^2 / |1 + sum_j a_j exp(-2pi i j k f / fs)|^2
    """
    if harmonic * freq >= fs / 2:
        raise NyquistError(
            f"harmonic {harmonic} of {freq} Hz is at/above Nyquist ({fs / 2} Hz)"
        )
    j = np.arange(1, model.order + 1)
    denom = 1.0 + np.sum(model.coeffs * np.exp(-2j * np.pi * j * harmonic * freq / fs))
    return float(np.pi * n_samples / 4.0 * model.innovation_var / abs(denom) ** 2)


def t_statistic_detailed(
    window: EegWindow,
    freq: float,
    n_harmonics: int,
    ar_order: int,
    calibration: float = DEFAULT_CALIBRATION,
) -> TStatResult:
    """T statistic with per-harmonic breakdown.

    Mean-removes the window, estimates harmonic SSVEP power, removes the
    stimulus-correlated subspace, fits AR(p) to the residual on the same
    segment (no separate calibration recording) and averages the per-harmonic
    SNRs. The per-harmonic noise estimate is floored at
    VARIANCE_FLOOR_REL * r(0) * N_t to keep near noise-free input finite.
    """
    n = window.n_samples
    demeaned = EegWindow(
        samples=window.samples - window.samples.mean(), fs=window.fs, t0=window.t0
    )
    basis = _cached_basis(float(freq), float(window.fs), n, int(n_harmonics))
    # Absolute per-harmonic power: projection onto unit columns, scaled back
    # by the raw column energies so the pi*N_t/4 normalization applies.
    proj = basis.columns.T @ demeaned.samples
    raw_proj_sq = (proj * basis.raw_norms) ** 2
    powers = raw_proj_sq[0::2] + raw_proj_sq[1::2]

    residual = project_out_ssvep(demeaned, basis)
    acov = autocovariance(residual, ar_order)
    if not acov[0] > 0:
        raise IllConditionedError(
            "residual has zero power; cannot estimate a noise floor "
            "(noise-free input saturates the T statistic)"
        )
    model = levinson_durbin(acov, ar_order)

    floor = VARIANCE_FLOOR_REL * acov[0] * n
    clamped = False
    noise = np.empty(n_harmonics)
    for k in range(1, n_harmonics + 1):
        sigma_k2 = ar_noise_at_harmonic(model, n, freq, k, window.fs)
        if sigma_k2 < floor:
            sigma_k2 = floor
            clamped = True
        noise[k - 1] = sigma_k2
    t = calibration * float(np.mean(powers / noise))
    return TStatResult(
        t=t,
        harmonic_powers=powers,
        noise_levels=noise,
        noise_floor_clamped=clamped,
        ar_model=model,
    )


def t_statistic(
    window: EegWindow,
    freq: float,
    n_harmonics: int,
    ar_order: int,
    calibration: float = DEFAULT_CALIBRATION,
) -> float:
    """Noise-normalized SSVEP response strength at freq (scalar form)."""
    return t_statistic_detailed(window, freq, n_harmonics, ar_order, calibration).t


def psd_via_autocorrelation(window: EegWindow) -> Psd:
    """PSD as the FFT of the full biased autocovariance sequence.

    Frequency grid runs 0..fs/2; tiny negative rounding (> -1e-9 relative)
    is clipped to zero.
    """
    n = window.n_samples
    if n < 64:
        raise DimensionError(f"window too short for PSD, need >= 64 samples, got {n}")
    acov = autocovariance(window, n - 1)
    # Zero-padded symmetric extension keeps positive and negative lags from
    # folding onto each other; the transform is then the sampled DTFT of the
    # biased autocovariance, i.e. the (nonnegative) periodogram on a 2N grid.
    sym = np.concatenate([acov, [0.0], acov[:0:-1]])
    power = np.fft.rfft(sym).real
    scale = max(power.max(), 1.0)
    if power.min() < -1e-9 * scale:
        raise SigModelError("PSD came out significantly negative; numerical failure")
    power = np.clip(power, 0.0, None)
    freqs = np.arange(power.size) * window.fs / sym.size
    return Psd(freqs=freqs, power=power)
