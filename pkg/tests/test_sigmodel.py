import numpy as np
import pytest
from scipy.linalg import toeplitz

from conftest import random_stationary_autocov
from ssvepkit import sigmodel as sm
from ssvepkit import synthgen as sg


def make_window(samples, fs=512.0):
    return sm.EegWindow(samples=np.asarray(samples, dtype=float), fs=fs)


class TestEegWindow:
    def test_rejects_short(self):
        with pytest.raises(sm.SigModelError):
            make_window([1.0])

    def test_rejects_nonfinite(self):
        with pytest.raises(sm.SigModelError):
            make_window([1.0, np.nan, 2.0])

    def test_rejects_bad_fs(self):
        with pytest.raises(sm.SigModelError):
            sm.EegWindow(samples=np.zeros(4), fs=0.0)


class TestReferenceBasis:
    def test_near_orthonormal_gram(self):
        b = sm.build_reference_basis(15, 512, 1024, 2)
        assert b.columns.shape == (1024, 4)
        gram = b.columns.T @ b.columns
        off = np.abs(gram - np.eye(4)).max()
        assert off < 1e-3

    def test_integer_cycle_gram_is_identity(self):
        # 2 s at 512 Hz: every harmonic of 15 Hz has an integer cycle count.
        b = sm.build_reference_basis(15, 512, 1024, 2)
        assert np.abs(b.columns.T @ b.columns - np.eye(4)).max() < 1e-6

    def test_nyquist_rejected(self):
        with pytest.raises(sm.NyquistError):
            sm.build_reference_basis(15, 60, 4, 2)  # 2*15 = Nyquist

    def test_unit_norm_columns(self):
        b = sm.build_reference_basis(12, 512, 1024, 1)
        assert b.columns.shape == (1024, 2)
        norms = np.linalg.norm(b.columns, axis=0)
        assert np.abs(norms - 1.0).max() < 1e-9

    def test_degenerate_length(self):
        with pytest.raises(sm.SigModelError):
            sm.build_reference_basis(12, 512, 1, 1)


class TestProjection:
    def setup_method(self):
        self.basis = sm.build_reference_basis(15, 512, 1024, 2)

    def test_span_removed(self):
        w = make_window(3.7 * self.basis.columns[:, 0])
        resid = sm.project_out_ssvep(w, self.basis)
        assert np.abs(resid.samples).max() < 1e-9

    def test_orthogonal_untouched(self):
        # 8 Hz over 2 s = 16 whole cycles: orthogonal to 15/30 Hz columns.
        t = np.arange(1024) / 512
        w = make_window(np.sin(2 * np.pi * 8 * t))
        resid = sm.project_out_ssvep(w, self.basis)
        assert np.abs(resid.samples - w.samples).max() < 1e-9

    def test_residual_orthogonality(self):
        rng = np.random.default_rng(0)
        w = make_window(rng.standard_normal(1024))
        resid = sm.project_out_ssvep(w, self.basis)
        inner = self.basis.columns.T @ resid.samples
        assert np.abs(inner).max() < 1e-8

    def test_idempotent(self):
        rng = np.random.default_rng(1)
        w = make_window(rng.standard_normal(1024))
        once = sm.project_out_ssvep(w, self.basis)
        twice = sm.project_out_ssvep(once, self.basis)
        assert np.abs(twice.samples - once.samples).max() < 1e-10

    def test_energy_split(self):
        rng = np.random.default_rng(2)
        w = make_window(rng.standard_normal(1024))
        resid = sm.project_out_ssvep(w, self.basis)
        coef = self.basis.columns.T @ w.samples
        total = w.samples @ w.samples
        split = coef @ coef + resid.samples @ resid.samples
        assert abs(total - split) / total < 1e-8

    def test_dimension_mismatch(self):
        w = make_window(np.zeros(512) + np.arange(512))
        with pytest.raises(sm.DimensionError):
            sm.project_out_ssvep(w, self.basis)

    def test_rank_deficient_reported(self):
        cols = self.basis.columns.copy()
        cols[:, 1] = cols[:, 0]  # duplicate column
        bad = sm.HarmonicBasis(
            freq=15, n_harmonics=2, fs=512, n_samples=1024, columns=cols
        )
        rng = np.random.default_rng(3)
        with pytest.raises(sm.RankDeficientError):
            sm.project_out_ssvep(make_window(rng.standard_normal(1024)), bad)


class TestSsvepPower:
    def setup_method(self):
        self.basis = sm.build_reference_basis(15, 512, 1024, 2)

    def test_exact_projection(self):
        w = make_window(2.5 * self.basis.columns[:, 0])
        assert sm.ssvep_power(w, self.basis, 1) == pytest.approx(6.25, abs=1e-9)

    def test_white_noise_mean_power(self):
        # Each harmonic projects onto two orthonormal directions: mean 2*var.
        rng = np.random.default_rng(4)
        sigma = 1.7
        draws = sigma * rng.standard_normal((10_000, 1024))
        pair = self.basis.columns[:, 0:2]
        proj = draws @ pair
        p = (proj**2).sum(axis=1)
        assert p.mean() == pytest.approx(2 * sigma**2, rel=0.05)

    def test_single_harmonic_signal(self, background):
        spec = sg.SsvepSpec(freq=15, harmonic_amps=(10.0,))
        w = sg.generate_trial(spec, sg.NoiseSpec(background, 0.0), 2.0, 512, 5)
        # Amplitude 10x the (unit) noise std: fundamental dwarfs harmonic 2.
        p1 = sm.ssvep_power(w, self.basis, 1)
        p2 = sm.ssvep_power(w, self.basis, 2)
        assert p1 / p2 > 100

    def test_harmonic_out_of_range(self):
        w = make_window(np.arange(1024, dtype=float))
        with pytest.raises(sm.SigModelError):
            sm.ssvep_power(w, self.basis, 3)


class TestAutocovariance:
    def test_constant_window(self):
        r = sm.autocovariance(make_window(np.full(256, 4.2)), 10)
        assert np.abs(r).max() == pytest.approx(0.0, abs=1e-12)

    def test_sinusoid_power(self):
        t = np.arange(1024) / 512
        r = sm.autocovariance(make_window(np.sin(2 * np.pi * 16 * t)), 5)
        assert r[0] == pytest.approx(0.5, abs=1e-6)

    def test_matches_time_domain_oracle(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            n = int(rng.integers(64, 1024))
            x = rng.standard_normal(n)
            max_lag = int(rng.integers(1, n))
            r = sm.autocovariance(make_window(x), max_lag)
            xc = x - x.mean()
            oracle = np.array(
                [xc[: n - tau] @ xc[tau:] / n for tau in range(max_lag + 1)]
            )
            assert np.abs(r - oracle).max() < 1e-9

    def test_zero_lag_dominates(self):
        rng = np.random.default_rng(7)
        r = sm.autocovariance(make_window(rng.standard_normal(512)), 100)
        assert r[0] >= np.abs(r[1:]).max()

    def test_max_lag_too_large(self):
        with pytest.raises(sm.SigModelError):
            sm.autocovariance(make_window(np.arange(16.0)), 16)


class TestLevinsonDurbin:
    def test_ar1_closed_form(self):
        # AR(1), pole 0.5, unit innovations: r = [4/3, 2/3].
        m = sm.levinson_durbin(np.array([4 / 3, 2 / 3]), 1)
        assert m.coeffs[0] == pytest.approx(-0.5, abs=1e-12)
        assert m.innovation_var == pytest.approx(1.0, abs=1e-12)

    def test_order_zero(self):
        m = sm.levinson_durbin(np.array([1.0]), 0)
        assert m.coeffs.size == 0
        assert m.innovation_var == 1.0

    @pytest.mark.parametrize("order", [1, 2, 4, 8, 12])
    def test_matches_dense_toeplitz_solve(self, order):
        rng = np.random.default_rng(order)
        for _ in range(20):
            r = random_stationary_autocov(rng, order)
            m = sm.levinson_durbin(r, order)
            a = np.linalg.solve(toeplitz(r[:order]), r[1 : order + 1])
            assert np.abs(m.coeffs - (-a)).max() < 1e-8

    def test_nonpositive_r0(self):
        with pytest.raises(sm.IllConditionedError):
            sm.levinson_durbin(np.array([0.0, 0.0]), 1)

    def test_invalid_sequence_breaks_down(self):
        with pytest.raises(sm.IllConditionedError):
            sm.levinson_durbin(np.array([1.0, 1.5]), 1)


class TestArNoiseAtHarmonic:
    def test_white_noise_case(self):
        m = sm.ArModel(order=0, coeffs=np.array([]), innovation_var=1.0)
        for k in (1, 2, 3):
            v = sm.ar_noise_at_harmonic(m, 512, 15, k, 512)
            assert v == pytest.approx(128 * np.pi, rel=1e-12)

    def test_lowpass_shape(self):
        m = sm.ArModel(order=1, coeffs=np.array([-0.9]), innovation_var=1.0)
        low = sm.ar_noise_at_harmonic(m, 512, 1.0, 1, 512)
        high = sm.ar_noise_at_harmonic(m, 512, 200.0, 1, 512)
        assert low > high

    def test_ar2_matches_polynomial_oracle(self):
        m = sm.ArModel(order=2, coeffs=np.array([-1.2, 0.5]), innovation_var=2.3)
        n_t, f, fs = 1024, 15.0, 512.0
        for k in (1, 2):
            got = sm.ar_noise_at_harmonic(m, n_t, f, k, fs)
            # Independent oracle: explicit complex arithmetic on the transfer
            # polynomial.
            z = complex(np.cos(2 * np.pi * k * f / fs), -np.sin(2 * np.pi * k * f / fs))
            denom = 1 + m.coeffs[0] * z + m.coeffs[1] * z * z
            want = np.pi * n_t / 4 * m.innovation_var / (denom * denom.conjugate()).real
            assert got == pytest.approx(want, rel=1e-10)

    def test_nyquist_precondition(self):
        m = sm.ArModel(order=0, coeffs=np.array([]), innovation_var=1.0)
        with pytest.raises(sm.NyquistError):
            sm.ar_noise_at_harmonic(m, 512, 200.0, 2, 512)


class TestTStatistic:
    def test_null_mean_is_order_one(self, background):
        # Stimulus-free AR noise: T hovers near 4/pi by construction.
        rng = np.random.default_rng(8)
        x = sg.ar_background(background, 1024 * 300, rng)
        ts = [
            sm.t_statistic(sm.EegWindow(x[i * 1024 : (i + 1) * 1024], 512), 15, 2, 20)
            for i in range(300)
        ]
        assert 0.5 < np.mean(ts) < 2.0

    def test_detects_strong_ssvep(self, background):
        spec = sg.SsvepSpec(freq=15, harmonic_amps=(10.0, 5.0))
        w = sg.generate_trial(spec, sg.NoiseSpec(background, 0.5), 2.0, 512, 9)
        assert sm.t_statistic(w, 15, 2, 20) / sm.t_statistic(w, 12, 2, 20) > 10

    def test_noise_free_input_saturates_or_errors(self):
        basis = sm.build_reference_basis(15, 512, 1024, 2)
        w = make_window(basis.columns @ np.array([1.0, 0.5, 0.3, 0.2]))
        try:
            t = sm.t_statistic(w, 15, 2, 20)
        except sm.SigModelError:
            return
        assert t > 1e6  # variance-floored saturation

    def test_scale_equivariance(self, background):
        w = sg.generate_trial(
            sg.SsvepSpec(15, (0.5, 0.25)), sg.NoiseSpec(background, 0.5), 2.0, 512, 10
        )
        t1 = sm.t_statistic(w, 15, 2, 20)
        scaled = sm.EegWindow(samples=w.samples * 37.5, fs=w.fs)
        t2 = sm.t_statistic(scaled, 15, 2, 20)
        assert t2 == pytest.approx(t1, rel=1e-6)

    def test_clamp_reported_in_metadata(self, background):
        w = sg.generate_trial(
            sg.SsvepSpec(15, (0.5, 0.25)), sg.NoiseSpec(background, 0.5), 2.0, 512, 11
        )
        res = sm.t_statistic_detailed(w, 15, 2, 20)
        assert res.noise_floor_clamped is False
        assert res.harmonic_powers.shape == (2,)
        assert np.all(res.noise_levels > 0)


class TestPsd:
    def test_pure_tone_argmax(self):
        t = np.arange(512 * 60) / 512
        psd = sm.psd_via_autocorrelation(make_window(np.sin(2 * np.pi * 15 * t)))
        bin_width = psd.freqs[1] - psd.freqs[0]
        peak = psd.freqs[int(np.argmax(psd.power))]
        assert abs(peak - 15.0) <= bin_width

    def test_ssvep_signal_peaks_at_harmonics(self, background):
        spec = sg.SsvepSpec(freq=15, harmonic_amps=(1.0, 0.5))
        w = sg.generate_trial(spec, sg.NoiseSpec(background, 0.5), 60.0, 512, 12)
        psd = sm.psd_via_autocorrelation(w)
        bin_width = psd.freqs[1] - psd.freqs[0]
        # Suppress each found peak's neighborhood before looking for the next.
        power = psd.power.copy()
        peaks = []
        for _ in range(2):
            i = int(np.argmax(power))
            peaks.append(psd.freqs[i])
            lo = max(0, i - int(1.0 / bin_width))
            power[lo : i + int(1.0 / bin_width)] = 0
        assert sorted(round(p) for p in peaks) == [15, 30]

    def test_white_noise_spectrum_is_flat(self):
        # Averaged over repetitions the spectrum has no structural peaks.
        rng = np.random.default_rng(13)
        acc = None
        reps = 100
        for _ in range(reps):
            psd = sm.psd_via_autocorrelation(make_window(rng.standard_normal(256)))
            acc = psd.power if acc is None else acc + psd.power
        avg = acc / reps
        body = avg[4:]  # mean removal suppresses the lowest bins
        assert body.max() / np.median(body) < 1.5

    def test_nonnegative_power(self, background):
        w = sg.generate_trial(None, sg.NoiseSpec(background, 0.5), 4.0, 512, 14)
        psd = sm.psd_via_autocorrelation(w)
        assert psd.power.min() >= 0.0
        assert np.all(np.diff(psd.freqs) > 0)

    def test_too_short(self):
        with pytest.raises(sm.SigModelError):
            sm.psd_via_autocorrelation(make_window(np.arange(32.0)))
