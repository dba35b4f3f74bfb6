"""Single-channel SSVEP detection toolkit."""

from ssvepkit.sigmodel import (
    ArModel,
    EegWindow,
    HarmonicBasis,
    Psd,
    autocovariance,
    ar_noise_at_harmonic,
    build_reference_basis,
    levinson_durbin,
    project_out_ssvep,
    psd_via_autocorrelation,
    ssvep_power,
    t_statistic,
)

__version__ = "0.1.0"
