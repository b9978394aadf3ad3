"""Multifractal traffic synthesis, SNR-controlled mixing and h(q) estimation."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .analysis import (
    HurstSpectrum,
    Method,
    QGrid,
    ScalePlan,
    hurst_h2,
    mfdfa,
    moment_spectrum,
    oracle_spectrum,
    read_spectrum,
    spectrum_deviation,
    write_spectrum,
)
from .experiment import ExperimentConfig, ResultsTable, emit_results, run_sweep
from .mixer import MixResult, MixSpec, measure_snr, mix
from .series import Dist, MixDescriptor, Model, ModelDescriptor, Series, read_trace, write_trace
from .traffic import (
    cascade_theoretical_h,
    exp_transform,
    gen_ar1,
    gen_cascade,
    gen_exp_fgn,
    gen_fbm,
    gen_fgn,
    gen_iid,
    generate,
)
