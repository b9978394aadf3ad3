"""Additive mixing of a multifractal stream with noise at a set variance ratio."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DegenerateInputError, ParameterError
from .series import MixDescriptor, Series


@dataclass(frozen=True)
class MixSpec:
    snr: float

    def __post_init__(self):
        snr = float(self.snr)
        if not (math.isfinite(snr) and snr > 0):
            raise ParameterError(f"snr must be finite and > 0, got {self.snr}")
        object.__setattr__(self, "snr", snr)


@dataclass(frozen=True, eq=False)
class MixResult:
    sum: Series
    noise_scale: float
    achieved_snr: float


def _values(x):
    return np.asarray(x.values if isinstance(x, Series) else x, dtype=np.float64)


def _variance(values, what):
    var = float(np.var(values, ddof=1))
    if not var > 0:
        raise DegenerateInputError(f"{what} has zero variance")
    return var


def measure_snr(multi, noise_component):
    """Var[multi] / Var[noise_component] with n-1 denominators."""
    a = _values(multi)
    b = _values(noise_component)
    if a.shape != b.shape:
        raise ContractError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(np.var(a, ddof=1)) / _variance(b, "noise")


def mix(multi, noise, spec):
    """Add ``noise`` scaled by a positive factor so Var[multi]/Var[c*noise] = spec.snr.

    The noise is scaled about zero, not about its mean, so positive noise stays
    positive.
    """
    if not isinstance(spec, MixSpec):
        spec = MixSpec(spec)
    a = _values(multi)
    b = _values(noise)
    if a.shape != b.shape:
        raise ContractError(f"length mismatch: signal has {a.shape[0]} values, noise has {b.shape[0]}")
    var_a = _variance(a, "signal")
    var_b = _variance(b, "noise")
    c = math.sqrt(var_a / (spec.snr * var_b))
    scaled = c * b
    meta = MixDescriptor(
        signal=getattr(multi, "meta", None),
        noise=getattr(noise, "meta", None),
        snr=spec.snr,
        noise_scale=c,
    )
    total = Series(a + scaled, meta)
    return MixResult(total, c, var_a / float(np.var(scaled, ddof=1)))
