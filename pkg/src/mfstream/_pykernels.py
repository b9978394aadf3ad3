"""Pure numpy implementations of the hot kernels.

Used when the compiled ``_kernels`` extension is unavailable or disabled with
``MFSTREAM_PURE_PYTHON=1``.
"""

import numpy as np


def segment_variances(profile, s, basis):
    """Mean squared polynomial-fit residual of each length-``s`` segment.

    Segments are taken from the start and from the end of ``profile``
    (``2 * (N // s)`` values, start segments first). ``basis`` holds the
    orthonormal fit basis as rows, shape ``(order + 1, s)``.
    """
    profile = np.ascontiguousarray(profile, dtype=np.float64)
    n = profile.shape[0]
    ns = n // s
    front = profile[: ns * s].reshape(ns, s)
    back = profile[n - ns * s:].reshape(ns, s)
    segs = np.concatenate([front, back], axis=0)
    coef = segs @ basis.T
    resid = segs - coef @ basis
    return np.mean(resid * resid, axis=1)


def ar1_filter(z, phi, sigma):
    """Run x[0] = z[0]*sigma/sqrt(1-phi^2), x[i] = phi*x[i-1] + sigma*z[i]."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    x = z[0] * sigma / np.sqrt(1.0 - phi * phi)
    out[0] = x
    for i in range(1, z.shape[0]):
        x = phi * x + sigma * z[i]
        out[i] = x
    return out


def log_mean_power(logv, exps, count):
    """ln(sum(exp(e * logv)) / count) for each exponent e, via a shifted sum.

    ``logv`` holds only finite logs; entries left out (zeros) count in
    ``count`` but add nothing to the sum.
    """
    logv = np.asarray(logv, dtype=np.float64)
    exps = np.asarray(exps, dtype=np.float64)
    a = np.multiply.outer(exps, logv)
    peak = a.max(axis=1)
    return peak + np.log(np.exp(a - peak[:, None]).sum(axis=1)) - np.log(count)
