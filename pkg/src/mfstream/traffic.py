"""Seeded generators for the monofractal, multifractal and noise stream models."""

from __future__ import annotations

import math

import numpy as np

from . import _backend
from .errors import DomainError, EmbeddingError, ParameterError
from .series import Dist, Model, ModelDescriptor, Series

MAX_EMBEDDING_DOUBLINGS = 6


def _rng(seed):
    return np.random.Generator(np.random.PCG64(int(seed)))


def fgn_autocovariance(k, hurst):
    """Autocovariance of unit-variance fractional Gaussian noise at lags ``k``."""
    k = np.abs(np.asarray(k, dtype=np.float64))
    h2 = 2.0 * hurst
    return 0.5 * (np.abs(k + 1.0) ** h2 - 2.0 * k**h2 + np.abs(k - 1.0) ** h2)


def _circulant_eigenvalues(m, hurst):
    row = fgn_autocovariance(np.arange(m + 1), hurst)
    circ = np.concatenate([row, row[-2:0:-1]])
    return np.fft.fft(circ).real


def _fgn_values(n, hurst, seed):
    if not 0.0 < hurst < 1.0:
        raise ParameterError(f"hurst must be in (0, 1), got {hurst}")
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    m = 1 << max(int(n - 1).bit_length(), 1)
    for _ in range(MAX_EMBEDDING_DOUBLINGS + 1):
        lam = _circulant_eigenvalues(m, hurst)
        # round-off can leave eigenvalues of order -1e-12 that are really zero
        if lam.min() >= -1e-9 * lam.max():
            break
        m *= 2
    else:
        raise EmbeddingError(
            f"circulant embedding has negative eigenvalues after {MAX_EMBEDDING_DOUBLINGS} "
            f"doublings (n={n}, hurst={hurst}); increase the embedding size"
        )
    lam = np.clip(lam, 0.0, None)
    rng = _rng(seed)
    xi = rng.standard_normal(2 * m) + 1j * rng.standard_normal(2 * m)
    w = np.fft.fft(np.sqrt(lam / (2 * m)) * xi)
    return w.real[:n]


def gen_fgn(n, hurst, seed):
    """Fractional Gaussian noise by exact circulant embedding (Davies-Harte).

    The embedding size ``2m`` uses the smallest power of two ``m >= n``.
    """
    desc = ModelDescriptor(Model.FGN, seed=seed, n=n, hurst=hurst)
    return Series(_fgn_values(n, hurst, seed), desc)


def gen_fbm(n, hurst, seed):
    """Cumulative sum of :func:`gen_fgn` drawn with the same seed."""
    desc = ModelDescriptor(Model.FBM, seed=seed, n=n, hurst=hurst)
    return Series(np.cumsum(_fgn_values(n, hurst, seed)), desc)


_EXP_MAX = math.log(np.finfo(np.float64).max)
_EXP_MIN = math.log(np.finfo(np.float64).tiny)


def exp_transform(x):
    """Elementwise exponential, turning Gaussian noise into positive traffic.

    Raises :class:`DomainError` naming the first index whose exponential is not
    a positive normal float.
    """
    values = np.asarray(x.values if isinstance(x, Series) else x, dtype=np.float64)
    bad = np.flatnonzero((values > _EXP_MAX) | (values < _EXP_MIN) | ~np.isfinite(values))
    if bad.size:
        i = int(bad[0])
        raise DomainError(f"exp overflows or underflows at index {i} (value {values[i]!r})")
    meta = None
    if isinstance(x, Series) and isinstance(x.meta, ModelDescriptor) and x.meta.model is Model.FGN:
        meta = ModelDescriptor(Model.EXP_FGN, seed=x.meta.seed, n=x.meta.n, hurst=x.meta.hurst)
    return Series(np.exp(values), meta)


def gen_exp_fgn(n, hurst, seed):
    return exp_transform(gen_fgn(n, hurst, seed))


def gen_cascade(depth, alpha, seed):
    """Conservative binomial cascade with symmetric Beta(alpha, alpha) weights.

    Every split sends ``W`` of the mass left and ``1 - W`` right. The
    ``2**depth`` leaf masses are multiplied by ``2**depth`` so they average 1.
    """
    desc = ModelDescriptor(Model.CASCADE, seed=seed, depth=depth, alpha=alpha)
    rng = _rng(seed)
    mass = np.ones(1)
    for _ in range(int(depth)):
        w = rng.beta(alpha, alpha, size=mass.shape[0])
        nxt = np.empty(2 * mass.shape[0])
        nxt[0::2] = mass * w
        nxt[1::2] = mass * (1.0 - w)
        mass = nxt
    return Series(mass * float(2 ** int(depth)), desc)


def beta_moment(q, alpha):
    """E[W**q] for W ~ Beta(alpha, alpha)."""
    if not alpha > 0:
        raise DomainError(f"alpha must be > 0, got {alpha}")
    if not q > -alpha:
        raise DomainError(f"E[W^q] diverges for q <= -alpha (q={q}, alpha={alpha})")
    if float(q).is_integer() and 0 < q <= 64:
        # finite product; keeps E[W] = 1/2 exact
        out = 1.0
        for k in range(int(q)):
            out *= (alpha + k) / (2 * alpha + k)
        return out
    return math.exp(
        math.lgamma(2 * alpha) + math.lgamma(alpha + q) - math.lgamma(alpha) - math.lgamma(2 * alpha + q)
    )


def cascade_theoretical_h(q, alpha, dq=1e-4):
    """Generalized Hurst exponent of the Beta(alpha, alpha) cascade, -log2(E[W^q])/q.

    At ``q == 0`` the limit is taken by a symmetric finite difference.
    """
    if not alpha > 0:
        raise DomainError(f"alpha must be > 0, got {alpha}")
    if q == 0:
        if dq >= alpha:
            dq = alpha / 2
        return 0.5 * (cascade_theoretical_h(dq, alpha) + cascade_theoretical_h(-dq, alpha))
    return -math.log2(beta_moment(q, alpha)) / q


def gen_ar1(n, phi, sigma, seed):
    """Stationary AR(1): x[0] from N(0, sigma^2/(1-phi^2)), then x[i] = phi*x[i-1] + eps[i]."""
    desc = ModelDescriptor(Model.AR1, seed=seed, n=n, phi=phi, sigma=sigma)
    z = _rng(seed).standard_normal(int(n))
    return Series(_backend.ar1_filter(z, float(phi), float(sigma)), desc)


def gen_iid(n, dist, seed, **params):
    """Independent draws from a uniform, normal or log-normal distribution.

    ``params`` are ``low``/``high`` for UNIFORM and ``mu``/``sigma`` otherwise.
    """
    desc = ModelDescriptor(Model.IID, seed=seed, n=n, dist=dist, **params)
    rng = _rng(seed)
    if desc.dist is Dist.UNIFORM:
        values = rng.uniform(desc.low, desc.high, size=int(n))
    elif desc.dist is Dist.NORMAL:
        values = rng.normal(desc.mu, desc.sigma, size=int(n))
    else:
        values = rng.lognormal(desc.mu, desc.sigma, size=int(n))
    return Series(values, desc)


def generate(desc):
    """Build the series described by ``desc``."""
    if desc.model is Model.FGN:
        return gen_fgn(desc.n, desc.hurst, desc.seed)
    if desc.model is Model.FBM:
        return gen_fbm(desc.n, desc.hurst, desc.seed)
    if desc.model is Model.EXP_FGN:
        return gen_exp_fgn(desc.n, desc.hurst, desc.seed)
    if desc.model is Model.CASCADE:
        return gen_cascade(desc.depth, desc.alpha, desc.seed)
    if desc.model is Model.AR1:
        return gen_ar1(desc.n, desc.phi, desc.sigma, desc.seed)
    params = {k: getattr(desc, k) for k in ("low", "high", "mu", "sigma") if getattr(desc, k) is not None}
    return gen_iid(desc.n, desc.dist, desc.seed, **params)
