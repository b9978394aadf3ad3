"""Generalized Hurst exponent estimation: MFDFA and the block-moment method."""

from __future__ import annotations

import enum
import functools
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _backend
from .errors import ContractError, DomainError, ParameterError, SizeError, TraceFormatError
from .series import Series, _atomic_write, _items, descriptor_from_items, read_comment_block

R2_WARN = 0.95


class Method(str, enum.Enum):
    MFDFA = "MFDFA"
    MOMENTS = "MOMENTS"
    ORACLE = "ORACLE"


class UndefinedSpectrumWarning(UserWarning):
    """Some q values could not be estimated (zero fluctuations or block sums)."""


@dataclass(frozen=True)
class QGrid:
    values: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ParameterError("q grid is empty")
        if not all(math.isfinite(v) for v in vals):
            raise ParameterError("q grid values must be finite")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ParameterError("q grid must be strictly increasing")
        object.__setattr__(self, "values", vals)

    @classmethod
    def arange(cls, q_min, q_max, step):
        if not step > 0:
            raise ParameterError(f"q step must be > 0, got {step}")
        if q_max < q_min:
            raise ParameterError(f"q_max {q_max} < q_min {q_min}")
        count = int(math.floor((q_max - q_min) / step + 1e-9)) + 1
        # rounding keeps grid points like 0.5*k exact in decimal output
        return cls(tuple(round(q_min + i * step, 12) for i in range(count)))

    @classmethod
    def full(cls):
        return cls.arange(-10.0, 10.0, 0.5)

    @classmethod
    def positive(cls):
        return cls.arange(0.5, 10.0, 0.5)

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


def log_scales(lo, hi, count):
    """``count`` log-spaced integers from ``lo`` to ``hi``, duplicates dropped."""
    raw = np.unique(np.round(np.geomspace(lo, hi, count)).astype(int))
    return tuple(int(s) for s in raw)


@dataclass(frozen=True)
class ScalePlan:
    scales: tuple
    detrend_order: int = 2

    def __post_init__(self):
        scales = tuple(int(s) for s in self.scales)
        object.__setattr__(self, "scales", scales)
        if len(scales) < 2:
            raise ParameterError("need at least two scales for a regression")
        if any(b <= a for a, b in zip(scales, scales[1:])):
            raise ParameterError("scales must be strictly increasing")
        if int(self.detrend_order) != self.detrend_order or self.detrend_order < 0:
            raise ParameterError(f"detrend order must be an integer >= 0, got {self.detrend_order}")
        if scales[0] < self.detrend_order + 2:
            raise ParameterError(
                f"smallest scale {scales[0]} must be >= detrend_order + 2 = {self.detrend_order + 2}"
            )

    @classmethod
    def default(cls, n, detrend_order=2, count=12, min_scale=16):
        return cls(log_scales(min_scale, n // 4, count), detrend_order)

    def check_length(self, n):
        if n < 4 * self.scales[0] or self.scales[-1] > n // 4:
            raise SizeError(
                f"series of length {n} too short for scales {self.scales[0]}..{self.scales[-1]} "
                f"(need max scale <= N/4 = {n // 4})"
            )


@dataclass(frozen=True, eq=False)
class HurstSpectrum:
    """h(q) estimates with per-q regression diagnostics.

    Undefined entries carry ``nan`` in ``h``, ``intercept`` and ``r2`` and
    ``False`` in ``defined``.
    """

    q: QGrid
    h: np.ndarray
    intercept: np.ndarray
    r2: np.ndarray
    defined: np.ndarray
    method: Method
    scales: tuple = ()
    detrend_order: Optional[int] = None
    source: object = None

    def __post_init__(self):
        for name in ("h", "intercept", "r2"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            if arr.shape != (len(self.q),):
                raise ContractError(f"{name} has shape {arr.shape}, expected ({len(self.q)},)")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        defined = np.array(self.defined, dtype=bool)
        defined.flags.writeable = False
        object.__setattr__(self, "defined", defined)
        object.__setattr__(self, "method", Method(self.method))

    def at(self, q):
        """h at grid point ``q`` (``nan`` when undefined)."""
        try:
            i = self.q.values.index(float(q))
        except ValueError:
            raise DomainError(f"q={q} is not on the grid") from None
        return float(self.h[i])

    @property
    def poor_fit(self):
        """Mask of defined entries whose regression r^2 is below 0.95."""
        with np.errstate(invalid="ignore"):
            return self.defined & (self.r2 < R2_WARN)

    def spread(self, q_min, q_max):
        """max - min of the defined h values with q in [q_min, q_max]."""
        qs = np.array(self.q.values)
        mask = (qs >= q_min) & (qs <= q_max) & self.defined
        if not mask.any():
            return float("nan")
        return float(np.ptp(self.h[mask]))


def _ols(x, y):
    """Slope, intercept and r^2 of the least-squares line through (x, y)."""
    xm = x.mean()
    ym = y.mean()
    dx = x - xm
    dy = y - ym
    sxx = float(np.dot(dx, dx))
    slope = float(np.dot(dx, dy)) / sxx
    intercept = ym - slope * xm
    resid = dy - slope * dx
    ss_res = float(np.dot(resid, resid))
    ss_tot = float(np.dot(dy, dy))
    if ss_tot <= 0.0 or ss_res <= 1e-24 * max(ss_tot, 1e-300):
        r2 = 1.0
    else:
        r2 = min(max(1.0 - ss_res / ss_tot, 0.0), 1.0)
    return slope, float(intercept), r2


@functools.lru_cache(maxsize=256)
def _fit_basis(s, order):
    t = np.linspace(-1.0, 1.0, s)
    vander = np.vander(t, order + 1, increasing=True)
    qmat, _ = np.linalg.qr(vander)
    return np.ascontiguousarray(qmat.T)


def fluctuations(x, plan):
    """Per-scale arrays of segment variances F^2(v, s), plus the zero threshold."""
    values = np.asarray(x.values if isinstance(x, Series) else x, dtype=np.float64)
    n = values.shape[0]
    plan.check_length(n)
    centred = values - values.mean()
    profile = np.cumsum(centred)
    spread = float(np.max(np.abs(centred)))
    # below this a segment's residual is indistinguishable from round-off
    zero_tol = (16.0 * np.finfo(np.float64).eps * n * spread) ** 2
    f2 = [_backend.segment_variances(profile, s, _fit_basis(s, plan.detrend_order)) for s in plan.scales]
    return f2, zero_tol


def _log_mean_powers(logv, exps):
    """ln mean(exp(e * logv)) for each exponent e; nan where undefined.

    ``-inf`` entries in ``logv`` stand for zeros: they make e <= 0 undefined
    but simply add nothing for e > 0.
    """
    out = np.full(exps.shape[0], np.nan)
    finite = logv[np.isfinite(logv)]
    if finite.size == 0:
        return out
    ok = exps > 0 if finite.size < logv.size else exps != 0
    if ok.any():
        out[ok] = _backend.log_mean_power(finite, exps[ok], float(logv.shape[0]))
    return out


def _log_fq(log_f2, qs):
    """ln F_q(s) for every q from the log segment variances of one scale."""
    out = _log_mean_powers(log_f2, 0.5 * qs)
    nz = qs != 0
    out[nz] /= qs[nz]
    if not np.isneginf(log_f2).any():
        out[~nz] = 0.5 * float(log_f2.mean())
    return out


def _spectrum_from_logs(qgrid, log_scale, log_stat, slope_div, method, **extra):
    """Regress each row of ``log_stat`` (q x scales) on ``log_scale``."""
    nq = len(qgrid)
    h = np.full(nq, np.nan)
    intercept = np.full(nq, np.nan)
    r2 = np.full(nq, np.nan)
    defined = np.zeros(nq, dtype=bool)
    for i, q in enumerate(qgrid):
        row = log_stat[i]
        div = slope_div(q)
        if div == 0 or not np.all(np.isfinite(row)):
            continue
        slope, icpt, rr = _ols(log_scale, row)
        h[i] = slope / div
        intercept[i] = icpt
        r2[i] = rr
        defined[i] = True
    if not defined.all():
        missing = [q for q, d in zip(qgrid, defined) if not d]
        warnings.warn(
            f"{method.value}: h(q) undefined for q in {missing}", UndefinedSpectrumWarning, stacklevel=3
        )
    return HurstSpectrum(qgrid, h, intercept, r2, defined, method, **extra)


def mfdfa(x, q=None, plan=None):
    """Multifractal detrended fluctuation analysis of ``x``.

    Profiles the mean-removed series, detrends ``2 * (N // s)`` segments per
    scale (from both ends) with a polynomial of ``plan.detrend_order`` and
    regresses ln F_q(s) on ln s. Segments with zero residual make every
    q <= 0 undefined.
    """
    values = np.asarray(x.values if isinstance(x, Series) else x, dtype=np.float64)
    q = QGrid.full() if q is None else (q if isinstance(q, QGrid) else QGrid(tuple(q)))
    plan = ScalePlan.default(values.shape[0]) if plan is None else plan
    f2, zero_tol = fluctuations(values, plan)
    log_f2 = []
    for arr in f2:
        with np.errstate(divide="ignore"):
            log_f2.append(np.where(arr <= zero_tol, -np.inf, np.log(np.maximum(arr, zero_tol))))
    qs = np.array(q.values, dtype=np.float64)
    log_stat = np.column_stack([_log_fq(lf, qs) for lf in log_f2])
    log_scale = np.log(np.array(plan.scales, dtype=np.float64))
    return _spectrum_from_logs(
        q,
        log_scale,
        log_stat,
        lambda qq: 1.0,
        Method.MFDFA,
        scales=plan.scales,
        detrend_order=plan.detrend_order,
        source=x.meta if isinstance(x, Series) else None,
    )


def default_moment_scales(n, min_scale=1):
    """Powers of two from ``min_scale`` to ``N/16``, aligned with dyadic cells."""
    hi = max(n // 16, 2 * min_scale)
    out = []
    s = min_scale
    while s <= hi and s <= n // 4:
        out.append(s)
        s *= 2
    return tuple(out)


def moment_spectrum(x, q=None, scales=None):
    """h(q) from the scaling of mean |block sum|^q with block size.

    ``x`` is read as increments (traffic per slot). With ``S_q(t) = c(q) t^{q h(q)}``
    the regression slope of ln S_q on ln t is ``q h(q)``; the intercept is
    ln c(q). q = 0 is always undefined.
    """
    values = np.asarray(x.values if isinstance(x, Series) else x, dtype=np.float64)
    n = values.shape[0]
    q = QGrid.positive() if q is None else (q if isinstance(q, QGrid) else QGrid(tuple(q)))
    scales = default_moment_scales(n) if scales is None else tuple(int(t) for t in scales)
    if len(scales) < 2 or any(b <= a for a, b in zip(scales, scales[1:])):
        raise ParameterError("need at least two strictly increasing block sizes")
    if scales[0] < 1 or scales[-1] > n // 4:
        raise SizeError(f"block sizes must lie in [1, N/4 = {n // 4}], got {scales[0]}..{scales[-1]}")
    log_abs = []
    for t in scales:
        nb = n // t
        sums = values[: nb * t].reshape(nb, t).sum(axis=1)
        with np.errstate(divide="ignore"):
            log_abs.append(np.log(np.abs(sums)))
    qs = np.array(q.values, dtype=np.float64)
    log_stat = np.column_stack([_log_mean_powers(la, qs) for la in log_abs])
    log_scale = np.log(np.array(scales, dtype=np.float64))
    return _spectrum_from_logs(
        q,
        log_scale,
        log_stat,
        lambda qq: qq,
        Method.MOMENTS,
        scales=scales,
        source=x.meta if isinstance(x, Series) else None,
    )


def hurst_h2(x, plan=None):
    """h(2) from MFDFA with the default scale plan."""
    return mfdfa(x, QGrid((2.0,)), plan).at(2.0)


def spectrum_deviation(a, b, q_min, q_max):
    """Mean |a.h - b.h| over grid points q in [q_min, q_max]."""
    if a.q != b.q:
        raise ContractError("spectra are on different q grids")
    if a.method is not b.method:
        raise ContractError(f"spectra come from different methods ({a.method.value}, {b.method.value})")
    qs = np.array(a.q.values)
    mask = (qs >= q_min) & (qs <= q_max)
    if not mask.any():
        raise DomainError(f"no grid point in [{q_min}, {q_max}]")
    if not (a.defined[mask].all() and b.defined[mask].all()):
        raise DomainError(f"spectrum undefined somewhere in [{q_min}, {q_max}]")
    return float(np.mean(np.abs(a.h[mask] - b.h[mask])))


def oracle_spectrum(q, alpha):
    """Analytic cascade h(q) packaged as a spectrum (r2 = 1, intercept undefined)."""
    from .traffic import cascade_theoretical_h

    q = q if isinstance(q, QGrid) else QGrid(tuple(q))
    h = [cascade_theoretical_h(qq, alpha) for qq in q]
    n = len(q)
    return HurstSpectrum(q, h, np.full(n, np.nan), np.ones(n), np.ones(n, dtype=bool), Method.ORACLE)


def spectrum_text(spec):
    lines = [f"# method={spec.method.value}"]
    if spec.scales:
        lines.append("# scales=" + ",".join(str(s) for s in spec.scales))
    if spec.detrend_order is not None:
        lines.append(f"# detrend_order={spec.detrend_order}")
    lines += [f"# input.{k}={v}" for k, v in _items(spec.source)]
    lines.append("q,h,intercept,r2,defined")
    for i, q in enumerate(spec.q):
        lines.append(
            f"{q:.17g},{spec.h[i]:.17g},{spec.intercept[i]:.17g},{spec.r2[i]:.17g},{int(spec.defined[i])}"
        )
    return "\n".join(lines) + "\n"


def write_spectrum(path, spec):
    _atomic_write(path, spectrum_text(spec))


def read_spectrum(path):
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise TraceFormatError(f"cannot read spectrum: {exc.strerror}", path) from exc
    items, i = read_comment_block(lines, path)
    if i >= len(lines) or lines[i].strip() != "q,h,intercept,r2,defined":
        raise TraceFormatError("expected header 'q,h,intercept,r2,defined'", path, i + 1)
    rows = []
    for lineno in range(i + 1, len(lines)):
        text = lines[lineno].strip()
        if not text:
            continue
        parts = text.split(",")
        if len(parts) != 5:
            raise TraceFormatError(f"expected 5 columns, got {len(parts)}", path, lineno + 1)
        try:
            rows.append([float(p) for p in parts[:4]] + [int(parts[4])])
        except ValueError:
            raise TraceFormatError(f"bad row {text!r}", path, lineno + 1) from None
    if not rows:
        raise TraceFormatError("spectrum has no rows", path)
    scales = tuple(int(s) for s in items.pop("scales", "").split(",") if s)
    order = items.pop("detrend_order", None)
    method = items.pop("method", None)
    if method is None:
        raise TraceFormatError("missing '# method=' comment", path)
    source = {k[len("input."):]: v for k, v in items.items() if k.startswith("input.")}
    cols = list(zip(*rows))
    return HurstSpectrum(
        QGrid(cols[0]),
        np.array(cols[1]),
        np.array(cols[2]),
        np.array(cols[3]),
        np.array(cols[4], dtype=bool),
        Method(method),
        scales=scales,
        detrend_order=None if order is None else int(order),
        source=descriptor_from_items(source),
    )
