"""SNR sweep: cascade signal plus each noise family at each variance ratio.

The config format is INI (``configparser``). A commented example ships as
``mfstream/data/paper-sweep.cfg``; see :func:`load_config`.
"""

from __future__ import annotations

import configparser
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from . import traffic
from .analysis import Method, QGrid, ScalePlan, mfdfa, moment_spectrum, spectrum_deviation
from .errors import MFStreamError, ParameterError
from .mixer import MixSpec, mix
from .series import Model, ModelDescriptor, _atomic_write, format_value

WORKERS_ENV = "MFSTREAM_WORKERS"
FLOOR_LABEL = "replicate-floor"
_NOISE_TAG = 0x6E6F697365  # "noise"


@dataclass(frozen=True)
class ExperimentConfig:
    base_signal: ModelDescriptor
    noise_models: tuple
    snr_levels: tuple = (1.0, 2.0, 4.0, 5.0, 10.0)
    replicates: int = 20
    q: QGrid = field(default_factory=QGrid.positive)
    plan: Optional[ScalePlan] = None
    method: Method = Method.MFDFA
    base_seed: int = 0
    deviation_range: tuple = (0.5, 10.0)
    noise_labels: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "noise_models", tuple(self.noise_models))
        object.__setattr__(self, "snr_levels", tuple(float(s) for s in self.snr_levels))
        if self.base_signal.model is not Model.CASCADE:
            raise ParameterError("base signal must be a CASCADE model")
        if not self.noise_models:
            raise ParameterError("at least one noise model is required")
        n = self.base_signal.n
        for desc in self.noise_models:
            if desc.n != n:
                raise ParameterError(f"noise model {desc.label} has n={desc.n}, signal has n={n}")
        if not self.snr_levels:
            raise ParameterError("snr_levels is empty")
        if any(not (math.isfinite(s) and s > 0) for s in self.snr_levels):
            raise ParameterError("snr levels must be finite and > 0")
        if any(b <= a for a, b in zip(self.snr_levels, self.snr_levels[1:])):
            raise ParameterError("snr_levels must be strictly increasing")
        if int(self.replicates) != self.replicates or self.replicates < 1:
            raise ParameterError(f"replicates must be an integer >= 1, got {self.replicates}")
        lo, hi = (float(v) for v in self.deviation_range)
        if hi < lo:
            raise ParameterError("deviation_range must be [q_min, q_max] with q_min <= q_max")
        object.__setattr__(self, "deviation_range", (lo, hi))
        if not any(lo <= q <= hi for q in self.q):
            raise ParameterError("deviation_range contains no q grid point")
        if self.noise_labels is None:
            base = [d.label for d in self.noise_models]
            seen = {}
            labels = []
            for lab in base:
                if base.count(lab) > 1:
                    seen[lab] = seen.get(lab, 0) + 1
                    lab = f"{lab}-{seen[lab]}"
                labels.append(lab)
            object.__setattr__(self, "noise_labels", tuple(labels))
        elif len(self.noise_labels) != len(self.noise_models) or len(set(self.noise_labels)) != len(
            self.noise_labels
        ):
            raise ParameterError("noise_labels must be unique and match noise_models")
        if self.plan is not None and self.method is Method.MFDFA:
            self.plan.check_length(n)

    def replace(self, **changes):
        kwargs = {name: getattr(self, name) for name in self.__dataclass_fields__}
        kwargs.update(changes)
        if "noise_models" in changes and "noise_labels" not in changes:
            kwargs["noise_labels"] = None
        return ExperimentConfig(**kwargs)


@dataclass(frozen=True)
class ResultRow:
    noise_label: str
    snr: float
    q: float
    h_sum_mean: float
    h_sum_std: float
    h_multi_mean: float
    defined_fraction: float


@dataclass(frozen=True)
class SummaryRow:
    noise_label: str
    snr: float
    deviation_mean: float
    deviation_std: float
    n_ok: int
    n_failed: int


@dataclass(frozen=True)
class FailureRow:
    noise_label: str
    snr: float
    replicate: int
    error: str


@dataclass(frozen=True)
class ResultsTable:
    q: QGrid
    noise_labels: tuple
    snr_levels: tuple
    rows: tuple
    summary: tuple
    failures: tuple
    noise_floor_mean: float
    noise_floor_std: float

    def summary_for(self, noise_label, snr):
        for row in self.summary:
            if row.noise_label == noise_label and row.snr == float(snr):
                return row
        raise KeyError((noise_label, snr))

    def deviation_curve(self, noise_label):
        return [self.summary_for(noise_label, s).deviation_mean for s in self.snr_levels]


def signal_seed(cfg, replicate):
    return (int(cfg.base_seed) + replicate) % 2**64


def noise_seed(cfg, noise_index, snr_index, replicate):
    """base_seed XOR a fixed offset hashed from (noise, snr, replicate)."""
    seq = np.random.SeedSequence([_NOISE_TAG, noise_index, snr_index, replicate])
    offset = int(seq.generate_state(1, dtype=np.uint64)[0])
    return int(cfg.base_seed) ^ offset


def _estimate(cfg, series):
    if cfg.method is Method.MFDFA:
        return mfdfa(series, cfg.q, cfg.plan)
    return moment_spectrum(series, cfg.q, None if cfg.plan is None else cfg.plan.scales)


def _run_replicate(cfg, r):
    """Everything computed from signal replicate ``r``; a plain dict for pickling."""
    import warnings

    out = {"replicate": r, "multi": None, "cells": {}, "error": None}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            signal = traffic.generate(cfg.base_signal.with_seed(signal_seed(cfg, r)))
            h_multi = _estimate(cfg, signal)
        except MFStreamError as exc:
            out["error"] = f"{type(exc).__name__}: {exc}"
            return out
        out["multi"] = (h_multi.h.copy(), h_multi.defined.copy())
        lo, hi = cfg.deviation_range
        for i, desc in enumerate(cfg.noise_models):
            for j, snr in enumerate(cfg.snr_levels):
                try:
                    noise = traffic.generate(desc.with_seed(noise_seed(cfg, i, j, r)))
                    total = mix(signal, noise, MixSpec(snr)).sum
                    h_sum = _estimate(cfg, total)
                    dev = spectrum_deviation(h_sum, h_multi, lo, hi)
                except MFStreamError as exc:
                    out["cells"][(i, j)] = {"error": f"{type(exc).__name__}: {exc}"}
                    continue
                out["cells"][(i, j)] = {"h": h_sum.h.copy(), "defined": h_sum.defined.copy(), "dev": dev}
    return out


def _std(values):
    return float(np.std(values, ddof=1)) if len(values) > 1 else math.nan


def _mean(values):
    return float(np.mean(values)) if len(values) else math.nan


def default_workers():
    text = os.environ.get(WORKERS_ENV, "").strip()
    if not text:
        return 1
    try:
        value = int(text)
    except ValueError:
        raise ParameterError(f"{WORKERS_ENV} must be an integer, got {text!r}") from None
    return max(value, 1)


def run_sweep(cfg, workers=None):
    """Run every (noise, snr, replicate) cell and aggregate deviation statistics.

    Signal replicate ``r`` uses seed ``base_seed + r``; each noise draw gets an
    independent derived seed, so the same signal meets fresh noise in every
    cell. Aggregation walks replicates in index order regardless of
    ``workers``, so the table does not depend on scheduling.
    """
    workers = default_workers() if workers is None else max(int(workers), 1)
    reps = range(int(cfg.replicates))
    if workers > 1 and cfg.replicates > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_replicate, [cfg] * len(reps), reps))
    else:
        results = [_run_replicate(cfg, r) for r in reps]
    results.sort(key=lambda res: res["replicate"])

    nq = len(cfg.q)
    failures = []
    multi = []
    for res in results:
        if res["error"] is not None:
            for label in cfg.noise_labels:
                for snr in cfg.snr_levels:
                    failures.append(FailureRow(label, snr, res["replicate"], res["error"]))
        else:
            multi.append(res["multi"])

    h_multi_mean = np.full(nq, np.nan)
    for k in range(nq):
        vals = [h[k] for h, d in multi if d[k]]
        h_multi_mean[k] = _mean(vals)

    lo, hi = cfg.deviation_range
    floor = []
    ok = [res for res in results if res["error"] is None]
    for a, b in zip(ok, ok[1:]):
        ha, da = a["multi"]
        hb, db = b["multi"]
        mask = np.array([lo <= q <= hi for q in cfg.q])
        if (da[mask] & db[mask]).all():
            floor.append(float(np.mean(np.abs(ha[mask] - hb[mask]))))

    rows = []
    summary = []
    for i, label in enumerate(cfg.noise_labels):
        for j, snr in enumerate(cfg.snr_levels):
            cells = []
            for res in ok:
                cell = res["cells"][(i, j)]
                if "error" in cell:
                    failures.append(FailureRow(label, snr, res["replicate"], cell["error"]))
                else:
                    cells.append(cell)
            for k, q in enumerate(cfg.q):
                vals = [c["h"][k] for c in cells if c["defined"][k]]
                rows.append(
                    ResultRow(
                        label,
                        snr,
                        q,
                        _mean(vals),
                        _std(vals),
                        float(h_multi_mean[k]),
                        len(vals) / cfg.replicates,
                    )
                )
            devs = [c["dev"] for c in cells]
            summary.append(SummaryRow(label, snr, _mean(devs), _std(devs), len(devs), cfg.replicates - len(devs)))

    failures.sort(key=lambda f: (cfg.noise_labels.index(f.noise_label), f.snr, f.replicate))
    return ResultsTable(
        q=cfg.q,
        noise_labels=cfg.noise_labels,
        snr_levels=cfg.snr_levels,
        rows=tuple(rows),
        summary=tuple(summary),
        failures=tuple(failures),
        noise_floor_mean=_mean(floor),
        noise_floor_std=_std(floor),
    )


def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format_value(float(x))


def _csv(header, rows):
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def emit_results(table, out_dir):
    """Write results.csv, summary.csv and one fig<k>_<noise>.csv per noise model.

    ``failures.csv`` is added only when some cell failed. Returns the written
    paths in order.
    """
    if not table.rows:
        raise ParameterError("results table is empty")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc.strerror}") from exc

    files = {}
    files["results.csv"] = _csv(
        ["noise_label", "snr", "q", "h_sum_mean", "h_sum_std", "h_multi_mean", "defined_fraction"],
        [
            (r.noise_label, r.snr, r.q, r.h_sum_mean, r.h_sum_std, r.h_multi_mean, r.defined_fraction)
            for r in table.rows
        ],
    )
    summary_rows = [
        (s.noise_label, s.snr, s.deviation_mean, s.deviation_std, s.n_ok, s.n_failed) for s in table.summary
    ]
    summary_rows.append((FLOOR_LABEL, math.nan, table.noise_floor_mean, table.noise_floor_std, "", ""))
    files["summary.csv"] = _csv(
        ["noise_label", "snr", "deviation_mean", "deviation_std", "n_ok", "n_failed"], summary_rows
    )

    by_key = {(r.noise_label, r.snr, r.q): r for r in table.rows}
    for idx, label in enumerate(table.noise_labels, start=1):
        header = ["q", "h_multi"] + [f"h_sum_snr{_fmt(s)}" for s in table.snr_levels]
        rows = []
        for q in table.q:
            first = by_key[(label, table.snr_levels[0], q)]
            rows.append([q, first.h_multi_mean] + [by_key[(label, s, q)].h_sum_mean for s in table.snr_levels])
        files[f"fig{idx}_{label}.csv"] = _csv(header, rows)

    if table.failures:
        files["failures.csv"] = _csv(
            ["noise_label", "snr", "replicate", "error"],
            [(f.noise_label, f.snr, f.replicate, f.error.replace(",", ";").replace("\n", " ")) for f in table.failures],
        )

    written = []
    for name, text in files.items():
        path = out_dir / name
        try:
            _atomic_write(path, text)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror}") from exc
        written.append(path)
    return written


# --- config file -----------------------------------------------------------

_DESC_KEYS = {"model", "n", "hurst", "alpha", "depth", "phi", "sigma", "dist", "low", "high", "mu"}


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _descriptor(section, where):
    unknown = set(section) - _DESC_KEYS
    if unknown:
        raise ParameterError(f"{where}: unknown keys {sorted(unknown)}")
    items = {k: v for k, v in section.items()}
    items["model"] = items.get("model", "").upper()
    if "dist" in items:
        items["dist"] = items["dist"].upper()
    items["seed"] = "0"
    try:
        return ModelDescriptor.from_items(items)
    except (ParameterError, ValueError) as exc:
        raise ParameterError(f"{where}: {exc}") from None


def parse_config(text, source="<config>"):
    """Build an :class:`ExperimentConfig` from INI text.

    Sections: ``[sweep]``, ``[q]``, ``[plan]``, ``[signal]`` and one
    ``[noise.<label>]`` per noise model, in file order. Errors name the
    offending ``section.key``.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=str(source))
    except configparser.Error as exc:
        raise ParameterError(f"{source}: {exc}") from None

    known = {"sweep", "q", "plan", "signal"}
    for name in parser.sections():
        if name not in known and not name.startswith("noise."):
            raise ParameterError(f"{source}: unknown section [{name}]")

    def get(section, key, conv, default=None):
        if not parser.has_option(section, key):
            if default is None:
                raise ParameterError(f"{source}: missing {section}.{key}")
            return default
        raw = parser.get(section, key)
        try:
            return conv(raw)
        except (ValueError, ParameterError) as exc:
            raise ParameterError(f"{source}: {section}.{key}: {exc}") from None

    def check_keys(section, allowed):
        if parser.has_section(section):
            extra = set(parser[section]) - allowed
            if extra:
                raise ParameterError(f"{source}: unknown keys {sorted(f'{section}.{k}' for k in extra)}")

    check_keys("sweep", {"replicates", "base_seed", "snr_levels", "method", "deviation_range"})
    check_keys("q", {"min", "max", "step"})
    check_keys("plan", {"detrend_order", "scales"})

    if not parser.has_section("signal"):
        raise ParameterError(f"{source}: missing [signal] section")
    signal = _descriptor(parser["signal"], f"{source}: signal")
    noises = []
    labels = []
    for name in parser.sections():
        if name.startswith("noise."):
            labels.append(name[len("noise."):])
            noises.append(_descriptor(parser[name], f"{source}: {name}"))

    for section in ("sweep", "q", "plan"):
        if not parser.has_section(section):
            parser.add_section(section)
    q = QGrid.arange(get("q", "min", float, 0.5), get("q", "max", float, 10.0), get("q", "step", float, 0.5))
    order = get("plan", "detrend_order", int, 2)
    scales = get("plan", "scales", lambda t: tuple(int(v) for v in _floats(t)), ())
    method = get("sweep", "method", lambda t: Method(t.upper()), Method.MFDFA)
    if scales:
        plan = ScalePlan(scales, order)
    elif method is Method.MFDFA:
        plan = ScalePlan.default(signal.n, order)
    else:
        plan = None
    try:
        return ExperimentConfig(
            base_signal=signal,
            noise_models=tuple(noises),
            noise_labels=tuple(labels),
            snr_levels=get("sweep", "snr_levels", _floats, (1.0, 2.0, 4.0, 5.0, 10.0)),
            replicates=get("sweep", "replicates", int, 20),
            q=q,
            plan=plan,
            method=method,
            base_seed=get("sweep", "base_seed", int, 0),
            deviation_range=get("sweep", "deviation_range", _floats, (0.5, 10.0)),
        )
    except MFStreamError as exc:
        raise ParameterError(f"{source}: {exc}") from None


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParameterError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, source=path)


def default_config_text():
    return resources.files("mfstream").joinpath("data/paper-sweep.cfg").read_text()


def default_config():
    """The shipped paper-reproduction sweep."""
    return parse_config(default_config_text(), source="paper-sweep.cfg")
