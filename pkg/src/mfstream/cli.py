"""``mfstream`` command line: generate, analyze, mix, oracle, experiment.

Exit codes: 0 success (warnings allowed), 2 usage or parameter error,
1 runtime failure. Every run first echoes the fully resolved command to
stderr; replaying that line reproduces the outputs byte for byte.
"""

from __future__ import annotations

import argparse
import math
import shlex
import sys
import warnings

import numpy as np

from . import __version__, experiment, traffic
from ._backend import BACKEND
from .analysis import (
    Method,
    QGrid,
    ScalePlan,
    UndefinedSpectrumWarning,
    mfdfa,
    moment_spectrum,
    oracle_spectrum,
    spectrum_text,
    write_spectrum,
)
from .errors import EmbeddingError, MFStreamError, ParameterError
from .mixer import MixSpec, mix
from .series import Dist, Model, ModelDescriptor, read_trace, write_trace

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

_MODEL_FLAGS = {
    "fgn": (Model.FGN, ("n", "hurst")),
    "fbm": (Model.FBM, ("n", "hurst")),
    "exp-fgn": (Model.EXP_FGN, ("n", "hurst")),
    "cascade": (Model.CASCADE, ("depth", "alpha")),
    "ar1": (Model.AR1, ("n", "phi", "sigma")),
    "iid": (Model.IID, ("n", "dist")),
}
_DIST_FLAGS = {"uniform": ("low", "high"), "normal": ("mu", "sigma"), "lognormal": ("mu", "sigma")}
_GEN_DEFAULTS = {
    "n": 16384,
    "hurst": 0.5,
    "depth": 14,
    "alpha": 1.0,
    "phi": 0.7,
    "sigma": 1.0,
    "dist": "uniform",
    "low": 0.0,
    "high": 1.0,
    "mu": 0.0,
}


class UsageError(Exception):
    pass


def _flag(name):
    return "--" + name.replace("_", "-")


def _float_list(text):
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return tuple(int(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _seed(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2**64 - 1]")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="mfstream", description=__doc__.split("\n")[0], allow_abbrev=False)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND} kernels)")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesize a trace", allow_abbrev=False)
    g.add_argument("--model", required=True, choices=sorted(_MODEL_FLAGS))
    g.add_argument("--n", type=int, help="length (default 16384; cascade length is 2**depth)")
    g.add_argument("--hurst", type=float, help="Hurst exponent in (0,1) (default 0.5)")
    g.add_argument("--depth", type=int, help="cascade levels (default 14)")
    g.add_argument("--alpha", type=float, help="Beta(alpha, alpha) weight shape (default 1.0)")
    g.add_argument("--phi", type=float, help="AR(1) coefficient in (-1,1) (default 0.7)")
    g.add_argument("--sigma", type=float, help="AR(1) innovation or normal/lognormal scale (default 1.0)")
    g.add_argument("--dist", choices=sorted(_DIST_FLAGS), help="iid distribution (default uniform)")
    g.add_argument("--low", type=float, help="uniform lower bound (default 0)")
    g.add_argument("--high", type=float, help="uniform upper bound (default 1)")
    g.add_argument("--mu", type=float, help="normal mean / lognormal log-mean (default 0)")
    g.add_argument("--seed", type=_seed, default=0)
    g.add_argument("--out", required=True)

    a = sub.add_parser("analyze", help="estimate h(q) of a trace", allow_abbrev=False)
    a.add_argument("--in", dest="in_path", required=True)
    a.add_argument("--method", choices=["mfdfa", "moments"], default="mfdfa")
    a.add_argument("--q-min", type=float, default=-10.0)
    a.add_argument("--q-max", type=float, default=10.0)
    a.add_argument("--q-step", type=float, default=0.5)
    a.add_argument("--scales", type=_int_list, help="window/block sizes (default depends on method)")
    a.add_argument("--detrend-order", type=int, default=2)
    a.add_argument("--out")

    m = sub.add_parser("mix", help="add scaled noise to a signal at a target SNR", allow_abbrev=False)
    m.add_argument("--signal", required=True)
    m.add_argument("--noise", required=True)
    m.add_argument("--snr", type=float, default=5.0)
    m.add_argument("--out", required=True)

    o = sub.add_parser("oracle", help="analytic h(q) of a model", allow_abbrev=False)
    o.add_argument("model", choices=["cascade"])
    o.add_argument("--alpha", type=float, default=1.0)
    o.add_argument("--q", type=_float_list, help="explicit q values (overrides the grid flags)")
    o.add_argument("--q-min", type=float, default=0.5)
    o.add_argument("--q-max", type=float, default=10.0)
    o.add_argument("--q-step", type=float, default=0.5)
    o.add_argument("--out")

    e = sub.add_parser("experiment", help="run an SNR sweep", allow_abbrev=False)
    e.add_argument("--config", help="INI sweep config (default: the shipped paper sweep)")
    e.add_argument("--replicates", type=int)
    e.add_argument("--base-seed", type=_seed)
    e.add_argument("--workers", type=int, help=f"parallel processes (default ${experiment.WORKERS_ENV} or 1)")
    e.add_argument("--out-dir", default="results")
    return parser


def _echo(command, ns, parser_actions):
    parts = ["mfstream", command]
    for action in parser_actions:
        if not action.option_strings and action.dest not in ("help",) and action.dest != "command":
            value = getattr(ns, action.dest, None)
            if value is not None:
                parts.append(str(value))
    for action in parser_actions:
        if not action.option_strings or action.dest in ("help", "version"):
            continue
        value = getattr(ns, action.dest, None)
        if value is None:
            continue
        if isinstance(value, tuple):
            value = ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
        elif isinstance(value, float):
            value = repr(value)
        parts += [action.option_strings[0], str(value)]
    print("# " + shlex.join(parts), file=sys.stderr)


def _resolve_generate(ns):
    model, allowed = _MODEL_FLAGS[ns.model]
    if model is Model.IID:
        ns.dist = ns.dist or _GEN_DEFAULTS["dist"]
        allowed = allowed + _DIST_FLAGS[ns.dist]
    for name in ("n", "hurst", "depth", "alpha", "phi", "sigma", "dist", "low", "high", "mu"):
        if name in allowed:
            if getattr(ns, name) is None:
                setattr(ns, name, _GEN_DEFAULTS[name])
        elif getattr(ns, name) is not None:
            raise UsageError(f"{_flag(name)} does not apply to --model {ns.model}")
    kwargs = {name: getattr(ns, name) for name in allowed}
    if "dist" in kwargs:
        kwargs["dist"] = Dist(kwargs["dist"].upper())
    try:
        return ModelDescriptor(model, seed=ns.seed, **kwargs)
    except ParameterError as exc:
        flag = _flag(exc.field) if exc.field else "--model"
        raise UsageError(f"{flag}: {exc}") from None


def cmd_generate(ns):
    desc = _resolve_generate(ns)
    series = traffic.generate(desc)
    write_trace(ns.out, series)
    v = series.values
    print(f"wrote {ns.out}: n={len(v)} mean={v.mean():.6g} var={v.var(ddof=1):.6g}")
    return EXIT_OK


def _q_grid(ns):
    try:
        return QGrid.arange(ns.q_min, ns.q_max, ns.q_step)
    except ParameterError as exc:
        raise UsageError(f"--q-min/--q-max/--q-step: {exc}") from None


def cmd_analyze(ns):
    q = _q_grid(ns)
    series = read_trace(ns.in_path)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", UndefinedSpectrumWarning)
        if ns.method == "mfdfa":
            try:
                plan = ScalePlan(ns.scales, ns.detrend_order) if ns.scales else ScalePlan.default(
                    len(series), ns.detrend_order
                )
            except ParameterError as exc:
                raise UsageError(f"--scales/--detrend-order: {exc}") from None
            spec = mfdfa(series, q, plan)
        else:
            spec = moment_spectrum(series, q, ns.scales)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if spec.poor_fit.any():
        bad = [q for q, flag in zip(spec.q, spec.poor_fit) if flag]
        print(f"warning: regression r^2 < 0.95 at q={bad}", file=sys.stderr)
    if ns.out:
        write_spectrum(ns.out, spec)
    qs = np.array(spec.q.values)
    h2 = spec.at(2.0) if 2.0 in spec.q.values else math.nan
    spread = spec.spread(1e-12, math.inf) if (qs > 0).any() else math.nan
    print(f"method={spec.method.value} h(2)={h2:.6g} spread(q>0)={spread:.6g} defined={int(spec.defined.sum())}/{len(qs)}")
    return EXIT_OK


def cmd_mix(ns):
    try:
        spec = MixSpec(ns.snr)
    except ParameterError as exc:
        raise UsageError(f"--snr: {exc}") from None
    signal = read_trace(ns.signal)
    noise = read_trace(ns.noise)
    if len(signal) != len(noise):
        raise UsageError(f"length mismatch: --signal has {len(signal)} values, --noise has {len(noise)}")
    result = mix(signal, noise, spec)
    write_trace(ns.out, result.sum)
    print(f"wrote {ns.out}: noise_scale={result.noise_scale:.17g} achieved_snr={result.achieved_snr:.17g}")
    return EXIT_OK


def cmd_oracle(ns):
    if ns.q is not None:
        try:
            q = QGrid(ns.q)
        except ParameterError as exc:
            raise UsageError(f"--q: {exc}") from None
    else:
        q = _q_grid(ns)
    if not ns.alpha > 0:
        raise UsageError(f"--alpha must be > 0, got {ns.alpha}")
    spec = oracle_spectrum(q, ns.alpha)
    if ns.out:
        write_spectrum(ns.out, spec)
    else:
        sys.stdout.write(spectrum_text(spec))
    for qq, h in zip(spec.q, spec.h):
        print(f"q={qq:g} h={h:.10g}", file=sys.stderr if not ns.out else sys.stdout)
    return EXIT_OK


def cmd_experiment(ns):
    try:
        cfg = experiment.load_config(ns.config) if ns.config else experiment.default_config()
        changes = {}
        if ns.replicates is not None:
            changes["replicates"] = ns.replicates
        if ns.base_seed is not None:
            changes["base_seed"] = ns.base_seed
        if changes:
            cfg = cfg.replace(**changes)
    except ParameterError as exc:
        raise UsageError(str(exc)) from None
    if ns.workers is not None and ns.workers < 1:
        raise UsageError("--workers must be >= 1")
    table = experiment.run_sweep(cfg, workers=ns.workers)
    paths = experiment.emit_results(table, ns.out_dir)
    print(f"{'noise':<16} {'snr':>8} {'dev_mean':>10} {'dev_std':>10} {'ok':>4}")
    for row in table.summary:
        print(f"{row.noise_label:<16} {row.snr:>8g} {row.deviation_mean:>10.5f} {row.deviation_std:>10.5f} {row.n_ok:>4}")
    print(f"{experiment.FLOOR_LABEL:<16} {'':>8} {table.noise_floor_mean:>10.5f} {table.noise_floor_std:>10.5f}")
    if table.failures:
        print(f"{len(table.failures)} cell(s) failed; see {ns.out_dir}/failures.csv")
    print("wrote " + ", ".join(str(p) for p in paths))
    return EXIT_OK


_COMMANDS = {
    "generate": cmd_generate,
    "analyze": cmd_analyze,
    "mix": cmd_mix,
    "oracle": cmd_oracle,
    "experiment": cmd_experiment,
}


def main(argv=None):
    parser = build_parser()
    ns = parser.parse_args(argv)
    subparser = parser._subparsers._group_actions[0].choices[ns.command]
    try:
        if ns.command == "generate":
            _resolve_generate(ns)
        if ns.command == "experiment" and ns.workers is None:
            ns.workers = experiment.default_workers()
        _echo(ns.command, ns, subparser._actions)
        return _COMMANDS[ns.command](ns)
    except UsageError as exc:
        print(f"mfstream {ns.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EmbeddingError as exc:
        print(f"mfstream {ns.command}: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except MFStreamError as exc:
        print(f"mfstream {ns.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"mfstream {ns.command}: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
