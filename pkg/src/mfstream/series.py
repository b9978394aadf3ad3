"""Series container, model descriptors and the trace CSV format."""

from __future__ import annotations

import enum
import math
import os
import tempfile
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import ParameterError, TraceFormatError

SEED_MAX = 2**64 - 1


class Model(str, enum.Enum):
    FGN = "FGN"
    FBM = "FBM"
    EXP_FGN = "EXP_FGN"
    CASCADE = "CASCADE"
    AR1 = "AR1"
    IID = "IID"


class Dist(str, enum.Enum):
    UNIFORM = "UNIFORM"
    NORMAL = "NORMAL"
    LOGNORMAL = "LOGNORMAL"


_REQUIRED = {
    Model.FGN: {"hurst"},
    Model.FBM: {"hurst"},
    Model.EXP_FGN: {"hurst"},
    Model.CASCADE: {"alpha", "depth"},
    Model.AR1: {"phi", "sigma"},
}
_DIST_REQUIRED = {
    Dist.UNIFORM: {"low", "high"},
    Dist.NORMAL: {"mu", "sigma"},
    Dist.LOGNORMAL: {"mu", "sigma"},
}
_OPTIONAL = ("hurst", "alpha", "depth", "phi", "sigma", "dist", "low", "high", "mu")


@dataclass(frozen=True)
class ModelDescriptor:
    """Everything needed to regenerate a series bit for bit.

    Only the parameters that belong to ``model`` may be set; the rest stay
    ``None``. For ``CASCADE`` the length is derived as ``2**depth``.
    """

    model: Model
    seed: int
    n: Optional[int] = None
    hurst: Optional[float] = None
    alpha: Optional[float] = None
    depth: Optional[int] = None
    phi: Optional[float] = None
    sigma: Optional[float] = None
    dist: Optional[Dist] = None
    low: Optional[float] = None
    high: Optional[float] = None
    mu: Optional[float] = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "model", Model(self.model))
        except ValueError:
            raise ParameterError(f"unknown model {self.model!r}") from None
        if self.dist is not None:
            try:
                object.__setattr__(self, "dist", Dist(self.dist))
            except ValueError:
                raise ParameterError(f"unknown distribution {self.dist!r}") from None
        self._validate()

    def _validate(self):
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)):
            raise ParameterError(f"seed must be an integer, got {self.seed!r}", field="seed")
        if not 0 <= int(self.seed) <= SEED_MAX:
            raise ParameterError(f"seed must be in [0, 2**64 - 1], got {self.seed}", field="seed")

        if self.model is Model.IID:
            if self.dist is None:
                raise ParameterError("IID model requires 'dist'", field="dist")
            required = {"dist"} | _DIST_REQUIRED[self.dist]
        else:
            required = _REQUIRED[self.model]
        present = {name for name in _OPTIONAL if getattr(self, name) is not None}
        missing = required - present
        extra = present - required
        if missing:
            raise ParameterError(f"{self.model.value} requires {sorted(missing)}", field=sorted(missing)[0])
        if extra:
            raise ParameterError(f"{self.model.value} does not take {sorted(extra)}", field=sorted(extra)[0])

        if self.model is Model.CASCADE:
            if int(self.depth) != self.depth or self.depth < 1:
                raise ParameterError(f"depth must be an integer >= 1, got {self.depth}", field="depth")
            if self.depth > 30:
                raise ParameterError(f"depth {self.depth} is too large (max 30)", field="depth")
            if not self.alpha > 0 or not math.isfinite(self.alpha):
                raise ParameterError(f"alpha must be > 0, got {self.alpha}", field="alpha")
            expected = 2 ** int(self.depth)
            if self.n is None:
                object.__setattr__(self, "n", expected)
            elif self.n != expected:
                raise ParameterError(f"CASCADE length is 2**depth = {expected}, got n={self.n}", field="n")
            return

        if self.n is None:
            raise ParameterError(f"{self.model.value} requires 'n'", field="n")
        if int(self.n) != self.n or self.n < 2:
            raise ParameterError(f"n must be an integer >= 2, got {self.n}", field="n")
        if self.hurst is not None and not 0.0 < self.hurst < 1.0:
            raise ParameterError(f"hurst must be in (0, 1), got {self.hurst}", field="hurst")
        if self.phi is not None and not -1.0 < self.phi < 1.0:
            raise ParameterError(f"phi must be in (-1, 1), got {self.phi}", field="phi")
        if self.sigma is not None and not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ParameterError(f"sigma must be > 0, got {self.sigma}", field="sigma")
        if self.dist is Dist.UNIFORM and not self.low < self.high:
            raise ParameterError(f"uniform requires low < high, got {self.low}, {self.high}", field="low")
        for name in ("low", "high", "mu"):
            value = getattr(self, name)
            if value is not None and not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value}", field=name)

    def items(self):
        """``(key, text)`` pairs of the populated fields, in declaration order."""
        out = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, enum.Enum):
                text = value.value
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(int(value))
            out.append((f.name, text))
        return out

    def with_seed(self, seed):
        kwargs = {f.name: getattr(self, f.name) for f in fields(self)}
        kwargs["seed"] = int(seed)
        return ModelDescriptor(**kwargs)

    @property
    def label(self):
        """Short human-readable name used in result tables."""
        if self.model is Model.EXP_FGN:
            if self.hurst == 0.5:
                return "exp-white"
            return f"exp-fgn-h{self.hurst:g}"
        if self.model in (Model.FGN, Model.FBM):
            return f"{self.model.value.lower()}-h{self.hurst:g}"
        if self.model is Model.CASCADE:
            return f"cascade-a{self.alpha:g}-d{self.depth}"
        if self.model is Model.AR1:
            return f"ar1-phi{self.phi:g}"
        return f"iid-{self.dist.value.lower()}"

    @classmethod
    def from_items(cls, items):
        """Inverse of :meth:`items`; ``items`` maps keys to strings."""
        items = dict(items)
        kwargs = {}
        for f in fields(cls):
            if f.name not in items:
                continue
            text = items.pop(f.name)
            if f.name in ("model", "dist"):
                kwargs[f.name] = text
            elif f.name in ("seed", "n", "depth"):
                kwargs[f.name] = int(text)
            else:
                kwargs[f.name] = float(text)
        if items:
            raise ParameterError(f"unknown descriptor keys {sorted(items)}")
        if "model" not in kwargs or "seed" not in kwargs:
            raise ParameterError("descriptor needs at least 'model' and 'seed'")
        return cls(**kwargs)


@dataclass(frozen=True)
class MixDescriptor:
    """Provenance of a total stream built by the mixer."""

    signal: "Descriptor"
    noise: "Descriptor"
    snr: float
    noise_scale: float

    def items(self):
        out = [("signal." + k, v) for k, v in _items(self.signal)]
        out += [("noise." + k, v) for k, v in _items(self.noise)]
        out += [("mix.snr", repr(float(self.snr))), ("mix.noise_scale", repr(float(self.noise_scale)))]
        return out


Descriptor = Union[ModelDescriptor, MixDescriptor, None]


def _items(meta):
    return [] if meta is None else meta.items()


def descriptor_from_items(items):
    """Rebuild a descriptor (plain, mixed or ``None``) from flat key/value pairs."""
    items = dict(items)
    if not items:
        return None
    if "mix.snr" in items:
        signal = {k[len("signal."):]: v for k, v in items.items() if k.startswith("signal.")}
        noise = {k[len("noise."):]: v for k, v in items.items() if k.startswith("noise.")}
        return MixDescriptor(
            signal=descriptor_from_items(signal),
            noise=descriptor_from_items(noise),
            snr=float(items["mix.snr"]),
            noise_scale=float(items["mix.noise_scale"]),
        )
    return ModelDescriptor.from_items(items)


@dataclass(frozen=True, eq=False)
class Series:
    """A finite real sample path plus the descriptor that produced it."""

    values: np.ndarray
    meta: Descriptor = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 1:
            raise ParameterError("series values must be one-dimensional")
        if values.shape[0] < 2:
            raise ParameterError(f"series needs at least 2 values, got {values.shape[0]}")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise ParameterError(f"series value at index {bad} is not finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Series):
            return NotImplemented
        return self.meta == other.meta and np.array_equal(self.values, other.values)

    __hash__ = None


def format_value(x):
    return f"{x:.17g}"


def _atomic_write(path, text):
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trace_text(series):
    lines = [f"# {k}={v}" for k, v in _items(series.meta)]
    lines.append("value")
    lines.extend(format_value(v) for v in series.values)
    return "\n".join(lines) + "\n"


def write_trace(path, series):
    """Write ``series`` as a trace CSV; the file appears only once complete."""
    _atomic_write(path, trace_text(series))


def read_comment_block(lines, path):
    """Split leading ``# key=value`` lines from the rest; returns (items, index)."""
    items = {}
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        body = lines[i][1:].strip()
        if body:
            if "=" not in body:
                raise TraceFormatError(f"comment is not key=value: {lines[i]!r}", path, i + 1)
            key, value = body.split("=", 1)
            items[key.strip()] = value.strip()
        i += 1
    return items, i


def read_trace(path):
    """Parse a trace CSV written by :func:`write_trace`."""
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise TraceFormatError(f"cannot read trace: {exc.strerror}", path) from exc
    items, i = read_comment_block(lines, path)
    if i >= len(lines) or lines[i].strip() != "value":
        raise TraceFormatError("expected header 'value'", path, i + 1)
    values = []
    for lineno in range(i + 1, len(lines)):
        text = lines[lineno].strip()
        if not text:
            continue
        try:
            v = float(text)
        except ValueError:
            raise TraceFormatError(f"not a number: {text!r}", path, lineno + 1) from None
        if not math.isfinite(v):
            raise TraceFormatError(f"non-finite value {text!r}", path, lineno + 1)
        values.append(v)
    if len(values) < 2:
        raise TraceFormatError(f"trace has {len(values)} values, need at least 2", path)
    try:
        meta = descriptor_from_items(items)
    except (ParameterError, ValueError, KeyError) as exc:
        raise TraceFormatError(f"bad descriptor comments: {exc}", path) from exc
    return Series(np.array(values), meta)
