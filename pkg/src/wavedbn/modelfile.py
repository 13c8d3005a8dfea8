"""Plain-text, versioned persistence for :class:`EnsembleModel`.

Layout (one record per line, tokens separated by single spaces)::

    WAVEDBN
    version 1
    preprocessing <input_height> <input_width> <downsample> <wavelet>
    n_classes <n>
    config_hash <hex or ->
    seed <int>
    timestamp <ISO-8601 UTC>
    weights <16 floats>
    scaler <j> <min> <max>                 16 lines, j = 0..15
    dbn <j> <n_layers>                     then, for each layer:
    layer <i> <n_visible> <n_hidden> <visible_kind>
    W <n_hidden floats>                    n_visible lines
    bv <n_visible floats>
    bh <n_hidden floats>
    head <n_hidden> <n_classes>            after the last layer
    Wh <n_classes floats>                  n_hidden lines
    bh <n_classes floats>
    end

Floats are written with 17 significant digits, which round-trips every
binary64 value exactly.  Only the ``timestamp`` line varies between saves of
the same model.
"""
from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .dbn import Dbn
from .ensemble import EnsembleModel, Preprocessing
from .errors import ModelFormatError, WaveDbnError
from .rbm import Rbm
from .wavelet import N_SUBBANDS

MAGIC = "WAVEDBN"
FORMAT_VERSION = 1


@dataclass
class Provenance:
    config_hash: str = "-"
    seed: int = 0
    timestamp: str = ""


def _fmt(values) -> str:
    return " ".join(format(float(v), ".17g") for v in np.ravel(values))


def dumps(model: EnsembleModel, provenance: Provenance | None = None) -> str:
    prov = provenance or Provenance()
    timestamp = prov.timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds")
    pre = model.preprocessing
    out = [
        MAGIC,
        f"version {FORMAT_VERSION}",
        f"preprocessing {pre.input_height} {pre.input_width} {pre.downsample} {pre.wavelet}",
        f"n_classes {model.n_classes}",
        f"config_hash {prov.config_hash}",
        f"seed {prov.seed}",
        f"timestamp {timestamp}",
        f"weights {_fmt(model.weights)}",
    ]
    out += [f"scaler {j} {_fmt(model.scalers[j])}" for j in range(N_SUBBANDS)]
    for j, dbn in enumerate(model.dbns):
        out.append(f"dbn {j} {len(dbn.layers)}")
        for i, layer in enumerate(dbn.layers):
            out.append(f"layer {i} {layer.n_visible} {layer.n_hidden} {layer.visible_kind}")
            out += [f"W {_fmt(row)}" for row in layer.weights]
            out.append(f"bv {_fmt(layer.visible_bias)}")
            out.append(f"bh {_fmt(layer.hidden_bias)}")
        out.append(f"head {dbn.softmax_weights.shape[0]} {dbn.n_classes}")
        out += [f"Wh {_fmt(row)}" for row in dbn.softmax_weights]
        out.append(f"bh {_fmt(dbn.softmax_bias)}")
    out.append("end")
    return "\n".join(out) + "\n"


def save(model: EnsembleModel, path, provenance: Provenance | None = None):
    """Write atomically: a failed save never leaves a partial file at ``path``."""
    path = Path(path)
    text = dumps(model, provenance)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


class _Reader:
    def __init__(self, data: bytes):
        self.lines = []
        offset = 0
        for raw in data.split(b"\n"):
            self.lines.append((offset, raw))
            offset += len(raw) + 1
        if data.endswith(b"\n"):
            self.lines.pop()
        self.size = len(data)
        self.index = 0

    def next(self, keyword: str, min_tokens: int = 0, max_tokens: int | None = None):
        """Tokens after ``keyword`` on the next line, plus the line's offset."""
        if self.index >= len(self.lines):
            raise ModelFormatError(f"unexpected end of file, expected {keyword!r}", self.size)
        offset, raw = self.lines[self.index]
        self.index += 1
        try:
            tokens = raw.decode("ascii").split(" ")
        except UnicodeDecodeError:
            raise ModelFormatError("non-ASCII bytes", offset) from None
        if tokens[0] != keyword:
            raise ModelFormatError(f"expected {keyword!r}, found {tokens[0][:20]!r}", offset)
        args = tokens[1:]
        if len(args) < min_tokens or (max_tokens is not None and len(args) > max_tokens):
            raise ModelFormatError(f"wrong number of fields on {keyword!r} line", offset)
        return args, offset

    def ints(self, keyword: str, n: int) -> tuple[list[int], int]:
        args, offset = self.next(keyword, n, n)
        try:
            return [int(a) for a in args], offset
        except ValueError:
            raise ModelFormatError(f"non-integer field on {keyword!r} line", offset) from None

    def floats(self, keyword: str, n: int) -> np.ndarray:
        args, offset = self.next(keyword, n, n)
        try:
            values = [float(a) for a in args]
        except ValueError:
            raise ModelFormatError(f"malformed number on {keyword!r} line", offset) from None
        if not all(math.isfinite(v) for v in values):
            raise ModelFormatError(f"non-finite number on {keyword!r} line", offset)
        return np.array(values, dtype=np.float64)


def loads(data: bytes | str) -> tuple[EnsembleModel, Provenance]:
    if isinstance(data, str):
        data = data.encode("ascii")
    r = _Reader(data)
    r.next(MAGIC, 0, 0)
    (version,), offset = r.ints("version", 1)
    if version != FORMAT_VERSION:
        raise ModelFormatError(
            f"model format version {version} is not supported (this build reads version "
            f"{FORMAT_VERSION})", offset)
    args, offset = r.next("preprocessing", 4, 4)
    try:
        pre = Preprocessing(int(args[0]), int(args[1]), int(args[2]), args[3])
    except (ValueError, WaveDbnError) as exc:
        raise ModelFormatError(f"bad preprocessing descriptor: {exc}", offset) from None
    (n_classes,), _ = r.ints("n_classes", 1)
    (config_hash,), _ = r.next("config_hash", 1, 1)
    (seed,), _ = r.ints("seed", 1)
    (timestamp,), _ = r.next("timestamp", 1, 1)
    weights = r.floats("weights", N_SUBBANDS)
    scalers = []
    for j in range(N_SUBBANDS):
        args, offset = r.next("scaler", 3, 3)
        if args[0] != str(j):
            raise ModelFormatError(f"expected scaler {j}", offset)
        try:
            scalers.append([float(args[1]), float(args[2])])
        except ValueError:
            raise ModelFormatError("malformed scaler value", offset) from None
    dbns = []
    for j in range(N_SUBBANDS):
        (index, n_layers), offset = r.ints("dbn", 2)
        if index != j or n_layers < 1:
            raise ModelFormatError(f"expected dbn {j} with at least one layer", offset)
        layers = []
        for i in range(n_layers):
            args, offset = r.next("layer", 4, 4)
            try:
                li, nv, nh = (int(a) for a in args[:3])
            except ValueError:
                raise ModelFormatError("non-integer layer dimensions", offset) from None
            if li != i or nv < 1 or nh < 1:
                raise ModelFormatError(f"expected layer {i} with positive dimensions", offset)
            w = np.stack([r.floats("W", nh) for _ in range(nv)])
            bv = r.floats("bv", nv)
            bh = r.floats("bh", nh)
            try:
                layers.append(Rbm(w, bv, bh, args[3]))
            except WaveDbnError as exc:
                raise ModelFormatError(str(exc), offset) from None
        (nh, nc), offset = r.ints("head", 2)
        if nc != n_classes or nh < 1:
            raise ModelFormatError("softmax head does not match n_classes", offset)
        wh = np.stack([r.floats("Wh", nc) for _ in range(nh)])
        bh = r.floats("bh", nc)
        try:
            dbns.append(Dbn(layers, wh, bh))
        except WaveDbnError as exc:
            raise ModelFormatError(str(exc), offset) from None
    _, offset = r.next("end", 0, 0)
    if r.index != len(r.lines):
        raise ModelFormatError("trailing data after 'end'", r.lines[r.index][0])
    try:
        model = EnsembleModel(dbns, weights, n_classes, np.array(scalers), pre)
    except WaveDbnError as exc:
        raise ModelFormatError(f"inconsistent model: {exc}", offset) from None
    return model, Provenance(config_hash, seed, timestamp)


def load(path) -> tuple[EnsembleModel, Provenance]:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ModelFormatError(f"{path}: cannot read ({exc.strerror})") from exc
    return loads(data)
