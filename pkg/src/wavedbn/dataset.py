"""Dataset ingestion (PGM images, COIL-20, USPS) and stratified hold-out splits.

Grammars accepted by the loaders:

PGM
    ``P2`` (ASCII) or ``P5`` (binary) netpbm graymaps.  Header tokens
    (magic, width, height, maxval) are separated by whitespace and may be
    interleaved with ``#`` comments running to end of line.  ``maxval`` is at
    most 65535; binary samples are one byte when ``maxval < 256`` and two
    big-endian bytes otherwise.

USPS plain text
    One sample per line: ``label x1 x2 ... x256`` separated by whitespace.

USPS sparse text
    One sample per line: ``label i:x_i ...`` with 1-based feature indices
    1..256; omitted features are 0.  Files ending in ``.bz2`` or ``.gz`` are
    decompressed transparently.
"""
from __future__ import annotations

import bz2
import gzip
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataFormatError, ValidationError
from .rbm import make_rng
from .wavelet import normalize

COIL20_SIZE = 128
COIL20_OBJECTS = 20
COIL20_VIEWS = 72
USPS_SIDE = 16
USPS_FEATURES = USPS_SIDE * USPS_SIDE

_COIL_NAME = re.compile(r"^obj(\d+)__(\d+)\.pgm$", re.IGNORECASE)


@dataclass
class LabeledDataset:
    """Images of shape ``(n, height, width)`` with labels in ``[0, n_classes)``.

    ``class_ids`` are the identifiers classes had in the source data (COIL
    object numbers, USPS digits); :func:`select_classes` matches against them.
    """

    images: np.ndarray
    labels: np.ndarray
    n_classes: int
    class_ids: tuple = ()
    class_names: tuple[str, ...] | None = None

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 3:
            raise ValidationError(f"images must be an (n, height, width) stack, got {self.images.shape}")
        if self.labels.shape != (self.images.shape[0],):
            raise ValidationError(f"{self.images.shape[0]} images but {self.labels.size} labels")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValidationError(f"labels must lie in [0, {self.n_classes})")
        if not self.class_ids:
            self.class_ids = tuple(range(self.n_classes))
        if len(self.class_ids) != self.n_classes:
            raise ValidationError("class_ids must name every class")

    def __len__(self):
        return self.labels.size

    @property
    def image_shape(self) -> tuple[int, int]:
        return self.images.shape[1:]

    def subset(self, index) -> "LabeledDataset":
        return LabeledDataset(self.images[index], self.labels[index], self.n_classes,
                              self.class_ids, self.class_names)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValidationError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("split seed must be a 64-bit unsigned integer")


# --------------------------------------------------------------------- PGM


def _pgm_header(data: bytes, path) -> tuple[bytes, list[int], int]:
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise DataFormatError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    magic = tokens[0]
    if magic not in (b"P2", b"P5"):
        raise DataFormatError(f"{path}: not a PGM file (magic {magic!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise DataFormatError(f"{path}: malformed PGM header") from None
    if width < 1 or height < 1 or not 0 < maxval <= 65535:
        raise DataFormatError(f"{path}: invalid PGM dimensions or maxval")
    return magic, [width, height, maxval], pos


def read_pgm(path) -> tuple[np.ndarray, int]:
    """Return the raw samples as an integer array and the file's maxval."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise DataFormatError(f"{path}: cannot read ({exc.strerror})") from exc
    magic, (width, height, maxval), pos = _pgm_header(data, path)
    count = width * height
    if magic == b"P5":
        pos += 1  # single whitespace byte after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raw = data[pos:pos + count * dtype.itemsize]
        if len(raw) < count * dtype.itemsize:
            raise DataFormatError(f"{path}: truncated PGM data "
                                  f"({len(raw)} of {count * dtype.itemsize} bytes)")
        pixels = np.frombuffer(raw, dtype=dtype).astype(np.int64)
    else:
        body = re.sub(rb"#[^\n\r]*", b" ", data[pos:]).split()
        if len(body) < count:
            raise DataFormatError(f"{path}: truncated PGM data ({len(body)} of {count} samples)")
        try:
            pixels = np.array([int(t) for t in body[:count]], dtype=np.int64)
        except ValueError:
            raise DataFormatError(f"{path}: non-integer sample in PGM data") from None
    if pixels.max(initial=0) > maxval:
        raise DataFormatError(f"{path}: sample exceeds maxval {maxval}")
    return pixels.reshape(height, width), maxval


def load_pgm(path) -> np.ndarray:
    """PGM image scaled to [0, 1] by its maxval."""
    pixels, maxval = read_pgm(path)
    return normalize(pixels, (0, maxval))


def write_pgm(path, pixels, maxval: int = 255):
    """Write integer samples as a binary (P5) PGM."""
    arr = np.asarray(pixels)
    if arr.ndim != 2:
        raise ValidationError("write_pgm needs a 2-D array")
    if arr.min(initial=0) < 0 or arr.max(initial=0) > maxval or maxval > 65535:
        raise ValidationError(f"PGM samples must lie in [0, {maxval}]")
    dtype = ">u2" if maxval > 255 else "u1"
    height, width = arr.shape
    header = f"P5\n{width} {height}\n{maxval}\n".encode()
    Path(path).write_bytes(header + np.round(arr).astype(dtype).tobytes())


# ----------------------------------------------------------------- loaders


def load_coil20(directory, strict: bool = True) -> LabeledDataset:
    """Load ``obj<k>__<angle>.pgm`` files; object ``k`` becomes class ``k - 1``.

    With ``strict`` the directory must hold all 20 objects x 72 views.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise DataFormatError(f"{directory}: not a directory")
    entries = []
    for path in directory.iterdir():
        m = _COIL_NAME.match(path.name)
        if m:
            entries.append((int(m.group(1)), int(m.group(2)), path))
    if not entries:
        raise DataFormatError(f"{directory}: no obj<k>__<angle>.pgm files found")
    entries.sort()
    images, labels = [], []
    for obj, _, path in entries:
        if not 1 <= obj <= COIL20_OBJECTS:
            raise DataFormatError(f"{path}: object number {obj} outside 1..{COIL20_OBJECTS}")
        img = load_pgm(path)
        if img.shape != (COIL20_SIZE, COIL20_SIZE):
            raise DataFormatError(
                f"{path}: expected {COIL20_SIZE}x{COIL20_SIZE}, found {img.shape[0]}x{img.shape[1]}"
            )
        images.append(img)
        labels.append(obj - 1)
    if strict:
        counts = np.bincount(labels, minlength=COIL20_OBJECTS)
        if (counts != COIL20_VIEWS).any():
            bad = [k + 1 for k in np.flatnonzero(counts != COIL20_VIEWS)]
            raise DataFormatError(
                f"{directory}: expected {COIL20_VIEWS} views of each of {COIL20_OBJECTS} objects; "
                f"objects {bad} differ"
            )
    return LabeledDataset(
        np.stack(images), np.array(labels), COIL20_OBJECTS,
        class_ids=tuple(range(1, COIL20_OBJECTS + 1)),
        class_names=tuple(f"obj{k}" for k in range(1, COIL20_OBJECTS + 1)),
    )


def load_pgm_directory(directory) -> LabeledDataset:
    """One subdirectory per class (sorted by name), each holding ``*.pgm`` files."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DataFormatError(f"{directory}: not a directory")
    classes = sorted(p for p in directory.iterdir() if p.is_dir())
    images, labels = [], []
    for label, class_dir in enumerate(classes):
        for path in sorted(class_dir.glob("*.pgm")):
            img = load_pgm(path)
            if images and img.shape != images[0].shape:
                raise DataFormatError(
                    f"{path}: expected {images[0].shape[0]}x{images[0].shape[1]}, "
                    f"found {img.shape[0]}x{img.shape[1]}"
                )
            images.append(img)
            labels.append(label)
    if not images:
        raise DataFormatError(f"{directory}: no class subdirectories with PGM files")
    names = tuple(p.name for p in classes)
    return LabeledDataset(np.stack(images), np.array(labels), len(classes),
                          class_ids=names, class_names=names)


def _open_text(path: Path):
    if path.suffix == ".bz2":
        return bz2.open(path, "rt")
    if path.suffix == ".gz":
        return gzip.open(path, "rt")
    return open(path, "rt")


def _parse_label(token: str, path, lineno) -> int:
    try:
        value = float(token)
    except ValueError:
        value = float("nan")
    if not value.is_integer():
        raise DataFormatError(f"{path}:{lineno}: label {token!r} is not an integer")
    return int(value)


def _read_usps_file(path) -> tuple[np.ndarray, np.ndarray]:
    path = Path(path)
    rows, labels = [], []
    try:
        with _open_text(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                tokens = line.split()
                if not tokens:
                    continue
                labels.append(_parse_label(tokens[0], path, lineno))
                feats = tokens[1:]
                try:
                    if any(":" in t for t in feats):
                        row = np.zeros(USPS_FEATURES)
                        for t in feats:
                            idx, _, val = t.partition(":")
                            i = int(idx)
                            if not 1 <= i <= USPS_FEATURES:
                                raise DataFormatError(
                                    f"{path}:{lineno}: feature index {i} outside 1..{USPS_FEATURES}"
                                )
                            row[i - 1] = float(val)
                    else:
                        if len(feats) != USPS_FEATURES:
                            raise DataFormatError(
                                f"{path}:{lineno}: expected {USPS_FEATURES} features, "
                                f"found {len(feats)}"
                            )
                        row = np.array([float(t) for t in feats])
                except ValueError:
                    raise DataFormatError(f"{path}:{lineno}: malformed feature value") from None
                rows.append(row)
    except OSError as exc:
        raise DataFormatError(f"{path}: cannot read ({exc})") from exc
    if not rows:
        raise DataFormatError(f"{path}: no samples")
    return np.array(rows), np.array(labels, dtype=np.int64)


def detect_usps_range(values: np.ndarray, path="<data>") -> tuple[float, float]:
    """Source pixel range of a USPS file: [-1, 1], [0, 2], or already [0, 1]."""
    lo, hi = float(values.min()), float(values.max())
    if lo < 0:
        candidate = (-1.0, 1.0)
    elif hi > 1:
        candidate = (0.0, 2.0)
    else:
        candidate = (0.0, 1.0)
    if lo < candidate[0] - 1e-9 or hi > candidate[1] + 1e-9:
        raise DataFormatError(f"{path}: pixel values span [{lo}, {hi}], not a known USPS range")
    return candidate


def load_usps(train_path, test_path) -> tuple[LabeledDataset, LabeledDataset]:
    """Load the USPS train/test files as 16x16 images in [0, 1] with labels 0..9."""
    parts = []
    for path in (train_path, test_path):
        x, y = _read_usps_file(path)
        x = normalize(x, detect_usps_range(x, path))
        parts.append((x, y))
    seen = set(np.concatenate([y for _, y in parts]).tolist())
    if seen <= set(range(10)):
        shift = 0
    elif seen <= set(range(1, 11)):
        shift = 1
    else:
        raise DataFormatError(f"unknown USPS labels {sorted(seen - set(range(11)))} "
                              "or mixed 0..9 / 1..10 alphabets")
    return tuple(
        LabeledDataset(x.reshape(-1, USPS_SIDE, USPS_SIDE), y - shift, 10)
        for x, y in parts
    )


# ------------------------------------------------------------------ splits


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def split_indices(labels, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Sorted train and test indices; each class contributes ``round(f * count)`` to train."""
    labels = np.asarray(labels)
    rng = make_rng(spec.seed)
    groups = [np.flatnonzero(labels == c) for c in np.unique(labels)] if spec.stratified \
        else [np.arange(labels.size)]
    train, test = [], []
    for members in groups:
        if members.size < 2:
            raise ValidationError(
                f"class {labels[members[0]] if members.size else '?'} has fewer than 2 samples; "
                "cannot split"
            )
        shuffled = rng.permutation(members)
        k = min(max(_round_half_up(spec.train_fraction * members.size), 1), members.size - 1)
        train.append(shuffled[:k])
        test.append(shuffled[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def split_holdout(ds: LabeledDataset, spec: SplitSpec) -> tuple[LabeledDataset, LabeledDataset]:
    train, test = split_indices(ds.labels, spec)
    return ds.subset(train), ds.subset(test)


def select_classes(ds: LabeledDataset, keep) -> LabeledDataset:
    """Keep the listed classes (by ``class_ids``), relabelled 0.. in ``keep`` order."""
    keep = list(keep)
    if not keep:
        raise ValidationError("select_classes needs at least one class")
    lookup = {cid: i for i, cid in enumerate(ds.class_ids)}
    unknown = [k for k in keep if k not in lookup]
    if unknown:
        raise ValidationError(f"unknown class ids {unknown}; known ids are {list(ds.class_ids)}")
    if len(set(keep)) != len(keep):
        raise ValidationError("duplicate class ids in selection")
    remap = np.full(ds.n_classes, -1, dtype=np.int64)
    for new, cid in enumerate(keep):
        remap[lookup[cid]] = new
    new_labels = remap[ds.labels]
    mask = new_labels >= 0
    names = None
    if ds.class_names is not None:
        names = tuple(ds.class_names[lookup[cid]] for cid in keep)
    return LabeledDataset(ds.images[mask], new_labels[mask], len(keep),
                          class_ids=tuple(keep), class_names=names)
