"""2D discrete wavelet transform and the full two-level sub-band decomposition.

Images are plain ``numpy`` arrays of shape ``(height, width)``.  Every
transform here also accepts a stack of images with shape ``(..., height,
width)`` and operates on the last two axes, which is how the ensemble
decomposes a whole training set in one call.

Band naming: the first letter is the filter applied along each row (the
width axis), the second the filter applied along each column.  ``LH`` is
therefore lowpass horizontally and highpass vertically.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ValidationError

BAND_NAMES = ("LL", "LH", "HL", "HH")
# Depth-first order: level-1 band, then its level-2 band.
SUBBAND_NAMES = tuple(f"{a}.{b}" for a in BAND_NAMES for b in BAND_NAMES)
N_SUBBANDS = len(SUBBAND_NAMES)


@dataclass(frozen=True)
class WaveletFilter:
    """Orthonormal two-channel filter bank.

    The highpass filter is the quadrature mirror of the lowpass one,
    ``g[n] = (-1)**n * h[L-1-n]``, unless given explicitly.
    """

    name: str
    lowpass: tuple[float, ...]
    highpass: tuple[float, ...] = field(default=())

    def __post_init__(self):
        lo = tuple(float(c) for c in self.lowpass)
        if not lo or len(lo) % 2:
            raise ValidationError(f"filter {self.name!r}: lowpass length must be even and nonzero")
        hi = tuple(float(c) for c in self.highpass) or tuple(
            (-1) ** n * lo[len(lo) - 1 - n] for n in range(len(lo))
        )
        if len(hi) != len(lo):
            raise ValidationError(f"filter {self.name!r}: lowpass and highpass lengths differ")
        if abs(sum(c * c for c in lo) - 1.0) > 1e-12:
            raise ValidationError(f"filter {self.name!r}: lowpass is not unit norm")
        object.__setattr__(self, "lowpass", lo)
        object.__setattr__(self, "highpass", hi)

    @property
    def length(self) -> int:
        return len(self.lowpass)


_SQRT2 = np.sqrt(2.0)
_SQRT3 = np.sqrt(3.0)

HAAR = WaveletFilter("haar", (1 / _SQRT2, 1 / _SQRT2))
# Four-tap Daubechies filter (two vanishing moments), often written D4.
DB2 = WaveletFilter(
    "db2",
    tuple(c / (4 * _SQRT2) for c in (1 + _SQRT3, 3 + _SQRT3, 3 - _SQRT3, 1 - _SQRT3)),
)

FILTERS = {"haar": HAAR, "db2": DB2, "d4": DB2}


def get_filter(name: str | WaveletFilter) -> WaveletFilter:
    if isinstance(name, WaveletFilter):
        return name
    try:
        return FILTERS[name.lower()]
    except KeyError:
        raise ValidationError(
            f"unknown wavelet filter {name!r}; choose one of {sorted(FILTERS)}"
        ) from None


@lru_cache(maxsize=64)
def _analysis_matrices(wavelet: WaveletFilter, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Periodized analysis operators of shape ``(n//2, n)`` for one axis."""
    lo = np.zeros((n // 2, n))
    hi = np.zeros((n // 2, n))
    for k in range(n // 2):
        for tap, (h, g) in enumerate(zip(wavelet.lowpass, wavelet.highpass)):
            lo[k, (2 * k + tap) % n] += h
            hi[k, (2 * k + tap) % n] += g
    lo.setflags(write=False)
    hi.setflags(write=False)
    return lo, hi


def _as_image(img, name="image") -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim < 2:
        raise ValidationError(f"{name} must have at least 2 dimensions, got shape {arr.shape}")
    return arr


def _require_divisible(arr: np.ndarray, k: int, what: str):
    h, w = arr.shape[-2:]
    if h % k or w % k or h == 0 or w == 0:
        raise ValidationError(f"{what} needs dimensions divisible by {k}, got {h}x{w}")


def normalize(img, source_range: tuple[float, float]) -> np.ndarray:
    """Map pixels affinely from ``source_range`` onto [0, 1], clamping outliers."""
    lo, hi = (float(v) for v in source_range)
    if not hi > lo:
        raise ValidationError(f"degenerate source range [{lo}, {hi}]: image is unusable")
    arr = np.clip(np.asarray(img, dtype=np.float64), lo, hi)
    return (arr - lo) / (hi - lo)


def downsample_2x(img) -> np.ndarray:
    """Halve both dimensions by averaging each 2x2 block."""
    arr = _as_image(img)
    _require_divisible(arr, 2, "downsample_2x")
    h, w = arr.shape[-2:]
    blocks = arr.reshape(arr.shape[:-2] + (h // 2, 2, w // 2, 2))
    return blocks.mean(axis=(-3, -1))


def dwt2(img, wavelet: str | WaveletFilter = HAAR):
    """One level of the separable 2D DWT with periodic boundaries.

    Rows are filtered first, then columns.  Returns ``(LL, LH, HL, HH)``,
    each half the size of the input along both axes.
    """
    arr = _as_image(img)
    _require_divisible(arr, 2, "dwt2")
    wavelet = get_filter(wavelet)
    h, w = arr.shape[-2:]
    row_lo, row_hi = _analysis_matrices(wavelet, w)
    col_lo, col_hi = _analysis_matrices(wavelet, h)
    lo = arr @ row_lo.T
    hi = arr @ row_hi.T
    return col_lo @ lo, col_hi @ lo, col_lo @ hi, col_hi @ hi


def idwt2(bands, wavelet: str | WaveletFilter = HAAR) -> np.ndarray:
    """Invert :func:`dwt2`; exact up to rounding for orthonormal filters."""
    if len(bands) != 4:
        raise ValidationError(f"idwt2 expects 4 bands, got {len(bands)}")
    ll, lh, hl, hh = (_as_image(b, "band") for b in bands)
    if not ll.shape == lh.shape == hl.shape == hh.shape:
        raise ValidationError(
            "idwt2 bands must share dimensions, got "
            + ", ".join("x".join(map(str, b.shape)) for b in (ll, lh, hl, hh))
        )
    wavelet = get_filter(wavelet)
    h, w = ll.shape[-2:]
    row_lo, row_hi = _analysis_matrices(wavelet, 2 * w)
    col_lo, col_hi = _analysis_matrices(wavelet, 2 * h)
    lo = col_lo.T @ ll + col_hi.T @ lh
    hi = col_lo.T @ hl + col_hi.T @ hh
    return lo @ row_lo + hi @ row_hi


def decompose_full_2level(img, wavelet: str | WaveletFilter = HAAR) -> np.ndarray:
    """Decompose every level-1 band again, giving 16 sub-bands.

    Returns an array of shape ``(..., 16, height/4, width/4)`` ordered as
    :data:`SUBBAND_NAMES`.
    """
    arr = _as_image(img)
    _require_divisible(arr, 4, "decompose_full_2level")
    out = []
    for band in dwt2(arr, wavelet):
        out.extend(dwt2(band, wavelet))
    return np.stack(out, axis=-3)


def flatten(img) -> np.ndarray:
    """Row-major flattening of the last two axes."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim < 2:
        return arr.reshape(-1)
    return arr.reshape(arr.shape[:-2] + (-1,))
