"""Synthetic stand-ins for the benchmark datasets.

The objects are random constellations of soft ellipses rotated through a
full turn, written with the COIL-20 file naming so that every loader and CLI
path can be exercised without the real data.  They say nothing about the
accuracy reachable on the real images.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .dataset import COIL20_OBJECTS, COIL20_SIZE, COIL20_VIEWS, write_pgm


def render_object(params: np.ndarray, angle: float, size: int) -> np.ndarray:
    """Render striped ellipses rotated by ``angle``.

    Each row of ``params`` is ``(cx, cy, sx, sy, theta, intensity, stripe
    frequency)`` in coordinates where the image spans [-1, 1].
    """
    yy, xx = np.mgrid[0:size, 0:size]
    u = (xx - size / 2 + 0.5) / (size / 2)
    v = (yy - size / 2 + 0.5) / (size / 2)
    ca, sa = np.cos(angle), np.sin(angle)
    # Rotate the sampling grid; equivalent to rotating the object by -angle.
    ur, vr = ca * u + sa * v, -sa * u + ca * v
    img = np.zeros((size, size))
    edge = 2.0 / size
    for cx, cy, sx, sy, theta, inten, freq in params:
        ct, st = np.cos(theta), np.sin(theta)
        du, dv = ur - cx, vr - cy
        along = ct * du + st * dv
        a = along / sx
        b = (-st * du + ct * dv) / sy
        inside = 1.0 / (1.0 + np.exp(np.clip((np.sqrt(a * a + b * b) - 1.0) * min(sx, sy) / edge,
                                             -50, 50)))
        stripes = 0.7 + 0.3 * np.sign(np.sin(freq * np.pi * along))
        img = np.maximum(img, inten * inside * stripes)
    return np.clip(img, 0.0, 1.0)


def object_params(rng: np.random.Generator, n_blobs: int = 5) -> np.ndarray:
    return np.column_stack([
        rng.uniform(-0.45, 0.45, n_blobs),
        rng.uniform(-0.45, 0.45, n_blobs),
        rng.uniform(0.06, 0.3, n_blobs),
        rng.uniform(0.06, 0.3, n_blobs),
        rng.uniform(0, np.pi, n_blobs),
        rng.uniform(0.3, 0.9, n_blobs),
        rng.uniform(2.0, 12.0, n_blobs),
    ])


def coil_like(n_objects: int = COIL20_OBJECTS, n_views: int = COIL20_VIEWS,
              size: int = COIL20_SIZE, seed: int = 0, noise: float = 0.02):
    """Images ``(n_objects * n_views, size, size)`` in [0, 1] and labels.

    View ``v`` shows the object rotated by ``v / n_views`` of a full turn.
    """
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for obj in range(n_objects):
        params = object_params(rng)
        for view in range(n_views):
            img = render_object(params, 2 * np.pi * view / n_views, size)
            img = img + noise * rng.standard_normal(img.shape)
            images.append(np.clip(img, 0.0, 1.0))
            labels.append(obj)
    return np.stack(images), np.array(labels)


def write_coil_like(directory, **kwargs) -> Path:
    """Write a COIL-20-named PGM directory (``obj<k>__<view>.pgm``)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    images, labels = coil_like(**kwargs)
    views = {}
    for img, label in zip(images, labels):
        view = views.get(label, 0)
        views[label] = view + 1
        write_pgm(directory / f"obj{label + 1}__{view}.pgm", np.round(img * 255))
    return directory
