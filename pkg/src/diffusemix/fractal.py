"""Fractal image sourcing and the final blending stage.

Fractals come either from a directory of collected images or from a
built-in procedural generator, so the pipeline works without
redistributing any image set. The generator renders an iterated-function-
system attractor: a seeded ensemble of contractive affine maps is sampled,
the chaos game is run over many parallel point chains, and the visit
density is mapped through a seeded three-color palette.
"""

from __future__ import annotations

import logging
import threading
from pathlib import Path

import numpy as np

from . import imgcore
from .errors import DimensionMismatch, EmptyFractalSet, LambdaOutOfRange
from .imgcore import ImageBuffer
from .seeding import make_rng, mix

logger = logging.getLogger(__name__)

_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")

# Native render size for procedurally sourced fractals; they are
# cover-cropped to the training image's dimensions downstream.
PROCEDURAL_NATIVE_SIZE = 256

_STEPS = 300
_BURN_IN = 20
_MIN_CHAINS = 16
_MAX_CHAINS = 4096


def _chain_count(w: int, h: int) -> int:
    # Keep roughly five plotted points per output pixel; a pure function of
    # the dimensions so renders stay deterministic.
    target = 5 * w * h
    chains = -(-target // (_STEPS - _BURN_IN))
    return int(min(max(chains, _MIN_CHAINS), _MAX_CHAINS))


def generate_fractal(seed: int, w: int, h: int) -> ImageBuffer:
    """Render a deterministic IFS attractor at (w, h).

    Same (seed, w, h) always produces bit-identical pixels. Output is
    non-constant and spans a guaranteed value range in at least one channel.
    """
    if w < 16 or h < 16:
        raise ValueError(f"fractal dimensions must be >= 16, got {w}x{h}")
    rng = make_rng(mix(seed, w, h))
    points = _attractor_points(rng, _chain_count(w, h))
    density = _rasterize(points, w, h)
    return _colorize(density, rng)


def _attractor_points(rng: np.random.Generator, chains: int) -> np.ndarray:
    # 3..6 contractive affine maps; weights by area so dense maps draw more.
    for _ in range(8):
        n_maps = int(rng.integers(3, 7))
        angles = rng.uniform(0.0, 2.0 * np.pi, n_maps)
        scales = rng.uniform(0.35, 0.75, (n_maps, 2))
        trans = rng.uniform(-1.0, 1.0, (n_maps, 2))
        cos, sin = np.cos(angles), np.sin(angles)
        mats = np.empty((n_maps, 2, 2))
        mats[:, 0, 0] = cos * scales[:, 0]
        mats[:, 0, 1] = -sin * scales[:, 1]
        mats[:, 1, 0] = sin * scales[:, 0]
        mats[:, 1, 1] = cos * scales[:, 1]
        weights = np.abs(np.linalg.det(mats)) + 0.05
        weights /= weights.sum()

        pts = np.zeros((chains, 2))
        kept = []
        for step in range(_STEPS):
            choice = rng.choice(n_maps, size=chains, p=weights)
            pts = np.einsum("nij,nj->ni", mats[choice], pts) + trans[choice]
            if step >= _BURN_IN:
                kept.append(pts.copy())
        cloud = np.concatenate(kept, axis=0)
        extent = cloud.max(axis=0) - cloud.min(axis=0)
        # Re-draw the ensemble if the attractor collapsed to a near-point.
        if extent.min() > 1e-3:
            return cloud
    return cloud


def _rasterize(points: np.ndarray, w: int, h: int) -> np.ndarray:
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    span = np.maximum(hi - lo, 1e-12)
    unit = (points - lo) / span
    ix = np.clip((unit[:, 0] * w).astype(np.intp), 0, w - 1)
    iy = np.clip((unit[:, 1] * h).astype(np.intp), 0, h - 1)
    density = np.zeros((h, w), dtype=np.float64)
    np.add.at(density, (iy, ix), 1.0)
    return density


def _colorize(density: np.ndarray, rng: np.random.Generator) -> ImageBuffer:
    dark = rng.uniform(0.0, 0.15, 3)
    mid = rng.uniform(0.25, 0.75, 3)
    bright = rng.uniform(0.3, 0.9, 3)
    bright[int(rng.integers(3))] = rng.uniform(0.85, 1.0)

    t = np.log1p(density)
    t_max, t_min = t.max(), t.min()
    if t_max - t_min < 1e-12:
        # Uniform density cannot happen for a real attractor; keep the
        # non-constant contract with a horizontal palette ramp.
        t = np.tile(np.linspace(0.0, 1.0, density.shape[1]), (density.shape[0], 1))
    else:
        t = (t - t_min) / (t_max - t_min)

    t = t[:, :, None]
    low = dark + (mid - dark) * (2.0 * t)
    high = mid + (bright - mid) * (2.0 * t - 1.0)
    img = np.where(t < 0.5, low, high)
    return ImageBuffer(np.clip(img, 0.0, 1.0))


class FractalSource:
    """Resolves fractal ids to images; directory-backed or procedural.

    Resolution is deterministic: a given id always yields the same pixels.
    Fitted images are memoized per (id, target dims) behind a lock so
    workers can share a source.
    """

    def __init__(self, ids, resolver, descriptor: dict):
        if not ids:
            raise EmptyFractalSet("fractal source has no items")
        self.ids = tuple(ids)
        self.descriptor = descriptor
        self._resolver = resolver
        self._index = frozenset(self.ids)
        self._cache = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self.ids)

    def resolve(self, fractal_id: str) -> ImageBuffer:
        if fractal_id not in self._index:
            raise KeyError(f"unknown fractal id: {fractal_id}")
        return self._resolver(fractal_id)

    def resolve_fitted(self, fractal_id: str, w: int, h: int) -> ImageBuffer:
        """Resolve and cover-crop to (w, h), memoized."""
        key = (fractal_id, w, h)
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        fitted = imgcore.cover_crop_resize(self.resolve(fractal_id), w, h)
        with self._lock:
            self._cache[key] = fitted
        return fitted


def load_fractal_dir(path) -> FractalSource:
    """Directory-backed source; ids are filenames, sorted for determinism.

    Unreadable entries are skipped with a warning; the source is an error
    only if no entry decodes.
    """
    path = Path(path)
    names = sorted(
        p.name for p in path.iterdir()
        if p.is_file() and p.suffix.lower() in _IMAGE_SUFFIXES
    )
    usable = []
    for name in names:
        try:
            imgcore.load_image(path / name)
        except Exception as exc:
            logger.warning("skipping unreadable fractal %s: %s", name, exc)
            continue
        usable.append(name)
    if not usable:
        raise EmptyFractalSet(f"no decodable fractal images in {path}")

    def resolver(fractal_id: str) -> ImageBuffer:
        return imgcore.load_image(path / fractal_id)

    return FractalSource(
        ids=usable,
        resolver=resolver,
        descriptor={"kind": "directory", "ids": list(usable)},
    )


def procedural_source(count: int, seed: int) -> FractalSource:
    """Self-contained source of `count` seeded procedural fractals."""
    if count < 1:
        raise ValueError("procedural fractal count must be >= 1")
    ids = tuple(f"fractal_{i:04d}" for i in range(count))
    by_id = {fid: i for i, fid in enumerate(ids)}

    def resolver(fractal_id: str) -> ImageBuffer:
        index = by_id[fractal_id]
        return generate_fractal(
            mix(seed, index), PROCEDURAL_NATIVE_SIZE, PROCEDURAL_NATIVE_SIZE
        )

    return FractalSource(
        ids=ids,
        resolver=resolver,
        descriptor={"kind": "procedural", "count": count, "seed": seed},
    )


def blend(hybrid: ImageBuffer, fractal: ImageBuffer, lam: float) -> ImageBuffer:
    """Convex combination lam*fractal + (1-lam)*hybrid.

    lam=0 returns the hybrid and lam=1 the fractal, bit-exact.
    """
    if not 0.0 <= lam <= 1.0:
        raise LambdaOutOfRange(f"lambda must be within [0, 1], got {lam}")
    if not hybrid.same_dims(fractal):
        raise DimensionMismatch(
            f"hybrid {hybrid.width}x{hybrid.height} vs "
            f"fractal {fractal.width}x{fractal.height}"
        )
    if lam == 0.0:
        return hybrid
    if lam == 1.0:
        return fractal
    # Double-complement canonicalization (at most 1 ulp from the given lam)
    # pairs lam with an exact float complement, which makes
    # blend(h, f, lam) == blend(f, h, 1-lam) hold bit for bit.
    lam = 1.0 - (1.0 - lam)
    out = lam * fractal.data + (1.0 - lam) * hybrid.data
    return ImageBuffer(np.clip(out, 0.0, 1.0))


def sample_fractal(source: FractalSource, rng: np.random.Generator) -> str:
    """Uniform draw of a fractal id; deterministic per rng state."""
    return source.ids[int(rng.integers(len(source.ids)))]
