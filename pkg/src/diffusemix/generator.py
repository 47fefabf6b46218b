"""Generation backends: G(image, rendered prompt) -> generated image.

Two backends fill the generation step. The procedural stylizer is a
deterministic stand-in for a diffusion model: each prompt maps to a fixed,
versioned recipe of filter-like global effects, so the whole pipeline is
testable offline and byte-reproducible. The remote backend talks to an
image-to-image service over HTTP. Either can be wrapped in a
content-addressed cache keyed by (backend id, prompt, source pixels).

Stylizer recipes (applied at full strength; intermediate strengths mix the
effect with the input):

  autumn               warm channel rebalance (red up, blue down)
  snowy                luminance lift toward white plus desaturation
  sunset               orange overlay, strongest toward the bottom
  watercolor art       3x3 box soften plus paper-white lift
  rainbow              horizontal spectral wash
  aurora               green-teal glow, strongest toward the top
  mosaic               block-average pixelation (4x4 blocks)
  ukiyo-e              posterize to 5 levels plus edge darkening
  a sketch with crayon edge strokes on warm paper, trace of source color
  (anything else)      neutral smoothstep tone curve

The recipes are frozen; the version tag in the backend id changes if they
ever do, which invalidates cache entries built on the old behavior.
"""

from __future__ import annotations

import base64
import hashlib
import os
import tempfile
import threading
import time
from pathlib import Path

import numpy as np
import requests

from . import imgcore
from .errors import DecodeError, NetworkError, ProtocolError, RemoteError
from .imgcore import ImageBuffer

STYLIZER_VERSION = "v1"
MOSAIC_BLOCK = 4

_ORANGE = np.array([1.0, 0.55, 0.2])
_AURORA = np.array([0.1, 0.9, 0.6])
_PAPER = np.array([0.98, 0.94, 0.86])
_LUMA = np.array([0.299, 0.587, 0.114])


def _luminance(data: np.ndarray) -> np.ndarray:
    return data @ _LUMA


def _box3(data: np.ndarray) -> np.ndarray:
    # 3x3 box mean with edge-clamped borders.
    padded = np.pad(data, ((1, 1), (1, 1), (0, 0)), mode="edge")
    out = np.zeros_like(data)
    for dy in range(3):
        for dx in range(3):
            out += padded[dy : dy + data.shape[0], dx : dx + data.shape[1]]
    return out / 9.0


def _edge_strength(data: np.ndarray) -> np.ndarray:
    lum = _luminance(data)
    gx = np.abs(np.diff(lum, axis=1, append=lum[:, -1:]))
    gy = np.abs(np.diff(lum, axis=0, append=lum[-1:, :]))
    return np.clip((gx + gy) * 3.0, 0.0, 1.0)


def _block_mean(data: np.ndarray, block: int) -> np.ndarray:
    h, w = data.shape[:2]
    edges_y = np.arange(0, h, block)
    edges_x = np.arange(0, w, block)
    sums = np.add.reduceat(np.add.reduceat(data, edges_y, axis=0), edges_x, axis=1)
    count_y = np.diff(np.append(edges_y, h))
    count_x = np.diff(np.append(edges_x, w))
    means = sums / (count_y[:, None, None] * count_x[None, :, None])
    return np.repeat(np.repeat(means, count_y, axis=0), count_x, axis=1)


def _vertical_ramp(h: int, w: int) -> np.ndarray:
    return np.tile(((np.arange(h) + 0.5) / h)[:, None, None], (1, w, 1))


def _autumn(data):
    warmed = np.empty_like(data)
    warmed[:, :, 0] = np.clip(data[:, :, 0] * 1.12 + 0.08, 0.0, 1.0)
    warmed[:, :, 1] = data[:, :, 1] * 0.92
    warmed[:, :, 2] = data[:, :, 2] * 0.6
    return warmed


def _snowy(data):
    lifted = data + (1.0 - data) * 0.55
    gray = _luminance(lifted)[:, :, None]
    return lifted * 0.35 + gray * 0.65


def _sunset(data):
    weight = 0.2 + 0.45 * _vertical_ramp(*data.shape[:2])
    return data * (1.0 - weight) + _ORANGE * weight


def _watercolor(data):
    return _box3(data) * 0.9 + 0.1


def _rainbow(data):
    h, w = data.shape[:2]
    t = (np.arange(w) + 0.5) / w
    spectrum = np.stack(
        [
            0.5 + 0.5 * np.cos(2.0 * np.pi * t),
            0.5 + 0.5 * np.cos(2.0 * np.pi * t - 2.0 * np.pi / 3.0),
            0.5 + 0.5 * np.cos(2.0 * np.pi * t - 4.0 * np.pi / 3.0),
        ],
        axis=-1,
    )[None, :, :]
    return data * 0.65 + spectrum * 0.35


def _aurora(data):
    weight = 0.45 * (1.0 - _vertical_ramp(*data.shape[:2]))
    return data * (1.0 - weight) + _AURORA * weight


def _mosaic(data):
    return _block_mean(data, MOSAIC_BLOCK)


def _ukiyoe(data):
    levels = 5
    posterized = np.rint(data * (levels - 1)) / (levels - 1)
    edge = _edge_strength(data)[:, :, None]
    return posterized * (1.0 - 0.6 * edge)


def _crayon(data):
    strokes = 1.0 - np.clip(_edge_strength(data) * 4.0, 0.0, 1.0)
    paper = strokes[:, :, None] * _PAPER
    return paper * 0.85 + data * 0.15


def _neutral(data):
    # Smoothstep tone curve; fallback for prompts without a recipe.
    return data * data * (3.0 - 2.0 * data)


_RECIPES = {
    "autumn": _autumn,
    "snowy": _snowy,
    "sunset": _sunset,
    "watercolor art": _watercolor,
    "rainbow": _rainbow,
    "aurora": _aurora,
    "mosaic": _mosaic,
    "ukiyo-e": _ukiyoe,
    "a sketch with crayon": _crayon,
}

# Longest names first so "watercolor art" wins over a hypothetical "art".
_RECIPE_NAMES = sorted(_RECIPES, key=len, reverse=True)


def _recipe_for(prompt_text: str):
    if prompt_text in _RECIPES:
        return _RECIPES[prompt_text]
    for name in _RECIPE_NAMES:
        if name in prompt_text:
            return _RECIPES[name]
    return _neutral


def procedural_stylize(img: ImageBuffer, prompt: str, strength: float) -> ImageBuffer:
    """Apply the prompt's recipe, mixed with the input by `strength`.

    Pure and deterministic; strength 0 returns the input bit-exact.
    Unknown prompts fall back to the neutral tone curve.
    """
    if not 0.0 <= strength <= 1.0:
        raise ValueError(f"strength must be within [0, 1], got {strength}")
    if strength == 0.0:
        return img
    effect = _recipe_for(prompt)(img.data)
    if strength == 1.0:
        out = effect
    else:
        out = (1.0 - strength) * img.data + strength * effect
    return ImageBuffer(np.clip(out, 0.0, 1.0))


class ProceduralBackend:
    """Deterministic stylizer behind the generator-backend interface.

    The rendered prompt is matched back to a recipe by substring, so the
    backend accepts either bare prompts or templated instructions.
    """

    def __init__(self, strength: float = 0.85):
        if not 0.0 <= strength <= 1.0:
            raise ValueError(f"strength must be within [0, 1], got {strength}")
        self.strength = strength
        self.backend_id = f"procedural-{STYLIZER_VERSION}:s={strength!r}"

    def generate(self, img: ImageBuffer, rendered_prompt: str) -> ImageBuffer:
        return procedural_stylize(img, rendered_prompt, self.strength)


class RemoteBackend:
    """HTTP client for an out-of-process image-to-image service.

    Wire format: POST {endpoint}/generate with JSON
    {"image": <base64 PNG>, "prompt": <string>, "strength": <optional float>};
    a 200 response carries {"image": <base64 PNG>}, any other status
    {"error": <message>}. Connection failures, timeouts and 5xx statuses
    count as transient and are retried; other statuses are service-reported
    failures and are not.
    """

    def __init__(self, endpoint: str, timeout: float = 30.0, retries: int = 2,
                 strength: float | None = None):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.strength = strength
        self.backend_id = f"remote:{self.endpoint}"

    def generate(self, img: ImageBuffer, rendered_prompt: str) -> ImageBuffer:
        payload = {
            "image": base64.b64encode(imgcore.encode_png_bytes(img)).decode("ascii"),
            "prompt": rendered_prompt,
        }
        if self.strength is not None:
            payload["strength"] = self.strength

        url = f"{self.endpoint}/generate"
        last_failure = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(min(0.1 * 2 ** (attempt - 1), 2.0))
            try:
                response = requests.post(url, json=payload, timeout=self.timeout)
            except requests.RequestException as exc:
                last_failure = f"{type(exc).__name__}: {exc}"
                continue
            if response.status_code >= 500:
                last_failure = f"HTTP {response.status_code}"
                continue
            return self._decode_response(response)
        raise NetworkError(
            f"{url} failed after {self.retries + 1} attempt(s): {last_failure}"
        )

    def _decode_response(self, response) -> ImageBuffer:
        try:
            body = response.json()
        except ValueError as exc:
            raise ProtocolError(
                f"non-JSON response (HTTP {response.status_code})"
            ) from exc
        if response.status_code != 200:
            message = body.get("error") if isinstance(body, dict) else None
            raise RemoteError(
                f"service error (HTTP {response.status_code}): {message!r}"
            )
        if not isinstance(body, dict) or "image" not in body:
            raise ProtocolError("response JSON lacks an 'image' field")
        try:
            raw = base64.b64decode(body["image"], validate=True)
            return imgcore.decode_image_bytes(raw)
        except (ValueError, DecodeError) as exc:
            raise ProtocolError(f"undecodable response image: {exc}") from exc


def image_digest_bytes(img: ImageBuffer) -> bytes:
    """Canonical raw bytes of an image for cache keys: dimensions header
    plus the 8-bit pixel data."""
    quantized = imgcore.to_uint8(img)
    return (
        img.width.to_bytes(8, "big")
        + img.height.to_bytes(8, "big")
        + quantized.tobytes()
    )


def cache_key(backend_id: str, rendered_prompt: str, img: ImageBuffer) -> str:
    """SHA-256 over the length-prefixed (backend id, prompt, image bytes)."""
    digest = hashlib.sha256()
    for part in (
        backend_id.encode("utf-8"),
        rendered_prompt.encode("utf-8"),
        image_digest_bytes(img),
    ):
        digest.update(len(part).to_bytes(8, "big"))
        digest.update(part)
    return digest.hexdigest()


class CachedBackend:
    """Content-addressed PNG cache in front of any backend.

    Generated images pass through 8-bit PNG storage, so a cache miss
    returns exactly what a later hit will return and warm runs reproduce
    cold runs byte for byte. Writes go through a temp file and an atomic
    rename; the first writer wins and readers only ever see complete
    entries. Hit/miss counters are updated under a lock.
    """

    def __init__(self, backend, cache_dir):
        self.backend = backend
        self.backend_id = backend.backend_id
        self.cache_dir = Path(cache_dir)
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()

    def entry_path(self, key: str) -> Path:
        return self.cache_dir / key[:2] / f"{key}.png"

    def generate(self, img: ImageBuffer, rendered_prompt: str) -> ImageBuffer:
        key = cache_key(self.backend_id, rendered_prompt, img)
        path = self.entry_path(key)
        if path.exists():
            with self._lock:
                self.hits += 1
            return imgcore.load_image(path)

        with self._lock:
            self.misses += 1
        result = self.backend.generate(img, rendered_prompt)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            os.close(fd)
            imgcore.save_image(result, tmp)
            os.replace(tmp, path)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
        return imgcore.load_image(path)

    def stats(self) -> dict:
        with self._lock:
            return {"hits": self.hits, "misses": self.misses}
