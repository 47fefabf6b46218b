"""Image representation and pixel-exact primitives shared by every stage.

Pixels live as float64 in [0, 1]; quantization to 8 bits happens only at
encode time and rounds half to even, so composition arithmetic stays exact
and determinism checks can compare bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError

_ACCEPTED_FORMATS = ("PNG", "JPEG")


@dataclass(frozen=True)
class ImageBuffer:
    """An RGB image, shape (height, width, 3), float64 channels in [0, 1].

    Instances are immutable: the backing array is copied on construction and
    marked read-only, so buffers are safe to share across workers.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected (h, w, 3) array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("pixel values must lie in [0, 1]")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return 3

    def same_dims(self, other: "ImageBuffer") -> bool:
        return self.data.shape == other.data.shape


def to_uint8(img: ImageBuffer) -> np.ndarray:
    """Quantize to 8-bit, rounding half to even (np.rint)."""
    return np.clip(np.rint(img.data * 255.0), 0, 255).astype(np.uint8)


def from_uint8(arr: np.ndarray) -> ImageBuffer:
    """Map 8-bit values v to v/255 in [0, 1]."""
    return ImageBuffer(np.asarray(arr, dtype=np.float64) / 255.0)


def load_image(path) -> ImageBuffer:
    """Decode a PNG or JPEG file into an ImageBuffer.

    Alpha channels are stripped and grayscale is expanded to three channels.

    Raises:
        FileNotFoundError: path does not exist.
        DecodeError: file is corrupt or not PNG/JPEG.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"image not found: {path}")
    try:
        with Image.open(path) as im:
            if im.format not in _ACCEPTED_FORMATS:
                raise DecodeError(f"unsupported format {im.format!r}: {path}")
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.uint8)
    except DecodeError:
        raise
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"cannot decode {path}: {exc}") from exc
    return from_uint8(arr)


def save_image(img: ImageBuffer, path) -> None:
    """Encode to PNG (lossless); decoding the file reproduces the quantized
    values exactly. The parent directory must already exist."""
    path = Path(path)
    if not path.parent.is_dir():
        raise OSError(f"parent directory does not exist: {path.parent}")
    Image.fromarray(to_uint8(img), mode="RGB").save(path, format="PNG")


def encode_png_bytes(img: ImageBuffer) -> bytes:
    """PNG-encode into memory (used for the remote wire format)."""
    import io

    buf = io.BytesIO()
    Image.fromarray(to_uint8(img), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_image_bytes(raw: bytes) -> ImageBuffer:
    """Decode PNG/JPEG bytes from memory."""
    import io

    try:
        with Image.open(io.BytesIO(raw)) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"cannot decode image bytes: {exc}") from exc
    return from_uint8(arr)


def _axis_weights(n_src: int, n_dst: int):
    # Pixel-center alignment: destination index x samples source coordinate
    # (x + 0.5) * n_src / n_dst - 0.5, clamped at the borders.
    coords = (np.arange(n_dst, dtype=np.float64) + 0.5) * (n_src / n_dst) - 0.5
    lo = np.floor(coords)
    frac = coords - lo
    i0 = np.clip(lo, 0, n_src - 1).astype(np.intp)
    i1 = np.clip(lo + 1, 0, n_src - 1).astype(np.intp)
    return i0, i1, frac


def resize_bilinear(img: ImageBuffer, w: int, h: int) -> ImageBuffer:
    """Bilinear resample to (w, h) with pixel-center alignment.

    Resizing to the input dimensions returns the input unchanged (bit-exact).
    """
    if w < 1 or h < 1:
        raise ValueError(f"target dimensions must be >= 1, got {w}x{h}")
    if w == img.width and h == img.height:
        return img
    x0, x1, fx = _axis_weights(img.width, w)
    y0, y1, fy = _axis_weights(img.height, h)
    rows0 = img.data[y0]
    rows1 = img.data[y1]
    fx = fx[None, :, None]
    top = rows0[:, x0] * (1.0 - fx) + rows0[:, x1] * fx
    bot = rows1[:, x0] * (1.0 - fx) + rows1[:, x1] * fx
    fy = fy[:, None, None]
    out = top * (1.0 - fy) + bot * fy
    return ImageBuffer(np.clip(out, 0.0, 1.0))


def cover_crop_resize(img: ImageBuffer, w: int, h: int) -> ImageBuffer:
    """Scale by the smallest factor that covers (w, h), then center-crop.

    Aspect-preserving; never letterboxes. Identity when dimensions already
    match.
    """
    if w < 1 or h < 1:
        raise ValueError(f"target dimensions must be >= 1, got {w}x{h}")
    if w == img.width and h == img.height:
        return img
    scale = max(w / img.width, h / img.height)
    scaled_w = max(w, int(round(img.width * scale)))
    scaled_h = max(h, int(round(img.height * scale)))
    scaled = resize_bilinear(img, scaled_w, scaled_h)
    left = (scaled_w - w) // 2
    top = (scaled_h - h) // 2
    return ImageBuffer(scaled.data[top : top + h, left : left + w, :])


def quantize_like_saved(img: ImageBuffer) -> ImageBuffer:
    """Snap values onto the 8-bit grid, as a save/load round trip would."""
    return from_uint8(to_uint8(img))
