"""Image, mask and trimap rasters plus the metric/codec plumbing built on them.

Images hold float RGB in [0, 255] (the range the smoothness calibration
assumes); masks are boolean grids; trimaps carry the four GrabCut labels.
All types are immutable after construction.
"""
from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    DegeneratePolygon,
    DimensionMismatch,
    MalformedImage,
    RunSumMismatch,
    UnsupportedFormat,
)

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


class TrimapLabel(IntEnum):
    DEFINITE_BG = 0
    DEFINITE_FG = 1
    PROBABLE_BG = 2
    PROBABLE_FG = 3


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RasterImage:
    """RGB pixel grid; channels are reals in [0, 255]."""

    width: int
    height: int
    pixels: np.ndarray = field(repr=False)  # (h, w, 3) float64

    def __post_init__(self):
        px = np.ascontiguousarray(self.pixels, dtype=np.float64)
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be >= 1")
        if px.shape != (self.height, self.width, 3):
            raise DimensionMismatch(
                f"pixel block {px.shape} does not match {self.width}x{self.height}"
            )
        if px.min() < 0.0 or px.max() > 255.0:
            raise ValueError("channel values must lie in [0, 255]")
        object.__setattr__(self, "pixels", _freeze(px))

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "RasterImage":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim == 2:
            arr = np.repeat(arr[:, :, None], 3, axis=2)
        h, w = arr.shape[:2]
        return cls(width=w, height=h, pixels=arr)


@dataclass(frozen=True)
class BinaryMask:
    """Row-major boolean occupancy grid."""

    width: int
    height: int
    bits: np.ndarray = field(repr=False)  # (h, w) bool

    def __post_init__(self):
        b = np.ascontiguousarray(self.bits, dtype=bool)
        if b.shape != (self.height, self.width):
            raise DimensionMismatch(
                f"bit block {b.shape} does not match {self.width}x{self.height}"
            )
        object.__setattr__(self, "bits", _freeze(b))

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "BinaryMask":
        arr = np.asarray(arr, dtype=bool)
        return cls(width=arr.shape[1], height=arr.shape[0], bits=arr)

    def count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class Trimap:
    """Per-pixel prior labels; the Definite labels are hard cut constraints."""

    width: int
    height: int
    labels: np.ndarray = field(repr=False)  # (h, w) uint8 of TrimapLabel

    def __post_init__(self):
        lab = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if lab.shape != (self.height, self.width):
            raise DimensionMismatch(
                f"label block {lab.shape} does not match {self.width}x{self.height}"
            )
        if lab.max(initial=0) > 3:
            raise ValueError("trimap labels must be in {0,1,2,3}")
        object.__setattr__(self, "labels", _freeze(lab))

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "Trimap":
        arr = np.asarray(arr, dtype=np.uint8)
        return cls(width=arr.shape[1], height=arr.shape[0], labels=arr)


@dataclass(frozen=True)
class RunLength:
    """Alternating zero/one run counts, row-major, zeros-run first."""

    width: int
    height: int
    runs: tuple[int, ...]

    def __post_init__(self):
        runs = tuple(int(r) for r in self.runs)
        if any(r < 0 for r in runs):
            raise ValueError("run counts must be non-negative")
        object.__setattr__(self, "runs", runs)

    def to_token(self) -> str:
        return f"{self.width},{self.height}:" + ",".join(str(r) for r in self.runs)

    @classmethod
    def from_token(cls, token: str) -> "RunLength":
        m = re.fullmatch(r"(\d+),(\d+):(\d+(?:,\d+)*)", token.strip())
        if not m:
            raise ValueError(f"bad run-length token: {token[:40]!r}")
        w, h = int(m.group(1)), int(m.group(2))
        runs = tuple(int(r) for r in m.group(3).split(","))
        return cls(width=w, height=h, runs=runs)


# ---------------------------------------------------------------------------
# decoding / encoding

_WS = re.compile(rb"\s")


def _parse_ppm(data: bytes) -> RasterImage:
    # P6 header: magic, width, height, maxval, one whitespace, raw samples.
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise MalformedImage("unterminated PPM comment")
            pos = nl + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise MalformedImage("truncated PPM header")
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        w, h, maxval = (int(f) for f in fields)
    except ValueError as e:
        raise MalformedImage(f"non-numeric PPM header field: {e}") from None
    if w < 1 or h < 1:
        raise MalformedImage("PPM dimensions must be positive")
    if maxval > 255:
        raise UnsupportedFormat(f"16-bit PPM (maxval {maxval}) not supported")
    if maxval < 1:
        raise MalformedImage("PPM maxval must be >= 1")
    body = data[pos : pos + w * h * 3]
    if len(body) != w * h * 3:
        raise MalformedImage("PPM pixel data truncated")
    arr = np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3).astype(np.float64)
    return RasterImage(width=w, height=h, pixels=arr)


def decode_image(data: bytes) -> RasterImage:
    """Decode 8-bit PNG (RGB/RGBA/gray/palette) or binary P6 PPM bytes.

    Grayscale is replicated to three channels; alpha is dropped.
    """
    if data[:2] == b"P6":
        return _parse_ppm(data)
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except UnidentifiedImageError:
        raise MalformedImage("bytes are not a decodable image") from None
    except Exception as e:  # truncated stream, bad chunks
        raise MalformedImage(f"image decode failed: {e}") from None
    if img.format not in ("PNG", "PPM"):
        raise UnsupportedFormat(f"unsupported container {img.format!r}")
    if img.mode in ("I", "I;16", "I;16B", "I;16L", "F"):
        raise UnsupportedFormat(f"unsupported sample depth (mode {img.mode!r})")
    if img.mode not in ("L", "RGB", "RGBA", "P", "LA", "1"):
        raise UnsupportedFormat(f"unsupported pixel mode {img.mode!r}")
    if img.mode != "RGB":
        img = img.convert("RGB")
    arr = np.asarray(img, dtype=np.float64)
    return RasterImage(width=img.width, height=img.height, pixels=arr)


def encode_ppm(image: RasterImage) -> bytes:
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    body = np.rint(image.pixels).astype(np.uint8).tobytes()
    return header + body


def mask_to_png(mask: BinaryMask) -> bytes:
    """8-bit grayscale PNG, foreground 255, background 0."""
    img = Image.fromarray(mask.bits.astype(np.uint8) * 255, mode="L")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def mask_from_png(data: bytes) -> BinaryMask:
    img = decode_image(data)
    return BinaryMask.from_array(img.pixels[:, :, 0] >= 128)


# ---------------------------------------------------------------------------
# rasterization and metrics


def rasterize_polygon(
    vertices: list[tuple[float, float]], width: int, height: int
) -> BinaryMask:
    """Even-odd scanline fill sampled at pixel centers (x+0.5, y+0.5)."""
    if len(vertices) < 3:
        raise DegeneratePolygon(f"need >= 3 vertices, got {len(vertices)}")
    vx = np.array([v[0] for v in vertices], dtype=np.float64)
    vy = np.array([v[1] for v in vertices], dtype=np.float64)
    if not (np.isfinite(vx).all() and np.isfinite(vy).all()):
        raise DegeneratePolygon("vertices must be finite")

    bits = np.zeros((height, width), dtype=bool)
    x1, y1 = vx, vy
    x2, y2 = np.roll(vx, -1), np.roll(vy, -1)
    y_lo = max(0, int(math.floor(vy.min() - 0.5)))
    y_hi = min(height, int(math.ceil(vy.max() + 0.5)))
    for y in range(y_lo, y_hi):
        yc = y + 0.5
        # half-open crossing rule avoids double counting at shared vertices
        hit = ((y1 <= yc) & (yc < y2)) | ((y2 <= yc) & (yc < y1))
        if not hit.any():
            continue
        t = (yc - y1[hit]) / (y2[hit] - y1[hit])
        xs = np.sort(x1[hit] + t * (x2[hit] - x1[hit]))
        for i in range(0, len(xs) - 1, 2):
            a = int(math.ceil(xs[i] - 0.5))
            b = int(math.ceil(xs[i + 1] - 0.5))
            if b > 0 and a < width:
                bits[y, max(a, 0) : min(b, width)] = True
    return BinaryMask(width=width, height=height, bits=bits)


def iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection over union; two empty masks score 1.0."""
    if (a.width, a.height) != (b.width, b.height):
        raise DimensionMismatch(
            f"{a.width}x{a.height} vs {b.width}x{b.height}"
        )
    inter = int(np.logical_and(a.bits, b.bits).sum())
    union = int(np.logical_or(a.bits, b.bits).sum())
    if union == 0:
        return 1.0
    return inter / union


def rle_encode(mask: BinaryMask) -> RunLength:
    flat = mask.bits.reshape(-1)
    n = flat.size
    if n == 0:
        return RunLength(mask.width, mask.height, ())
    boundaries = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [n]))
    lengths = (ends - starts).tolist()
    runs = lengths if not flat[0] else [0] + lengths
    return RunLength(mask.width, mask.height, tuple(runs))


def rle_decode(rle: RunLength) -> BinaryMask:
    total = sum(rle.runs)
    if total != rle.width * rle.height:
        raise RunSumMismatch(
            f"runs sum to {total}, expected {rle.width * rle.height}"
        )
    flat = np.zeros(total, dtype=bool)
    pos = 0
    for i, r in enumerate(rle.runs):
        if i % 2 == 1:
            flat[pos : pos + r] = True
        pos += r
    return BinaryMask(rle.width, rle.height, flat.reshape(rle.height, rle.width))


def to_grayscale(image: RasterImage) -> np.ndarray:
    """Luma map 0.299 R + 0.587 G + 0.114 B, shape (h, w)."""
    wr, wg, wb = LUMA_WEIGHTS
    px = image.pixels
    return wr * px[:, :, 0] + wg * px[:, :, 1] + wb * px[:, :, 2]
