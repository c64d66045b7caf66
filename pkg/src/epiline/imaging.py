"""Grayscale rasters, line clipping and intensity profiles along lines."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import MissingFile, OutOfBounds, ParseError
from .geometry import ImageBounds

DEFAULT_SAMPLES = 256
DEFAULT_MIN_TEXTURE = 4.0
# ITU-R BT.601 luma
LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class GrayImage:
    """Row-major intensities in ``[0, 255]``; ``pixels[y, x]``."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.array(self.pixels, dtype=np.float64, copy=True)
        if px.ndim != 2 or px.shape[0] < 2 or px.shape[1] < 2:
            raise ValueError(f"expected a 2D image of at least 2x2, got shape {px.shape}")
        if not np.all(np.isfinite(px)) or px.min() < 0.0 or px.max() > 255.0:
            raise ValueError("intensities must be finite and within [0, 255]")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def bounds(self) -> ImageBounds:
        return ImageBounds(self.width, self.height)


@dataclass(frozen=True)
class LineSegment:
    a: np.ndarray
    b: np.ndarray
    parent: np.ndarray

    @property
    def length(self) -> float:
        return float(np.hypot(*(self.b - self.a)))


@dataclass(frozen=True)
class IntensityProfile:
    samples: np.ndarray
    points: np.ndarray
    spacing: float

    @property
    def n(self) -> int:
        return len(self.samples)


# ---------------------------------------------------------------------------
# I/O


def load_image(path) -> GrayImage:
    """Read an 8-bit grayscale or RGB PNG / binary PGM into a ``GrayImage``."""
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"image not found: {path}")
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("L", "P", "1"):
                data = np.asarray(im.convert("L"), dtype=np.float64)
            elif mode in ("RGB", "RGBA", "LA"):
                rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
                data = rgb @ LUMA
            elif mode.startswith("I"):
                raw = np.asarray(im, dtype=np.float64)
                if raw.max() > 255:
                    raise ParseError(path, 0, f"only 8-bit images are supported (mode {mode})")
                data = raw
            else:
                raise ParseError(path, 0, f"unsupported image mode {mode}")
    except (OSError, SyntaxError) as exc:
        raise ParseError(path, 0, f"cannot decode image: {exc}") from exc
    return GrayImage(np.clip(data, 0.0, 255.0))


def to_uint8(img: GrayImage) -> np.ndarray:
    return np.clip(np.rint(img.pixels), 0, 255).astype(np.uint8)


def save_png(img: GrayImage, path) -> None:
    Image.fromarray(to_uint8(img), mode="L").save(path, format="PNG")


# ---------------------------------------------------------------------------
# Clipping


def clip_lines(lines, bounds: ImageBounds, min_length=2.0):
    """Vectorized chord computation for an ``(m, 3)`` array of lines.

    Returns ``(a, b, ok)``: endpoints ``(m, 2)`` ordered so that ``a`` has the
    smaller x (ties: smaller y) and a mask of lines whose chord inside
    ``[0, W-1] x [0, H-1]`` is at least ``min_length``.
    """
    lines = np.atleast_2d(np.asarray(lines, dtype=float))
    m = len(lines)
    xmax, ymax = bounds.width - 1.0, bounds.height - 1.0
    la, lb, lc = lines[:, 0], lines[:, 1], lines[:, 2]
    eps = 1e-9 * max(xmax, ymax)
    cand = np.full((m, 4, 2), np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        for k, x in enumerate((0.0, xmax)):
            y = -(la * x + lc) / lb
            good = (lb != 0) & (y >= -eps) & (y <= ymax + eps)
            cand[good, k] = np.column_stack([np.full(good.sum(), x), np.clip(y[good], 0.0, ymax)])
        for k, y in enumerate((0.0, ymax)):
            x = -(lb * y + lc) / la
            good = (la != 0) & (x >= -eps) & (x <= xmax + eps)
            cand[good, 2 + k] = np.column_stack([np.clip(x[good], 0.0, xmax), np.full(good.sum(), y)])
    # farthest pair among up to four border hits
    d = np.linalg.norm(cand[:, :, None, :] - cand[:, None, :, :], axis=3)
    d = np.where(np.isnan(d), -1.0, d)
    flat = d.reshape(m, 16).argmax(axis=1)
    i, j = flat // 4, flat % 4
    rows = np.arange(m)
    a, b = cand[rows, i], cand[rows, j]
    length = d[rows, i, j]
    ok = length >= min_length
    swap = (b[:, 0] < a[:, 0]) | ((b[:, 0] == a[:, 0]) & (b[:, 1] < a[:, 1]))
    a2 = np.where(swap[:, None], b, a)
    b2 = np.where(swap[:, None], a, b)
    return a2, b2, ok


def clip_line(l, bounds: ImageBounds, min_length=2.0) -> LineSegment | None:
    l = np.asarray(l, dtype=float)
    a, b, ok = clip_lines(l[None, :], bounds, min_length)
    if not ok[0]:
        return None
    return LineSegment(a[0], b[0], l)


# ---------------------------------------------------------------------------
# Sampling


def bilinear_many(img: GrayImage, xy) -> np.ndarray:
    """Bilinear intensities at ``(..., 2)`` points assumed inside the image."""
    px = img.pixels
    xy = np.asarray(xy, dtype=float)
    x = np.clip(xy[..., 0], 0.0, img.width - 1.0)
    y = np.clip(xy[..., 1], 0.0, img.height - 1.0)
    x0 = np.minimum(np.floor(x).astype(np.intp), img.width - 2)
    y0 = np.minimum(np.floor(y).astype(np.intp), img.height - 2)
    u, v = x - x0, y - y0
    return (
        px[y0, x0] * (1 - u) * (1 - v)
        + px[y0, x0 + 1] * u * (1 - v)
        + px[y0 + 1, x0] * (1 - u) * v
        + px[y0 + 1, x0 + 1] * u * v
    )


def bilinear(img: GrayImage, p) -> float:
    x, y = float(p[0]), float(p[1])
    tol = 1e-9
    if not (-tol <= x <= img.width - 1 + tol and -tol <= y <= img.height - 1 + tol):
        raise OutOfBounds(f"point ({x}, {y}) outside {img.width}x{img.height} image")
    return float(bilinear_many(img, np.array([x, y])))


def sample_segments(img: GrayImage, a, b, n=DEFAULT_SAMPLES) -> np.ndarray:
    """``(m, n)`` profiles for the segments ``a[k] -> b[k]``."""
    t = np.linspace(0.0, 1.0, n)
    pts = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
    return bilinear_many(img, pts)


def resample(img: GrayImage, seg: LineSegment, n=DEFAULT_SAMPLES) -> IntensityProfile:
    if n < 2:
        raise ValueError("a profile needs at least two samples")
    t = np.linspace(0.0, 1.0, n)
    pts = seg.a[None, :] + t[:, None] * (seg.b - seg.a)[None, :]
    return IntensityProfile(bilinear_many(img, pts), pts, seg.length / (n - 1))


def texture_score(prof) -> float:
    """Population standard deviation of the profile's intensities."""
    samples = prof.samples if isinstance(prof, IntensityProfile) else np.asarray(prof)
    return float(np.std(samples))
