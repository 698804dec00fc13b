"""Raster-image to density-field pipeline, noise perturbation, and PGM I/O.

The preprocessing chain turns a stained-tissue photograph into a normalized
volumetric density on the simulation grid: grayscale conversion, Gaussian
smoothing, median despeckling, a threshold/morphology mask, masked
invert-normalization ``v = 1 - g/255``, and strided downsampling.  The mask
keeps pixels strictly above the threshold level (the light background of a
stained section) and zeroes the dark feature pixels, so after inversion the
extracted features carry density 1 and the kept background grades toward 0.
Every stage is a pure function of its inputs; identical inputs produce
bit-identical fields, which a golden-digest test freezes.

All filters use symmetric (edge-including) border reflection.  Grayscale and
PGM quantization round half up, stated explicitly so exported images are
bit-exact across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import ndimage

__all__ = [
    "RasterImage",
    "PreprocessParams",
    "preprocess",
    "perturb",
    "gaussian_blur",
    "otsu_threshold",
    "export_pgm",
    "import_raster",
]


@dataclass
class RasterImage:
    """8-bit raster: grayscale ``(height, width)`` or RGB ``(height, width, 3)``."""

    width: int
    height: int
    channels: int
    data: np.ndarray

    def __post_init__(self):
        expected = (self.height, self.width) if self.channels == 1 else (self.height, self.width, self.channels)
        if self.channels not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        if self.data.shape != expected:
            raise ValueError(f"data shape {self.data.shape} does not match {expected}")
        if self.data.dtype != np.uint8:
            raise ValueError("raster data must be uint8")

    @classmethod
    def from_array(cls, data: np.ndarray) -> "RasterImage":
        data = np.asarray(data, dtype=np.uint8)
        if data.ndim == 2:
            return cls(width=data.shape[1], height=data.shape[0], channels=1, data=data)
        if data.ndim == 3 and data.shape[2] == 3:
            return cls(width=data.shape[1], height=data.shape[0], channels=3, data=data)
        raise ValueError(f"unsupported raster shape {data.shape}")


@dataclass
class PreprocessParams:
    """Knobs of the preprocessing chain.

    ``threshold`` is an explicit gray level, or None to pick one with Otsu's
    method.  Kernel sizes must be odd; ``out_nx``/``out_ny`` must divide the
    input dimensions.
    """

    out_nx: int
    out_ny: int
    threshold: Union[float, None] = None
    gaussian_k: int = 5
    gaussian_s: float = 1.0
    median_k: int = 3
    open_radius: int = 1


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5)


def to_grayscale(img: RasterImage) -> np.ndarray:
    """Luma conversion ``round(0.299 R + 0.587 G + 0.114 B)``, uint8."""
    if img.channels == 1:
        return img.data.copy()
    rgb = img.data.astype(float)
    g = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return _round_half_up(g).astype(np.uint8)


def _gaussian_kernel(k: int, s: float) -> np.ndarray:
    if k % 2 == 0 or k < 1:
        raise ValueError(f"kernel size must be odd and positive, got {k}")
    if k == 1:
        return np.ones(1)
    if s <= 0:
        raise ValueError("gaussian std must be positive for k > 1")
    offsets = np.arange(k) - (k - 1) / 2
    w = np.exp(-0.5 * (offsets / s) ** 2)
    return w / w.sum()


def gaussian_blur(a: np.ndarray, k: int, s: float) -> np.ndarray:
    """Separable Gaussian filter with symmetric border reflection; k=1 is identity."""
    w = _gaussian_kernel(k, s)
    if k == 1:
        return a.astype(float, copy=True)
    r = k // 2
    out = a.astype(float)
    for axis in (0, 1):
        padded = np.pad(out, [(r, r) if ax == axis else (0, 0) for ax in range(out.ndim)],
                        mode="symmetric")
        acc = np.zeros_like(out)
        for i, wi in enumerate(w):
            sl = [slice(None)] * out.ndim
            sl[axis] = slice(i, i + out.shape[axis])
            acc += wi * padded[tuple(sl)]
        out = acc
    return out


def otsu_threshold(gray: np.ndarray) -> int:
    """Gray level maximizing between-class variance of the 8-bit histogram."""
    hist = np.bincount(gray.ravel(), minlength=256).astype(float)
    total = hist.sum()
    levels = np.arange(256, dtype=float)
    w0 = np.cumsum(hist)
    w1 = total - w0
    cum = np.cumsum(hist * levels)
    mean_total = cum[-1] / total
    with np.errstate(divide="ignore", invalid="ignore"):
        m0 = cum / w0
        m1 = (cum[-1] - cum) / w1
        var_between = w0 * w1 * (m0 - m1) ** 2
    var_between[~np.isfinite(var_between)] = -1.0
    return int(np.argmax(var_between))


def preprocess(img: RasterImage, params: PreprocessParams) -> np.ndarray:
    """Run the full chain and return a density field of shape (out_ny, out_nx)."""
    if params.median_k % 2 == 0 or params.median_k < 1:
        raise ValueError(f"median kernel must be odd and positive, got {params.median_k}")
    if img.width % params.out_nx or img.height % params.out_ny:
        raise ValueError(
            f"output size {params.out_nx}x{params.out_ny} must divide image "
            f"size {img.width}x{img.height}"
        )

    gray = to_grayscale(img).astype(float)
    gray = gaussian_blur(gray, params.gaussian_k, params.gaussian_s)
    if params.median_k > 1:
        gray = ndimage.median_filter(gray, size=params.median_k, mode="reflect")

    level = params.threshold if params.threshold is not None else otsu_threshold(
        np.clip(_round_half_up(gray), 0, 255).astype(np.uint8))
    mask = gray > level
    if params.open_radius > 0:
        structure = np.ones((2 * params.open_radius + 1,) * 2, dtype=bool)
        mask = ndimage.binary_erosion(mask, structure=structure, border_value=1)
        mask = ndimage.binary_dilation(mask, structure=structure, border_value=0)

    density = 1.0 - np.where(mask, gray, 0.0) / 255.0
    sx = img.width // params.out_nx
    sy = img.height // params.out_ny
    return density[::sy, ::sx].copy()


def perturb(field: np.ndarray, k: int, s: float, n: int = 1) -> np.ndarray:
    """Noise-perturbation operator: n-fold downsampling followed by Gaussian smoothing."""
    if n < 1 or field.shape[0] % n or field.shape[1] % n:
        raise ValueError(f"downsample factor {n} must divide field shape {field.shape}")
    down = field[::n, ::n]
    return gaussian_blur(down, k, s)


def export_pgm(field: np.ndarray, path) -> None:
    """Write a binary PGM (P5, maxval 255); values are clamped to [0, 1]."""
    pixels = _round_half_up(255.0 * np.clip(field, 0.0, 1.0)).astype(np.uint8)
    h, w = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def _read_header_tokens(data: bytes, count: int) -> tuple[list[int], int]:
    tokens = []
    pos = 0
    while len(tokens) < count:
        if pos >= len(data):
            raise ValueError("truncated raster header")
        c = data[pos:pos + 1]
        if c == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise ValueError("unterminated comment in raster header")
            pos = nl + 1
        elif c.isspace():
            pos += 1
        else:
            end = pos
            while end < len(data) and not data[end:end + 1].isspace():
                end += 1
            tokens.append(int(data[pos:end]))
            pos = end
    return tokens, pos + 1  # single whitespace after maxval


def import_raster(path) -> RasterImage:
    """Read a binary PGM (P5) or PPM (P6) with maxval up to 255."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic = data[:2]
    if magic == b"P5":
        channels = 1
    elif magic == b"P6":
        channels = 3
    else:
        raise ValueError(f"unsupported raster magic {magic!r}")
    (w, h, maxval), offset = _read_header_tokens(data[2:], 3)
    offset += 2
    if maxval <= 0 or maxval > 255:
        raise ValueError(f"unsupported maxval {maxval}")
    count = w * h * channels
    raw = data[offset:offset + count]
    if len(raw) != count:
        raise ValueError("truncated raster payload")
    arr = np.frombuffer(raw, dtype=np.uint8).copy()
    arr = arr.reshape((h, w) if channels == 1 else (h, w, 3))
    return RasterImage(width=w, height=h, channels=channels, data=arr)
