"""DCT sparsification, best s-term approximation, PGM I/O and PSNR."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from scipy.fft import dctn, idctn

from .errors import DimensionError, FormatError

PEAK = 255.0
MIN_SIDE, MAX_SIDE = 16, 4096


def dct2(x: np.ndarray) -> np.ndarray:
    """Orthonormal type-II 2-D DCT."""
    return dctn(np.asarray(x, dtype=np.float64), type=2, norm="ortho")


def idct2(coeffs: np.ndarray) -> np.ndarray:
    return idctn(np.asarray(coeffs, dtype=np.float64), type=2, norm="ortho")


def best_s_term(coeffs: np.ndarray, s: int) -> np.ndarray:
    """Keep the ``s`` largest-magnitude entries and zero the rest.

    Equal magnitudes are ranked by column-major position.
    """
    c = np.asarray(coeffs, dtype=np.float64)
    if not 0 <= s <= c.size:
        raise ValueError(f"s must lie in 0..{c.size}")
    flat = c.ravel(order="F")
    keep = np.argsort(-np.abs(flat), kind="stable")[:s]
    out = np.zeros_like(flat)
    out[keep] = flat[keep]
    return out.reshape(c.shape, order="F")


def psnr(reference: np.ndarray, test: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB against a peak of 255; ``inf`` when identical."""
    ref = np.asarray(reference, dtype=np.float64)
    tst = np.asarray(test, dtype=np.float64)
    if ref.shape != tst.shape:
        raise DimensionError(f"cannot compare images of shapes {ref.shape} and {tst.shape}")
    mse = float(np.mean((ref - tst) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(PEAK * PEAK / mse)


def to_pixels(x: np.ndarray) -> np.ndarray:
    """Clip to [0, 255] and round to 8-bit; used only when exporting."""
    return np.clip(np.rint(x), 0, 255).astype(np.uint8)


def check_image_shape(shape) -> None:
    if len(shape) != 2 or not all(MIN_SIDE <= n <= MAX_SIDE for n in shape):
        raise DimensionError(f"image sides must lie in {MIN_SIDE}..{MAX_SIDE}, got {tuple(shape)}")


def read_pgm(path) -> np.ndarray:
    """Read an 8-bit binary (P5) PGM as a float array."""
    path = Path(path)
    try:
        with path.open("rb") as fh:
            magic = fh.read(2)
        if magic != b"P5":
            raise FormatError(f"{path}: not a binary PGM (P5) file")
        with PILImage.open(path) as im:
            if im.mode != "L":
                raise FormatError(f"{path}: expected an 8-bit grayscale PGM, got mode {im.mode}")
            pixels = np.asarray(im, dtype=np.float64)
    except (OSError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{path}: {exc}") from None
    check_image_shape(pixels.shape)
    return pixels


def write_pgm(path, pixels: np.ndarray) -> None:
    arr = np.asarray(pixels)
    if arr.dtype != np.uint8:
        arr = to_pixels(arr)
    check_image_shape(arr.shape)
    PILImage.fromarray(arr, mode="L").save(Path(path), format="PPM")


def test_image(M: int = 128, N: int = 128) -> np.ndarray:
    """Deterministic synthetic test picture: smooth shading plus sharp-edged shapes.

    Edges are a fraction of a pixel wide so the DCT spectrum decays like
    that of a natural photograph rather than a cartoon.
    """
    r = np.linspace(0.0, 1.0, M)[:, None]
    c = np.linspace(0.0, 1.0, N)[None, :]
    img = 60.0 + 90.0 * r + 50.0 * c * c + 20.0 * np.sin(2.0 * np.pi * (0.7 * r + 0.4 * c))

    width = 0.15 / max(M, N)

    def soft_mask(dist):
        return 0.5 * (1.0 - np.tanh(dist / width))

    disc = np.hypot(r - 0.32, c - 0.30) - 0.17
    img += 70.0 * soft_mask(disc)
    square = np.maximum(np.abs(r - 0.70), np.abs(c - 0.68)) - 0.15
    img -= 60.0 * soft_mask(square)
    ring = np.abs(np.hypot(r - 0.72, c - 0.25) - 0.12) - 0.025
    img += 45.0 * soft_mask(ring)
    return np.clip(img, 0.0, 255.0)
