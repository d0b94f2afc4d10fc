"""Small deterministic image primitives shared by the frame pipeline and the
feature extractors. Everything is plain numpy float math so results are
bit-identical across platforms; no codec or imaging library is involved."""

from __future__ import annotations

import numpy as np

__all__ = ["to_grayscale", "resize_bilinear", "rgb_to_hsv255"]

# ITU-R BT.601 luma weights.
_LUMA = np.array([0.299, 0.587, 0.114])


def to_grayscale(pixels: np.ndarray) -> np.ndarray:
    """RGB uint8 (H, W, 3) -> luma uint8 (H, W)."""
    gray = pixels.astype(np.float64) @ _LUMA
    return np.clip(np.rint(gray), 0, 255).astype(np.uint8)


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resampling with half-pixel-centered source coordinates.

    Accepts (H, W) or (H, W, C); returns float64 of the requested size.
    """
    arr = np.asarray(img, dtype=np.float64)
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[:, :, None]
    h, w, _ = arr.shape
    if (h, w) == (out_h, out_w):
        out = arr.copy()
        return out[:, :, 0] if squeeze else out

    ys = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0, h - 1)
    xs = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0, w - 1)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0)[:, None, None]
    wx = (xs - x0)[None, :, None]

    tl = arr[np.ix_(y0, x0)]
    tr = arr[np.ix_(y0, x1)]
    bl = arr[np.ix_(y1, x0)]
    br = arr[np.ix_(y1, x1)]
    out = tl * (1 - wy) * (1 - wx) + tr * (1 - wy) * wx + bl * wy * (1 - wx) + br * wy * wx
    return out[:, :, 0] if squeeze else out


def rgb_to_hsv255(pixels: np.ndarray) -> np.ndarray:
    """RGB uint8 (H, W, 3) -> HSV float64 (H, W, 3), every channel in [0, 255]."""
    arr = pixels.astype(np.float64) / 255.0
    r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
    mx = arr.max(axis=2)
    mn = arr.min(axis=2)
    diff = mx - mn

    v = mx
    s = np.where(mx > 0, diff / np.where(mx > 0, mx, 1.0), 0.0)

    h = np.zeros_like(mx)
    chroma = diff > 0
    rm = chroma & (mx == r)
    gm = chroma & ~rm & (mx == g)
    bm = chroma & ~rm & ~gm
    safe = np.where(chroma, diff, 1.0)
    h = np.where(rm, ((g - b) / safe) % 6.0, h)
    h = np.where(gm, (b - r) / safe + 2.0, h)
    h = np.where(bm, (r - g) / safe + 4.0, h)
    return np.stack([h / 6.0, s, v], axis=2) * 255.0
