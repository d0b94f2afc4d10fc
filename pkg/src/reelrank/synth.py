"""Deterministic synthetic trailer clips.

Used by the test suite and the demo data generator: real trailers cannot ship
with the repo, so scenes are built from banded intensity patterns whose
histogram and cosine behaviour is controllable analytically. Everything is
seeded; the same arguments always produce the same pixels.
"""

from __future__ import annotations

from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

DEFAULT_HEIGHT = 72
DEFAULT_WIDTH = 96


def banded_frame(
    height: int = DEFAULT_HEIGHT,
    width: int = DEFAULT_WIDTH,
    band_start: float = 0.2,
    band_height: float = 0.3,
    band_value: int = 200,
    bg_value: int = 40,
) -> np.ndarray:
    """Gray background with one bright horizontal band; returns (H, W, 3) uint8.

    Bands at disjoint positions give frames with low pixel-cosine similarity;
    the two-level histogram makes cut distances easy to reason about.
    """
    frame = np.full((height, width), bg_value, dtype=np.uint8)
    top = int(round(band_start * height))
    rows = max(1, int(round(band_height * height)))
    frame[top:top + rows, :] = band_value
    return np.repeat(frame[:, :, None], 3, axis=2)


def flat_frame(
    value: int, height: int = DEFAULT_HEIGHT, width: int = DEFAULT_WIDTH
) -> np.ndarray:
    return np.full((height, width, 3), value, dtype=np.uint8)


def dither(frame: np.ndarray, rng: np.random.Generator,
           fraction: float = 0.02, delta: int = 5) -> np.ndarray:
    """Copy of the frame with a small random pixel subset shifted by delta."""
    out = frame.copy()
    h, w = out.shape[:2]
    n = int(fraction * h * w)
    ys = rng.integers(0, h, size=n)
    xs = rng.integers(0, w, size=n)
    bumped = out[ys, xs].astype(np.int16) + delta
    out[ys, xs] = np.clip(bumped, 0, 255).astype(np.uint8)
    return out


def box_blur(frame: np.ndarray, radius: int = 8) -> np.ndarray:
    """Separable box blur; large radii drive the Laplacian variance to ~0."""
    arr = frame.astype(np.float64)
    size = 2 * radius + 1
    kernel = np.ones(size) / size
    for axis in (0, 1):
        padded = np.concatenate(
            [
                np.repeat(arr.take([0], axis=axis), radius, axis=axis),
                arr,
                np.repeat(arr.take([-1], axis=axis), radius, axis=axis),
            ],
            axis=axis,
        )
        arr = np.apply_along_axis(
            lambda m: np.convolve(m, kernel, mode="valid"), axis, padded
        )
    return np.clip(np.rint(arr), 0, 255).astype(np.uint8)


def scene_frames(
    base: np.ndarray, count: int, rng: np.random.Generator,
    dither_fraction: float = 0.02,
) -> List[np.ndarray]:
    return [dither(base, rng, fraction=dither_fraction) for _ in range(count)]


# Band positions cycle with period 3, so scenes one or two cuts apart never
# overlap spatially (the dedup cosine stays low even when a scene between
# them was dropped). Backgrounds cycle with period 5: distinct histogram bins
# scene to scene, all above the dark flat-frame bound and dim enough to keep
# cross-scene pixel cosine low.
_POSITION_CYCLE = (0.05, 0.33, 0.61)
_BG_CYCLE = (34, 38, 42, 46, 50)


def trailer_clip(
    seed: int,
    n_scenes: int = 5,
    frames_per_scene: int = 12,
    height: int = DEFAULT_HEIGHT,
    width: int = DEFAULT_WIDTH,
    shifted_scene_every: Optional[int] = None,
) -> List[np.ndarray]:
    """A clip of hard-cut scenes.

    Every scene changes both its intensity bins (so the histogram scan sees a
    cut) and its band position (so the dedup cosine stays low). When
    ``shifted_scene_every`` is set, every n-th scene is instead a +30
    intensity shift of the previous one: its histogram still moves entirely
    but its pixel cosine stays near 1, so the dedup stage removes it.
    """
    rng = np.random.default_rng(seed)
    frames: List[np.ndarray] = []
    previous_base: Optional[np.ndarray] = None
    for scene in range(n_scenes):
        if (
            shifted_scene_every
            and previous_base is not None
            and scene % shifted_scene_every == 0
        ):
            base = np.clip(previous_base.astype(np.int16) + 30, 0, 255).astype(np.uint8)
        else:
            base = banded_frame(
                height, width,
                band_start=_POSITION_CYCLE[scene % len(_POSITION_CYCLE)],
                band_height=0.18,
                band_value=150 + 4 * scene,
                bg_value=_BG_CYCLE[scene % len(_BG_CYCLE)],
            )
        frames.extend(scene_frames(base, frames_per_scene, rng))
        previous_base = base
    return frames


def write_frames(frames: Sequence[np.ndarray], directory) -> Path:
    from PIL import Image

    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        Image.fromarray(frame).save(out / f"{i:05d}.png")
    return out
