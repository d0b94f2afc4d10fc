"""Keyframe extraction: turn a trailer (video file or directory of frames)
into a filtered set of unique keyframes.

Stage order in the full pipeline: letterbox crop -> flat-frame filter -> blur
filter -> optional transition trim -> histogram keyframe scan -> cosine dedup.
Junk is removed before the expensive scans. Every stage is deterministic;
identical inputs yield byte-identical outputs.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .errors import BackendError, DataError
from .imageops import resize_bilinear, rgb_to_hsv255, to_grayscale

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")

DEFAULT_HIST_THRESHOLD = 0.85
DEFAULT_DEDUP_THRESHOLD = 0.9
DEFAULT_BLUR_THRESHOLD = 2.0
DEFAULT_FLAT_DARK = 33
DEFAULT_FLAT_BRIGHT = 215
DEFAULT_FLAT_FRACTION = 0.80
DEFAULT_BAR_INTENSITY = 10
DEFAULT_CONTENT_THRESHOLD = 27.0
DEDUP_PATCH = 64  # dedup compares flattened grayscale downsampled to 64x64

MIN_CROP_DIM = 16  # letterbox crop never leaves fewer pixels than this per axis


@dataclass
class Frame:
    """One decoded frame: source position plus an RGB pixel grid."""

    index: int
    pixels: np.ndarray
    _gray: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValueError("frame pixels must be (H, W, 3)")
        if self.pixels.shape[0] < 1 or self.pixels.shape[1] < 1:
            raise ValueError("frame must have positive dimensions")

    @property
    def gray(self) -> np.ndarray:
        if self._gray is None:
            self._gray = to_grayscale(self.pixels)
        return self._gray


@dataclass
class KeyFrameSet:
    """Ordered keyframes plus per-stage counts.

    stats keys: sampled, after_filters, keyframes, after_dedup.
    """

    frames: List[Frame]
    source_id: str = ""
    stats: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        indices = [f.index for f in self.frames]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValueError("keyframe indices must be strictly increasing")


def _numeric_key(path: Path):
    m = re.search(r"(\d+)", path.stem)
    return (int(m.group(1)) if m else 0, path.name)


def _iter_directory_frames(directory: Path) -> Iterable[np.ndarray]:
    from PIL import Image

    files = sorted(
        (p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES),
        key=_numeric_key,
    )
    if not files:
        raise DataError(f"no image frames found in {directory}")
    for path in files:
        with Image.open(path) as img:
            yield np.asarray(img.convert("RGB"))


def _iter_video_frames(path: Path) -> Iterable[np.ndarray]:
    try:
        import cv2
    except ImportError:
        raise BackendError(
            "decoding video files requires opencv (install the 'video' extra); "
            "directories of PNG/JPEG frames need no decoder"
        ) from None
    cap = cv2.VideoCapture(str(path))
    if not cap.isOpened():
        raise BackendError(f"cannot open video: {path}")
    try:
        while True:
            ok, bgr = cap.read()
            if not ok:
                break
            yield bgr[:, :, ::-1].copy()
    finally:
        cap.release()


def sample_frames(source, stride: int = 2) -> List[Frame]:
    """Decode a video file or frame directory, keeping every stride-th frame.

    Original source positions are preserved as frame indices.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    path = Path(source)
    if path.is_dir():
        iterator = _iter_directory_frames(path)
    elif path.is_file():
        iterator = _iter_video_frames(path)
    else:
        raise DataError(f"frame source not found: {path}")

    frames = [
        Frame(index=i, pixels=np.ascontiguousarray(pixels))
        for i, pixels in enumerate(iterator)
        if i % stride == 0
    ]
    if not frames:
        raise DataError(f"no frames decoded from {path}")
    return frames


def _histogram(gray: np.ndarray) -> np.ndarray:
    counts = np.bincount(gray.ravel(), minlength=256).astype(np.float64)
    return counts / counts.sum()


def histogram_distance(a: Frame, b: Frame) -> float:
    """Half the L1 difference of the unit-sum grayscale histograms, in [0, 1]."""
    return 0.5 * float(np.abs(_histogram(a.gray) - _histogram(b.gray)).sum())


def histogram_keyframes(
    frames: Sequence[Frame],
    threshold: float = DEFAULT_HIST_THRESHOLD,
    source_id: str = "",
) -> KeyFrameSet:
    """Keyframes are frames whose histogram distance to the previous frame is
    at or above the threshold. The comparison reference advances every step."""
    if len(frames) < 2:
        raise DataError("histogram keyframe scan needs at least 2 frames")
    selected = [
        frames[i]
        for i in range(1, len(frames))
        if histogram_distance(frames[i - 1], frames[i]) >= threshold
    ]
    return KeyFrameSet(
        frames=selected,
        source_id=source_id,
        stats={"scanned": len(frames), "keyframes": len(selected)},
    )


def _dedup_signature(frame: Frame) -> np.ndarray:
    return resize_bilinear(frame.gray, DEDUP_PATCH, DEDUP_PATCH).ravel()


def _signature_cosine(a: np.ndarray, b: np.ndarray) -> float:
    denom = float(np.linalg.norm(a) * np.linalg.norm(b))
    if denom == 0.0:
        return 0.0
    return float(a @ b) / denom


def dedup_keyframes(
    frames: Sequence[Frame],
    threshold: float = DEFAULT_DEDUP_THRESHOLD,
    source_id: str = "",
) -> KeyFrameSet:
    """Drop keyframes too similar to the last retained one.

    The first frame is always kept; a frame survives when the cosine
    similarity of its downsampled grayscale pixels against the current
    reference is below the threshold, and then becomes the new reference.
    """
    if not frames:
        raise DataError("dedup needs at least one frame")
    kept = [frames[0]]
    ref_sig = _dedup_signature(frames[0])
    for frame in frames[1:]:
        sig = _dedup_signature(frame)
        if _signature_cosine(ref_sig, sig) < threshold:
            kept.append(frame)
            ref_sig = sig
    return KeyFrameSet(
        frames=kept,
        source_id=source_id,
        stats={"keyframes": len(frames), "after_dedup": len(kept)},
    )


def is_flat(
    frame: Frame,
    dark_intensity: int = DEFAULT_FLAT_DARK,
    bright_intensity: int = DEFAULT_FLAT_BRIGHT,
    fraction: float = DEFAULT_FLAT_FRACTION,
) -> bool:
    gray = frame.gray
    return bool(
        np.mean(gray <= dark_intensity) >= fraction
        or np.mean(gray >= bright_intensity) >= fraction
    )


def filter_flat_frames(
    frames: Sequence[Frame],
    dark_intensity: int = DEFAULT_FLAT_DARK,
    bright_intensity: int = DEFAULT_FLAT_BRIGHT,
    fraction: float = DEFAULT_FLAT_FRACTION,
) -> List[Frame]:
    """Remove pitch-dark cut scenes and white flashes: frames where the given
    fraction of pixels sits at or below the dark bound / at or above the
    bright bound."""
    return [
        f for f in frames
        if not is_flat(f, dark_intensity, bright_intensity, fraction)
    ]


def laplacian_variance(frame: Frame) -> float:
    """Variance of the 3x3 Laplacian response over the frame interior."""
    gray = frame.gray.astype(np.float64)
    if gray.shape[0] < 3 or gray.shape[1] < 3:
        return 0.0
    center = gray[1:-1, 1:-1]
    response = (
        gray[:-2, 1:-1] + gray[2:, 1:-1] + gray[1:-1, :-2] + gray[1:-1, 2:]
        - 4.0 * center
    )
    return float(response.var())


def filter_blurred(
    frames: Sequence[Frame],
    variance_threshold: float = DEFAULT_BLUR_THRESHOLD,
) -> List[Frame]:
    """Remove frames whose Laplacian-response variance falls below the threshold."""
    return [f for f in frames if laplacian_variance(f) >= variance_threshold]


def crop_letterbox(frame: Frame, bar_intensity: int = DEFAULT_BAR_INTENSITY) -> Frame:
    """Crop maximal near-black border rows/columns (mean intensity below the
    bar bound). No-op when nothing qualifies or the crop would leave fewer
    than 16 pixels along either axis."""
    gray = frame.gray.astype(np.float64)
    h, w = gray.shape
    row_dark = gray.mean(axis=1) < bar_intensity
    col_dark = gray.mean(axis=0) < bar_intensity

    top = 0
    while top < h and row_dark[top]:
        top += 1
    bottom = h
    while bottom > top and row_dark[bottom - 1]:
        bottom -= 1
    left = 0
    while left < w and col_dark[left]:
        left += 1
    right = w
    while right > left and col_dark[right - 1]:
        right -= 1

    if (top, bottom, left, right) == (0, h, 0, w):
        return frame
    if bottom - top < MIN_CROP_DIM or right - left < MIN_CROP_DIM:
        return frame
    return Frame(index=frame.index, pixels=frame.pixels[top:bottom, left:right].copy())


def detect_transitions(
    frames: Sequence[Frame],
    content_threshold: float = DEFAULT_CONTENT_THRESHOLD,
) -> List[int]:
    """Positions (in the given sequence) where a hard cut starts.

    The cut score is the mean absolute per-pixel HSV difference between
    consecutive frames, on a 0..255 scale per channel.
    """
    if len(frames) < 2:
        raise DataError("transition detection needs at least 2 frames")
    cuts = []
    prev = rgb_to_hsv255(frames[0].pixels)
    for pos in range(1, len(frames)):
        cur = rgb_to_hsv255(frames[pos].pixels)
        if prev.shape == cur.shape:
            score = float(np.abs(cur - prev).mean())
        else:
            score = float("inf")  # geometry change is always a cut
        if score > content_threshold:
            cuts.append(pos)
        prev = cur
    return cuts


def trim_intro_outro(frames: Sequence[Frame], cuts: Sequence[int]) -> List[Frame]:
    """Drop the first and last detected segments (intro/outro animations).

    Needs at least two cuts to leave anything; otherwise returns the input.
    """
    if len(cuts) < 2:
        return list(frames)
    return list(frames[cuts[0]:cuts[-1]])


@dataclass
class KeyframeOptions:
    stride: int = 2
    hist_threshold: float = DEFAULT_HIST_THRESHOLD
    dedup_threshold: float = DEFAULT_DEDUP_THRESHOLD
    blur_threshold: float = DEFAULT_BLUR_THRESHOLD
    flat_dark: int = DEFAULT_FLAT_DARK
    flat_bright: int = DEFAULT_FLAT_BRIGHT
    flat_fraction: float = DEFAULT_FLAT_FRACTION
    bar_intensity: int = DEFAULT_BAR_INTENSITY
    trim_transitions: bool = False
    content_threshold: float = DEFAULT_CONTENT_THRESHOLD


def extract_keyframes(
    source,
    options: Optional[KeyframeOptions] = None,
    source_id: Optional[str] = None,
) -> KeyFrameSet:
    """Run the full pipeline on a video file or frame directory."""
    opts = options or KeyframeOptions()
    sampled = sample_frames(source, stride=opts.stride)
    return extract_keyframes_from_frames(
        sampled, opts, source_id=source_id or Path(str(source)).stem
    )


def extract_keyframes_from_frames(
    sampled: Sequence[Frame],
    opts: KeyframeOptions,
    source_id: str = "",
) -> KeyFrameSet:
    frames = [crop_letterbox(f, opts.bar_intensity) for f in sampled]
    frames = filter_flat_frames(frames, opts.flat_dark, opts.flat_bright, opts.flat_fraction)
    frames = filter_blurred(frames, opts.blur_threshold)
    if opts.trim_transitions and len(frames) >= 2:
        frames = trim_intro_outro(frames, detect_transitions(frames, opts.content_threshold))
    if len(frames) < 2:
        raise DataError(f"{source_id or 'source'}: too few frames survive filtering")
    after_filters = len(frames)

    scanned = histogram_keyframes(frames, opts.hist_threshold, source_id=source_id)
    if not scanned.frames:
        logger.warning("%s: no keyframes above histogram threshold", source_id or "source")
        return KeyFrameSet(
            frames=[],
            source_id=source_id,
            stats={
                "sampled": len(sampled),
                "after_filters": after_filters,
                "keyframes": 0,
                "after_dedup": 0,
            },
        )
    deduped = dedup_keyframes(scanned.frames, opts.dedup_threshold, source_id=source_id)
    return KeyFrameSet(
        frames=deduped.frames,
        source_id=source_id,
        stats={
            "sampled": len(sampled),
            "after_filters": after_filters,
            "keyframes": len(scanned.frames),
            "after_dedup": len(deduped.frames),
        },
    )


def save_keyframes(keyframes: KeyFrameSet, out_dir) -> Path:
    """Write keyframes as PNG files plus a stats.json sidecar; returns the dir."""
    from PIL import Image

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for frame in keyframes.frames:
        Image.fromarray(frame.pixels).save(out / f"frame_{frame.index:06d}.png")
    sidecar = {"source_id": keyframes.source_id, "stats": keyframes.stats}
    with open(out / "stats.json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
    return out
