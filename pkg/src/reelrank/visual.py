"""Visual similarity: per-keyframe stylistic features, k-means segmentation of
the reference trailer, per-cluster distribution vectors, and the similarity
score 1 / (1 + euclidean distance between distributions).

Feature extractors share one preprocessing path (bilinear resize to 224x224
RGB, fixed per-channel mean subtraction) so the histogram-based mock and the
CNN backend are interchangeable. Feature vectors are always 4096-dimensional.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Protocol, Sequence

import numpy as np

from .errors import DataError
from .imageops import resize_bilinear
from .keyframes import Frame, KeyFrameSet

FEATURE_DIM = 4096
INPUT_SIZE = 224
# Standard per-channel RGB means for the CNN preprocessing recipe.
CHANNEL_MEANS = np.array([123.68, 116.779, 103.939])

CACHE_MAGIC = b"RRFEAT01"


@dataclass
class FeatureVector:
    values: np.ndarray
    frame_index: int

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.shape != (FEATURE_DIM,):
            raise ValueError(f"feature vector must have length {FEATURE_DIM}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature vector contains non-finite values")


class FeatureExtractor(Protocol):
    """Deterministic map from preprocessed frames to 4096-dim vectors.

    ``run`` receives a (N, 224, 224, 3) float64 batch of mean-centered RGB
    frames and returns (N, 4096). Same input bytes must yield the same output.
    """

    name: str

    def run(self, batch: np.ndarray) -> np.ndarray: ...


def preprocess_frame(frame: Frame) -> np.ndarray:
    resized = resize_bilinear(frame.pixels, INPUT_SIZE, INPUT_SIZE)
    return resized - CHANNEL_MEANS


def extract_features(
    extractor: FeatureExtractor, frames: KeyFrameSet | Sequence[Frame]
) -> List[FeatureVector]:
    """Preprocess every keyframe and push it through the extractor, in order."""
    frame_list = frames.frames if isinstance(frames, KeyFrameSet) else list(frames)
    if not frame_list:
        raise DataError("feature extraction needs at least one frame")
    batch = np.stack([preprocess_frame(f) for f in frame_list])
    outputs = extractor.run(batch)
    if outputs.shape != (len(frame_list), FEATURE_DIM):
        raise ValueError(f"extractor returned shape {outputs.shape}")
    return [
        FeatureVector(values=outputs[i], frame_index=frame_list[i].index)
        for i in range(len(frame_list))
    ]


class MockExtractor:
    """Model-free stand-in for the CNN: 64-bin grayscale histograms over an
    8x8 tile grid (4096 values), L2-normalized.

    Similar frames land on nearby vectors; an all-black frame activates
    exactly bin 0 of each of the 64 tiles. The fixed channel means are added
    back before binning since the shared preprocessing centers the input.
    """

    name = "mock"
    _TILES = 8
    _BINS = 64

    def run(self, batch: np.ndarray) -> np.ndarray:
        out = np.zeros((batch.shape[0], FEATURE_DIM), dtype=np.float32)
        tile = INPUT_SIZE // self._TILES
        for n in range(batch.shape[0]):
            rgb = np.clip(batch[n] + CHANNEL_MEANS, 0, 255)
            gray = rgb @ np.array([0.299, 0.587, 0.114])
            bins = np.minimum(gray.astype(np.int64) >> 2, self._BINS - 1)
            vec = np.zeros(FEATURE_DIM, dtype=np.float64)
            for ty in range(self._TILES):
                for tx in range(self._TILES):
                    patch = bins[ty * tile:(ty + 1) * tile, tx * tile:(tx + 1) * tile]
                    hist = np.bincount(patch.ravel(), minlength=self._BINS)
                    offset = (ty * self._TILES + tx) * self._BINS
                    vec[offset:offset + self._BINS] = hist
            norm = np.linalg.norm(vec)
            if norm > 0:
                vec /= norm
            out[n] = vec.astype(np.float32)
        return out


def mock_extractor() -> MockExtractor:
    return MockExtractor()


class OnnxExtractor:
    """CNN feature extractor backed by a serialized model file.

    The model must declare one image input of 1x224x224x3 or 1x3x224x224
    (layout auto-detected) and an output that flattens to 4096 values.
    Frames are executed one at a time; the fitted graph is immutable, so the
    extractor is safe for concurrent use.
    """

    def __init__(self, model_path):
        from . import onnx_infer
        from .errors import BackendError

        self._backend = onnx_infer
        self.model = onnx_infer.load_model(model_path)
        if len(self.model.inputs) != 1:
            raise BackendError(
                f"{model_path}: expected exactly one graph input, "
                f"got {len(self.model.inputs)}"
            )
        self._input = self.model.inputs[0]
        dims = [d if d is not None else 1 for d in self._input.shape]
        if dims == [1, INPUT_SIZE, INPUT_SIZE, 3]:
            self.layout = "nhwc"
        elif dims == [1, 3, INPUT_SIZE, INPUT_SIZE]:
            self.layout = "nchw"
        else:
            raise BackendError(
                f"{model_path}: input geometry {dims} is not "
                f"1x{INPUT_SIZE}x{INPUT_SIZE}x3 or 1x3x{INPUT_SIZE}x{INPUT_SIZE}"
            )
        if len(self.model.outputs) != 1:
            raise BackendError(f"{model_path}: expected exactly one graph output")
        out_dims = [d for d in self.model.outputs[0].shape if d not in (None, 1)]
        if out_dims and int(np.prod(out_dims)) != FEATURE_DIM:
            raise BackendError(
                f"{model_path}: output geometry {self.model.outputs[0].shape} "
                f"does not flatten to {FEATURE_DIM}"
            )
        digest = hashlib.sha256(Path(model_path).read_bytes()).hexdigest()[:12]
        self.name = f"onnx-{digest}"

    def run(self, batch: np.ndarray) -> np.ndarray:
        out = np.empty((batch.shape[0], FEATURE_DIM), dtype=np.float32)
        for n in range(batch.shape[0]):
            frame = batch[n].astype(np.float32)[None, ...]  # (1, 224, 224, 3)
            if self.layout == "nchw":
                frame = frame.transpose(0, 3, 1, 2)
            (result,) = self._backend.run_model(self.model, {self._input.name: frame})
            flat = np.asarray(result, dtype=np.float32).reshape(-1)
            if flat.shape[0] != FEATURE_DIM:
                from .errors import BackendError

                raise BackendError(
                    f"model produced {flat.shape[0]} values, expected {FEATURE_DIM}"
                )
            out[n] = flat
        return out


def onnx_extractor(model_path) -> OnnxExtractor:
    return OnnxExtractor(model_path)


def make_extractor(spec: str) -> FeatureExtractor:
    """Build an extractor from a CLI spec: ``mock`` or ``onnx:<path>``."""
    if spec == "mock":
        return mock_extractor()
    if spec.startswith("onnx:"):
        return onnx_extractor(spec.split(":", 1)[1])
    from .errors import ConfigError

    raise ConfigError(f"unknown extractor spec: {spec!r} (use 'mock' or 'onnx:<path>')")


@dataclass
class ClusterModel:
    centroids: np.ndarray
    k: int
    seed: int
    wcss: float
    wcss_history: List[float]

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not np.all(np.isfinite(self.centroids)):
            raise ValueError("centroids must be finite")
        if self.wcss < 0:
            raise ValueError("wcss must be non-negative")


@dataclass
class DistributionVector:
    """Per-cluster fraction of keyframes; entries sum to 1."""

    fractions: np.ndarray

    def __post_init__(self) -> None:
        self.fractions = np.asarray(self.fractions, dtype=np.float64)
        if np.any(self.fractions < -1e-12) or np.any(self.fractions > 1 + 1e-12):
            raise ValueError("fractions must lie in [0, 1]")
        if abs(float(self.fractions.sum()) - 1.0) > 1e-9:
            raise ValueError("fractions must sum to 1")

    @property
    def k(self) -> int:
        return int(self.fractions.shape[0])


def _as_matrix(vectors: Sequence[FeatureVector] | np.ndarray) -> np.ndarray:
    if isinstance(vectors, np.ndarray):
        return np.asarray(vectors, dtype=np.float64)
    return np.stack([np.asarray(v.values, dtype=np.float64) for v in vectors])


def _squared_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # (n, k) matrix of squared euclidean distances, numerically clamped at 0.
    sq = (
        np.sum(points * points, axis=1)[:, None]
        - 2.0 * points @ centers.T
        + np.sum(centers * centers, axis=1)[None, :]
    )
    return np.maximum(sq, 0.0)


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Greedy k-means++: sample 2 + floor(ln k) candidates per step, keep the
    one that lowers the running potential the most."""
    n = points.shape[0]
    n_candidates = 2 + int(np.log(k)) if k > 1 else 1
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    closest = _squared_distances(points, centers[:1]).ravel()
    for c in range(1, k):
        total = closest.sum()
        if total == 0.0:
            # All points already coincide with chosen centers.
            centers[c] = points[rng.integers(n)]
            continue
        probs = closest / total
        candidates = rng.choice(n, size=n_candidates, p=probs)
        best_idx, best_potential, best_closest = -1, np.inf, None
        for idx in candidates:
            cand_closest = np.minimum(
                closest, _squared_distances(points, points[idx][None, :]).ravel()
            )
            potential = cand_closest.sum()
            if potential < best_potential:
                best_idx, best_potential, best_closest = int(idx), potential, cand_closest
        centers[c] = points[best_idx]
        closest = best_closest
    return centers


def kmeans_fit(
    vectors: Sequence[FeatureVector] | np.ndarray,
    k: int = 5,
    seed: int = 0,
    max_iters: int = 300,
    tol: float = 1e-6,
) -> ClusterModel:
    """Lloyd's algorithm with seeded k-means++ initialization.

    Converges when the largest centroid shift drops below ``tol`` or after
    ``max_iters``. The per-iteration objective is recorded in
    ``wcss_history`` (non-increasing by construction). A cluster that loses
    all members keeps its previous centroid.
    """
    points = _as_matrix(vectors)
    if points.shape[0] < k:
        raise DataError(f"k-means needs at least k={k} vectors, got {points.shape[0]}")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(points, k, rng)

    history: List[float] = []
    for _ in range(max_iters):
        labels = np.argmin(_squared_distances(points, centers), axis=1)
        # Exact per-point differences: coincident points contribute exactly 0.
        diffs = points - centers[labels]
        history.append(float((diffs * diffs).sum()))
        new_centers = centers.copy()
        for c in range(k):
            members = points[labels == c]
            if members.shape[0]:
                new_centers[c] = members.mean(axis=0)
        shift = float(np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max())
        centers = new_centers
        if shift < tol:
            break

    final_wcss = compute_wcss_matrix(centers, points)
    history.append(final_wcss)
    return ClusterModel(centroids=centers, k=k, seed=seed, wcss=final_wcss, wcss_history=history)


def compute_wcss_matrix(centers: np.ndarray, points: np.ndarray) -> float:
    labels = np.argmin(_squared_distances(points, centers), axis=1)
    diffs = points - centers[labels]
    return float((diffs * diffs).sum())


def compute_wcss(model: ClusterModel, vectors: Sequence[FeatureVector] | np.ndarray) -> float:
    """Sum of squared euclidean distances to each vector's nearest centroid."""
    return compute_wcss_matrix(model.centroids, _as_matrix(vectors))


def assign_clusters(model: ClusterModel, vectors: Sequence[FeatureVector] | np.ndarray) -> np.ndarray:
    points = _as_matrix(vectors)
    return np.argmin(_squared_distances(points, model.centroids), axis=1)


def distribution_vector(
    model: ClusterModel, vectors: Sequence[FeatureVector] | np.ndarray
) -> DistributionVector:
    """Fraction of vectors assigned to each centroid of the reference model."""
    points = _as_matrix(vectors)
    if points.shape[0] == 0:
        raise DataError("distribution vector needs at least one feature vector")
    labels = assign_clusters(model, points)
    counts = np.bincount(labels, minlength=model.k).astype(np.float64)
    return DistributionVector(fractions=counts / counts.sum())


def visual_similarity(reference: DistributionVector, query: DistributionVector) -> float:
    """1 / (1 + euclidean distance); 1.0 exactly when distributions coincide."""
    if reference.k != query.k:
        raise ValueError(f"cluster count mismatch: {reference.k} != {query.k}")
    distance = float(np.linalg.norm(reference.fractions - query.fractions))
    return 1.0 / (1.0 + distance)


# ---------------------------------------------------------------------------
# Binary feature cache: magic bytes, uint32 count, then count x 4096
# little-endian float32 values.

def save_features(path, vectors: Sequence[FeatureVector]) -> None:
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<I", len(vectors)))
        for vec in vectors:
            fh.write(np.asarray(vec.values, dtype="<f4").tobytes())


def load_features(path) -> List[FeatureVector]:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(len(CACHE_MAGIC))
        if magic != CACHE_MAGIC:
            raise DataError(f"{path}: not a feature cache file")
        (count,) = struct.unpack("<I", fh.read(4))
        payload = fh.read()
    expected = count * FEATURE_DIM * 4
    if len(payload) != expected:
        raise DataError(f"{path}: truncated feature cache")
    data = np.frombuffer(payload, dtype="<f4").reshape(count, FEATURE_DIM)
    return [FeatureVector(values=data[i].copy(), frame_index=i) for i in range(count)]


def frames_digest(frames: Sequence[Frame]) -> str:
    """Content hash over frame pixels, used as the feature-cache key."""
    digest = hashlib.sha256()
    for frame in frames:
        digest.update(str(frame.index).encode())
        digest.update(np.ascontiguousarray(frame.pixels).tobytes())
    return digest.hexdigest()
