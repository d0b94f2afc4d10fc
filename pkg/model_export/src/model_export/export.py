"""Export orchestration: emit vgg19_fc2.onnx, manifest.json, fixture.png and
fixture_features.bin, then verify the exported file against the source
framework through the consumer's CLI.

fixture_features.bin uses the consumer's binary feature-cache layout:
RRFEAT01 magic, little-endian uint32 count, then count x 4096 little-endian
float32 values. The fixture image is exactly 224x224 so both sides skip
resampling and the comparison isolates the export itself.
"""

from __future__ import annotations

import hashlib
import json
import logging
import struct
import subprocess
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np
import torch

from . import protowire as pw
from .vgg import Fc2Extractor, build_vgg19_fc2, graph_chunks

logger = logging.getLogger(__name__)

INPUT_SIZE = 224
OUTPUT_DIM = 4096
CACHE_MAGIC = b"RRFEAT01"
# Consumer-side preprocessing recipe (documented contract): RGB order,
# fixed per-channel mean subtraction.
CHANNEL_MEANS = np.array([123.68, 116.779, 103.939])
COSINE_FLOOR = 0.999


@dataclass
class ExportManifest:
    model_file: str
    input_geometry: List[int]
    layer: str
    checksum: str
    fixture_image: str
    fixture_features: str
    weights: str
    source_vs_exported_cosine: Optional[float] = None
    exported_vs_fixture_cosine: Optional[float] = None


def fixture_image(seed: int = 20260808) -> np.ndarray:
    """Deterministic 224x224 RGB test card: gradients plus seeded texture."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:INPUT_SIZE, 0:INPUT_SIZE]
    r = (xx * 255) // (INPUT_SIZE - 1)
    g = (yy * 255) // (INPUT_SIZE - 1)
    b = ((xx + yy) * 255) // (2 * (INPUT_SIZE - 1))
    image = np.stack([r, g, b], axis=2).astype(np.int64)
    image += rng.integers(-24, 25, size=image.shape)
    return np.clip(image, 0, 255).astype(np.uint8)


def preprocess(image: np.ndarray) -> torch.Tensor:
    """Mean-centered NCHW float tensor; must match the consumer's recipe."""
    centered = image.astype(np.float64) - CHANNEL_MEANS
    return torch.from_numpy(
        centered.transpose(2, 0, 1)[None, ...].astype(np.float32)
    )


def source_features(model: Fc2Extractor, image: np.ndarray) -> np.ndarray:
    with torch.no_grad():
        out = model(preprocess(image))
    return out.numpy().reshape(-1).astype(np.float32)


def write_feature_file(path, vectors: np.ndarray) -> None:
    vectors = np.atleast_2d(np.asarray(vectors, dtype="<f4"))
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<I", vectors.shape[0]))
        fh.write(vectors.tobytes())


def read_feature_file(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:8] != CACHE_MAGIC:
        raise ValueError(f"{path}: unexpected feature file magic")
    (count,) = struct.unpack("<I", raw[8:12])
    return np.frombuffer(raw[12:], dtype="<f4").reshape(count, -1)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    denom = float(np.linalg.norm(a) * np.linalg.norm(b))
    return float(a @ b) / denom if denom else 0.0


def run_consumer_features(model_path: Path, image_dir: Path, out_path: Path) -> None:
    """Push the fixture through the exported model via the consumer CLI."""
    cmd = [
        sys.executable, "-m", "reelrank.cli", "features",
        "--in", str(image_dir),
        "--extractor", f"onnx:{model_path}",
        "--out", str(out_path),
    ]
    result = subprocess.run(cmd, capture_output=True, text=True)
    if result.returncode != 0:
        raise RuntimeError(
            f"consumer feature extraction failed (exit {result.returncode}):\n"
            f"{result.stdout}{result.stderr}"
        )


def export_model(
    output_dir,
    weights: str = "seeded:20260808",
    model: Optional[Fc2Extractor] = None,
    verify: bool = True,
    model_filename: str = "vgg19_fc2.onnx",
) -> ExportManifest:
    """Emit the model file plus fixtures and manifest; returns the manifest.

    With verify=True the exported file is executed through the consumer CLI
    and must agree with the source framework within cosine 0.999.
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if model is None:
        model = build_vgg19_fc2(weights)

    model_path = out / model_filename
    size = pw.write_chunks(model_path, graph_chunks(model))
    checksum = hashlib.sha256(model_path.read_bytes()).hexdigest()
    logger.info("wrote %s (%d bytes, sha256=%s)", model_path, size, checksum[:12])

    image = fixture_image()
    from PIL import Image

    fixture_dir = out / "fixture"
    fixture_dir.mkdir(exist_ok=True)
    image_path = fixture_dir / "fixture.png"
    Image.fromarray(image).save(image_path)

    feats_src = source_features(model, image)
    features_path = out / "fixture_features.bin"
    write_feature_file(features_path, feats_src)

    manifest = ExportManifest(
        model_file=model_path.name,
        input_geometry=[1, 3, INPUT_SIZE, INPUT_SIZE],
        layer="fc2",
        checksum=checksum,
        fixture_image=str(image_path.relative_to(out)),
        fixture_features=features_path.name,
        weights=weights,
    )

    if verify:
        check_path = out / "consumer_check.bin"
        run_consumer_features(model_path, fixture_dir, check_path)
        feats_exported = read_feature_file(check_path)[0]
        manifest.source_vs_exported_cosine = cosine(feats_src, feats_exported)
        manifest.exported_vs_fixture_cosine = cosine(
            feats_exported, read_feature_file(features_path)[0]
        )
        logger.info(
            "fidelity: source vs exported cosine %.6f, exported vs fixture %.6f",
            manifest.source_vs_exported_cosine, manifest.exported_vs_fixture_cosine,
        )
        if manifest.source_vs_exported_cosine < COSINE_FLOOR:
            raise RuntimeError(
                f"export fidelity too low: cosine "
                f"{manifest.source_vs_exported_cosine:.6f} < {COSINE_FLOOR}"
            )

    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(asdict(manifest), fh, indent=2, sort_keys=True)
    return manifest
