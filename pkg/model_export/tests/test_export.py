import hashlib
import json

import numpy as np
import pytest
import torch

from model_export import protowire as pw
from model_export.export import (
    COSINE_FLOOR,
    cosine,
    export_model,
    fixture_image,
    read_feature_file,
    source_features,
    write_feature_file,
)
from model_export.vgg import (
    build_vgg19_fc2,
    graph_chunks,
    reduced_test_extractor,
)


class TestFixtures:
    def test_fixture_image_deterministic(self):
        a = fixture_image()
        b = fixture_image()
        assert np.array_equal(a, b)
        assert a.shape == (224, 224, 3)
        assert a.dtype == np.uint8

    def test_feature_file_round_trip(self, tmp_path):
        vec = np.random.default_rng(0).normal(size=4096).astype(np.float32)
        path = tmp_path / "f.bin"
        write_feature_file(path, vec)
        loaded = read_feature_file(path)
        assert loaded.shape == (1, 4096)
        assert np.array_equal(loaded[0], vec)
        # Consumer-compatible layout: magic + uint32 count + raw float32.
        raw = path.read_bytes()
        assert raw[:8] == b"RRFEAT01"
        assert len(raw) == 8 + 4 + 4096 * 4


class TestReducedExport:
    def test_export_verifies_through_consumer(self, tmp_path):
        model = reduced_test_extractor(seed=5)
        manifest = export_model(
            tmp_path, weights="seeded:5", model=model,
            verify=True, model_filename="reduced.onnx",
        )
        assert manifest.source_vs_exported_cosine >= COSINE_FLOOR
        assert manifest.exported_vs_fixture_cosine >= COSINE_FLOOR
        assert (tmp_path / "reduced.onnx").is_file()
        assert (tmp_path / "fixture" / "fixture.png").is_file()
        assert (tmp_path / "fixture_features.bin").is_file()
        saved = json.loads((tmp_path / "manifest.json").read_text())
        assert saved["checksum"] == manifest.checksum
        assert saved["layer"] == "fc2"
        assert saved["input_geometry"] == [1, 3, 224, 224]

    def test_reexport_identical_checksum(self, tmp_path):
        a = export_model(tmp_path / "a", model=reduced_test_extractor(seed=9),
                         verify=False, model_filename="m.onnx")
        b = export_model(tmp_path / "b", model=reduced_test_extractor(seed=9),
                         verify=False, model_filename="m.onnx")
        assert a.checksum == b.checksum
        assert (
            hashlib.sha256((tmp_path / "a" / "m.onnx").read_bytes()).hexdigest()
            == a.checksum
        )

    def test_graph_declares_expected_geometry(self, tmp_path):
        from reelrank.onnx_infer import load_model

        path = tmp_path / "m.onnx"
        pw.write_chunks(path, graph_chunks(reduced_test_extractor(seed=1)))
        model = load_model(path)
        assert model.inputs[0].shape == [1, 3, 224, 224]
        assert model.outputs[0].shape == [1, 4096]
        ops = [n.op_type for n in model.nodes]
        assert ops.count("Conv") == 2
        assert ops.count("Gemm") == 2
        assert ops[-1] == "Relu"

    def test_unknown_weights_spec(self):
        with pytest.raises(ValueError, match="weights spec"):
            build_vgg19_fc2("imagenet")


class TestCli:
    def test_cli_bad_weights_spec_exits_nonzero(self, tmp_path):
        from model_export.cli import main

        assert main(["--out", str(tmp_path), "--weights", "bogus:spec",
                     "--skip-verify"]) == 1


@pytest.mark.slow
class TestFullVgg19:
    def test_full_export_fidelity(self, tmp_path):
        """Acceptance: the exported full-size model agrees with the source
        framework within cosine 0.999, both directly and through the emitted
        fixture file, and re-exports byte-identically."""
        manifest = export_model(tmp_path, weights="seeded:20260808", verify=True)
        assert manifest.source_vs_exported_cosine >= COSINE_FLOOR
        assert manifest.exported_vs_fixture_cosine >= COSINE_FLOOR

        feats = read_feature_file(tmp_path / "fixture_features.bin")
        assert feats.shape == (1, 4096)

        model = build_vgg19_fc2("seeded:20260808")
        image = fixture_image()
        with torch.no_grad():
            again = source_features(model, image)
        assert cosine(feats[0], again) == pytest.approx(1.0, abs=1e-6)

        rebuilt = export_model(
            tmp_path / "again", weights="seeded:20260808", verify=False
        )
        assert rebuilt.checksum == manifest.checksum
