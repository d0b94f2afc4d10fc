import numpy as np
import pytest

from model_export import protowire as pw


class TestVarint:
    @pytest.mark.parametrize("value,expected", [
        (0, b"\x00"),
        (1, b"\x01"),
        (127, b"\x7f"),
        (128, b"\x80\x01"),
        (300, b"\xac\x02"),
        (2 ** 32, b"\x80\x80\x80\x80\x10"),
    ])
    def test_known_encodings(self, value, expected):
        assert pw.varint(value) == expected

    def test_field_keys(self):
        # field 1, wire 0 -> 0x08; field 7, wire 2 -> 0x3a
        assert pw.varint_field(1, 5) == b"\x08\x05"
        assert pw.string_field(7, "ab") == b"\x3a\x02ab"


class TestTensorProto:
    def test_float_tensor_layout(self):
        array = np.array([[1.0, 2.0]], dtype=np.float32)
        length, chunks = pw.tensor_proto("w", array)
        joined = b"".join(bytes(c) for c in chunks)
        assert len(joined) == length
        assert array.tobytes() in joined
        assert b"w" in joined

    def test_zero_copy_weights(self):
        array = np.arange(6, dtype=np.float32)
        _, chunks = pw.tensor_proto("w", array)
        views = [c for c in chunks if isinstance(c, memoryview)]
        assert len(views) == 1
        assert views[0].nbytes == array.nbytes

    def test_int64_tensor(self):
        array = np.array([1, 12], dtype=np.int64)
        length, chunks = pw.tensor_proto("shape", array)
        assert len(b"".join(bytes(c) for c in chunks)) == length


class TestMessageAssembly:
    def test_write_chunks_length_checked(self, tmp_path):
        encoded = pw.concat([pw.string_field(1, "hello"), pw.varint_field(2, 9)])
        path = tmp_path / "m.bin"
        written = pw.write_chunks(path, encoded)
        assert written == path.stat().st_size == encoded[0]

    def test_node_and_graph_nest(self):
        node = pw.node_proto("Relu", ["x"], ["y"])
        graph = pw.graph_proto(
            "g", nodes=[node], initializers=[],
            inputs=[pw.value_info("x", (1, 3))],
            outputs=[pw.value_info("y", (1, 3))],
        )
        model = pw.model_proto(graph, producer="tests")
        joined = b"".join(bytes(c) for c in model[1])
        assert len(joined) == model[0]
        assert b"Relu" in joined
        assert b"tests" in joined


class TestAgainstConsumerParser:
    def test_consumer_reads_what_we_write(self, tmp_path):
        """The consumer's independent wire parser must decode our bytes."""
        from reelrank.onnx_infer import load_model

        weight = np.arange(12, dtype=np.float32).reshape(3, 4)
        graph = pw.graph_proto(
            "round",
            nodes=[pw.node_proto(
                "Gemm", ["input", "w"], ["output"],
                attributes=[pw.attribute_int("transB", 1),
                            pw.attribute_float("alpha", 2.0)],
            )],
            initializers=[pw.tensor_proto("w", weight)],
            inputs=[pw.value_info("input", (1, 4))],
            outputs=[pw.value_info("output", (1, 3))],
        )
        path = tmp_path / "round.onnx"
        pw.write_chunks(path, pw.model_proto(graph, producer="model-export"))
        model = load_model(path)
        assert model.producer == "model-export"
        assert model.nodes[0].op_type == "Gemm"
        assert model.nodes[0].attrs["transB"] == 1
        assert model.nodes[0].attrs["alpha"] == pytest.approx(2.0)
        assert np.array_equal(model.initializers["w"], weight)
        assert model.inputs[0].shape == [1, 4]
        assert model.outputs[0].shape == [1, 3]
