"""Minimal ONNX protobuf writer used only by tests to build model-file
fixtures. Independent of the package's reader so wire-level tests compare
two implementations."""

import struct

import numpy as np


def _varint(value: int) -> bytes:
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def _key(field: int, wire: int) -> bytes:
    return _varint((field << 3) | wire)


def _bytes_field(field: int, payload: bytes) -> bytes:
    return _key(field, 2) + _varint(len(payload)) + payload


def _varint_field(field: int, value: int) -> bytes:
    return _key(field, 0) + _varint(value)


def _string_field(field: int, text: str) -> bytes:
    return _bytes_field(field, text.encode("utf-8"))


def tensor(name: str, array: np.ndarray) -> bytes:
    array = np.asarray(array)
    dtype = {np.dtype("float32"): 1, np.dtype("int64"): 7}[array.dtype]
    out = b""
    for dim in array.shape:
        out += _varint_field(1, dim)
    out += _varint_field(2, dtype)
    out += _string_field(8, name)
    out += _bytes_field(9, array.tobytes())
    return out


def attribute(name: str, value) -> bytes:
    out = _string_field(1, name)
    if isinstance(value, float):
        out += _key(2, 5) + struct.pack("<f", value)
        out += _varint_field(20, 1)
    elif isinstance(value, int):
        out += _varint_field(3, value)
        out += _varint_field(20, 2)
    elif isinstance(value, (list, tuple)):
        packed = b"".join(_varint(int(v)) for v in value)
        out += _bytes_field(8, packed)
        out += _varint_field(20, 7)
    elif isinstance(value, np.ndarray):
        out += _bytes_field(5, tensor("", value))
        out += _varint_field(20, 4)
    else:
        raise TypeError(f"unsupported attribute: {value!r}")
    return out


def node(op_type: str, inputs, outputs, attrs=None) -> bytes:
    out = b""
    for name in inputs:
        out += _string_field(1, name)
    for name in outputs:
        out += _string_field(2, name)
    out += _string_field(4, op_type)
    for attr_name, attr_value in (attrs or {}).items():
        out += _bytes_field(5, attribute(attr_name, attr_value))
    return out


def value_info(name: str, shape) -> bytes:
    shape_proto = b""
    for dim in shape:
        shape_proto += _bytes_field(1, _varint_field(1, dim))
    tensor_type = _varint_field(1, 1) + _bytes_field(2, shape_proto)
    type_proto = _bytes_field(1, tensor_type)
    return _string_field(1, name) + _bytes_field(2, type_proto)


def model(nodes, initializers, inputs, outputs, graph_name="g") -> bytes:
    graph = b""
    for n in nodes:
        graph += _bytes_field(1, n)
    graph += _string_field(2, graph_name)
    for t in initializers:
        graph += _bytes_field(5, t)
    for vi in inputs:
        graph += _bytes_field(11, vi)
    for vi in outputs:
        graph += _bytes_field(12, vi)
    opset = _string_field(1, "") + _varint_field(2, 13)
    return (
        _varint_field(1, 8)          # ir_version
        + _string_field(2, "tests")  # producer_name
        + _bytes_field(7, graph)
        + _bytes_field(8, opset)
    )
