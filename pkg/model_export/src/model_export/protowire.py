"""Protobuf wire-format encoder for the ONNX message subset this export
needs. Weight tensors are emitted as zero-copy memoryview chunks so a
multi-hundred-megabyte model streams to disk without being joined in memory.

Field numbers follow the frozen onnx.proto schema.
"""

from __future__ import annotations

import struct
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np

Chunk = Union[bytes, memoryview]
Encoded = Tuple[int, List[Chunk]]  # (total length, chunks)


def varint(value: int) -> bytes:
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
    return varint((field << 3) | wire)


def varint_field(field: int, value: int) -> bytes:
    return _key(field, 0) + varint(value)


def string_field(field: int, text: str) -> bytes:
    payload = text.encode("utf-8")
    return _key(field, 2) + varint(len(payload)) + payload


def packed_int64_field(field: int, values: Sequence[int]) -> bytes:
    payload = b"".join(varint(int(v)) for v in values)
    return _key(field, 2) + varint(len(payload)) + payload


def float_field(field: int, value: float) -> bytes:
    return _key(field, 5) + struct.pack("<f", value)


def message_field(field: int, encoded: Encoded) -> Encoded:
    length, chunks = encoded
    header = _key(field, 2) + varint(length)
    return len(header) + length, [header] + chunks


def concat(parts: Iterable[Union[bytes, Encoded]]) -> Encoded:
    length = 0
    chunks: List[Chunk] = []
    for part in parts:
        if isinstance(part, (bytes, bytearray)):
            length += len(part)
            chunks.append(bytes(part))
        else:
            part_len, part_chunks = part
            length += part_len
            chunks.extend(part_chunks)
    return length, chunks


def tensor_proto(name: str, array: np.ndarray) -> Encoded:
    """TensorProto with raw little-endian payload; float32 or int64 only."""
    array = np.asarray(array)
    data_type = {np.dtype("float32"): 1, np.dtype("int64"): 7}[array.dtype]
    view = memoryview(np.ascontiguousarray(array).view(np.uint8).reshape(-1))
    header = b"".join(varint_field(1, int(d)) for d in array.shape)
    header += varint_field(2, data_type)
    header += string_field(8, name)
    header += _key(9, 2) + varint(array.nbytes)
    return len(header) + array.nbytes, [header, view]


def attribute_int(name: str, value: int) -> bytes:
    return string_field(1, name) + varint_field(3, value) + varint_field(20, 2)


def attribute_ints(name: str, values: Sequence[int]) -> bytes:
    return string_field(1, name) + packed_int64_field(8, values) + varint_field(20, 7)


def attribute_float(name: str, value: float) -> bytes:
    return string_field(1, name) + float_field(2, value) + varint_field(20, 1)


def node_proto(op_type: str, inputs: Sequence[str], outputs: Sequence[str],
               attributes: Sequence[bytes] = (), name: str = "") -> Encoded:
    body = b""
    for value in inputs:
        body += string_field(1, value)
    for value in outputs:
        body += string_field(2, value)
    if name:
        body += string_field(3, name)
    body += string_field(4, op_type)
    for attr in attributes:
        body += _key(5, 2) + varint(len(attr)) + attr
    return len(body), [body]


def value_info(name: str, shape: Sequence[int]) -> Encoded:
    dims = b""
    for dim in shape:
        dim_body = varint_field(1, int(dim))
        dims += _key(1, 2) + varint(len(dim_body)) + dim_body
    tensor_type = varint_field(1, 1) + _key(2, 2) + varint(len(dims)) + dims
    type_proto = _key(1, 2) + varint(len(tensor_type)) + tensor_type
    body = string_field(1, name) + _key(2, 2) + varint(len(type_proto)) + type_proto
    return len(body), [body]


def graph_proto(name: str, nodes: Sequence[Encoded], initializers: Sequence[Encoded],
                inputs: Sequence[Encoded], outputs: Sequence[Encoded]) -> Encoded:
    parts: List[Union[bytes, Encoded]] = []
    for n in nodes:
        parts.append(message_field(1, n))
    parts.append(string_field(2, name))
    for t in initializers:
        parts.append(message_field(5, t))
    for vi in inputs:
        parts.append(message_field(11, vi))
    for vi in outputs:
        parts.append(message_field(12, vi))
    return concat(parts)


def model_proto(graph: Encoded, producer: str, opset: int = 13,
                ir_version: int = 8) -> Encoded:
    opset_body = string_field(1, "") + varint_field(2, opset)
    return concat([
        varint_field(1, ir_version),
        string_field(2, producer),
        message_field(7, graph),
        _key(8, 2) + varint(len(opset_body)) + opset_body,
    ])


def write_chunks(path, encoded: Encoded) -> int:
    length, chunks = encoded
    written = 0
    with open(path, "wb") as fh:
        for chunk in chunks:
            written += fh.write(chunk)
    if written != length:
        raise IOError(f"wrote {written} bytes, expected {length}")
    return written
