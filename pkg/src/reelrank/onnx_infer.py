"""Self-contained ONNX inference backend.

Parses the protobuf wire format directly (the subset the interchange format
needs: model/graph/node/attribute/tensor messages) and executes the graph
with numpy. Supports the operator set of VGG-style convolutional networks:
Conv, Relu, MaxPool, AveragePool, GlobalAveragePool, Gemm, MatMul, Add,
Flatten, Reshape, Transpose, Identity, Dropout, Constant.

Field numbers below follow the frozen onnx.proto schema; comments give the
message and field they decode.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import BackendError

# --------------------------------------------------------------------------
# Protobuf wire-format primitives.

_WIRE_VARINT = 0
_WIRE_FIXED64 = 1
_WIRE_BYTES = 2
_WIRE_FIXED32 = 5


def _read_varint(buf: bytes, pos: int) -> Tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if pos >= len(buf):
            raise BackendError("truncated varint in model file")
        byte = buf[pos]
        pos += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, pos
        shift += 7
        if shift > 70:
            raise BackendError("malformed varint in model file")


def _signed(value: int) -> int:
    return value - (1 << 64) if value >= (1 << 63) else value


def _fields(buf: bytes):
    """Yield (field_number, wire_type, value) triples from one message."""
    pos = 0
    while pos < len(buf):
        key, pos = _read_varint(buf, pos)
        number, wire = key >> 3, key & 7
        if wire == _WIRE_VARINT:
            value, pos = _read_varint(buf, pos)
        elif wire == _WIRE_FIXED64:
            value, pos = buf[pos:pos + 8], pos + 8
        elif wire == _WIRE_BYTES:
            length, pos = _read_varint(buf, pos)
            value, pos = buf[pos:pos + length], pos + length
            if len(value) != length:
                raise BackendError("truncated length-delimited field in model file")
        elif wire == _WIRE_FIXED32:
            value, pos = buf[pos:pos + 4], pos + 4
        else:
            raise BackendError(f"unsupported protobuf wire type {wire}")
        yield number, wire, value


def _packed_varints(value: bytes, wire: int) -> List[int]:
    if wire == _WIRE_VARINT:
        return [_signed(value)]
    out = []
    pos = 0
    while pos < len(value):
        item, pos = _read_varint(value, pos)
        out.append(_signed(item))
    return out


def _packed_floats(value: bytes, wire: int) -> np.ndarray:
    if wire == _WIRE_FIXED32:
        return np.frombuffer(value, dtype="<f4").astype(np.float32)
    return np.frombuffer(value, dtype="<f4")


# --------------------------------------------------------------------------
# Decoded model structure.

_DTYPES = {1: "<f4", 6: "<i4", 7: "<i8", 11: "<f8"}  # TensorProto.DataType


@dataclass
class TensorInfo:
    name: str
    shape: List[Optional[int]] = field(default_factory=list)
    elem_type: int = 1


@dataclass
class GraphNode:
    op_type: str
    inputs: List[str]
    outputs: List[str]
    attrs: Dict[str, object]
    name: str = ""


@dataclass
class OnnxModel:
    graph_name: str
    nodes: List[GraphNode]
    initializers: Dict[str, np.ndarray]
    inputs: List[TensorInfo]
    outputs: List[TensorInfo]
    producer: str = ""
    opset: int = 0


def _decode_tensor(buf: bytes) -> Tuple[str, np.ndarray]:
    dims: List[int] = []
    data_type = 1
    name = ""
    raw = b""
    typed: Optional[np.ndarray] = None
    for number, wire, value in _fields(buf):
        if number == 1:  # TensorProto.dims
            dims.extend(_packed_varints(value, wire))
        elif number == 2:  # TensorProto.data_type
            data_type = value
        elif number == 4:  # TensorProto.float_data
            typed = _packed_floats(value, wire) if typed is None else np.concatenate(
                [typed, _packed_floats(value, wire)]
            )
        elif number == 7:  # TensorProto.int64_data
            arr = np.array(_packed_varints(value, wire), dtype=np.int64)
            typed = arr if typed is None else np.concatenate([typed, arr])
        elif number == 8:  # TensorProto.name
            name = value.decode("utf-8")
        elif number == 9:  # TensorProto.raw_data
            raw = value
    if data_type not in _DTYPES:
        raise BackendError(f"initializer {name!r}: unsupported data type {data_type}")
    if raw:
        array = np.frombuffer(raw, dtype=_DTYPES[data_type]).copy()
    elif typed is not None:
        array = typed.astype(_DTYPES[data_type])
    else:
        array = np.zeros(0, dtype=_DTYPES[data_type])
    return name, array.reshape(dims) if dims else array


def _decode_shape(buf: bytes) -> List[Optional[int]]:
    shape: List[Optional[int]] = []
    for number, _wire, value in _fields(buf):
        if number == 1:  # TensorShapeProto.dim
            dim_value: Optional[int] = None
            for dnum, _dwire, dval in _fields(value):
                if dnum == 1:  # Dimension.dim_value
                    dim_value = _signed(dval)
            shape.append(dim_value)
    return shape


def _decode_value_info(buf: bytes) -> TensorInfo:
    info = TensorInfo(name="")
    for number, _wire, value in _fields(buf):
        if number == 1:  # ValueInfoProto.name
            info.name = value.decode("utf-8")
        elif number == 2:  # ValueInfoProto.type
            for tnum, _tw, tval in _fields(value):
                if tnum == 1:  # TypeProto.tensor_type
                    for snum, _sw, sval in _fields(tval):
                        if snum == 1:  # Tensor.elem_type
                            info.elem_type = sval
                        elif snum == 2:  # Tensor.shape
                            info.shape = _decode_shape(sval)
    return info


def _decode_attribute(buf: bytes) -> Tuple[str, object]:
    name = ""
    single_f: Optional[float] = None
    single_i: Optional[int] = None
    single_s: Optional[bytes] = None
    tensor: Optional[np.ndarray] = None
    floats: List[float] = []
    ints: List[int] = []
    attr_type = 0
    for number, wire, value in _fields(buf):
        if number == 1:  # AttributeProto.name
            name = value.decode("utf-8")
        elif number == 2:  # AttributeProto.f
            single_f = float(np.frombuffer(value, dtype="<f4")[0])
        elif number == 3:  # AttributeProto.i
            single_i = _signed(value)
        elif number == 4:  # AttributeProto.s
            single_s = value
        elif number == 5:  # AttributeProto.t
            tensor = _decode_tensor(value)[1]
        elif number == 7:  # AttributeProto.floats
            floats.extend(float(x) for x in _packed_floats(value, wire))
        elif number == 8:  # AttributeProto.ints
            ints.extend(_packed_varints(value, wire))
        elif number == 20:  # AttributeProto.type
            attr_type = value
    if attr_type == 1:
        return name, single_f
    if attr_type == 2:
        return name, single_i
    if attr_type == 3:
        return name, single_s
    if attr_type == 4:
        return name, tensor
    if attr_type == 6:
        return name, floats
    if attr_type == 7:
        return name, ints
    # Untyped attribute: pick whatever was present.
    for candidate in (single_f, single_i, single_s, tensor):
        if candidate is not None:
            return name, candidate
    return name, ints or floats


def _decode_node(buf: bytes) -> GraphNode:
    inputs: List[str] = []
    outputs: List[str] = []
    attrs: Dict[str, object] = {}
    op_type = ""
    name = ""
    for number, _wire, value in _fields(buf):
        if number == 1:  # NodeProto.input
            inputs.append(value.decode("utf-8"))
        elif number == 2:  # NodeProto.output
            outputs.append(value.decode("utf-8"))
        elif number == 3:  # NodeProto.name
            name = value.decode("utf-8")
        elif number == 4:  # NodeProto.op_type
            op_type = value.decode("utf-8")
        elif number == 5:  # NodeProto.attribute
            attr_name, attr_value = _decode_attribute(value)
            attrs[attr_name] = attr_value
    return GraphNode(op_type=op_type, inputs=inputs, outputs=outputs, attrs=attrs, name=name)


def _decode_graph(buf: bytes) -> Tuple[str, List[GraphNode], Dict[str, np.ndarray], List[TensorInfo], List[TensorInfo]]:
    name = ""
    nodes: List[GraphNode] = []
    initializers: Dict[str, np.ndarray] = {}
    inputs: List[TensorInfo] = []
    outputs: List[TensorInfo] = []
    for number, _wire, value in _fields(buf):
        if number == 1:  # GraphProto.node
            nodes.append(_decode_node(value))
        elif number == 2:  # GraphProto.name
            name = value.decode("utf-8")
        elif number == 5:  # GraphProto.initializer
            tensor_name, array = _decode_tensor(value)
            initializers[tensor_name] = array
        elif number == 11:  # GraphProto.input
            inputs.append(_decode_value_info(value))
        elif number == 12:  # GraphProto.output
            outputs.append(_decode_value_info(value))
    return name, nodes, initializers, inputs, outputs


def load_model(path) -> OnnxModel:
    """Parse a serialized model file into nodes, weights and IO signatures."""
    path = Path(path)
    if not path.is_file():
        raise BackendError(f"model file not found: {path}")
    buf = path.read_bytes()
    graph = None
    producer = ""
    opset = 0
    try:
        for number, _wire, value in _fields(buf):
            if number == 2:  # ModelProto.producer_name
                producer = value.decode("utf-8", "replace")
            elif number == 7:  # ModelProto.graph
                graph = value
            elif number == 8:  # ModelProto.opset_import
                for onum, _ow, oval in _fields(value):
                    if onum == 2:  # OperatorSetIdProto.version
                        opset = max(opset, _signed(oval))
        if graph is None:
            raise BackendError(f"{path}: no graph found in model file")
        name, nodes, initializers, inputs, outputs = _decode_graph(graph)
    except BackendError:
        raise
    except Exception as exc:
        raise BackendError(f"{path}: invalid model file ({exc})") from exc
    # Weight tensors double as graph inputs in older exports; drop them.
    inputs = [i for i in inputs if i.name not in initializers]
    return OnnxModel(
        graph_name=name,
        nodes=nodes,
        initializers=initializers,
        inputs=inputs,
        outputs=outputs,
        producer=producer,
        opset=opset,
    )


# --------------------------------------------------------------------------
# Numpy executor.


def _pair(attr, default) -> Tuple[int, int]:
    if attr is None:
        return default
    values = list(attr)
    return int(values[0]), int(values[1])


def _pads(attrs) -> Tuple[int, int, int, int]:
    pads = attrs.get("pads")
    if pads is None:
        if attrs.get("auto_pad", b"NOTSET") not in (b"NOTSET", "NOTSET", None):
            raise BackendError("auto_pad is not supported; export with explicit pads")
        return 0, 0, 0, 0
    p = [int(x) for x in pads]
    return p[0], p[1], p[2], p[3]  # top, left, bottom, right


def _windows(x: np.ndarray, kh: int, kw: int, sh: int, sw: int,
             pads: Tuple[int, int, int, int], pad_value: float) -> np.ndarray:
    pt, pl, pb, pr = pads
    if any((pt, pl, pb, pr)):
        x = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)), constant_values=pad_value)
    view = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    return view[:, :, ::sh, ::sw]


def _op_conv(node: GraphNode, x: np.ndarray, w: np.ndarray, b: Optional[np.ndarray]) -> np.ndarray:
    if int(node.attrs.get("group", 1)) != 1:
        raise BackendError("grouped convolution is not supported")
    dh, dw = _pair(node.attrs.get("dilations"), (1, 1))
    if (dh, dw) != (1, 1):
        raise BackendError("dilated convolution is not supported")
    sh, sw = _pair(node.attrs.get("strides"), (1, 1))
    m, _cg, kh, kw = w.shape
    win = _windows(x.astype(np.float32), kh, kw, sh, sw, _pads(node.attrs), 0.0)
    n, c, oh, ow = win.shape[0], win.shape[1], win.shape[2], win.shape[3]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c * kh * kw)
    out = cols @ w.reshape(m, -1).astype(np.float32).T
    out = out.reshape(n, oh, ow, m).transpose(0, 3, 1, 2)
    if b is not None:
        out = out + b.astype(np.float32)[None, :, None, None]
    return out


def _op_maxpool(node: GraphNode, x: np.ndarray) -> np.ndarray:
    kh, kw = _pair(node.attrs.get("kernel_shape"), (1, 1))
    sh, sw = _pair(node.attrs.get("strides"), (kh, kw))
    win = _windows(x, kh, kw, sh, sw, _pads(node.attrs), -np.inf)
    return win.max(axis=(4, 5))


def _op_avgpool(node: GraphNode, x: np.ndarray) -> np.ndarray:
    kh, kw = _pair(node.attrs.get("kernel_shape"), (1, 1))
    sh, sw = _pair(node.attrs.get("strides"), (kh, kw))
    win = _windows(x, kh, kw, sh, sw, _pads(node.attrs), 0.0)
    return win.mean(axis=(4, 5))


def _op_gemm(node: GraphNode, a: np.ndarray, b: np.ndarray, c: Optional[np.ndarray]) -> np.ndarray:
    alpha = float(node.attrs.get("alpha", 1.0))
    beta = float(node.attrs.get("beta", 1.0))
    if int(node.attrs.get("transA", 0)):
        a = a.T
    if int(node.attrs.get("transB", 0)):
        b = b.T
    out = alpha * (a.astype(np.float32) @ b.astype(np.float32))
    if c is not None and beta != 0.0:
        out = out + beta * c.astype(np.float32)
    return out


def run_model(model: OnnxModel, feeds: Dict[str, np.ndarray]) -> List[np.ndarray]:
    """Execute the graph over the given input tensors; returns graph outputs."""
    values: Dict[str, np.ndarray] = dict(model.initializers)
    for info in model.inputs:
        if info.name not in feeds:
            raise BackendError(f"missing graph input: {info.name}")
    values.update({k: np.asarray(v) for k, v in feeds.items()})

    def get(name: str) -> np.ndarray:
        if name not in values:
            raise BackendError(f"graph value {name!r} is not available")
        return values[name]

    for node in model.nodes:
        op = node.op_type
        if op == "Conv":
            bias = get(node.inputs[2]) if len(node.inputs) > 2 else None
            result = _op_conv(node, get(node.inputs[0]), get(node.inputs[1]), bias)
        elif op == "Relu":
            result = np.maximum(get(node.inputs[0]), 0)
        elif op == "MaxPool":
            result = _op_maxpool(node, get(node.inputs[0]))
        elif op == "AveragePool":
            result = _op_avgpool(node, get(node.inputs[0]))
        elif op == "GlobalAveragePool":
            result = get(node.inputs[0]).mean(axis=(2, 3), keepdims=True)
        elif op == "Gemm":
            c = get(node.inputs[2]) if len(node.inputs) > 2 else None
            result = _op_gemm(node, get(node.inputs[0]), get(node.inputs[1]), c)
        elif op == "MatMul":
            result = get(node.inputs[0]).astype(np.float32) @ get(node.inputs[1]).astype(np.float32)
        elif op == "Add":
            result = get(node.inputs[0]) + get(node.inputs[1])
        elif op == "Flatten":
            axis = int(node.attrs.get("axis", 1))
            x = get(node.inputs[0])
            lead = int(np.prod(x.shape[:axis])) if axis else 1
            result = x.reshape(lead, -1)
        elif op == "Reshape":
            x = get(node.inputs[0])
            shape = [int(s) for s in get(node.inputs[1]).ravel()]
            shape = [x.shape[i] if s == 0 else s for i, s in enumerate(shape)]
            result = x.reshape(shape)
        elif op == "Transpose":
            perm = node.attrs.get("perm")
            x = get(node.inputs[0])
            result = x.transpose([int(p) for p in perm]) if perm else x.T
        elif op in ("Identity", "Dropout"):
            result = get(node.inputs[0])
        elif op == "Constant":
            result = node.attrs.get("value")
            if result is None:
                raise BackendError("Constant node without a value attribute")
        else:
            raise BackendError(f"unsupported operator: {op}")
        values[node.outputs[0]] = result
        for extra in node.outputs[1:]:
            if extra:  # e.g. Dropout mask output; never consumed here
                values[extra] = result

    return [get(info.name) for info in model.outputs]
