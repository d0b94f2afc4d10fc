"""VGG19 truncated at the fc2 activation, plus the graph assembly that turns
any torchvision-style conv stack into ONNX message chunks.

The exported output is the 4096-dim activation of the second fully-connected
layer (post-ReLU). Preprocessing (resize, RGB order, mean subtraction) is
deliberately NOT baked into the graph; the consumer owns it so histogram and
CNN extractors share one preprocessing path.
"""

from __future__ import annotations

from typing import List, Sequence, Tuple

import numpy as np
import torch
from torch import nn

from . import protowire as pw

INPUT_SIZE = 224
OUTPUT_DIM = 4096


class Fc2Extractor(nn.Module):
    """Conv features -> flatten -> fc1 -> ReLU -> fc2 -> ReLU."""

    def __init__(self, features: nn.Sequential, fc1: nn.Linear, fc2: nn.Linear):
        super().__init__()
        self.features = features
        self.fc1 = fc1
        self.fc2 = fc2

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.features(x)
        x = torch.flatten(x, 1)
        x = torch.relu(self.fc1(x))
        return torch.relu(self.fc2(x))


def build_vgg19_fc2(weights: str = "seeded:0") -> Fc2Extractor:
    """Build the truncated VGG19.

    weights: "pretrained" (torchvision download/cache), "seeded:<int>"
    (architecture-faithful deterministic random weights, for offline
    environments; export fidelity does not depend on weight values), or
    "file:<path>" (a torchvision-format vgg19 state dict).
    """
    import torchvision.models as tvm

    if weights == "pretrained":
        try:
            vgg = tvm.vgg19(weights=tvm.VGG19_Weights.IMAGENET1K_V1)
        except Exception as exc:
            raise RuntimeError(
                "pretrained VGG19 weights are not obtainable here (download "
                "failed); use --weights seeded:<int> or --weights file:<path> "
                f"instead. Cause: {exc}"
            ) from exc
    elif weights.startswith("seeded:"):
        torch.manual_seed(int(weights.split(":", 1)[1]))
        vgg = tvm.vgg19(weights=None)
    elif weights.startswith("file:"):
        vgg = tvm.vgg19(weights=None)
        state = torch.load(weights.split(":", 1)[1], map_location="cpu",
                           weights_only=True)
        vgg.load_state_dict(state)
    else:
        raise ValueError(
            f"unknown weights spec {weights!r}; use pretrained, seeded:<int> "
            "or file:<path>"
        )
    model = Fc2Extractor(vgg.features, vgg.classifier[0], vgg.classifier[3])
    model.eval()
    return model


def _f32(tensor: torch.Tensor) -> np.ndarray:
    return np.asarray(tensor.detach().cpu().numpy(), dtype="<f4")


def graph_chunks(model: Fc2Extractor, graph_name: str = "vgg19_fc2") -> pw.Encoded:
    """Assemble the ONNX model bytes for an Fc2Extractor.

    Walks the features Sequential (Conv2d / ReLU / MaxPool2d) and appends the
    two dense layers. Works for reduced test architectures as long as they
    follow the same module layout and take a 224x224x3 input.
    """
    nodes: List[pw.Encoded] = []
    initializers: List[pw.Encoded] = []
    current = "input"
    conv_index = 0
    pool_index = 0

    def conv(name: str, module: nn.Conv2d, source: str) -> str:
        weight_name, bias_name, out_name = f"{name}_w", f"{name}_b", f"{name}_out"
        initializers.append(pw.tensor_proto(weight_name, _f32(module.weight)))
        initializers.append(pw.tensor_proto(bias_name, _f32(module.bias)))
        pads = [module.padding[0], module.padding[1],
                module.padding[0], module.padding[1]]
        nodes.append(pw.node_proto(
            "Conv", [source, weight_name, bias_name], [out_name],
            attributes=[
                pw.attribute_ints("kernel_shape", list(module.kernel_size)),
                pw.attribute_ints("strides", list(module.stride)),
                pw.attribute_ints("pads", pads),
            ],
            name=name,
        ))
        return out_name

    for module in model.features:
        if isinstance(module, nn.Conv2d):
            conv_index += 1
            current = conv(f"conv{conv_index}", module, current)
        elif isinstance(module, nn.ReLU):
            out_name = f"{current}_relu"
            nodes.append(pw.node_proto("Relu", [current], [out_name]))
            current = out_name
        elif isinstance(module, nn.MaxPool2d):
            pool_index += 1
            out_name = f"pool{pool_index}_out"
            kernel = module.kernel_size if isinstance(module.kernel_size, (tuple, list)) \
                else (module.kernel_size, module.kernel_size)
            stride = module.stride if isinstance(module.stride, (tuple, list)) \
                else (module.stride, module.stride)
            nodes.append(pw.node_proto(
                "MaxPool", [current], [out_name],
                attributes=[
                    pw.attribute_ints("kernel_shape", list(kernel)),
                    pw.attribute_ints("strides", list(stride)),
                ],
                name=f"pool{pool_index}",
            ))
            current = out_name
        else:
            raise ValueError(f"unsupported features module: {type(module).__name__}")

    nodes.append(pw.node_proto("Flatten", [current], ["flat"],
                               attributes=[pw.attribute_int("axis", 1)]))
    current = "flat"
    for idx, linear in enumerate((model.fc1, model.fc2), start=1):
        weight_name, bias_name = f"fc{idx}_w", f"fc{idx}_b"
        initializers.append(pw.tensor_proto(weight_name, _f32(linear.weight)))
        initializers.append(pw.tensor_proto(bias_name, _f32(linear.bias)))
        out_name = f"fc{idx}_out"
        nodes.append(pw.node_proto(
            "Gemm", [current, weight_name, bias_name], [out_name],
            attributes=[pw.attribute_int("transB", 1)],
            name=f"fc{idx}",
        ))
        relu_name = "output" if idx == 2 else f"fc{idx}_relu"
        nodes.append(pw.node_proto("Relu", [out_name], [relu_name]))
        current = relu_name

    in_channels = model.features[0].in_channels
    graph = pw.graph_proto(
        graph_name,
        nodes=nodes,
        initializers=initializers,
        inputs=[pw.value_info("input", (1, in_channels, INPUT_SIZE, INPUT_SIZE))],
        outputs=[pw.value_info("output", (1, model.fc2.out_features))],
    )
    return pw.model_proto(graph, producer="model-export")


def expected_flat_dim(model: Fc2Extractor) -> Tuple[int, int]:
    """(fc1 input dim, fc2 output dim) as wired in the module."""
    return model.fc1.in_features, model.fc2.out_features


def reduced_test_extractor(seed: int = 0) -> Fc2Extractor:
    """Tiny VGG-shaped network with the real input/output geometry; used by
    tests to exercise the full export path in seconds."""
    torch.manual_seed(seed)
    features = nn.Sequential(
        nn.Conv2d(3, 4, kernel_size=3, padding=1), nn.ReLU(inplace=True),
        nn.MaxPool2d(kernel_size=2, stride=2),
        nn.Conv2d(4, 6, kernel_size=3, padding=1), nn.ReLU(inplace=True),
        nn.MaxPool2d(kernel_size=2, stride=2),
        nn.MaxPool2d(kernel_size=2, stride=2),
        nn.MaxPool2d(kernel_size=2, stride=2),
        nn.MaxPool2d(kernel_size=2, stride=2),
    )
    fc1 = nn.Linear(6 * 7 * 7, 64)
    fc2 = nn.Linear(64, OUTPUT_DIM)
    model = Fc2Extractor(features, fc1, fc2)
    model.eval()
    return model
