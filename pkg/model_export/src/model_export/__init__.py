"""One-shot export of a VGG19 fc2 feature extractor to the ONNX interchange
format, plus a reference-feature fixture for cross-checking consumers."""

__version__ = "0.1.0"
