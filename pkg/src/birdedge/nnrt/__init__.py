"""Int8 inference runtime for small convolutional classifiers.

Models are linear layer lists in the style of mobile inverted-residual
nets: regular, depthwise, and pointwise convolutions, relu6, residual
adds, one global average pool, and a final linear classifier. Weights are
symmetric per-tensor int8, activations affine per-tensor int8, accumulation
happens in 32-bit integers, and requantization multiplies by a float32
scale before clamping back to int8.
"""

from .engine import float_reference_infer, infer
from .fixture import generate_fixture_model
from .graph import (
    INPUT_BUFFER,
    LAYER_KINDS,
    WEIGHTED_KINDS,
    LayerSpec,
    ModelGraph,
    ResourceReport,
    validate_graph,
)
from .resources import count_flops, estimate_ram, estimate_rom, resource_report
from .serialize import MODEL_MAGIC, MODEL_VERSION, load_model, save_model

__all__ = [
    "INPUT_BUFFER",
    "LAYER_KINDS",
    "WEIGHTED_KINDS",
    "MODEL_MAGIC",
    "MODEL_VERSION",
    "LayerSpec",
    "ModelGraph",
    "ResourceReport",
    "validate_graph",
    "load_model",
    "save_model",
    "infer",
    "float_reference_infer",
    "count_flops",
    "estimate_ram",
    "estimate_rom",
    "resource_report",
    "generate_fixture_model",
]
