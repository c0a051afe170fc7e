"""Model graph data types, shape inference, and structural validation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..exceptions import GraphError

LAYER_KINDS = (
    "conv2d",
    "depthwise_conv2d",
    "pointwise_conv2d",
    "relu6",
    "residual_add",
    "global_avg_pool",
    "linear",
)
WEIGHTED_KINDS = ("conv2d", "depthwise_conv2d", "pointwise_conv2d", "linear")

# Skip source index meaning "the quantized graph input".
INPUT_BUFFER = -1


@dataclass
class LayerSpec:
    """One layer of a model graph.

    Weighted kinds carry an int8 weight tensor with a symmetric per-tensor
    scale (weight_zero_point is kept in the record but is always 0) and an
    optional per-output-channel int32 bias expressed in units of
    input_scale * weight_scale. Every kind carries the affine quantization
    of its output activation.
    """

    kind: str
    in_ch: int = 0
    out_ch: int = 0
    kernel: tuple[int, int] = (1, 1)
    stride: int = 1
    padding: int = 0
    weight: np.ndarray | None = None        # int8
    weight_scale: float = 1.0
    weight_zero_point: int = 0
    bias: np.ndarray | None = None          # int32, length out_ch
    out_scale: float = 1.0
    out_zero_point: int = 0
    skip_from: int | None = None            # residual_add only

    def weight_count(self) -> int:
        if self.kind in ("conv2d", "pointwise_conv2d"):
            return self.out_ch * self.in_ch * self.kernel[0] * self.kernel[1]
        if self.kind == "depthwise_conv2d":
            return self.out_ch * self.kernel[0] * self.kernel[1]
        if self.kind == "linear":
            return self.out_ch * self.in_ch
        return 0


@dataclass
class ModelGraph:
    """An ordered layer list plus input quantization and class count."""

    layers: list[LayerSpec] = field(default_factory=list)
    class_count: int = 2
    input_shape: tuple[int, int, int] = (1, 64, 249)
    input_scale: float = 80.0 / 255.0
    input_zero_point: int = 127


@dataclass(frozen=True)
class ResourceReport:
    """Static cost estimates for one model."""

    flops: int
    ram_bytes: int
    rom_bytes: int


def output_shape(
    layer: LayerSpec, in_shape: tuple[int, int, int]
) -> tuple[int, int, int]:
    """Shape of the layer output given its input shape (C, H, W).

    Raises GraphError on any incompatibility.
    """
    c, h, w = in_shape
    kind = layer.kind
    if kind in ("conv2d", "pointwise_conv2d", "depthwise_conv2d"):
        kh, kw = layer.kernel
        if layer.in_ch != c:
            raise GraphError(f"{kind} expects {layer.in_ch} channels, input has {c}")
        if kind == "depthwise_conv2d" and layer.out_ch != c:
            raise GraphError(
                f"depthwise conv must preserve channels, got {c} -> {layer.out_ch}"
            )
        if kind == "pointwise_conv2d" and (kh, kw) != (1, 1):
            raise GraphError(f"pointwise conv must use a 1x1 kernel, got {kh}x{kw}")
        ho = (h + 2 * layer.padding - kh) // layer.stride + 1
        wo = (w + 2 * layer.padding - kw) // layer.stride + 1
        if ho < 1 or wo < 1:
            raise GraphError(
                f"{kind} kernel {kh}x{kw} stride {layer.stride} does not fit "
                f"input {h}x{w}"
            )
        return (layer.out_ch, ho, wo)
    if kind in ("relu6", "residual_add"):
        return (c, h, w)
    if kind == "global_avg_pool":
        return (c, 1, 1)
    if kind == "linear":
        if (h, w) != (1, 1):
            raise GraphError(f"linear layer needs a pooled (C,1,1) input, got {in_shape}")
        if layer.in_ch != c:
            raise GraphError(f"linear expects {layer.in_ch} features, input has {c}")
        return (layer.out_ch, 1, 1)
    raise GraphError(f"unknown layer kind {kind!r}")


def activation_shapes(model: ModelGraph) -> list[tuple[int, int, int]]:
    """Output shape of every layer, validating the chain as it goes."""
    shapes: list[tuple[int, int, int]] = []
    current = model.input_shape
    for i, layer in enumerate(model.layers):
        if layer.kind == "residual_add":
            if layer.skip_from is None:
                raise GraphError(f"layer {i}: residual_add without a skip source")
            if not INPUT_BUFFER <= layer.skip_from < i:
                raise GraphError(
                    f"layer {i}: skip source {layer.skip_from} out of range"
                )
            skip_shape = (
                model.input_shape
                if layer.skip_from == INPUT_BUFFER
                else shapes[layer.skip_from]
            )
            if skip_shape != current:
                raise GraphError(
                    f"layer {i}: residual operands differ, {current} vs {skip_shape}"
                )
        try:
            current = output_shape(layer, current)
        except GraphError as err:
            raise GraphError(f"layer {i}: {err}") from None
        shapes.append(current)
    return shapes


def validate_graph(model: ModelGraph) -> None:
    """Check the whole graph; raise GraphError on the first violation."""
    if not model.layers:
        raise GraphError("model has no layers")
    if len(model.input_shape) != 3 or any(d < 1 for d in model.input_shape):
        raise GraphError(f"bad input shape {model.input_shape}")
    if model.input_shape[0] != 1:
        raise GraphError(
            f"input must have exactly 1 channel, got {model.input_shape[0]}"
        )
    if model.input_scale <= 0:
        raise GraphError(f"input scale must be positive, got {model.input_scale}")
    if model.class_count < 1:
        raise GraphError(f"class count must be >= 1, got {model.class_count}")

    for i, layer in enumerate(model.layers):
        if layer.kind not in LAYER_KINDS:
            raise GraphError(f"layer {i}: unknown kind {layer.kind!r}")
        if layer.out_scale <= 0:
            raise GraphError(f"layer {i}: output scale must be positive")
        if layer.kind in WEIGHTED_KINDS:
            if layer.weight is None:
                raise GraphError(f"layer {i}: {layer.kind} has no weights")
            if layer.weight.dtype != np.int8:
                raise GraphError(
                    f"layer {i}: weights must be int8, got {layer.weight.dtype}"
                )
            if layer.weight.size != layer.weight_count():
                raise GraphError(
                    f"layer {i}: expected {layer.weight_count()} weights, "
                    f"got {layer.weight.size}"
                )
            if layer.weight_scale <= 0:
                raise GraphError(f"layer {i}: weight scale must be positive")
            if layer.weight_zero_point != 0:
                raise GraphError(
                    f"layer {i}: symmetric weights require zero point 0, "
                    f"got {layer.weight_zero_point}"
                )
            if layer.bias is not None:
                if layer.bias.dtype != np.int32 or layer.bias.size != layer.out_ch:
                    raise GraphError(
                        f"layer {i}: bias must be int32 of length {layer.out_ch}"
                    )
            if min(layer.kernel) < 1 or layer.stride < 1 or layer.padding < 0:
                raise GraphError(f"layer {i}: bad kernel geometry")

    activation_shapes(model)  # validates chain compatibility and residuals

    last = model.layers[-1]
    if last.kind != "linear":
        raise GraphError(f"last layer must be linear, got {last.kind}")
    if last.out_ch != model.class_count:
        raise GraphError(
            f"final layer emits {last.out_ch} logits for {model.class_count} classes"
        )
