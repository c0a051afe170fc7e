"""Layer execution: the int8 path and its float reference twin.

The int8 path quantizes the input spectrogram with the graph's input
affine, accumulates integer products per layer, and requantizes to int8
between layers by multiplying with a float32 scale and clamping. The one
exception is the terminal linear layer: its 32-bit accumulator is
dequantized directly to float logits (nothing consumes it downstream, so
quantizing it would only discard information) and softmax runs in float.

Accumulators are held in int64 arrays here; for every model this runtime
targets the running values stay far inside the int32 range the scheme is
defined for.

float_reference_infer runs the same dataflow in float32 after dequantizing
all weights and biases, with no activation quantization anywhere. It is the
accuracy oracle the int8 path is measured against.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import ShapeError
from ..melspec import MelSpectrogram
from .graph import INPUT_BUFFER, LayerSpec, ModelGraph, validate_graph


def _im2col(x: np.ndarray, kernel, stride: int, padding: int):
    """Unfold (C, H, W) into (C*kh*kw, Ho*Wo) patches with zero padding."""
    kh, kw = kernel
    if padding:
        x = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(1, 2))
    windows = windows[:, ::stride, ::stride]
    c, ho, wo = windows.shape[:3]
    patches = windows.transpose(0, 3, 4, 1, 2).reshape(c * kh * kw, ho * wo)
    return patches, ho, wo


def _depthwise(x: np.ndarray, weight: np.ndarray, stride: int, padding: int):
    """Per-channel correlation; weight is (C, kh, kw)."""
    kh, kw = weight.shape[1:]
    if padding:
        x = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(1, 2))
    windows = windows[:, ::stride, ::stride]
    return np.einsum("chwkl,ckl->chw", windows, weight)


def _requantize(acc: np.ndarray, multiplier: float, zero_point: int) -> np.ndarray:
    """acc * f32 multiplier, round, shift, clamp to int8."""
    scaled = np.rint(acc * np.float32(multiplier)) + zero_point
    return np.clip(scaled, -128, 127).astype(np.int8)


def _conv_acc(x_centered: np.ndarray, layer: LayerSpec) -> np.ndarray:
    """Integer accumulator of a conv layer on zero-point-centered input."""
    if layer.kind == "depthwise_conv2d":
        weight = layer.weight.reshape(layer.out_ch, *layer.kernel).astype(np.int64)
        acc = _depthwise(x_centered, weight, layer.stride, layer.padding)
    else:
        patches, ho, wo = _im2col(x_centered, layer.kernel, layer.stride, layer.padding)
        weight = layer.weight.reshape(layer.out_ch, -1).astype(np.int64)
        acc = (weight @ patches).reshape(layer.out_ch, ho, wo)
    if layer.bias is not None:
        acc = acc + layer.bias.astype(np.int64)[:, None, None]
    return acc


def _quantize_input(model: ModelGraph, values: np.ndarray) -> np.ndarray:
    q = (
        np.rint(np.asarray(values, dtype=np.float64) / model.input_scale)
        + model.input_zero_point
    )
    return np.clip(q, -128, 127).astype(np.int8).reshape(model.input_shape)


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def _check_input(model: ModelGraph, spec: MelSpectrogram) -> None:
    expected = model.input_shape[1:]
    if spec.values.shape != expected:
        raise ShapeError(
            f"model expects a {expected} spectrogram, got {spec.values.shape}"
        )


def infer(model: ModelGraph, spec: MelSpectrogram) -> np.ndarray:
    """Run the int8 path; returns class probabilities summing to 1."""
    validate_graph(model)
    _check_input(model, spec)
    x = _quantize_input(model, spec.values)
    outputs: list[np.ndarray] = []  # int8 activation of every layer
    scales: list[float] = []
    zero_points: list[int] = []
    in_scale = model.input_scale
    in_zp = model.input_zero_point
    last_index = len(model.layers) - 1

    for i, layer in enumerate(model.layers):
        if layer.kind in ("conv2d", "pointwise_conv2d", "depthwise_conv2d"):
            centered = x.astype(np.int64) - in_zp
            acc = _conv_acc(centered, layer)
            x = _requantize(
                acc,
                in_scale * layer.weight_scale / layer.out_scale,
                layer.out_zero_point,
            )
        elif layer.kind == "relu6":
            real = (x.astype(np.float32) - in_zp) * np.float32(in_scale)
            clipped = np.clip(real, 0.0, 6.0)
            x = _requantize(clipped, 1.0 / layer.out_scale, layer.out_zero_point)
        elif layer.kind == "residual_add":
            if layer.skip_from == INPUT_BUFFER:
                skip = _quantize_input(model, spec.values)
                skip_scale, skip_zp = model.input_scale, model.input_zero_point
            else:
                skip = outputs[layer.skip_from]
                skip_scale = scales[layer.skip_from]
                skip_zp = zero_points[layer.skip_from]
            total = (x.astype(np.float32) - in_zp) * np.float32(
                in_scale / layer.out_scale
            ) + (skip.astype(np.float32) - skip_zp) * np.float32(
                skip_scale / layer.out_scale
            )
            x = np.clip(np.rint(total) + layer.out_zero_point, -128, 127).astype(
                np.int8
            )
        elif layer.kind == "global_avg_pool":
            mean = (x.astype(np.float64) - in_zp).mean(axis=(1, 2))[:, None, None]
            x = _requantize(
                mean, in_scale / layer.out_scale, layer.out_zero_point
            )
        elif layer.kind == "linear":
            vec = x.reshape(-1).astype(np.int64) - in_zp
            acc = layer.weight.reshape(layer.out_ch, layer.in_ch).astype(np.int64) @ vec
            if layer.bias is not None:
                acc = acc + layer.bias.astype(np.int64)
            if i == last_index:
                logits = acc.astype(np.float64) * (in_scale * layer.weight_scale)
                return _softmax(logits)
            x = _requantize(
                acc.reshape(layer.out_ch, 1, 1),
                in_scale * layer.weight_scale / layer.out_scale,
                layer.out_zero_point,
            )
        outputs.append(x)
        scales.append(layer.out_scale)
        zero_points.append(layer.out_zero_point)
        in_scale = layer.out_scale
        in_zp = layer.out_zero_point

    raise AssertionError("validated graph must end in a linear layer")


def _float_forward(model: ModelGraph, values: np.ndarray):
    """Float dataflow shared by the reference path and calibration.

    Returns (logits, per_layer_outputs). Biases are interpreted in units of
    nominal_input_scale * weight_scale, mirroring the int8 path.
    """
    x = np.asarray(values, dtype=np.float32).reshape(model.input_shape)
    outputs: list[np.ndarray] = []
    nominal_scale = model.input_scale
    logits: np.ndarray | None = None

    for i, layer in enumerate(model.layers):
        if layer.kind in ("conv2d", "pointwise_conv2d", "depthwise_conv2d"):
            w = layer.weight.astype(np.float32) * np.float32(layer.weight_scale)
            if layer.kind == "depthwise_conv2d":
                x = _depthwise(
                    x.astype(np.float64),
                    w.reshape(layer.out_ch, *layer.kernel).astype(np.float64),
                    layer.stride,
                    layer.padding,
                ).astype(np.float32)
            else:
                patches, ho, wo = _im2col(
                    x.astype(np.float64), layer.kernel, layer.stride, layer.padding
                )
                x = (
                    (w.reshape(layer.out_ch, -1).astype(np.float64) @ patches)
                    .reshape(layer.out_ch, ho, wo)
                    .astype(np.float32)
                )
            if layer.bias is not None:
                bias_real = layer.bias.astype(np.float32) * np.float32(
                    nominal_scale * layer.weight_scale
                )
                x = x + bias_real[:, None, None]
        elif layer.kind == "relu6":
            x = np.clip(x, 0.0, 6.0)
        elif layer.kind == "residual_add":
            skip = (
                np.asarray(values, dtype=np.float32).reshape(model.input_shape)
                if layer.skip_from == INPUT_BUFFER
                else outputs[layer.skip_from]
            )
            x = x + skip
        elif layer.kind == "global_avg_pool":
            x = x.mean(axis=(1, 2), dtype=np.float64).astype(np.float32)[
                :, None, None
            ]
        elif layer.kind == "linear":
            w = layer.weight.reshape(layer.out_ch, layer.in_ch).astype(
                np.float32
            ) * np.float32(layer.weight_scale)
            acc = w.astype(np.float64) @ x.reshape(-1).astype(np.float64)
            if layer.bias is not None:
                acc = acc + layer.bias.astype(np.float64) * (
                    nominal_scale * layer.weight_scale
                )
            x = acc.astype(np.float32).reshape(layer.out_ch, 1, 1)
            if i == len(model.layers) - 1:
                logits = acc
        outputs.append(x)
        nominal_scale = layer.out_scale
    assert logits is not None
    return logits, outputs


def float_reference_infer(model: ModelGraph, spec: MelSpectrogram) -> np.ndarray:
    """Run the dequantized float path; returns class probabilities."""
    validate_graph(model)
    _check_input(model, spec)
    logits, _ = _float_forward(model, spec.values)
    return _softmax(logits)
