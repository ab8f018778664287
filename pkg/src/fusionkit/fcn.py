"""Small dense/convolutional nets and fully-connected-to-convolution rewrites.

Converting the trailing fully-connected layers of a fixed-input classifier
into convolutions (the first FC becomes an HxWxC kernel, later ones 1x1
kernels; weights are only reshaped) turns it into a sliding-window detector:
fed a larger image it emits a spatial map whose per-location channel pair is
softmax-normalized to sum to one.

Tensors are (height, width, channels) float arrays in row-major (y, x, c)
order; convolutions use valid padding and integer strides.
"""

from dataclasses import dataclass, field

import numpy as np

from fusionkit import backend
from fusionkit.errors import DimensionMismatchError, SchemaError


@dataclass
class ConvLayer:
    weights: np.ndarray  # (kh, kw, c_in, c_out)
    bias: np.ndarray
    stride: int = 1


@dataclass
class MaxPoolLayer:
    window: int
    stride: int


@dataclass
class ReluLayer:
    pass


@dataclass
class FCLayer:
    weights: np.ndarray  # (d_out, d_in)
    bias: np.ndarray


@dataclass
class ChannelSoftmax:
    pass


@dataclass
class SmallNet:
    layers: list = field(default_factory=list)


def _window_out(h, w, kh, kw, stride, what):
    if kh > h or kw > w:
        raise ValueError(f"{what} size {kh}x{kw} exceeds input {h}x{w}")
    if stride < 1:
        raise ValueError(f"{what} stride must be >= 1")
    return (h - kh) // stride + 1, (w - kw) // stride + 1


def _maxpool(x, window, stride):
    h, w, c = x.shape
    oh, ow = _window_out(h, w, window, window, stride, "pool window")
    out = np.full((oh, ow, c), -np.inf)
    for wy in range(window):
        for wx in range(window):
            patch = x[wy : wy + oh * stride : stride, wx : wx + ow * stride : stride, :]
            np.maximum(out, patch, out=out)
    return out


def channel_softmax(x):
    shifted = x - x.max(axis=2, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=2, keepdims=True)


def forward(net, x):
    """Evaluate the layer chain on an (h, w, c) tensor."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise DimensionMismatchError(f"expected (h, w, c) tensor, got {x.shape}")
    for layer in net.layers:
        if isinstance(layer, ConvLayer):
            kh, kw, c_in, _ = layer.weights.shape
            if x.shape[2] != c_in:
                raise DimensionMismatchError(
                    f"convolution expects {c_in} channels, got {x.shape[2]}"
                )
            _window_out(x.shape[0], x.shape[1], kh, kw, layer.stride, "kernel")
            x = backend.conv2d_valid(x, layer.weights, layer.bias, layer.stride)
        elif isinstance(layer, MaxPoolLayer):
            x = _maxpool(x, layer.window, layer.stride)
        elif isinstance(layer, ReluLayer):
            x = np.maximum(0.0, x)
        elif isinstance(layer, FCLayer):
            d_out, d_in = layer.weights.shape
            if x.size != d_in:
                raise DimensionMismatchError(
                    f"fully-connected layer expects {d_in} inputs, got tensor "
                    f"of size {x.size}"
                )
            x = (layer.weights @ x.ravel() + layer.bias).reshape(1, 1, d_out)
        elif isinstance(layer, ChannelSoftmax):
            x = channel_softmax(x)
        else:
            raise TypeError(f"unknown layer {layer!r}")
    return x


def fc_to_conv(net, canonical_input):
    """Rewrite fully-connected layers as convolutions.

    ``canonical_input`` is the (h, w, c) shape the net was designed for.  The
    first FC layer becomes a convolution whose kernel covers its incoming
    feature map exactly; subsequent FC layers become 1x1 convolutions.
    Weights are reshaped, never altered, so at the canonical input size the
    converted net computes the original function at output location (0, 0).
    """
    h, w, c = canonical_input
    if h < 1 or w < 1 or c < 1:
        raise ValueError(f"bad canonical input shape {canonical_input}")
    converted = []
    for layer in net.layers:
        if isinstance(layer, ConvLayer):
            kh, kw, c_in, c_out = layer.weights.shape
            if c != c_in:
                raise DimensionMismatchError(
                    f"convolution expects {c_in} channels, got {c}"
                )
            (h, w), c = _window_out(h, w, kh, kw, layer.stride, "kernel"), c_out
            converted.append(layer)
        elif isinstance(layer, MaxPoolLayer):
            h, w = _window_out(h, w, layer.window, layer.window, layer.stride,
                               "pool window")
            converted.append(layer)
        elif isinstance(layer, FCLayer):
            d_out, d_in = layer.weights.shape
            if d_in != h * w * c:
                raise DimensionMismatchError(
                    f"cannot resolve a spatial shape for a fully-connected layer "
                    f"of {d_in} inputs at feature map {h}x{w}x{c}"
                )
            kernel = layer.weights.reshape(d_out, h, w, c).transpose(1, 2, 3, 0)
            converted.append(ConvLayer(weights=kernel, bias=layer.bias, stride=1))
            h, w, c = 1, 1, d_out
        else:
            converted.append(layer)
    return SmallNet(layers=converted)


def heatmap(net, image):
    """Two-channel spatial map from a converted net; channels sum to one.

    The net must end in a channel softmax over exactly two channels.
    """
    if not net.layers or not isinstance(net.layers[-1], ChannelSoftmax):
        raise ValueError("net must end in a channel softmax")
    channels = None
    for layer in reversed(net.layers):
        if isinstance(layer, ConvLayer):
            channels = layer.weights.shape[3]
            break
        if isinstance(layer, FCLayer):
            channels = layer.weights.shape[0]
            break
    if channels != 2:
        raise ValueError(f"terminal layer has {channels} channels, expected 2")
    return forward(net, image)


NET_MAGIC = "fusionkit-net v1"


def save_net(net, path):
    lines = [NET_MAGIC]
    for layer in net.layers:
        if isinstance(layer, ConvLayer):
            kh, kw, c_in, c_out = layer.weights.shape
            lines.append(f"conv {kh} {kw} {c_in} {c_out} {layer.stride}")
            lines.append("weights " + " ".join(repr(float(v)) for v in layer.weights.ravel()))
            lines.append("bias " + " ".join(repr(float(v)) for v in layer.bias.ravel()))
        elif isinstance(layer, MaxPoolLayer):
            lines.append(f"maxpool {layer.window} {layer.stride}")
        elif isinstance(layer, ReluLayer):
            lines.append("relu")
        elif isinstance(layer, FCLayer):
            d_out, d_in = layer.weights.shape
            lines.append(f"fc {d_in} {d_out}")
            lines.append("weights " + " ".join(repr(float(v)) for v in layer.weights.ravel()))
            lines.append("bias " + " ".join(repr(float(v)) for v in layer.bias.ravel()))
        elif isinstance(layer, ChannelSoftmax):
            lines.append("softmax")
        else:
            raise TypeError(f"unknown layer {layer!r}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def _parse_floats(line, expected, what, lineno):
    key, _, rest = line.partition(" ")
    values = np.array([float(v) for v in rest.split()])
    if key != what or values.size != expected:
        raise SchemaError(f"expected {expected} {what} values", line=lineno)
    return values


def load_net(path):
    with open(path) as f:
        lines = [ln.strip() for ln in f]
    if not lines or lines[0] != NET_MAGIC:
        raise SchemaError(f"not a net file: {path}")
    layers = []
    i = 1
    while i < len(lines):
        line = lines[i]
        if not line:
            i += 1
            continue
        parts = line.split()
        kind = parts[0]
        try:
            if kind == "conv":
                kh, kw, c_in, c_out, stride = (int(v) for v in parts[1:6])
                weights = _parse_floats(
                    lines[i + 1], kh * kw * c_in * c_out, "weights", i + 2
                ).reshape(kh, kw, c_in, c_out)
                bias = _parse_floats(lines[i + 2], c_out, "bias", i + 3)
                layers.append(ConvLayer(weights=weights, bias=bias, stride=stride))
                i += 3
            elif kind == "fc":
                d_in, d_out = int(parts[1]), int(parts[2])
                weights = _parse_floats(
                    lines[i + 1], d_out * d_in, "weights", i + 2
                ).reshape(d_out, d_in)
                bias = _parse_floats(lines[i + 2], d_out, "bias", i + 3)
                layers.append(FCLayer(weights=weights, bias=bias))
                i += 3
            elif kind == "maxpool":
                layers.append(MaxPoolLayer(window=int(parts[1]), stride=int(parts[2])))
                i += 1
            elif kind == "relu":
                layers.append(ReluLayer())
                i += 1
            elif kind == "softmax":
                layers.append(ChannelSoftmax())
                i += 1
            else:
                raise SchemaError(f"unknown layer kind {kind!r}", line=i + 1)
        except (ValueError, IndexError):
            raise SchemaError(f"malformed layer declaration {line!r}", line=i + 1) from None
    return SmallNet(layers=layers)
