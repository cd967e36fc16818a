"""Layer objects, model specifications and the VGG19-GAP / MLP builders."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .._random import substream
from . import functional as F

VGG19_BLOCKS = ((64, 64), (128, 128), (256, 256, 256, 256), (512, 512, 512, 512), (512, 512, 512, 512))
MLP_HIDDEN = (64, 32)


class Tensor:
    """Parameter storage: values plus an optional gradient of the same shape."""

    def __init__(self, values, grad=None):
        self.values = values
        self.grad = grad
        if grad is not None and grad.shape != values.shape:
            raise ValueError("gradient shape must match values")

    @property
    def shape(self):
        return self.values.shape

    def zero_grad(self):
        self.grad = np.zeros_like(self.values)


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    args: Tuple[int, ...] = ()

    def n_params(self):
        if self.kind == "conv3x3":
            cin, cout = self.args
            return cin * cout * 9 + cout
        if self.kind == "batchnorm":
            return 2 * self.args[0]
        if self.kind == "linear":
            nin, nout = self.args
            return nin * nout + nout
        return 0

    def to_list(self):
        return [self.kind, *self.args]

    @classmethod
    def from_list(cls, item):
        return cls(item[0], tuple(int(a) for a in item[1:]))


LAYER_KINDS = ("conv3x3", "batchnorm", "relu", "maxpool2x2", "gap", "linear")


@dataclass
class ModelSpec:
    layers: List[LayerSpec]
    n_classes: int
    input_shape: Tuple[int, ...]
    width_factor: float = 1.0
    name: str = "custom"

    @property
    def input_side(self):
        return self.input_shape[-1] if len(self.input_shape) == 3 else 0

    def validate(self):
        """Check that channel/feature widths chain from input to classes."""
        width = self.input_shape[0]
        spatial = len(self.input_shape) == 3
        side = min(self.input_shape[1:]) if spatial else 0
        for layer in self.layers:
            if layer.kind not in LAYER_KINDS:
                raise ValueError(f"unknown layer kind {layer.kind!r}")
            if layer.kind in ("conv3x3", "linear"):
                if layer.args[0] != width:
                    raise ValueError(f"{layer.kind}{layer.args} receives width {width}")
                if layer.kind == "conv3x3" and not spatial or layer.kind == "linear" and spatial:
                    raise ValueError(f"{layer.kind} placed on the wrong tensor rank")
                width = layer.args[1]
            elif layer.kind == "batchnorm" and layer.args[0] != width:
                raise ValueError(f"batchnorm{layer.args} receives width {width}")
            elif layer.kind == "maxpool2x2":
                side //= 2
                if side < 1:
                    raise ValueError(f"input {self.input_shape} is too small for the pooling stack")
            elif layer.kind == "gap":
                spatial = False
        if width != self.n_classes or spatial:
            raise ValueError("model must end in a flat layer producing n_classes outputs")
        return self

    def to_dict(self):
        return {
            "name": self.name,
            "layers": [layer.to_list() for layer in self.layers],
            "n_classes": self.n_classes,
            "input_shape": list(self.input_shape),
            "width_factor": self.width_factor,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            [LayerSpec.from_list(item) for item in d["layers"]],
            int(d["n_classes"]),
            tuple(int(v) for v in d["input_shape"]),
            float(d["width_factor"]),
            d.get("name", "custom"),
        ).validate()


def scaled_width(channels, width_factor):
    return max(1, int(math.floor(channels * width_factor + 0.5)))


def build_vgg19_gap(width_factor=1.0, input_side=298, n_classes=4) -> ModelSpec:
    """VGG19 convolutional stack with BatchNorm, ending in global average pooling and one linear layer."""
    if not 0 < width_factor <= 1:
        raise ValueError("width_factor must lie in (0, 1]")
    if input_side < 1 or n_classes < 1:
        raise ValueError("input_side and n_classes must be positive")
    layers = []
    cin = 3
    for block in VGG19_BLOCKS:
        for ch in block:
            cout = scaled_width(ch, width_factor)
            layers += [LayerSpec("conv3x3", (cin, cout)), LayerSpec("batchnorm", (cout,)), LayerSpec("relu")]
            cin = cout
        layers.append(LayerSpec("maxpool2x2"))
    layers += [LayerSpec("gap"), LayerSpec("linear", (cin, n_classes))]
    return ModelSpec(layers, n_classes, (3, input_side, input_side), width_factor, "vgg19_gap").validate()


def build_mlp(n_inputs=30, n_classes=4, hidden=MLP_HIDDEN) -> ModelSpec:
    layers = []
    width = n_inputs
    for h in hidden:
        layers += [LayerSpec("linear", (width, h)), LayerSpec("relu")]
        width = h
    layers.append(LayerSpec("linear", (width, n_classes)))
    return ModelSpec(layers, n_classes, (n_inputs,), 1.0, "mlp").validate()


def count_parameters(spec: ModelSpec) -> int:
    """Weights, biases and BatchNorm affine terms; running statistics excluded."""
    return sum(layer.n_params() for layer in spec.layers)


# ---------------------------------------------------------------- runtime layers

class Layer:
    params: List[Tensor] = []
    buffers: List[np.ndarray] = []

    def forward(self, x, training):
        raise NotImplementedError

    def backward(self, dout):
        raise NotImplementedError


class Conv3x3(Layer):
    def __init__(self, cin, cout, rng, dtype):
        std = math.sqrt(2.0 / (cin * 9))
        self.w = Tensor(rng.normal(0.0, std, (cout, cin, 3, 3)).astype(dtype))
        self.b = Tensor(np.zeros(cout, dtype=dtype))
        self.params = [self.w, self.b]
        self.buffers = []
        self.cache = None

    def forward(self, x, training):
        out, self.cache = F.conv3x3_forward(x, self.w.values, self.b.values)
        return out

    def backward(self, dout):
        dx, self.w.grad, self.b.grad = F.conv3x3_backward(dout, self.cache)
        return dx


class BatchNorm(Layer):
    def __init__(self, ch, dtype):
        self.gamma = Tensor(np.ones(ch, dtype=dtype))
        self.beta = Tensor(np.zeros(ch, dtype=dtype))
        self.running_mean = np.zeros(ch, dtype=dtype)
        self.running_var = np.ones(ch, dtype=dtype)
        self.params = [self.gamma, self.beta]
        self.buffers = [self.running_mean, self.running_var]
        self.cache = None

    def forward(self, x, training):
        out, self.cache = F.batchnorm_forward(
            x, self.gamma.values, self.beta.values, self.running_mean, self.running_var, training
        )
        return out

    def backward(self, dout):
        dx, self.gamma.grad, self.beta.grad = F.batchnorm_backward(dout, self.cache)
        return dx


class ReLU(Layer):
    def __init__(self):
        self.params, self.buffers, self.cache = [], [], None

    def forward(self, x, training):
        out, self.cache = F.relu_forward(x)
        return out

    def backward(self, dout):
        return F.relu_backward(dout, self.cache)


class MaxPool2x2(Layer):
    def __init__(self):
        self.params, self.buffers, self.cache = [], [], None

    def forward(self, x, training):
        out, self.cache = F.maxpool_forward(x)
        return out

    def backward(self, dout):
        return F.maxpool_backward(dout, self.cache)


class GlobalAvgPool(Layer):
    def __init__(self):
        self.params, self.buffers, self.cache = [], [], None

    def forward(self, x, training):
        out, self.cache = F.gap_forward(x)
        return out

    def backward(self, dout):
        return F.gap_backward(dout, self.cache)


class Linear(Layer):
    def __init__(self, nin, nout, rng, dtype):
        self.w = Tensor(rng.normal(0.0, math.sqrt(2.0 / nin), (nout, nin)).astype(dtype))
        self.b = Tensor(np.zeros(nout, dtype=dtype))
        self.params = [self.w, self.b]
        self.buffers = []
        self.cache = None

    def forward(self, x, training):
        out, self.cache = F.linear_forward(x, self.w.values, self.b.values)
        return out

    def backward(self, dout):
        dx, self.w.grad, self.b.grad = F.linear_backward(dout, self.cache)
        return dx


class Network:
    """An instantiated :class:`ModelSpec` holding parameters and running statistics."""

    def __init__(self, spec: ModelSpec, seed=0, dtype=np.float32):
        self.spec = spec.validate()
        self.dtype = np.dtype(dtype)
        rng = substream(seed, "init")
        self.layers: List[Layer] = []
        for ls in spec.layers:
            if ls.kind == "conv3x3":
                self.layers.append(Conv3x3(*ls.args, rng, self.dtype))
            elif ls.kind == "batchnorm":
                self.layers.append(BatchNorm(ls.args[0], self.dtype))
            elif ls.kind == "relu":
                self.layers.append(ReLU())
            elif ls.kind == "maxpool2x2":
                self.layers.append(MaxPool2x2())
            elif ls.kind == "gap":
                self.layers.append(GlobalAvgPool())
            else:
                self.layers.append(Linear(*ls.args, rng, self.dtype))

    def parameters(self) -> List[Tensor]:
        return [p for layer in self.layers for p in layer.params]

    def buffers(self) -> List[np.ndarray]:
        return [b for layer in self.layers for b in layer.buffers]

    def forward(self, x, training=False):
        x = np.asarray(x, dtype=self.dtype)
        for layer in self.layers:
            x = layer.forward(x, training)
        return x

    def backward(self, dout):
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout

    def predict(self, x, batch_size=32):
        out = []
        for i in range(0, len(x), batch_size):
            out.append(np.argmax(self.forward(x[i:i + batch_size], training=False), axis=1))
        return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)
