"""The FLEXCONN topology: per-contrast pathways, concatenation, fusion, head.

Each contrast (e.g. MPRAGE, FLAIR) is passed through its own stack of
conv+ReLU filter banks. The stacks' outputs are concatenated along the
channel axis, run through a second stack of the same shape, and a single
3x3 filter with ReLU produces the membership map. All convolutions keep
the spatial size, so the network works on a 35x35 patch and on a whole
181x217 slice alike.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np

from .numerics import (
    Conv2DLayer,
    conv2d_backward,
    conv2d_forward,
    glorot_uniform,
    relu,
    relu_backward,
)

__all__ = [
    "PathwayConfig",
    "NetworkConfig",
    "Network",
    "ForwardCache",
    "MIN_DEPTH",
    "MAX_DEPTH",
    "build_network",
    "count_parameters",
    "count_biases",
    "receptive_radius",
    "forward_training",
    "backward",
    "forward_batch",
    "forward_slice",
    "check_gradients",
]

MIN_DEPTH = 2
MAX_DEPTH = 6


@dataclass(frozen=True)
class PathwayConfig:
    """Ordered ``(num_filters, kernel_size)`` filter banks."""

    banks: Tuple[Tuple[int, int], ...] = ((128, 3), (64, 5), (32, 3), (16, 5), (8, 3))

    def __post_init__(self):
        banks = tuple((int(f), int(k)) for f, k in self.banks)
        object.__setattr__(self, "banks", banks)
        for f, k in banks:
            if f < 1:
                raise ValueError(f"filter count must be >= 1, got {f}")
            if k < 1 or k % 2 != 1:
                raise ValueError(f"kernel size must be odd, got {k}")

    @classmethod
    def from_depth(cls, depth: int, last_filters: int = 8) -> "PathwayConfig":
        """Filter counts halve down to ``last_filters``; kernels alternate 3, 5, 3, ...

        ``from_depth(5)`` is the 128/64/32/16/8 pathway.
        """
        if not MIN_DEPTH <= depth <= MAX_DEPTH:
            raise ValueError(f"pathway depth must be in {MIN_DEPTH}..{MAX_DEPTH}, got {depth}")
        banks = tuple(
            (last_filters * 2 ** (depth - 1 - i), 3 if i % 2 == 0 else 5) for i in range(depth)
        )
        return cls(banks)

    @property
    def depth(self) -> int:
        return len(self.banks)

    @property
    def pads(self) -> Tuple[int, ...]:
        return tuple((k - 1) // 2 for _, k in self.banks)

    @property
    def out_channels(self) -> int:
        return self.banks[-1][0]


@dataclass(frozen=True)
class NetworkConfig:
    num_contrasts: int = 2
    contrast_pathway: PathwayConfig = field(default_factory=PathwayConfig)
    fusion_pathway: PathwayConfig = field(default_factory=PathwayConfig)
    head_kernel: int = 3

    def __post_init__(self):
        if self.num_contrasts < 1:
            raise ValueError(f"num_contrasts must be >= 1, got {self.num_contrasts}")
        if self.head_kernel % 2 != 1:
            raise ValueError(f"head kernel must be odd, got {self.head_kernel}")
        for name, pw in (("contrast", self.contrast_pathway), ("fusion", self.fusion_pathway)):
            if not MIN_DEPTH <= pw.depth <= MAX_DEPTH:
                raise ValueError(
                    f"{name} pathway depth must be in {MIN_DEPTH}..{MAX_DEPTH}, got {pw.depth}"
                )

    @classmethod
    def from_depth(cls, depth: int = 5, num_contrasts: int = 2, last_filters: int = 8):
        pw = PathwayConfig.from_depth(depth, last_filters)
        return cls(num_contrasts=num_contrasts, contrast_pathway=pw, fusion_pathway=pw)

    @property
    def fusion_in_channels(self) -> int:
        return self.contrast_pathway.out_channels * self.num_contrasts


@dataclass
class Network:
    config: NetworkConfig
    pathways: List[List[Conv2DLayer]]
    fusion: List[Conv2DLayer]
    head: Conv2DLayer

    def layers(self) -> List[Conv2DLayer]:
        """All layers in canonical order: pathways by contrast, fusion, head."""
        out = [layer for pw in self.pathways for layer in pw]
        out.extend(self.fusion)
        out.append(self.head)
        return out

    def parameters(self) -> List[np.ndarray]:
        """Flat ``[w0, b0, w1, b1, ...]`` list in canonical layer order."""
        params = []
        for layer in self.layers():
            params.append(layer.weights)
            params.append(layer.bias)
        return params

    def with_parameters(self, params: Sequence[np.ndarray]) -> "Network":
        """A new network with the same config and the given parameter arrays."""
        expected = 2 * len(self.layers())
        if len(params) != expected:
            raise ValueError(f"expected {expected} parameter arrays, got {len(params)}")
        it = iter(params)

        def take() -> Conv2DLayer:
            return Conv2DLayer(next(it), next(it))

        pathways = [[take() for _ in pw] for pw in self.pathways]
        fusion = [take() for _ in self.fusion]
        head = take()
        return Network(self.config, pathways, fusion, head)

    def copy(self) -> "Network":
        return self.with_parameters([p.copy() for p in self.parameters()])

    def astype(self, dtype) -> "Network":
        return self.with_parameters([p.astype(dtype) for p in self.parameters()])

    @property
    def dtype(self):
        return self.head.weights.dtype


def _stack(pathway: PathwayConfig, c_in: int, rng, dtype) -> List[Conv2DLayer]:
    layers = []
    for filters, k in pathway.banks:
        w = glorot_uniform((filters, c_in, k, k), rng, dtype)
        layers.append(Conv2DLayer(w, np.zeros(filters, dtype=dtype)))
        c_in = filters
    return layers


def build_network(config: NetworkConfig = NetworkConfig(), seed: int = 0, dtype=np.float32) -> Network:
    """Randomly initialised network; identical for identical ``(config, seed)``."""
    rng = np.random.default_rng(seed)
    pathways = [_stack(config.contrast_pathway, 1, rng, dtype) for _ in range(config.num_contrasts)]
    fusion = _stack(config.fusion_pathway, config.fusion_in_channels, rng, dtype)
    k = config.head_kernel
    c_in = config.fusion_pathway.out_channels
    head = Conv2DLayer(glorot_uniform((1, c_in, k, k), rng, dtype), np.zeros(1, dtype=dtype))
    return Network(config, pathways, fusion, head)


def _layers_of(net: Union[Network, Iterable[Conv2DLayer]]) -> List[Conv2DLayer]:
    return net.layers() if isinstance(net, Network) else list(net)


def count_parameters(net: Union[Network, Iterable[Conv2DLayer]]) -> int:
    """Number of convolution weights (k*k*c_in*c_out summed over layers), biases excluded."""
    return sum(layer.n_weights for layer in _layers_of(net))


def count_biases(net: Union[Network, Iterable[Conv2DLayer]]) -> int:
    return sum(layer.c_out for layer in _layers_of(net))


def receptive_radius(config: NetworkConfig) -> int:
    """Half-width of the square input region that influences one output voxel."""
    r = sum(p for p in config.contrast_pathway.pads)
    r += sum(p for p in config.fusion_pathway.pads)
    return r + (config.head_kernel - 1) // 2


@dataclass
class ForwardCache:
    # (layer input, pre-activation) per layer, in canonical order
    pathway_io: List[List[Tuple[np.ndarray, np.ndarray]]]
    fusion_io: List[Tuple[np.ndarray, np.ndarray]]
    head_io: Tuple[np.ndarray, np.ndarray]


def _run_stack(layers: List[Conv2DLayer], x: np.ndarray, io: list) -> np.ndarray:
    for layer in layers:
        z = conv2d_forward(x, layer)
        io.append((x, z))
        x = relu(z)
    return x


def _check_inputs(net: Network, inputs: Sequence[np.ndarray]) -> None:
    if len(inputs) != net.config.num_contrasts:
        raise ValueError(
            f"network expects {net.config.num_contrasts} contrasts, got {len(inputs)}"
        )
    shape = inputs[0].shape
    for x in inputs:
        if x.ndim != 4 or x.shape[1] != 1:
            raise ValueError(f"each contrast batch must be (n, 1, h, w), got {x.shape}")
        if x.shape != shape:
            raise ValueError(f"contrast batches disagree in shape: {shape} vs {x.shape}")


def forward_training(
    net: Network, inputs: Sequence[np.ndarray]
) -> Tuple[np.ndarray, ForwardCache]:
    """Unclamped forward pass on one ``(n, 1, h, w)`` batch per contrast.

    Returns the ``(n, 1, h, w)`` membership prediction and the activations
    needed by :func:`backward`.
    """
    _check_inputs(net, inputs)
    pathway_io = []
    outs = []
    for layers, x in zip(net.pathways, inputs):
        io: list = []
        outs.append(_run_stack(layers, x.astype(net.dtype, copy=False), io))
        pathway_io.append(io)
    fused = np.concatenate(outs, axis=1)
    fusion_io: list = []
    a = _run_stack(net.fusion, fused, fusion_io)
    z = conv2d_forward(a, net.head)
    return relu(z), ForwardCache(pathway_io, fusion_io, (a, z))


def _backprop_stack(layers, io, grad, grads_out, input_grad=True):
    last = len(layers) - 1
    for i, (layer, (x, z)) in enumerate(zip(reversed(layers), reversed(io))):
        gz = relu_backward(z, grad)
        grad, gw, gb = conv2d_backward(x, layer, gz, input_grad or i < last)
        grads_out.append((gw, gb))
    return grad


def backward(net: Network, cache: ForwardCache, grad_out: np.ndarray) -> List[np.ndarray]:
    """Parameter gradients, ordered like :meth:`Network.parameters`."""
    a, z = cache.head_io
    gz = relu_backward(z, grad_out)
    grad, head_w, head_b = conv2d_backward(a, net.head, gz)

    fusion_grads: list = []
    grad = _backprop_stack(net.fusion, cache.fusion_io, grad, fusion_grads)

    pathway_grads = []
    offset = 0
    for layers, io in zip(net.pathways, cache.pathway_io):
        width = layers[-1].c_out
        g: list = []
        _backprop_stack(layers, io, grad[:, offset : offset + width], g, input_grad=False)
        pathway_grads.append(g[::-1])
        offset += width

    flat: List[np.ndarray] = []
    for g in pathway_grads:
        for gw, gb in g:
            flat.extend((gw, gb))
    for gw, gb in fusion_grads[::-1]:
        flat.extend((gw, gb))
    flat.extend((head_w, head_b))
    return flat


def forward_batch(net: Network, inputs: Sequence[np.ndarray], clamp: bool = True) -> np.ndarray:
    out, _ = forward_training(net, inputs)
    return np.minimum(out, 1) if clamp else out


def forward_slice(net: Network, slices: Sequence[np.ndarray]) -> np.ndarray:
    """Membership map for one 2-D slice per contrast, clamped to [0, 1]."""
    slices = [np.asarray(s) for s in slices]
    if len(slices) != net.config.num_contrasts:
        raise ValueError(
            f"network expects {net.config.num_contrasts} contrasts, got {len(slices)}"
        )
    shape = slices[0].shape
    for s in slices:
        if s.ndim != 2:
            raise ValueError(f"slices must be 2-D, got shape {s.shape}")
        if s.shape != shape:
            raise ValueError(f"slice dims differ: {shape} vs {s.shape}")
    batch = [s[None, None].astype(net.dtype) for s in slices]
    return forward_batch(net, batch)[0, 0]


def check_gradients(
    net: Network,
    inputs: Sequence[np.ndarray],
    target: np.ndarray,
    n_coords: int = 20,
    seed: int = 0,
    step: float = 1e-5,
) -> float:
    """Worst relative error of :func:`backward` against central differences.

    The MSE loss is differentiated with respect to ``n_coords`` randomly
    chosen parameter entries. Use a float64 network for meaningful results.
    """
    rng = np.random.default_rng(seed)
    params = [p.copy() for p in net.parameters()]
    probe = net.with_parameters(params)

    def loss() -> float:
        out, _ = forward_training(probe, inputs)
        return float(np.mean((out - target) ** 2))

    out, cache = forward_training(probe, inputs)
    grads = backward(probe, cache, 2.0 * (out - target) / out.size)
    sizes = np.array([p.size for p in params], dtype=np.float64)
    worst = 0.0
    for _ in range(n_coords):
        i = int(rng.choice(len(params), p=sizes / sizes.sum()))
        idx = tuple(int(rng.integers(s)) for s in params[i].shape)
        old = params[i][idx]
        params[i][idx] = old + step
        up = loss()
        params[i][idx] = old - step
        down = loss()
        params[i][idx] = old
        numeric = (up - down) / (2.0 * step)
        analytic = float(grads[i][idx])
        scale = max(abs(numeric), abs(analytic), 1e-7)
        worst = max(worst, abs(numeric - analytic) / scale)
    return worst
