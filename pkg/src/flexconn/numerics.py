"""Dense tensor primitives with exact analytic gradients.

Everything here works on plain ``numpy`` arrays. Batched images are 4-D
arrays laid out as ``(batch, channel, row, column)``; we call these
"Tensor4" throughout the package. Functions never modify their inputs.

The convolution is a cross-correlation with zero padding of ``(k - 1) / 2``
on each side so that spatial dimensions are preserved::

    out[n, o, y, x] = bias[o] + sum_{i, dy, dx} inp[n, i, y + dy - pad, x + dx - pad] * w[o, i, dy, dx]
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

__all__ = [
    "Conv2DLayer",
    "AdamState",
    "NonFiniteGradientError",
    "conv2d_forward",
    "conv2d_backward",
    "relu",
    "relu_backward",
    "mse_loss",
    "init_adam",
    "adam_step",
    "gaussian_kernel_1d",
    "gaussian_kernel_2d",
    "glorot_uniform",
]


class NonFiniteGradientError(FloatingPointError):
    """Raised when an optimizer receives a NaN or Inf gradient."""


def _check_tensor4(x: np.ndarray, name: str) -> None:
    if x.ndim != 4:
        raise ValueError(f"{name} must be 4-D (n, c, h, w), got shape {x.shape}")


@dataclass
class Conv2DLayer:
    """One filter bank: ``c_out`` square kernels of odd size over ``c_in`` channels."""

    weights: np.ndarray  # (c_out, c_in, k, k)
    bias: np.ndarray  # (c_out,)

    def __post_init__(self):
        w = self.weights
        if w.ndim != 4:
            raise ValueError(f"weights must be 4-D (c_out, c_in, k, k), got {w.shape}")
        if w.shape[2] != w.shape[3]:
            raise ValueError(f"kernel must be square, got {w.shape[2]}x{w.shape[3]}")
        if w.shape[2] % 2 != 1:
            raise ValueError(f"kernel size must be odd, got {w.shape[2]}")
        if self.bias.shape != (w.shape[0],):
            raise ValueError(
                f"bias must have shape ({w.shape[0]},), got {self.bias.shape}"
            )

    @property
    def c_out(self) -> int:
        return self.weights.shape[0]

    @property
    def c_in(self) -> int:
        return self.weights.shape[1]

    @property
    def kernel_size(self) -> int:
        return self.weights.shape[2]

    @property
    def pad(self) -> int:
        return (self.kernel_size - 1) // 2

    @property
    def n_weights(self) -> int:
        return self.weights.size


def _correlate(x: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Shape-preserving zero-padded correlation without bias.

    Loops over kernel offsets and does one GEMM per offset, so memory stays
    at one shifted copy of the input. The summation order is fixed.
    """
    n, c, h, w = x.shape
    c_out, _, k, _ = weights.shape
    p = (k - 1) // 2
    dtype = np.result_type(x, weights)

    xp = np.zeros((c, n, h + 2 * p, w + 2 * p), dtype=dtype)
    xp[:, :, p : p + h, p : p + w] = x.transpose(1, 0, 2, 3)
    # contiguous (k, k, c_out, c) so each per-offset GEMM goes through BLAS
    wk = np.ascontiguousarray(weights.transpose(2, 3, 0, 1), dtype=dtype)
    out = np.zeros((c_out, n * h * w), dtype=dtype)
    for dy in range(k):
        for dx in range(k):
            cols = xp[:, :, dy : dy + h, dx : dx + w].reshape(c, -1)
            out += wk[dy, dx] @ cols
    return np.ascontiguousarray(out.reshape(c_out, n, h, w).transpose(1, 0, 2, 3))


def conv2d_forward(x: np.ndarray, layer: Conv2DLayer) -> np.ndarray:
    """Apply ``layer`` to a batch ``x`` of shape (n, c_in, h, w).

    Returns an array of shape (n, c_out, h, w).
    """
    _check_tensor4(x, "input")
    if x.shape[1] != layer.c_in:
        raise ValueError(
            f"channel mismatch: input has {x.shape[1]} channels, layer expects {layer.c_in}"
        )
    out = _correlate(x, layer.weights)
    out += layer.bias.astype(out.dtype)[None, :, None, None]
    return out


def conv2d_backward(
    x: np.ndarray, layer: Conv2DLayer, upstream: np.ndarray, input_grad: bool = True
) -> Tuple[Optional[np.ndarray], np.ndarray, np.ndarray]:
    """Gradients of ``sum(conv2d_forward(x, layer) * upstream)``.

    Returns ``(grad_input, grad_weights, grad_bias)``; ``grad_input`` is
    None when ``input_grad`` is False.
    """
    _check_tensor4(x, "input")
    _check_tensor4(upstream, "upstream_grad")
    n, c, h, w = x.shape
    expected = (n, layer.c_out, h, w)
    if upstream.shape != expected:
        raise ValueError(f"upstream_grad shape {upstream.shape} != output shape {expected}")
    if c != layer.c_in:
        raise ValueError(
            f"channel mismatch: input has {c} channels, layer expects {layer.c_in}"
        )

    k, p = layer.kernel_size, layer.pad
    dtype = np.result_type(x, layer.weights, upstream)

    grad_bias = upstream.sum(axis=(0, 2, 3), dtype=dtype)

    xp = np.zeros((c, n, h + 2 * p, w + 2 * p), dtype=dtype)
    xp[:, :, p : p + h, p : p + w] = x.transpose(1, 0, 2, 3)
    up = upstream.transpose(1, 0, 2, 3).reshape(layer.c_out, -1).astype(dtype, copy=False)
    grad_weights = np.empty(layer.weights.shape, dtype=dtype)
    for dy in range(k):
        for dx in range(k):
            cols = xp[:, :, dy : dy + h, dx : dx + w].reshape(c, -1)
            grad_weights[:, :, dy, dx] = up @ cols.T

    if not input_grad:
        return None, grad_weights, grad_bias
    # Input gradient is a correlation of the upstream gradient with the
    # spatially flipped, channel-transposed kernel (same padding, k odd).
    flipped = np.ascontiguousarray(layer.weights[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
    grad_input = _correlate(upstream.astype(dtype, copy=False), flipped.astype(dtype))
    return grad_input, grad_weights, grad_bias


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(x: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Pass ``upstream`` through where the forward input was strictly positive."""
    return np.where(x > 0, upstream, np.zeros_like(upstream))


def mse_loss(pred: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean squared error and its gradient with respect to ``pred``."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs target {target.shape}")
    diff = pred - target
    loss = float(np.mean(np.square(diff, dtype=np.float64)))
    grad = (2.0 / diff.size) * diff
    return loss, grad.astype(pred.dtype, copy=False)


@dataclass
class AdamState:
    """Moment buffers and hyperparameters for Adam.

    ``m`` and ``v`` hold one array per parameter, matching its shape.
    """

    m: List[np.ndarray]
    v: List[np.ndarray]
    t: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(
    params: Sequence[np.ndarray],
    lr: float = 1e-4,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AdamState:
    return AdamState(
        m=[np.zeros_like(p) for p in params],
        v=[np.zeros_like(p) for p in params],
        t=0,
        lr=lr,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
    )


def adam_step(
    params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState
) -> Tuple[List[np.ndarray], AdamState]:
    """One bias-corrected Adam update.

    Returns new parameter arrays and a new state; the inputs are left alone.
    Raises :class:`NonFiniteGradientError` if any gradient entry is NaN/Inf.
    """
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise ValueError("params, grads and optimizer state must have equal length")
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape or p.shape != state.m[i].shape:
            raise ValueError(f"shape mismatch at parameter {i}: {p.shape} vs {g.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient in parameter {i}")

    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        m_hat = m / c1
        v_hat = v / c2
        step = state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        new_params.append((p - step).astype(p.dtype, copy=False))
        new_m.append(m.astype(p.dtype, copy=False))
        new_v.append(v.astype(p.dtype, copy=False))
    new_state = AdamState(
        m=new_m, v=new_v, t=t, lr=state.lr, beta1=b1, beta2=b2, eps=state.eps
    )
    return new_params, new_state


def gaussian_kernel_1d(sigma: float, size: int = 3) -> np.ndarray:
    """Truncated Gaussian of odd ``size`` sampled at integer offsets, summing to 1."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if size < 1 or size % 2 != 1:
        raise ValueError(f"size must be a positive odd integer, got {size}")
    x = np.arange(size, dtype=np.float64) - size // 2
    w = np.exp(-(x**2) / (2.0 * sigma**2))
    return w / w.sum()


def gaussian_kernel_2d(sigma: float, size: int = 3) -> np.ndarray:
    g = gaussian_kernel_1d(sigma, size)
    return np.outer(g, g)


def glorot_uniform(
    shape: Tuple[int, int, int, int], rng: np.random.Generator, dtype=np.float32
) -> np.ndarray:
    """Uniform init in +-sqrt(6 / (fan_in + fan_out)) for a (c_out, c_in, k, k) kernel."""
    c_out, c_in, kh, kw = shape
    fan_in = c_in * kh * kw
    fan_out = c_out * kh * kw
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)
