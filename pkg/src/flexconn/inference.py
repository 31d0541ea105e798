"""Whole-volume prediction, rater averaging, thresholding and threshold sweeps."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .metrics import dice
from .network import Network, forward_slice
from .volume import Volume

__all__ = [
    "DEFAULT_THRESHOLD",
    "SWEEP_THRESHOLDS",
    "InferenceConfig",
    "normalize_intensity",
    "predict_membership",
    "average_memberships",
    "threshold_membership",
    "segment",
    "sweep_threshold",
]

DEFAULT_THRESHOLD = 0.30
# 0.05, 0.10, ..., 0.85 as exact decimal literals
SWEEP_THRESHOLDS: Tuple[float, ...] = tuple(round(0.05 * i, 2) for i in range(1, 18))


@dataclass(frozen=True)
class InferenceConfig:
    threshold: float = DEFAULT_THRESHOLD
    wm_mask: Optional[Volume] = None

    def __post_init__(self):
        if not 0.0 < self.threshold <= 1.0:
            raise ValueError(f"threshold must be in (0, 1], got {self.threshold}")


def normalize_intensity(
    volume: Volume, percentile: float = 99.0, clip_max: float = 1.5
) -> Volume:
    """Divide by the given percentile of the nonzero voxels and clip to [0, clip_max]."""
    data = np.asarray(volume.data, dtype=np.float64)
    nonzero = data[data != 0]
    if nonzero.size == 0:
        return volume.with_data(np.zeros(data.shape, dtype=np.float32))
    scale = np.percentile(nonzero, percentile)
    if scale <= 0:
        raise ValueError(f"{percentile}th percentile of nonzero voxels is {scale}; cannot normalize")
    return volume.with_data(np.clip(data / scale, 0.0, clip_max).astype(np.float32))


def predict_membership(
    net: Network, contrasts: Sequence[Volume], slice_axis: int = 2
) -> Volume:
    """Run the network on every axial slice independently and stack the results."""
    if len(contrasts) != net.config.num_contrasts:
        raise ValueError(
            f"network expects {net.config.num_contrasts} contrasts, got {len(contrasts)}"
        )
    shape = contrasts[0].shape
    for v in contrasts:
        if v.shape != shape:
            raise ValueError(f"contrast volumes differ in shape: {shape} vs {v.shape}")
    arrays = [np.moveaxis(np.asarray(v.data), slice_axis, 2) for v in contrasts]
    out = np.empty(arrays[0].shape, dtype=np.float32)
    for k in range(out.shape[2]):
        out[:, :, k] = forward_slice(net, [a[:, :, k] for a in arrays])
    return contrasts[0].with_data(np.moveaxis(out, 2, slice_axis))


def average_memberships(m1: Volume, m2: Volume) -> Volume:
    if m1.shape != m2.shape:
        raise ValueError(f"membership shapes differ: {m1.shape} vs {m2.shape}")
    a = np.asarray(m1.data)
    return m1.with_data(((a + np.asarray(m2.data)) * 0.5).astype(a.dtype))


def threshold_membership(m: Volume, config: InferenceConfig = InferenceConfig()) -> Volume:
    """Binary uint8 segmentation: membership >= threshold, restricted to the WM mask if given."""
    seg = np.asarray(m.data) >= config.threshold
    if config.wm_mask is not None:
        if config.wm_mask.shape != m.shape:
            raise ValueError(
                f"white-matter mask shape {config.wm_mask.shape} != membership shape {m.shape}"
            )
        seg &= np.asarray(config.wm_mask.data) > 0
    return m.with_data(seg.astype(np.uint8))


def segment(
    nets: Sequence[Network],
    contrasts: Sequence[Volume],
    config: InferenceConfig = InferenceConfig(),
    slice_axis: int = 2,
) -> Tuple[Volume, Volume]:
    """Membership (averaged over one or two models) and its thresholded segmentation."""
    if not 1 <= len(nets) <= 2:
        raise ValueError(f"expected one or two models, got {len(nets)}")
    membership = predict_membership(nets[0], contrasts, slice_axis)
    if len(nets) == 2:
        membership = average_memberships(membership, predict_membership(nets[1], contrasts, slice_axis))
    return membership, threshold_membership(membership, config)


def sweep_threshold(
    m: Volume, truth: Volume, thresholds: Sequence[float] = SWEEP_THRESHOLDS
) -> List[Tuple[float, float]]:
    """``(threshold, Dice)`` for each threshold."""
    if m.shape != truth.shape:
        raise ValueError(f"membership shape {m.shape} != truth shape {truth.shape}")
    data = np.asarray(m.data)
    ref = np.asarray(truth.data) > 0
    return [(float(t), dice(data >= t, ref)) for t in thresholds]
