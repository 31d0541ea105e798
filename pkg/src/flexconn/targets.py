"""Training targets: smoothed memberships and lesion-centred patches."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .numerics import gaussian_kernel_1d
from .volume import Volume

__all__ = [
    "DEFAULT_SIGMA",
    "PatchSet",
    "make_membership_target",
    "extract_patches",
    "split_train_validation",
    "concat_patchsets",
]

# Edge value of the truncated 3-tap kernel at sigma=1.5 is 0.3078.
DEFAULT_SIGMA = 1.5


def _smooth_axis(a: np.ndarray, g: np.ndarray, axis: int) -> np.ndarray:
    a = np.moveaxis(a, axis, 0)
    padded = np.zeros((a.shape[0] + 2,) + a.shape[1:], dtype=a.dtype)
    padded[1:-1] = a
    out = g[0] * padded[:-2] + g[1] * padded[1:-1] + g[2] * padded[2:]
    return np.moveaxis(out, 0, axis)


def make_membership_target(
    mask: Volume, sigma: float = DEFAULT_SIGMA, slice_axis: int = 2
) -> Volume:
    """Blur a binary mask in-plane with a 3x3 Gaussian, one axial slice at a time.

    Out-of-slice neighbours count as zero. Voxels whose whole 3x3
    neighbourhood is lesion come out as 1.
    """
    data = np.asarray(mask.data)
    if not np.all((data == 0) | (data == 1)):
        raise ValueError("mask must be binary (values in {0, 1})")
    g = gaussian_kernel_1d(sigma, 3)
    d = np.moveaxis(data.astype(np.float64), slice_axis, 2)
    out = _smooth_axis(_smooth_axis(d, g, 0), g, 1)
    out = np.clip(np.moveaxis(out, 2, slice_axis), 0.0, 1.0)
    return mask.with_data(out.astype(np.float32))


@dataclass
class PatchSet:
    """Aligned stacks of 2-D patches, one per lesion voxel.

    ``contrasts[i]`` and ``target`` are ``(n, 1, p1, p2)`` float32 arrays;
    ``coords`` holds the ``(x, y, z)`` source voxel of each patch centre.
    """

    contrasts: List[np.ndarray]
    target: np.ndarray
    coords: np.ndarray

    def __post_init__(self):
        n = self.target.shape[0]
        for c in self.contrasts:
            if c.shape != self.target.shape:
                raise ValueError(f"patch stacks disagree: {c.shape} vs {self.target.shape}")
        if self.coords.shape != (n, 3):
            raise ValueError(f"coords must be ({n}, 3), got {self.coords.shape}")

    def __len__(self) -> int:
        return self.target.shape[0]

    @property
    def patch_shape(self) -> Tuple[int, int]:
        return self.target.shape[2], self.target.shape[3]

    def subset(self, index) -> "PatchSet":
        index = np.asarray(index)
        return PatchSet([c[index] for c in self.contrasts], self.target[index], self.coords[index])


def _windows(data: np.ndarray, p1: int, p2: int) -> np.ndarray:
    h1, h2 = p1 // 2, p2 // 2
    padded = np.zeros(
        (data.shape[0] + 2 * h1, data.shape[1] + 2 * h2, data.shape[2]), dtype=np.float32
    )
    padded[h1 : h1 + data.shape[0], h2 : h2 + data.shape[1]] = data
    # (nx, ny, nz, p1, p2)
    return sliding_window_view(padded, (p1, p2), axis=(0, 1))


def extract_patches(
    contrasts: Sequence[Volume],
    mask: Volume,
    patch: Tuple[int, int] = (35, 35),
    target: Optional[Volume] = None,
    slice_axis: int = 2,
) -> PatchSet:
    """One in-plane patch per lesion voxel (stride 1), zero-filled past the borders.

    If ``target`` is omitted it is computed with :func:`make_membership_target`.
    """
    p1, p2 = patch
    if p1 % 2 != 1 or p2 % 2 != 1:
        raise ValueError(f"patch dims must be odd, got {patch}")
    shape = mask.shape
    for v in contrasts:
        if v.shape != shape:
            raise ValueError(f"contrast volume shape {v.shape} != mask shape {shape}")
    if target is None:
        target = make_membership_target(mask, slice_axis=slice_axis)
    elif target.shape != shape:
        raise ValueError(f"target shape {target.shape} != mask shape {shape}")

    m = np.moveaxis(np.asarray(mask.data), slice_axis, 2)
    coords = np.argwhere(m > 0)
    if len(coords) == 0:
        raise ValueError("no lesion voxels to train on")
    xs, ys, zs = coords.T

    def cut(v: Volume) -> np.ndarray:
        w = _windows(np.moveaxis(np.asarray(v.data), slice_axis, 2), p1, p2)
        return np.ascontiguousarray(w[xs, ys, zs][:, None])

    stacks = [cut(v) for v in contrasts]
    src = coords.copy()
    if slice_axis != 2:
        # report coordinates in the volume's own axis order
        order = [0, 1]
        order.insert(slice_axis, 2)
        src = coords[:, order]
    return PatchSet(stacks, cut(target), src)


def split_train_validation(
    patches: PatchSet, fraction: float = 0.2, seed: int = 0
) -> Tuple[PatchSet, PatchSet]:
    """Seeded random split; the validation part has ``round(fraction * n)`` patches."""
    n = len(patches)
    if n < 5:
        raise ValueError(f"need at least 5 patches to split, got {n}")
    if not 0.0 <= fraction < 1.0:
        raise ValueError(f"fraction must be in [0, 1), got {fraction}")
    n_val = int(np.floor(fraction * n + 0.5))
    perm = np.random.default_rng(seed).permutation(n)
    return patches.subset(np.sort(perm[n_val:])), patches.subset(np.sort(perm[:n_val]))


def concat_patchsets(sets: Sequence[PatchSet]) -> PatchSet:
    if not sets:
        raise ValueError("nothing to concatenate")
    n_c = len(sets[0].contrasts)
    return PatchSet(
        [np.concatenate([s.contrasts[i] for s in sets]) for i in range(n_c)],
        np.concatenate([s.target for s in sets]),
        np.concatenate([s.coords for s in sets]),
    )
