"""The 3-D scalar grid that carries images, masks and memberships."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

__all__ = ["Orientation", "Volume"]


@dataclass(frozen=True)
class Orientation:
    """qform/sform fields carried through I/O untouched."""

    qform_code: int = 0
    sform_code: int = 0
    quatern: Tuple[float, ...] = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)  # b, c, d, qoffset x/y/z
    srow: Tuple[Tuple[float, ...], ...] = (
        (0.0, 0.0, 0.0, 0.0),
        (0.0, 0.0, 0.0, 0.0),
        (0.0, 0.0, 0.0, 0.0),
    )
    qfac: float = 1.0


@dataclass
class Volume:
    """Voxel array indexed ``data[x, y, z]``; axial slices are ``data[:, :, k]``."""

    data: np.ndarray
    spacing: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    orientation: Optional[Orientation] = field(default=None, compare=False)

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 3:
            raise ValueError(f"volume data must be 3-D, got shape {self.data.shape}")
        if min(self.data.shape) < 1:
            raise ValueError(f"volume dims must be positive, got {self.data.shape}")
        self.spacing = tuple(float(s) for s in self.spacing)
        if len(self.spacing) != 3 or min(self.spacing) <= 0:
            raise ValueError(f"spacing must be three positive numbers, got {self.spacing}")

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.data.shape

    def with_data(self, data: np.ndarray) -> "Volume":
        """Same geometry, new voxel values."""
        data = np.asarray(data)
        if data.shape != self.data.shape:
            raise ValueError(f"shape mismatch: {data.shape} vs {self.data.shape}")
        return replace(self, data=data)
