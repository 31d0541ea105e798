"""Synthetic two-contrast brain phantoms with known lesions.

A phantom is an ellipsoidal "brain" on a zero background with a number of
randomly oriented ellipsoidal lesions inside it. Lesions are dark on the
MPRAGE-like contrast and bright on the FLAIR-like one. Just outside each
lesion the intensity ramps linearly back to brain over one voxel, so the
image edge is soft while the mask stays the exact ellipsoid union.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Tuple

import numpy as np
from scipy.ndimage import binary_erosion

from .volume import Volume

__all__ = [
    "PhantomSpec",
    "PhantomCase",
    "PhantomError",
    "generate_phantom",
    "generate_cohort",
    "brain_mask",
]


class PhantomError(RuntimeError):
    pass


@dataclass(frozen=True)
class PhantomSpec:
    dims: Tuple[int, int, int] = (64, 64, 16)
    spacing: Tuple[float, float, float] = (1.0, 1.0, 2.0)
    n_lesions: int = 6
    radius_range: Tuple[float, float] = (2.0, 4.5)  # in-plane semi-axes, voxels
    # (background, brain, lesion) means per contrast
    mprage: Tuple[float, float, float] = (0.0, 0.8, 0.4)
    flair: Tuple[float, float, float] = (0.0, 0.5, 1.0)
    noise_sigma: float = 0.03
    brain_fraction: float = 0.42  # brain semi-axis as a fraction of each dim
    seed: int = 0

    def __post_init__(self):
        if min(self.dims) < 1:
            raise ValueError(f"dims must be positive, got {self.dims}")
        if self.n_lesions < 0:
            raise ValueError("n_lesions must be >= 0")
        lo, hi = self.radius_range
        if not 0 < lo <= hi:
            raise ValueError(f"invalid radius range {self.radius_range}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not self.flair[2] > self.flair[1]:
            raise ValueError("FLAIR lesion mean must exceed FLAIR brain mean")
        if not self.mprage[2] < self.mprage[1]:
            raise ValueError("MPRAGE lesion mean must be below MPRAGE brain mean")


@dataclass
class PhantomCase:
    mprage: Volume
    flair: Volume
    mask: Volume
    seed: int

    @property
    def lesion_voxels(self) -> int:
        return int(np.count_nonzero(self.mask.data))


def _grid(dims):
    return np.meshgrid(*[np.arange(d, dtype=np.float64) for d in dims], indexing="ij")


def brain_mask(spec: PhantomSpec) -> np.ndarray:
    """Boolean brain ellipsoid (voxel units, centred in the volume)."""
    x, y, z = _grid(spec.dims)
    c = [(d - 1) / 2.0 for d in spec.dims]
    a = [max(spec.brain_fraction * d, 0.5) for d in spec.dims]
    r = ((x - c[0]) / a[0]) ** 2 + ((y - c[1]) / a[1]) ** 2 + ((z - c[2]) / a[2]) ** 2
    return r <= 1.0


def _random_rotation(rng: np.random.Generator) -> np.ndarray:
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def _lesion_fields(spec: PhantomSpec, rng: np.random.Generator, max_tries: int = 200):
    """Mask of the ellipsoid union and the soft 0..1 lesion weight.

    Lesions are built in millimetres so that a random orientation does not
    stretch them through thick slices. Semi-axes are drawn from
    ``radius_range`` in units of the in-plane voxel size.
    """
    dims = spec.dims
    spacing = np.asarray(spec.spacing, dtype=np.float64)
    phys = np.stack(_grid(dims), axis=-1) * spacing  # (..., 3) in mm
    brain = brain_mask(spec)
    # lesions plus their ramp must stay two voxels inside the brain
    safe = binary_erosion(brain, iterations=2)
    candidates = np.argwhere(safe)
    mask = np.zeros(dims, dtype=bool)
    weight = np.zeros(dims, dtype=np.float64)
    unit = spacing[0]
    lo, hi = spec.radius_range

    placed = 0
    tries = 0
    while placed < spec.n_lesions:
        if tries >= max_tries * max(spec.n_lesions, 1) or len(candidates) == 0:
            raise PhantomError(
                f"could not place lesion {placed + 1} of {spec.n_lesions} inside the brain "
                f"(radius range {spec.radius_range}, dims {dims}) after {tries} attempts"
            )
        tries += 1
        center = candidates[rng.integers(len(candidates))] * spacing
        semi = rng.uniform(lo, hi, size=3) * unit
        rot = _random_rotation(rng)
        local = (phys - center) @ rot
        scaled = local / semi
        rho = np.sqrt(np.sum(scaled**2, axis=-1))
        inside = rho <= 1.0
        # first-order distance to the surface: (rho - 1) / |grad rho|
        grad = np.sqrt(np.sum((scaled / semi) ** 2, axis=-1)) / np.maximum(rho, 1e-12)
        dist = (rho - 1.0) / np.maximum(grad, 1e-12)
        ramp = np.clip(1.0 - dist / unit, 0.0, 1.0)
        if np.any((ramp > 0) & ~safe):
            continue
        mask |= inside
        weight = np.maximum(weight, ramp)
        placed += 1
    weight[mask] = 1.0
    return mask, weight, brain


def generate_phantom(spec: PhantomSpec = PhantomSpec()) -> PhantomCase:
    """Deterministic for a fixed ``spec`` (seed included)."""
    rng = np.random.default_rng(spec.seed)
    mask, weight, brain = _lesion_fields(spec, rng)

    def contrast(means) -> np.ndarray:
        bg, tissue, lesion = means
        img = np.where(brain, tissue, bg).astype(np.float64)
        img = img + weight * (lesion - tissue)
        img[mask] = lesion
        if spec.noise_sigma > 0:
            img = img + rng.normal(0.0, spec.noise_sigma, size=img.shape)
        return img.astype(np.float32)

    mprage = contrast(spec.mprage)
    flair = contrast(spec.flair)
    return PhantomCase(
        mprage=Volume(mprage, spec.spacing),
        flair=Volume(flair, spec.spacing),
        mask=Volume(mask.astype(np.uint8), spec.spacing),
        seed=spec.seed,
    )


def generate_cohort(n_cases: int, base: PhantomSpec = PhantomSpec(), seed: int = 0) -> List[PhantomCase]:
    """``n_cases`` phantoms with lesion loads rising from low to high.

    Case ``i`` gets its own seed drawn from ``seed``; lesion count grows
    geometrically and lesion size linearly across the cohort.
    """
    if n_cases < 1:
        raise ValueError(f"n_cases must be >= 1, got {n_cases}")
    seeds = np.random.default_rng(seed).integers(0, 2**31 - 1, size=n_cases)
    lo, hi = base.radius_range
    if n_cases == 1:
        fracs = np.array([0.5])
    else:
        fracs = np.linspace(0.0, 1.0, n_cases)
    cases = []
    for s, f in zip(seeds, fracs):
        n_les = int(round(max(1, base.n_lesions) * (1 / 3) * 9.0**f))
        radius = (lo * (0.75 + 0.5 * f), lo + (hi - lo) * (0.6 + 0.4 * f))
        spec = replace(base, n_lesions=max(n_les, 1), radius_range=radius, seed=int(s))
        cases.append(generate_phantom(spec))
    return cases
