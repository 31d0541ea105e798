"""A walk through the synthetic phantoms: tissue contrast, lesion loads, noise, and NIfTI export."""
# %% imports
import sys
import tempfile
from pathlib import Path

import numpy as np

import flexconn as F

# %% one phantom with the default PhantomSpec
spec = F.PhantomSpec(seed=7)
case = F.generate_phantom(spec)
print("dims", case.flair.shape, "spacing", case.flair.spacing)
print("lesion voxels", int(case.mask.data.sum()))

# FLAIR lesions are brighter than the surrounding brain, MPRAGE lesions darker
inside = case.mask.data > 0
# noise-free MPRAGE separates brain from background cleanly
clean = F.generate_phantom(F.PhantomSpec(seed=7, noise_sigma=0.0))
brain = (clean.mprage.data > 0.6) & ~inside
for name, vol in (("mprage", case.mprage), ("flair", case.flair)):
    print(f"{name:6s} lesion mean {vol.data[inside].mean():7.3f}   brain mean {vol.data[brain].mean():7.3f}")

# %% the noise level can be read back off the background corner
corner = case.flair.data[:6, :6, :]
print("background std", corner.std(), "requested", spec.noise_sigma)

# %% a ten-case cohort covers small, medium and large lesion loads
loads = [int(c.mask.data.sum()) for c in F.generate_cohort(10, seed=0)]
print("cohort lesion loads", loads, "ratio max/min", round(max(loads) / min(loads), 1))

# %% a cheap text rendering of the most lesion-dense slice
z = int(np.argmax(case.mask.data.sum(axis=(0, 1))))
sl = case.flair.data[:, :, z].T
ramp = " .:-=+*#%@"
lo, hi = np.percentile(sl, [1, 99.5])
idx = np.clip((sl - lo) / (hi - lo) * (len(ramp) - 1), 0, len(ramp) - 1).astype(int)
print(f"FLAIR slice z={z}")
print("\n".join("".join(ramp[i] for i in row[::1]) for row in idx[::2]))

# %% write the triple to disk and load it back unchanged
out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())
out.mkdir(parents=True, exist_ok=True)
F.write_volume(case.mprage, out / "t1.nii")
F.write_volume(case.flair, out / "flair.nii")
F.write_volume(case.mask, out / "mask.nii", "uint8")
back = F.read_volume(out / "flair.nii")
print("round trip identical:", np.array_equal(back.data, case.flair.data.astype(np.float32)), "->", out)
