"""Train the reduced depth-2 network on a few phantom slices and segment held-out cases.

Takes a few minutes on one CPU core.  Pass an epoch count to shorten the run,
e.g. ``python3 demos/02_train_and_segment.py 3``.
"""
import sys
import time

import numpy as np

import flexconn as F
from flexconn.inference import SWEEP_THRESHOLDS
from flexconn.targets import concat_patchsets
from flexconn.volume import Volume

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 10


def normalized(case):
    return [F.normalize_intensity(case.mprage), F.normalize_intensity(case.flair)]


def densest_slices(case, k=5):
    counts = case.mask.data.sum(axis=(0, 1)).astype(int)
    zs = np.sort(np.argsort(-counts, kind="stable")[:k])
    return lambda v: Volume(v.data[:, :, zs], v.spacing)


# Training data: the five most lesion-dense axial slices from each of four phantoms,
# cut into 35x35 patches centred on lesion voxels and their neighbours.
sets = []
for case in F.generate_cohort(4, seed=101):
    take = densest_slices(case)
    sets.append(F.extract_patches([take(v) for v in normalized(case)], take(case.mask), (35, 35)))
data = concat_patchsets(sets)
print(f"{len(data)} patches from {4 * 5} slices")

net = F.build_network(F.NetworkConfig.from_depth(2), seed=0)
cfg = F.TrainingConfig(epochs=epochs, batch_size=32, learning_rate=1e-3, seed=0)
t0 = time.process_time()
net, log = F.train(net, data, cfg, progress=lambda r: print(f"  epoch {r.epoch:2d}  train {r.train_loss:.5f}  val {r.val_loss:.5f}"))
print(f"trained in {time.process_time() - t0:.0f} s of CPU")

# Segment five unseen phantoms. The whole slice goes through the network at once;
# no patches are needed at inference time.
dices, curves = [], []
for case in F.generate_cohort(5, seed=202):
    membership = F.predict_membership(net, normalized(case))
    seg = F.threshold_membership(membership)
    report = F.evaluate_pair(seg, case.mask)
    dices.append(report.dice)
    curves.append([d for _, d in F.sweep_threshold(membership, case.mask)])
    print(f"  dice {report.dice:.3f}  ltpr {report.ltpr:.3f}  lfpr {report.lfpr:.3f}  vd {report.vd:.3f}")

median_curve = np.median(curves, axis=0)
print("median dice at 0.30:", round(float(np.median(dices)), 3))
print("median dice over the threshold sweep:")
for tau, d in zip(SWEEP_THRESHOLDS, median_curve):
    print(f"  {tau:.2f}  {d:.3f}  {'#' * int(40 * d)}")
