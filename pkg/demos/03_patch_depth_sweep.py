"""Driver for the patch-size and depth sweeps.

Each (patch, depth) pair trains a fresh network on the same phantom slices and
reports the median held-out Dice.  Results go to a CSV with a header row.

    python3 demos/03_patch_depth_sweep.py --patches 15 25 35 --depths 2 --epochs 3
    python3 demos/03_patch_depth_sweep.py --patches 35 --depths 2 3 4 5 --epochs 3

The full-size networks are slow in pure NumPy, so the defaults are deliberately small.
"""
import argparse
import csv
import time

import numpy as np

import flexconn as F
from flexconn.targets import concat_patchsets
from flexconn.volume import Volume

p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
p.add_argument("--patches", type=int, nargs="+", default=[15, 25, 35])
p.add_argument("--depths", type=int, nargs="+", default=[2])
p.add_argument("--epochs", type=int, default=3)
p.add_argument("--train-cases", type=int, default=4)
p.add_argument("--test-cases", type=int, default=3)
p.add_argument("--seed", type=int, default=0)
p.add_argument("--out-csv", default="patch_depth_sweep.csv")
args = p.parse_args()


def normalized(case):
    return [F.normalize_intensity(case.mprage), F.normalize_intensity(case.flair)]


train_cases = F.generate_cohort(args.train_cases, seed=101)
test_cases = F.generate_cohort(args.test_cases, seed=202)
test_inputs = [normalized(c) for c in test_cases]

rows = []
for depth in args.depths:
    for size in args.patches:
        sets = []
        for case in train_cases:
            zs = np.sort(np.argsort(-case.mask.data.sum(axis=(0, 1)).astype(int), kind="stable")[:5])
            take = lambda v: Volume(v.data[:, :, zs], v.spacing)
            sets.append(F.extract_patches([take(v) for v in normalized(case)], take(case.mask), (size, size)))
        data = concat_patchsets(sets)
        net = F.build_network(F.NetworkConfig.from_depth(depth), seed=args.seed)
        cfg = F.TrainingConfig(epochs=args.epochs, batch_size=32, learning_rate=1e-3,
                               seed=args.seed, patch=(size, size))
        t0 = time.process_time()
        net, log = F.train(net, data, cfg)
        cpu = time.process_time() - t0
        dices = [F.dice(F.threshold_membership(F.predict_membership(net, x)), c.mask)
                 for x, c in zip(test_inputs, test_cases)]
        row = dict(depth=depth, patch=size, n_patches=len(data), final_val_loss=log.epochs[-1].val_loss,
                   median_dice=float(np.median(dices)), cpu_seconds=round(cpu, 1))
        print(row, flush=True)
        rows.append(row)

with open(args.out_csv, "w", newline="") as fh:
    w = csv.DictWriter(fh, fieldnames=list(rows[0]))
    w.writeheader()
    w.writerows(rows)
print("wrote", args.out_csv)
