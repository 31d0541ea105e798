"""Independent reference implementations used by the tests.

These are deliberately slow and direct; they share no code with the
package beyond plain numpy.
"""
from collections import deque
import itertools

import numpy as np


def naive_conv2d(x, weights, bias):
    """Direct summation over every output element and kernel tap."""
    n, c, h, w = x.shape
    o, _, k, _ = weights.shape
    p = (k - 1) // 2
    out = np.zeros((n, o, h, w), dtype=np.float64)
    for b in range(n):
        for oc in range(o):
            for y in range(h):
                for xx in range(w):
                    s = float(bias[oc])
                    for ic in range(c):
                        for dy in range(k):
                            for dx in range(k):
                                yy, xi = y + dy - p, xx + dx - p
                                if 0 <= yy < h and 0 <= xi < w:
                                    s += x[b, ic, yy, xi] * weights[oc, ic, dy, dx]
                    out[b, oc, y, xx] = s
    return out


def central_difference(f, arr, index, step=1e-5):
    """d f / d arr[index] by central differences; ``arr`` is modified and restored."""
    old = arr[index]
    arr[index] = old + step
    fp = f()
    arr[index] = old - step
    fm = f()
    arr[index] = old
    return (fp - fm) / (2 * step)


def rel_err(a, b, floor=1e-8):
    return abs(a - b) / max(abs(a), abs(b), floor)


OFFSETS_18 = [
    d for d in itertools.product((-1, 0, 1), repeat=3) if 0 < sum(1 for c in d if c) <= 2
]


def flood_fill_components(mask):
    """Label 18-connected components by BFS from every unvisited foreground voxel."""
    mask = np.asarray(mask, dtype=bool)
    labels = np.zeros(mask.shape, dtype=int)
    count = 0
    for start in zip(*np.nonzero(mask)):
        if labels[start]:
            continue
        count += 1
        labels[start] = count
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for d in OFFSETS_18:
                u = (v[0] + d[0], v[1] + d[1], v[2] + d[2])
                if all(0 <= u[i] < mask.shape[i] for i in range(3)) and mask[u] and not labels[u]:
                    labels[u] = count
                    queue.append(u)
    return labels, count


def naive_metrics(auto, manual):
    """Dice, LFPR, LTPR, PPV, VD by explicit counting (same empty-set conventions)."""
    a = np.asarray(auto, dtype=bool)
    m = np.asarray(manual, dtype=bool)
    na, nm = int(a.sum()), int(m.sum())
    inter = 0
    for idx in zip(*np.nonzero(a)):
        if m[idx]:
            inter += 1
    dice = 1.0 if na + nm == 0 else 2 * inter / (na + nm)

    la, ka = flood_fill_components(a)
    lm, km = flood_fill_components(m)
    fp = 0
    for comp in range(1, ka + 1):
        if not any(m[idx] for idx in zip(*np.nonzero(la == comp))):
            fp += 1
    lfpr = 0.0 if ka == 0 else fp / ka
    tp = 0
    for comp in range(1, km + 1):
        if any(a[idx] for idx in zip(*np.nonzero(lm == comp))):
            tp += 1
    ltpr = 1.0 if km == 0 else tp / km
    if na == 0:
        ppv = 1.0 if nm == 0 else 0.0
    else:
        ppv = inter / na
    vd = float("nan") if nm == 0 else abs(na - nm) / nm
    return dice, lfpr, ltpr, ppv, vd


def wilcoxon_enumeration(diffs):
    """Two-sided exact p by listing all 2**n sign assignments of the ranks.

    Ranks are average ranks of |d|; p = 2 * min(P(W+ <= w), P(W+ >= w)), capped at 1.
    """
    d = np.asarray([v for v in diffs if v != 0], dtype=float)
    absd = np.abs(d)
    order = sorted(range(len(d)), key=lambda i: absd[i])
    ranks = np.empty(len(d))
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and absd[order[j + 1]] == absd[order[i]]:
            j += 1
        avg = (i + j + 2) / 2.0
        for t in range(i, j + 1):
            ranks[order[t]] = avg
        i = j + 1
    w_obs = ranks[d > 0].sum()
    lower = upper = 0
    total = 0
    for signs in itertools.product((0, 1), repeat=len(d)):
        w = sum(r for r, s in zip(ranks, signs) if s)
        total += 1
        if w <= w_obs + 1e-9:
            lower += 1
        if w >= w_obs - 1e-9:
            upper += 1
    return min(1.0, 2 * min(lower, upper) / total), w_obs, ranks.sum() - w_obs
