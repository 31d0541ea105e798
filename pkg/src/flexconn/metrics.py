"""Segmentation metrics, lesion-level counts and the paired Wilcoxon test.

A lesion is an 18-connected component: voxels touching by a face or an
edge belong together, voxels touching only at a corner do not.

Conventions for empty inputs (never exercised on real data):

* Dice of two empty segmentations is 1.
* LFPR is 0 when the automated segmentation has no lesions.
* LTPR is 1 when the manual segmentation has no lesions.
* PPV is 1 when both are empty and 0 when only the automated one is.
* VD raises, since it divides by the manual volume.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Dict, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage, stats

__all__ = [
    "NEIGHBORHOOD_18",
    "DEFAULT_SCORE_WEIGHTS",
    "ComponentLabeling",
    "MetricsReport",
    "WilcoxonResult",
    "connected_components_18",
    "dice",
    "lfpr",
    "ltpr",
    "ppv",
    "volume_difference",
    "evaluate_pair",
    "challenge_score",
    "volume_agreement",
    "wilcoxon_signed_rank",
    "EXACT_MAX_N",
]

# Offsets with at most two nonzero coordinates: 6 faces + 12 edges.
NEIGHBORHOOD_18 = tuple(
    d
    for d in itertools.product((-1, 0, 1), repeat=3)
    if 0 < sum(1 for c in d if c != 0) <= 2
)
_STRUCTURE_18 = ndimage.generate_binary_structure(3, 2)

# Reconstructed from the ISBI 2015 challenge scoring; configurable.
DEFAULT_SCORE_WEIGHTS: Dict[str, float] = {
    "dice": 0.125,
    "ppv": 0.125,
    "lfpr": 0.25,
    "ltpr": 0.25,
    "volume_correlation": 0.25,
}


def _binary(x) -> np.ndarray:
    data = getattr(x, "data", x)
    return np.asarray(data) > 0


def _same_shape(a: np.ndarray, m: np.ndarray) -> None:
    if a.shape != m.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {m.shape}")


@dataclass
class ComponentLabeling:
    labels: np.ndarray  # 0 background, 1..K
    sizes: np.ndarray  # sizes[i] is the voxel count of label i + 1

    @property
    def count(self) -> int:
        return len(self.sizes)


def connected_components_18(seg) -> ComponentLabeling:
    mask = _binary(seg)
    if mask.ndim != 3:
        raise ValueError(f"expected a 3-D segmentation, got shape {mask.shape}")
    labels, k = ndimage.label(mask, structure=_STRUCTURE_18)
    sizes = np.bincount(labels.ravel(), minlength=k + 1)[1:]
    return ComponentLabeling(labels, sizes)


def dice(auto, manual) -> float:
    a, m = _binary(auto), _binary(manual)
    _same_shape(a, m)
    denom = int(a.sum()) + int(m.sum())
    if denom == 0:
        return 1.0
    return 2.0 * int(np.logical_and(a, m).sum()) / denom


def _overlapped_fraction(labels: ComponentLabeling, other: np.ndarray) -> Tuple[int, int]:
    """(# components touching ``other``, # components)."""
    hit = np.unique(labels.labels[other & (labels.labels > 0)])
    return len(hit), labels.count


def lfpr(auto, manual) -> float:
    """Fraction of automated lesions sharing no voxel with the manual segmentation."""
    a, m = _binary(auto), _binary(manual)
    _same_shape(a, m)
    hit, total = _overlapped_fraction(connected_components_18(a), m)
    return 0.0 if total == 0 else (total - hit) / total


def ltpr(auto, manual) -> float:
    """Fraction of manual lesions sharing at least one voxel with the automated segmentation."""
    a, m = _binary(auto), _binary(manual)
    _same_shape(a, m)
    hit, total = _overlapped_fraction(connected_components_18(m), a)
    return 1.0 if total == 0 else hit / total


def ppv(auto, manual) -> float:
    """True-positive voxels over automated-positive voxels."""
    a, m = _binary(auto), _binary(manual)
    _same_shape(a, m)
    n_a = int(a.sum())
    if n_a == 0:
        return 1.0 if not m.any() else 0.0
    return int(np.logical_and(a, m).sum()) / n_a


def volume_difference(auto, manual) -> float:
    """``|(|A| - |M|)| / |M|``."""
    a, m = _binary(auto), _binary(manual)
    _same_shape(a, m)
    n_m = int(m.sum())
    if n_m == 0:
        raise ValueError("VD undefined for empty reference")
    return abs(int(a.sum()) - n_m) / n_m


@dataclass
class MetricsReport:
    dice: float
    lfpr: float
    ltpr: float
    ppv: float
    vd: float
    score: Optional[float] = None
    auto_components: int = 0
    manual_components: int = 0
    auto_voxels: int = 0
    manual_voxels: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate_pair(auto, manual, weights: Optional[Mapping[str, float]] = None) -> MetricsReport:
    """All per-case metrics for one (automated, manual) pair.

    ``vd`` is NaN when the manual segmentation is empty. The score uses
    ``weights`` (default :data:`DEFAULT_SCORE_WEIGHTS`) without the
    cohort-level volume-correlation term.
    """
    a, m = _binary(auto), _binary(manual)
    _same_shape(a, m)
    ca, cm = connected_components_18(a), connected_components_18(m)
    n_m = int(m.sum())
    rep = MetricsReport(
        dice=dice(a, m),
        lfpr=lfpr(a, m),
        ltpr=ltpr(a, m),
        ppv=ppv(a, m),
        vd=volume_difference(a, m) if n_m else float("nan"),
        auto_components=ca.count,
        manual_components=cm.count,
        auto_voxels=int(a.sum()),
        manual_voxels=n_m,
    )
    rep.score = challenge_score(rep, weights)
    return rep


def challenge_score(
    report: MetricsReport,
    weights: Optional[Mapping[str, float]] = None,
    volume_correlation: Optional[float] = None,
) -> float:
    """Weighted average of metrics scaled to 0..100.

    LFPR enters as ``1 - lfpr``. If ``volume_correlation`` is not supplied
    its weight is dropped and the remaining weights are rescaled to sum to 1;
    a negative correlation counts as 0.
    """
    weights = dict(DEFAULT_SCORE_WEIGHTS if weights is None else weights)
    unknown = set(weights) - set(DEFAULT_SCORE_WEIGHTS)
    if unknown:
        raise ValueError(f"unknown score weight(s): {sorted(unknown)}")
    if any(w < 0 for w in weights.values()):
        raise ValueError("score weights must be non-negative")
    if not math.isclose(sum(weights.values()), 1.0, abs_tol=1e-9):
        raise ValueError(f"score weights must sum to 1, got {sum(weights.values())}")

    values = {
        "dice": report.dice,
        "ppv": report.ppv,
        "lfpr": 1.0 - report.lfpr,
        "ltpr": report.ltpr,
    }
    if volume_correlation is None:
        weights.pop("volume_correlation", None)
    else:
        values["volume_correlation"] = min(max(volume_correlation, 0.0), 1.0)
    total = sum(weights.values())
    if total == 0:
        raise ValueError("no score weight left after dropping volume correlation")
    return 100.0 * sum(w * values[k] for k, w in weights.items()) / total


def volume_agreement(auto_volumes: Sequence[float], manual_volumes: Sequence[float]) -> dict:
    """Cohort Pearson correlation and robust (Theil-Sen) fit of auto vs manual volumes."""
    x = np.asarray(manual_volumes, dtype=np.float64)
    y = np.asarray(auto_volumes, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("volume lists must have equal length")
    if len(x) < 2:
        raise ValueError("need at least two cases")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        r = float("nan")
    else:
        r = float(np.corrcoef(x, y)[0, 1])
    if np.ptp(x) == 0:
        slope, intercept = float("nan"), float("nan")
    else:
        res = stats.theilslopes(y, x)
        slope, intercept = float(res[0]), float(res[1])
    return {"pearson_r": r, "slope": slope, "intercept": intercept}


class WilcoxonResult(NamedTuple):
    statistic: float  # min(W+, W-)
    pvalue: float
    n_effective: int


EXACT_MAX_N = 12


def _average_ranks(values: np.ndarray) -> np.ndarray:
    return stats.rankdata(values, method="average")


def _exact_two_sided(doubled_ranks: Sequence[int], w_plus2: int) -> float:
    """Two-sided p-value of a doubled W+ under the sign-flip null.

    Counts the 2**n equally likely sign assignments by dynamic programming
    over achievable (doubled) rank sums.
    """
    counts = Counter({0: 1})
    for r in doubled_ranks:
        nxt = Counter(counts)
        for s, c in counts.items():
            nxt[s + r] += c
        counts = nxt
    total = 2 ** len(doubled_ranks)
    lower = sum(c for s, c in counts.items() if s <= w_plus2)
    upper = sum(c for s, c in counts.items() if s >= w_plus2)
    return min(1.0, 2.0 * min(lower, upper) / total)


def wilcoxon_signed_rank(x: Sequence[float], y: Sequence[float]) -> WilcoxonResult:
    """Paired two-sided Wilcoxon signed-rank test of ``x - y``.

    Zero differences are dropped. Tied absolute differences get average
    ranks. With at most 12 nonzero differences the null distribution is
    enumerated exactly; beyond that a normal approximation with tie
    correction (no continuity correction) is used.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D sequences of equal length")
    d = x - y
    d = d[d != 0]
    n = len(d)
    if n == 0:
        raise ValueError("degenerate paired sample: all differences are zero")
    if n < 5:
        raise ValueError(f"need at least 5 nonzero differences, got {n}")

    ranks = _average_ranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    statistic = min(w_plus, w_minus)

    if n <= EXACT_MAX_N:
        doubled = [int(round(2 * r)) for r in ranks]
        p = _exact_two_sided(doubled, int(round(2 * w_plus)))
    else:
        mean = n * (n + 1) / 4.0
        _, tie_counts = np.unique(np.abs(d), return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_counts**3 - tie_counts) / 48.0
        z = (w_plus - mean) / math.sqrt(var)
        p = min(1.0, 2.0 * stats.norm.sf(abs(z)))
    return WilcoxonResult(statistic, float(p), n)
