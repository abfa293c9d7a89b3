"""Change-point detection on a p-value sequence.

Watermarked stretches of text give p-values piled up near zero, unwatermarked
stretches give roughly uniform ones, so segmenting the text means finding
where the distribution of the p-values shifts. A split is scored by a
Kolmogorov-Smirnov type CUSUM between the empirical CDFs left and right of it,
significance comes from a moving block bootstrap (the p-values are dependent
over a window's width), and multiple splits are found by seeded binary
segmentation with narrowest-over-threshold selection.

Intervals are half-open ``(lo, hi]`` over 1-based positions, so the slice
``pvals[lo:hi]`` holds positions ``lo + 1 .. hi``. A split ``tau`` puts
``lo + 1 .. tau`` on the left and ``tau + 1 .. hi`` on the right. Reported
change points are the 1-based index of the first position of each new
segment, i.e. ``tau + 1``.
"""
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate

from . import _kernels
from ._rng import derive_seed, stream
from .errors import InvalidParameter

_EPS = 1e-9  # absorbs float noise in the seeded-interval layer formulas


@dataclass(frozen=True)
class Interval:
    lo: int
    hi: int

    def __len__(self):
        return self.hi - self.lo

    def __contains__(self, tau):
        return self.lo < tau <= self.hi


@dataclass(frozen=True)
class IntervalCandidate:
    interval: Interval
    tau_hat: int
    stat: float
    p_tilde: float
    accepted: bool = False


@dataclass(frozen=True)
class SegmentationConfig:
    decay_a: float = 2 ** -0.5
    threshold_zeta: float = 0.005
    boot_block_Bp: int = 20
    boot_reps_Tp: int = 999
    min_len: int = 50
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if not 0.5 <= self.decay_a < 1:
            raise InvalidParameter(f"decay_a must lie in [1/2, 1), got {self.decay_a}")
        if not 0 < self.threshold_zeta < 1:
            raise InvalidParameter("threshold_zeta must lie in (0, 1)")
        if self.boot_block_Bp < 1 or self.boot_reps_Tp < 1:
            raise InvalidParameter("bootstrap block size and replicate count must be >= 1")
        if self.min_len < max(2, self.boot_block_Bp):
            raise InvalidParameter("min_len must be at least max(2, boot_block_Bp)")


@dataclass(frozen=True)
class Segment:
    lo: int
    hi: int
    label: str
    median_p: float


@dataclass(frozen=True, eq=False)
class SegmentationResult:
    change_points: list
    candidates: list
    segments: list
    labels: np.ndarray

    @property
    def accepted(self):
        return [c for c in self.candidates if c.accepted]

    def to_dict(self):
        return {
            "change_points": [int(c) for c in self.change_points],
            "segments": [asdict(s) for s in self.segments],
            "candidates": [{"lo": c.interval.lo, "hi": c.interval.hi, "tau_hat": c.tau_hat,
                            "stat": c.stat, "p_tilde": c.p_tilde, "accepted": c.accepted}
                           for c in self.candidates],
        }


def _bounds(pvals, r, s):
    pvals = np.asarray(pvals, dtype=np.float64)
    s = len(pvals) if s is None else s
    if not 0 <= r < s <= len(pvals):
        raise InvalidParameter(f"interval ({r}, {s}] outside 1..{len(pvals)}")
    return pvals, s


def ecdf(pvals, t):
    """Fraction of entries <= t."""
    pvals = np.asarray(pvals, dtype=np.float64)
    if pvals.size == 0:
        raise InvalidParameter("ecdf of an empty slice")
    return float(np.count_nonzero(pvals <= t)) / pvals.size


def _split_cdfs(pvals, tau, r, s):
    pvals, s = _bounds(pvals, r, s)
    if not r < tau < s:
        raise InvalidParameter(f"tau={tau} must satisfy {r} < tau < {s}")
    left, right = np.sort(pvals[r:tau]), np.sort(pvals[tau:s])
    grid = np.unique(np.concatenate([left, right]))
    Fl = np.searchsorted(left, grid, side="right") / len(left)
    Fr = np.searchsorted(right, grid, side="right") / len(right)
    return grid, Fl, Fr, s


def ks_stat(pvals, tau, r=0, s=None):
    """(tau-r)(s-tau)/(s-r)^{3/2} * sup_t |F_left(t) - F_right(t)| on the interval (r, s].

    Both ECDFs are right-continuous steps that jump only at observed values,
    so the sup is a max over the pooled distinct values.
    """
    grid, Fl, Fr, s = _split_cdfs(pvals, tau, r, s)
    w = (tau - r) * (s - tau) / (s - r) ** 1.5
    return float(w * np.max(np.abs(Fl - Fr)))


def cvm_stat(pvals, tau, weight=None, r=0, s=None):
    """Cramer-von Mises analogue: (tau-r)^2 (s-tau)^2/(s-r)^3 * int_0^1 |F_l - F_r|^2 w dt.

    The integrand is constant between consecutive pooled values, so the
    integral is a finite sum; ``weight`` (default 1) is integrated piecewise.
    """
    grid, Fl, Fr, s = _split_cdfs(pvals, tau, r, s)
    diff2 = (Fl - Fr) ** 2
    right_ends = np.append(grid[1:], 1.0)
    if weight is None:
        mass = right_ends - grid
    else:
        mass = np.array([integrate.quad(weight, a, b)[0] if b > a else 0.0
                         for a, b in zip(grid, right_ends)])
    w = (tau - r) ** 2 * (s - tau) ** 2 / (s - r) ** 3
    return float(w * np.sum(diff2 * mass))


def _ranks(x):
    levels, inv = np.unique(x, return_inverse=True)
    return inv.astype(np.int64), len(levels)


def split_profile(pvals, r=0, s=None):
    """S(tau) for every tau in r+1 .. s-1 (array index tau - r - 1)."""
    pvals, s = _bounds(pvals, r, s)
    L = s - r
    if L < 2:
        raise InvalidParameter("interval too short to split")
    ranks, d = _ranks(pvals[r:s])
    return _kernels.cusum_profile(ranks, d) / L ** 1.5


def best_split(pvals, r=0, s=None):
    """(tau_hat, S(tau_hat)) maximising the KS statistic; ties go to the smallest tau."""
    prof = split_profile(pvals, r, s)
    j = int(np.argmax(prof))
    return r + 1 + j, float(prof[j])


def block_bootstrap_pvalue(pvals, observed_max_stat, Bp, Tp, seed, r=0, s=None):
    """Moving-block bootstrap p-value of the max split statistic on (r, s].

    Each replicate glues ceil(L / Bp) overlapping blocks drawn with replacement
    and truncates to the interval length L.
    """
    pvals, s = _bounds(pvals, r, s)
    L = s - r
    if Bp < 1 or Tp < 1:
        raise InvalidParameter("Bp and Tp must be >= 1")
    if L < max(Bp, 2):
        raise InvalidParameter(f"interval length {L} shorter than block size {Bp}")
    ranks, d = _ranks(pvals[r:s])
    nb = -(-L // Bp)
    starts = stream(seed, "bootstrap").integers(0, L - Bp + 1, size=(Tp, nb))
    idx = (starts[:, :, None] + np.arange(Bp)).reshape(Tp, nb * Bp)[:, :L]
    reps = _kernels.cusum_max_many(np.ascontiguousarray(ranks[idx]), d) / L ** 1.5
    return (1 + int(np.sum(observed_max_stat <= reps))) / (Tp + 1)


def seeded_intervals(m, a, min_len):
    """Multi-scale seeded intervals, coarsest layer first, duplicates dropped."""
    if not 0.5 <= a < 1:
        raise InvalidParameter(f"decay a must lie in [1/2, 1), got {a}")
    if min_len < 2 or m < 1:
        raise InvalidParameter("need m >= 1 and min_len >= 2")
    out = [Interval(0, m)]
    seen = {(0, m)}
    max_layer = max(1, math.ceil(math.log(m) / math.log(1 / a) - _EPS))
    for k in range(2, max_layer + 1):
        n_k = 2 * math.ceil((1 / a) ** (k - 1) - _EPS) - 1
        l_k = m * a ** (k - 1)
        if l_k < min_len - _EPS:
            break
        shift = (m - l_k) / (n_k - 1)
        for i in range(n_k):
            lo = math.floor(i * shift + _EPS)
            hi = min(m, math.ceil(i * shift + l_k - _EPS))
            if (lo, hi) not in seen:
                seen.add((lo, hi))
                out.append(Interval(lo, hi))
    return out


def _score_interval(pvals, iv, Bp, Tp, seed):
    tau, stat = best_split(pvals, iv.lo, iv.hi)
    p = block_bootstrap_pvalue(pvals, stat, Bp, Tp, derive_seed(seed, "interval", iv.lo, iv.hi),
                               iv.lo, iv.hi)
    return IntervalCandidate(iv, tau, stat, p)


def score_intervals(pvals, intervals, config):
    args = [(pvals, iv, config.boot_block_Bp, config.boot_reps_Tp, config.seed) for iv in intervals]
    if config.jobs <= 1:
        return [_score_interval(*a) for a in args]
    with ProcessPoolExecutor(max_workers=config.jobs) as ex:
        return list(ex.map(_score_interval, *zip(*args)))


def narrowest_over_threshold(candidates, zeta):
    """Accept significant candidates narrowest first, dropping any whose interval
    holds an accepted split. Returns the accepted split positions (tau)."""
    live = [i for i, c in enumerate(candidates) if c.p_tilde < zeta]
    chosen = []
    while live:
        best = min(live, key=lambda i: (len(candidates[i].interval), i))
        tau = candidates[best].tau_hat
        chosen.append(best)
        live = [i for i in live if tau not in candidates[i].interval]
    return chosen


def seedbs_not(pvals, config=None):
    config = config or SegmentationConfig()
    pvals = np.asarray(pvals, dtype=np.float64)
    m = len(pvals)
    if m < config.min_len:
        raise InvalidParameter(f"sequence length {m} below min_len {config.min_len}")
    intervals = seeded_intervals(m, config.decay_a, config.min_len)
    cands = score_intervals(pvals, intervals, config)
    chosen = set(narrowest_over_threshold(cands, config.threshold_zeta))
    cands = [IntervalCandidate(c.interval, c.tau_hat, c.stat, c.p_tilde, i in chosen)
             for i, c in enumerate(cands)]
    cps = sorted({c.tau_hat + 1 for c in cands if c.accepted})
    labels, segments = labels_from_changepoints(pvals, cps)
    return SegmentationResult(cps, cands, segments, labels)


def labels_from_changepoints(pvals, change_points, cutoff=0.5):
    """Label each segment watermarked iff its median p-value is below ``cutoff``.

    Returns per-token labels and the segment list with adjacent equal labels merged.
    """
    pvals = np.asarray(pvals, dtype=np.float64)
    m = len(pvals)
    cps = [int(c) for c in change_points]
    if cps != sorted(set(cps)) or any(not 1 < c <= m for c in cps):
        raise InvalidParameter("change points must be sorted, distinct and in 2..m")
    edges = [0] + [c - 1 for c in cps] + [m]
    labels = np.empty(m, dtype=object)
    raw = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        lab = "watermarked" if np.median(pvals[lo:hi]) < cutoff else "non-watermarked"
        labels[lo:hi] = lab
        raw.append((lo, hi, lab))
    merged = []
    for lo, hi, lab in raw:
        if merged and merged[-1][2] == lab:
            lo = merged.pop()[0]
        merged.append((lo, hi, lab))
    segments = [Segment(lo, hi, lab, float(np.median(pvals[lo:hi]))) for lo, hi, lab in merged]
    return labels, segments
