"""Randomization tests for the presence of a watermark.

The detector holds the key sequence used at generation time. It compares a
dependence statistic computed with that key against the same statistic
computed with ``T`` freshly drawn keys, which are independent of the text by
construction, and reports the rank-based p-value.

Two statistics are offered: a global scan over all pairs of length-``B`` key
and token windows, and a per-position statistic over a window centred on each
token, which turns a text into a sequence of p-values.
"""
import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._rng import stream
from .dependence import MeasureKind, as_measure, score_table
from .errors import InvalidParameter
from .toy_lm import as_tokens
from .watermark import draw_keys, stack_keys

CHUNK = 25  # replicates scored per vectorised batch


@dataclass(frozen=True)
class TestConfig:
    __test__ = False  # not a pytest class

    window_B: int = 20
    replicates_T: int = 999
    measure: MeasureKind = field(default_factory=lambda: MeasureKind("ems"))
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "measure", as_measure(self.measure))
        if self.window_B < 2 or self.window_B % 2:
            raise InvalidParameter(f"window_B must be a positive even integer, got {self.window_B}")
        if self.replicates_T < 1:
            raise InvalidParameter("replicates_T must be >= 1")


@dataclass(frozen=True, eq=False)
class PValueSequence:
    pvals: np.ndarray
    window_B: int
    replicates_T: int
    measure: MeasureKind

    def __len__(self):
        return len(self.pvals)

    def to_csv(self):
        buf = io.StringIO()
        buf.write("index,p\n")
        for i, p in enumerate(self.pvals, start=1):
            buf.write(f"{i},{float(p)!r}\n")
        return buf.getvalue()


def read_pvalue_csv(text):
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows or set(rows[0]) != {"index", "p"}:
        raise InvalidParameter("expected a CSV with header index,p")
    idx = np.array([int(r["index"]) for r in rows])
    if not np.array_equal(idx, np.arange(1, len(rows) + 1)):
        raise InvalidParameter("index column must run 1..m")
    return np.array([float(r["p"]) for r in rows])


def auto_window(n):
    """floor(3 n^(1/3)), bumped to the next even number."""
    B = int(np.floor(3 * n ** (1 / 3) + 1e-9))
    return B + (B % 2)


def randomization_pvalue(observed, replicates, T=None):
    replicates = np.asarray(replicates, dtype=np.float64)
    if replicates.size == 0:
        raise InvalidParameter("need at least one replicate")
    if T is not None and T != replicates.size:
        raise InvalidParameter(f"expected {T} replicates, got {replicates.size}")
    return (1 + int(np.sum(observed <= replicates))) / (replicates.size + 1)


def replicate_keys(scheme, n, vocab_size, seed, ts):
    """Null key sequences, replicate ``t`` drawn from its own stream (seed, t)."""
    return stack_keys([draw_keys(scheme, n, vocab_size, stream(seed, "replicate", t)) for t in ts],
                      scheme, vocab_size)


def centred_windows(length, B):
    """0-based [start, end) of the window [(i - B/2) v 1, (i + B/2) ^ length], i = 1..length."""
    i = np.arange(1, length + 1)
    start = np.maximum(i - B // 2, 1) - 1
    end = np.minimum(i + B // 2, length)
    return start, end


class _WindowPlan:
    """Window bounds shared by the observed key and every replicate."""

    def __init__(self, n, m, B, kind):
        self.kind = kind
        self.ks, self.ke = centred_windows(n, B)
        self.ts, self.te = centred_windows(m, B)

    def phi(self, table, y):
        """Statistic of every token window, maximised over key windows."""
        if self.kind.levenshtein:
            return _kernels.lev_window_max(table, y, self.ks, self.ke, self.ts, self.te,
                                           self.kind.gamma)
        return _kernels.diag_window_max(table, y, self.ks, self.ke, self.ts, self.te)


def _check_inputs(keys, y, measure):
    if keys.scheme != measure.scheme:
        raise InvalidParameter(f"measure {measure} needs {measure.scheme.upper()} keys")
    if len(y) and (y.min() < 0 or y.max() >= keys.vocab_size):
        raise InvalidParameter("tokens outside the key vocabulary")


def _replicate_tables(kind, keys, seed, ts):
    for c in range(0, len(ts), CHUNK):
        batch = replicate_keys(keys.scheme, len(keys), keys.vocab_size, seed, ts[c:c + CHUNK])
        yield from score_table(kind, batch)


def _replicate_phis(plan, keys, y, seed, ts):
    return np.stack([plan.phi(G, y) for G in _replicate_tables(plan.kind, keys, seed, ts)])


def _parallel(fn, args_list, jobs):
    if jobs <= 1 or len(args_list) <= 1:
        return [fn(*a) for a in args_list]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, *zip(*args_list)))


def _split(ts, jobs):
    return [c for c in np.array_split(ts, max(1, jobs)) if len(c)]


def window_pvalues(keys, text, config):
    """One p-value per token from the window centred on it.

    The same ``T`` replicate key sequences serve every window.
    """
    y = as_tokens(text).tokens
    B, T, kind = config.window_B, config.replicates_T, config.measure
    _check_inputs(keys, y, kind)
    if B // 2 >= len(y):
        raise InvalidParameter(f"window half-width {B // 2} must be below text length {len(y)}")
    plan = _WindowPlan(len(keys), len(y), B, kind)
    observed = plan.phi(score_table(kind, keys), y)
    chunks = _split(np.arange(1, T + 1), config.jobs)
    parts = _parallel(_replicate_phis, [(plan, keys, y, config.seed, c) for c in chunks],
                      config.jobs)
    reps = np.concatenate(parts, axis=0)
    counts = (observed[None, :] <= reps).sum(axis=0)
    return PValueSequence((1 + counts) / (T + 1), B, T, kind)


def _scan(table, y, B, kind):
    if kind.levenshtein:
        ks = np.arange(table.shape[0] - B + 1)
        ts = np.arange(len(y) - B + 1)
        return float(_kernels.lev_window_max(table, y, ks, ks + B, ts, ts + B, kind.gamma).max())
    return float(_kernels.diag_scan_max(table, y, B))


def global_scan_stat(keys, text, B, measure):
    """Max over key offset a and token offset b of M(keys[a:a+B], text[b:b+B])."""
    y = as_tokens(text).tokens
    kind = as_measure(measure)
    _check_inputs(keys, y, kind)
    if B < 1 or B > len(keys) or B > len(y):
        raise InvalidParameter(f"B={B} must be in [1, min(n={len(keys)}, m={len(y)})]")
    return _scan(score_table(kind, keys), y, B, kind)


def _replicate_scans(keys, y, B, kind, seed, ts):
    return np.array([_scan(G, y, B, kind) for G in _replicate_tables(kind, keys, seed, ts)])


def global_test(keys, text, config):
    """p-value of the global scan statistic against ``T`` independent key draws."""
    y = as_tokens(text).tokens
    kind, B, T = config.measure, config.window_B, config.replicates_T
    observed = global_scan_stat(keys, y, B, kind)
    chunks = _split(np.arange(1, T + 1), config.jobs)
    reps = np.concatenate(_parallel(_replicate_scans,
                                    [(keys, y, B, kind, config.seed, c) for c in chunks],
                                    config.jobs))
    return randomization_pvalue(observed, reps, T)
