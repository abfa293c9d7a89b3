"""Edit attacks, the four benchmark settings, and segmentation scoring.

Text positions are 1-based. A change point is the index of the first token of
a new segment, so a sequence of length ``m`` has change points in ``2..m``.
"""
import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ._rng import derive_seed
from .dependence import as_measure
from .errors import InvalidParameter
from .rtest import TestConfig, auto_window, window_pvalues
from .segmentation import SegmentationConfig, seedbs_not
from .toy_lm import as_tokens, new_markov_model, sample_plain, sample_prompt
from .watermark import gen_keys, generate_watermarked

SETTINGS = (1, 2, 3, 4)
CSV_FIELDS = ("seed", "setting", "measure", "rand_index", "n_detected", "n_false_positive",
              "runtime_ms")


@dataclass(frozen=True)
class GroundTruth:
    length: int
    change_points: list
    labels: list  # one per segment

    def __post_init__(self):
        cps = list(self.change_points)
        if cps != sorted(set(cps)) or any(not 1 < c <= self.length for c in cps):
            raise InvalidParameter("truth change points must be sorted, distinct and in 2..m")
        if len(self.labels) != len(cps) + 1:
            raise InvalidParameter("need one label per segment")

    @classmethod
    def from_flags(cls, text):
        """Read the truth off a sequence's per-token watermark flags."""
        flags = as_tokens(text).watermarked
        cps = [int(i) + 1 for i in np.flatnonzero(flags[1:] != flags[:-1]) + 1]
        edges = [1] + cps
        labels = ["watermarked" if flags[e - 1] else "non-watermarked" for e in edges]
        return cls(len(flags), cps, labels)

    def to_dict(self):
        return asdict(self)


# --- attacks ---------------------------------------------------------------

def attack_insert(text, pos, filler):
    """Splice ``filler`` in before position ``pos`` (``len + 1`` appends)."""
    text, filler = as_tokens(text), as_tokens(filler)
    if not 1 <= pos <= len(text) + 1:
        raise InvalidParameter(f"insert position {pos} outside 1..{len(text) + 1}")
    return text[:pos - 1] + filler + text[pos - 1:]


def _check_range(text, lo, hi):
    if not 1 <= lo <= hi <= len(text):
        raise InvalidParameter(f"range {lo}..{hi} invalid for length {len(text)}")


def attack_substitute(text, lo, hi, filler):
    """Replace tokens ``lo..hi`` (inclusive) with ``filler`` of the same length."""
    text, filler = as_tokens(text), as_tokens(filler)
    _check_range(text, lo, hi)
    if len(filler) != hi - lo + 1:
        raise InvalidParameter(f"filler length {len(filler)} != {hi - lo + 1}")
    return text[:lo - 1] + filler + text[hi:]


def attack_delete(text, lo, hi):
    text = as_tokens(text)
    _check_range(text, lo, hi)
    return text[:lo - 1] + text[hi:]


def plain_filler(model, text, pos, count, seed):
    """``count`` unwatermarked tokens continuing from the token before ``pos``."""
    text = as_tokens(text)
    return sample_plain(model, text.tokens[:pos - 1][-1:], count, derive_seed(seed, "filler", pos))


def substitute_plain(model, text, lo, hi, seed):
    return attack_substitute(text, lo, hi, plain_filler(model, text, lo, hi - lo + 1, seed))


def insert_plain(model, text, pos, count, seed):
    return attack_insert(text, pos, plain_filler(model, text, pos, count, seed))


# --- settings --------------------------------------------------------------

def watermarked_length(k):
    if k not in SETTINGS:
        raise InvalidParameter(f"setting must be one of {SETTINGS}, got {k}")
    return {1: 500, 2: 250, 3: 500, 4: 400}[k]


def generate_text(model, scheme, n, seed):
    """Prompt, keys and ``n`` watermarked tokens, all derived from ``seed``."""
    prompt = sample_prompt(model, 10, derive_seed(seed, "prompt"))
    keys = gen_keys(scheme, n, model.vocab_size, derive_seed(seed, "keys"))
    return prompt, keys, generate_watermarked(model, prompt, keys)


def apply_setting(k, model, text, seed):
    """Turn the watermarked text of setting ``k`` into its attacked version."""
    if len(text) != watermarked_length(k):
        raise InvalidParameter(f"setting {k} expects {watermarked_length(k)} watermarked tokens")
    if k == 2:
        text = insert_plain(model, text, 251, 250, seed)
    elif k == 3:
        text = substitute_plain(model, text, 201, 300, seed)
    elif k == 4:
        text = substitute_plain(model, text, 101, 200, seed)
        text = insert_plain(model, text, 301, 100, seed)
    return text, GroundTruth.from_flags(text)


def build_setting(k, model, scheme, seed):
    _, keys, text = generate_text(model, scheme, watermarked_length(k), seed)
    attacked, truth = apply_setting(k, model, text, seed)
    return attacked, keys, truth


# --- evaluation ------------------------------------------------------------

def _cluster_sizes(cps, m):
    edges = np.concatenate([[1], np.asarray(cps, dtype=np.int64), [m + 1]])
    return np.diff(edges)


def _check_cps(cps, m):
    cps = sorted(int(c) for c in cps)
    if len(set(cps)) != len(cps) or any(not 1 < c <= m for c in cps):
        raise InvalidParameter(f"change points must be distinct and in 2..{m}")
    return cps


def rand_index(cps_a, cps_b, m):
    """Fraction of position pairs on which the two segmentations agree."""
    if m < 2:
        raise InvalidParameter("m must be >= 2")
    a, b = _check_cps(cps_a, m), _check_cps(cps_b, m)
    # contingency table of consecutive clusters: overlaps of the merged grid
    merged = sorted(set(a) | set(b))
    both = _cluster_sizes(merged, m)
    pairs = lambda x: float(np.sum(x * (x - 1) / 2))
    same_a, same_b, same_both = pairs(_cluster_sizes(a, m)), pairs(_cluster_sizes(b, m)), pairs(both)
    total = m * (m - 1) / 2
    return (total - same_a - same_b + 2 * same_both) / total


def false_positives(detected, truth, tol):
    """Detections left over after matching each true change point to at most
    one detection within ``tol``, nearest first."""
    pairs = sorted((abs(d - t), i, j) for i, d in enumerate(detected)
                   for j, t in enumerate(truth) if abs(d - t) <= tol)
    used_d, used_t = set(), set()
    for _, i, j in pairs:
        if i not in used_d and j not in used_t:
            used_d.add(i)
            used_t.add(j)
    return len(detected) - len(used_d)


# --- experiments -----------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    vocab_size: int = 20
    beta: float = 5.0
    model_seed: int = 0
    test: TestConfig = field(default_factory=TestConfig)
    seg: SegmentationConfig = field(default_factory=SegmentationConfig)
    auto_window: bool = False
    jobs: int = 1


@dataclass(frozen=True)
class SeedResult:
    seed: int
    setting: int
    measure: str
    change_points: list
    truth: list
    rand_index: float
    n_false_positive: int
    runtime_ms: float

    @property
    def n_detected(self):
        return len(self.change_points)


@dataclass(frozen=True)
class ExperimentReport:
    setting: int
    measure: str
    seeds: list
    results: list

    def column(self, name):
        return np.array([getattr(r, name) for r in self.results], dtype=float)

    def summary(self):
        out = {}
        for name in ("rand_index", "n_false_positive", "n_detected"):
            x = self.column(name)
            out[name] = (dict(zip(("q1", "median", "q3"), map(float, np.percentile(x, [25, 50, 75]))))
                         if len(x) else None)
        return out

    def to_dict(self):
        return {"setting": self.setting, "measure": self.measure, "seeds": list(self.seeds),
                "summary": self.summary(),
                "results": [{**asdict(r), "n_detected": r.n_detected} for r in self.results]}

    def to_csv(self, runtime=True):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_NONE)
        fields = CSV_FIELDS if runtime else CSV_FIELDS[:-1]
        w.writerow(fields)
        for r in self.results:
            row = {"seed": r.seed, "setting": r.setting, "measure": r.measure,
                   "rand_index": repr(float(r.rand_index)), "n_detected": r.n_detected,
                   "n_false_positive": r.n_false_positive, "runtime_ms": repr(float(r.runtime_ms))}
            w.writerow([row[f] for f in fields])
        return buf.getvalue()


def detector_configs(config, seed, n):
    """Per-seed test and segmentation configs; seeds derive from the master seed."""
    test = config.test
    if config.auto_window:
        test = replace(test, window_B=auto_window(n))
    return (replace(test, seed=derive_seed(seed, "rtest"), jobs=1),
            replace(config.seg, seed=derive_seed(seed, "segment"), jobs=1))


def run_seed(setting, seed, measure, config):
    measure = as_measure(measure)
    t0 = time.perf_counter()
    model = new_markov_model(config.vocab_size, config.beta, config.model_seed)
    text, keys, truth = build_setting(setting, model, measure.scheme, seed)
    test, seg = detector_configs(replace(config, test=replace(config.test, measure=measure)),
                                 seed, len(keys))
    pv = window_pvalues(keys, text, test)
    found = seedbs_not(pv.pvals, seg).change_points
    return SeedResult(int(seed), setting, measure.kind, found, truth.change_points,
                      rand_index(found, truth.change_points, len(text)),
                      false_positives(found, truth.change_points, test.window_B),
                      1000 * (time.perf_counter() - t0))


def run_experiment(setting, n_seeds, measure, config=None, first_seed=0):
    """Full pipeline for seeds ``first_seed .. first_seed + n_seeds - 1``."""
    config = config or ExperimentConfig()
    watermarked_length(setting)
    seeds = list(range(first_seed, first_seed + n_seeds))
    measure = as_measure(measure)
    if config.jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as ex:
            results = list(ex.map(run_seed, [setting] * len(seeds), seeds,
                                  [measure] * len(seeds), [config] * len(seeds)))
    else:
        results = [run_seed(setting, s, measure, config) for s in seeds]
    return ExperimentReport(setting, measure.kind, seeds, sorted(results, key=lambda r: r.seed))
