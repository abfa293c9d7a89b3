import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_rand_index
from wmcpd.attacks_eval import (ExperimentConfig, GroundTruth, attack_delete, attack_insert,
                                attack_substitute, build_setting, false_positives, rand_index,
                                run_experiment)
from wmcpd.errors import InvalidParameter
from wmcpd.rtest import TestConfig
from wmcpd.toy_lm import TokenSequence, new_markov_model

MODEL = new_markov_model(20, 5.0, 0)


def seq(n, start=0, wm=False):
    return TokenSequence(np.arange(start, start + n) % 1000, np.full(n, wm))


def test_insert():
    t = seq(400, wm=True)
    assert np.array_equal(attack_insert(t, 401, seq(3)).tokens[-3:], [0, 1, 2])
    assert np.array_equal(attack_insert(t, 5, seq(0)).tokens, t.tokens)
    out = attack_insert(t, 300, seq(100, start=500))
    assert len(out) == 500
    assert np.array_equal(out.tokens[399:500], t.tokens[299:400])
    assert out.provenance == "mixed"
    for pos in (0, 402):
        with pytest.raises(InvalidParameter):
            attack_insert(t, pos, seq(1))


def test_substitute():
    t = seq(500, wm=True)
    one = attack_substitute(t, 7, 7, TokenSequence([999]))
    assert one.tokens[6] == 999 and len(one) == 500 and (one.tokens != t.tokens).sum() == 1
    assert np.array_equal(attack_substitute(t, 10, 20, t[9:20]).tokens, t.tokens)
    out = attack_substitute(t, 201, 300, seq(100, start=700))
    assert GroundTruth.from_flags(out).change_points == [201, 301]
    with pytest.raises(InvalidParameter):
        attack_substitute(t, 10, 20, seq(3))
    with pytest.raises(InvalidParameter):
        attack_substitute(t, 20, 10, seq(0))


def test_delete():
    t = seq(500)
    assert len(attack_delete(t, 1, 500)) == 0
    out = attack_delete(t, 101, 200)
    assert len(out) == 400 and out.tokens[100] == t.tokens[200]
    with pytest.raises(InvalidParameter):
        attack_delete(t, 1, 0)


@settings(max_examples=50)
@given(st.integers(1, 40), st.integers(0, 10), st.data())
def test_insert_delete_round_trip(n, k, data):
    t = seq(n, wm=True)
    pos = data.draw(st.integers(1, n + 1))
    f = seq(k, start=900)
    out = attack_insert(t, pos, f)
    back = attack_delete(out, pos, pos + k - 1) if k else out
    assert np.array_equal(back.tokens, t.tokens) and np.array_equal(back.watermarked, t.watermarked)


@pytest.mark.parametrize("k,truth,n_keys", [(1, [], 500), (2, [251], 250), (3, [201, 301], 500),
                                            (4, [101, 201, 301, 401], 400)])
def test_build_setting(k, truth, n_keys):
    text, keys, gt = build_setting(k, MODEL, "ems", seed=5)
    assert len(text) == 500 and len(keys) == n_keys
    assert gt.change_points == truth and gt.length == 500
    # segment-wise provenance agrees with the truth
    edges = [1] + truth + [501]
    for (lo, hi), label in zip(zip(edges[:-1], edges[1:]), gt.labels):
        flags = text.watermarked[lo - 1:hi - 1]
        assert flags.all() if label == "watermarked" else not flags.any()
    again = build_setting(k, MODEL, "ems", seed=5)[0]
    assert np.array_equal(again.tokens, text.tokens)
    with pytest.raises(InvalidParameter):
        build_setting(5, MODEL, "ems", 0)


def test_rand_index_examples():
    assert rand_index([3], [4], 4) == pytest.approx(0.5)
    assert rand_index([], [], 10) == 1.0
    assert rand_index([101, 201], [101, 201], 500) == 1.0
    with pytest.raises(InvalidParameter):
        rand_index([], [], 1)
    with pytest.raises(InvalidParameter):
        rand_index([1], [], 10)


@settings(max_examples=200)
@given(st.integers(2, 50), st.data())
def test_rand_index_matches_pair_count(m, data):
    cp = st.lists(st.integers(2, m), max_size=6, unique=True).map(sorted)
    a, b = data.draw(cp), data.draw(cp)
    ri = rand_index(a, b, m)
    assert ri == pytest.approx(brute_rand_index(a, b, m), abs=1e-12)
    assert ri == rand_index(b, a, m)
    assert 0 <= ri <= 1
    assert (ri == 1.0) == (a == b)


def test_false_positives_one_to_one():
    assert false_positives([], [101], 20) == 0
    assert false_positives([251], [251], 20) == 0
    assert false_positives([245, 255], [251], 20) == 1
    assert false_positives([90, 205, 400], [101, 201, 301, 401], 20) == 0
    assert false_positives([150], [101, 201], 20) == 1


def test_empty_experiment():
    rep = run_experiment(2, 0, "ems")
    assert rep.results == [] and rep.to_csv().strip() == ",".join(
        ["seed", "setting", "measure", "rand_index", "n_detected", "n_false_positive",
         "runtime_ms"])


def test_setting_2_experiment_report():
    cfg = ExperimentConfig(test=TestConfig(replicates_T=99))
    rep = run_experiment(2, 10, "ems", cfg)
    ri = rep.column("rand_index")
    assert np.median(ri) >= 0.9 and ((ri >= 0) & (ri <= 1)).all()
    rows = list(csv.DictReader(io.StringIO(rep.to_csv())))
    assert [int(r["seed"]) for r in rows] == list(range(10))
    summary = json.loads(json.dumps(rep.to_dict()))["summary"]
    assert summary["rand_index"]["q1"] <= summary["rand_index"]["median"] <= summary["rand_index"]["q3"]
    par = run_experiment(2, 10, "ems", ExperimentConfig(test=TestConfig(replicates_T=99), jobs=2))
    assert par.to_csv(runtime=False) == rep.to_csv(runtime=False)
