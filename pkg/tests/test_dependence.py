import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import naive_levenshtein
from wmcpd.dependence import (MeasureKind, levenshtein_cost, m_ems, m_its, measure,
                              pair_scores, score_table)
from wmcpd.errors import InvalidParameter
from wmcpd.watermark import KeySequence, gen_keys


def its_keys(u, pi, V):
    return KeySequence("its", V, u=np.atleast_1d(np.asarray(u, float)),
                       pi=np.atleast_2d(np.asarray(pi)))


def ems_keys(xi):
    xi = np.atleast_2d(np.asarray(xi, float))
    return KeySequence("ems", xi.shape[1], xi=xi)


def test_m_its_examples():
    assert m_its(its_keys(0.5, [2, 0, 1], 3), [1]) == 0
    # rank V-1 (the top rank) with u = 0.9 gives 0.4 * 0.5
    assert m_its(its_keys(0.9, [2, 0, 1], 3), [0]) == pytest.approx(0.2)
    k = its_keys([0.9, 0.7], [[0, 1, 2], [2, 1, 0]], 3)
    # terms 0.4*0.5 = 0.2 and 0.2*(0/2 - 0.5) = -0.1
    assert m_its(k, [2, 2]) == pytest.approx(0.05)


def test_m_ems_examples():
    assert m_ems(ems_keys([[math.exp(-1), 0.5]]), [0]) == pytest.approx(0)
    assert m_ems(ems_keys([[0.2, 1 - 1e-12]]), [1]) == pytest.approx(1, abs=1e-9)
    assert m_ems(ems_keys([[math.exp(-1), 0.5], [0.5, math.exp(-3)]]), [0, 1]) == pytest.approx(-1)


def test_aligned_measures_reject_length_mismatch():
    with pytest.raises(InvalidParameter):
        m_ems(gen_keys("ems", 3, 4, 0), [0, 1])
    with pytest.raises(InvalidParameter):
        measure("its", gen_keys("its", 2, 4, 0), [0, 1, 2])
    with pytest.raises(InvalidParameter):
        m_its(gen_keys("its", 1, 4, 0)[:0], [])


def test_levenshtein_examples():
    k = gen_keys("its", 3, 4, 0)
    assert levenshtein_cost([], k[:0], 0.4, "itsl") == 0
    assert levenshtein_cost([], k, 0.4, "itsl") == pytest.approx(1.2)
    assert measure(MeasureKind("itsl", 0.4), k, []) == pytest.approx(-1.2)
    # d0 = |0.9 - 0/3| = 0.9 > 2 gamma = 0.8
    assert levenshtein_cost([1], its_keys(0.9, [3, 0, 1, 2], 4), 0.4, "itsl") == pytest.approx(0.8)
    assert levenshtein_cost([1], its_keys(0.1, [3, 0, 1, 2], 4), 0.4, "itsl") == pytest.approx(0.1)


def test_levenshtein_matches_recursion_exhaustively():
    rng = np.random.default_rng(0)
    for kind in ("itsl", "emsl"):
        for nk, nt in itertools.product(range(6), repeat=2):
            for _ in range(3):
                keys = gen_keys(kind[:3], 5, 4, int(rng.integers(1 << 30)))[:nk]
                y = rng.integers(0, 4, nt)
                gamma = float(rng.choice([0.0, 0.4, 1.3]))
                assert levenshtein_cost(y, keys, gamma, kind) == naive_levenshtein(y, keys, gamma, kind)


def test_huge_gamma_reduces_to_diagonal():
    keys = gen_keys("its", 6, 5, 3)
    y = np.array([4, 0, 2, 2, 1, 3])
    d0 = np.abs(keys.u - keys.pi[np.arange(6), y] / 4)
    assert levenshtein_cost(y, keys, 1e6, "itsl") == pytest.approx(d0.sum())
    assert measure(MeasureKind("itsl", 1e6), keys, y) == pytest.approx(-d0.sum())


@settings(max_examples=60)
@given(st.integers(0, 5), st.integers(0, 5), st.integers(0, 2**31), st.floats(0, 2))
def test_itsl_cost_below_all_indel_path(nk, nt, seed, gamma):
    keys = gen_keys("its", 5, 3, seed)[:nk]
    y = np.random.default_rng(seed).integers(0, 3, nt)
    assert levenshtein_cost(y, keys, gamma, "itsl") <= gamma * (nk + nt) + 1e-12


@settings(max_examples=60)
@given(st.integers(1, 30), st.integers(2, 8), st.integers(0, 2**31))
def test_m_its_bounded_and_tables_agree(n, V, seed):
    keys = gen_keys("its", n, V, seed)
    y = np.random.default_rng(seed).integers(0, V, n)
    val = m_its(keys, y)
    assert abs(val) <= 0.25
    assert np.mean(np.diag(pair_scores("its", keys, y))) == pytest.approx(val)
    ek = gen_keys("ems", n, V, seed)
    assert np.mean(np.diag(pair_scores("ems", ek, y))) == pytest.approx(m_ems(ek, y))


def test_null_means_are_centred():
    y = np.random.default_rng(1).integers(0, 6, 50)
    for kind, fn in (("its", m_its), ("ems", m_ems)):
        vals = np.array([fn(gen_keys(kind, 50, 6, s), y) for s in range(10_000)])
        assert abs(vals.mean()) <= 3 * vals.std(ddof=1) / math.sqrt(len(vals))


def test_score_table_checks_scheme_and_tokens():
    with pytest.raises(InvalidParameter):
        score_table("ems", gen_keys("its", 2, 3, 0))
    with pytest.raises(InvalidParameter):
        pair_scores("its", gen_keys("its", 2, 3, 0), [0, 3])
    with pytest.raises(InvalidParameter):
        MeasureKind("kgw")
    with pytest.raises(InvalidParameter):
        MeasureKind("itsl", -1.0)
    assert MeasureKind("EMSL").scheme == "ems" and MeasureKind("emsl").levenshtein
