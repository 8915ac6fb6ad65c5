import json
import random

import numpy as np
import pytest

from oracles import ari_by_pairs, prf_naive
from vgp import evaluation
from vgp.evaluation import ImageResult, adjusted_rand_index, pairwise_prf


def test_ari_examples():
    assert adjusted_rand_index([0, 0, 1, 1], [0, 0, 1, 1]) == 1.0
    assert adjusted_rand_index([0, 0, 1, 1], [1, 1, 0, 0]) == 1.0
    assert adjusted_rand_index([0, 0, 1, 2], [0, 0, 1, 1]) == pytest.approx(4 / 7, abs=1e-6)


def test_ari_degenerate():
    assert adjusted_rand_index([], []) == 1.0
    assert adjusted_rand_index([3], [1]) == 1.0
    assert adjusted_rand_index([0, 1, 2], [5, 6, 7]) == 1.0
    assert adjusted_rand_index([0, 0, 0], [1, 1, 1]) == 1.0
    assert adjusted_rand_index([0, 0, 0], [0, 1, 2]) == 0.0
    with pytest.raises(ValueError):
        adjusted_rand_index([0, 1], [0])


def test_ari_matches_pair_oracle():
    rng = random.Random(11)
    for _ in range(300):
        n = rng.randint(0, 12)
        p = [rng.randint(0, rng.randint(0, 4)) for _ in range(n)]
        g = [rng.randint(0, rng.randint(0, 4)) for _ in range(n)]
        assert adjusted_rand_index(p, g) == pytest.approx(ari_by_pairs(p, g), abs=1e-9)


def test_ari_matches_sklearn():
    sk = pytest.importorskip("sklearn.metrics")
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = int(rng.integers(2, 30))
        p, g = rng.integers(0, 4, n), rng.integers(0, 5, n)
        assert adjusted_rand_index(p, g) == pytest.approx(sk.adjusted_rand_score(g, p), abs=1e-12)


def test_prf_examples():
    # gold {a,b,c} + {d}; pairs ab ac ad bc bd cd, only ab predicted
    scores = [0.9, 0.1, 0.1, 0.1, 0.1, 0.1]
    gold = [True, True, False, True, False, False]
    p, r, f = pairwise_prf(scores, 0.5, gold)
    assert (p, r) == (1.0, pytest.approx(1 / 3)) and f == pytest.approx(0.5)
    assert pairwise_prf(scores, 2.0, gold) == (1.0, 0.0, 0.0)
    assert pairwise_prf([1, 1, 0, 1, 0, 0], 0.5, gold) == (1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        pairwise_prf([0.5], 0.1, [False])


def test_prf_matches_naive():
    rng = np.random.default_rng(5)
    for _ in range(200):
        n = int(rng.integers(2, 9))
        gold = rng.integers(0, 3, n)
        if len(set(gold.tolist())) == n:
            gold[1] = gold[0]
        s = rng.random((n, n))
        s = (s + s.T) / 2
        pairs, same = evaluation.pair_labels(gold)
        got = pairwise_prf(s[pairs[:, 0], pairs[:, 1]], 0.5, same)
        assert got == pytest.approx(prf_naive(gold.tolist(), s.tolist(), 0.5), abs=1e-12)


def _img(pred, gold, ntok=None, sim=None, image_id="i"):
    n = len(pred)
    sim = np.eye(n) if sim is None else sim
    return ImageResult(image_id, ntok or [1] * n, pred, gold, sim)


def test_split_mean_ari():
    rep = evaluation.evaluate_split([_img([0, 0, 1], [0, 0, 1])], 0.5)
    assert rep.ari == 1.0
    rep = evaluation.evaluate_split([_img([0, 0, 1], [0, 0, 1]), _img([0, 0, 0], [0, 1, 2], image_id="j")], 0.5)
    assert rep.ari == pytest.approx(0.5)


def test_breakdowns_drop_mixed_pairs():
    # "man" (1 token) and "red jersey" (2 tokens) pair counts under "all" only
    sim = np.array([[0, 0.9], [0.9, 0]])
    rep = evaluation.evaluate_split([_img([0, 0], [0, 0], [1, 2], sim)], 0.5)
    assert rep.breakdowns["all"].pairs == 1
    assert rep.breakdowns["single"].pairs == 0
    assert rep.breakdowns["multi"].pairs == 0
    assert rep.breakdowns["single"].entities == 1


def test_pooled_vs_per_image_prf():
    a = _img([0, 0, 1], [0, 0, 1], sim=np.array([[0, .9, .9], [.9, 0, .1], [.9, .1, 0]]))
    b = _img([0, 0], [0, 0], sim=np.array([[0, .9], [.9, 0]]), image_id="j")
    pooled = evaluation.evaluate_split([a, b], 0.5).breakdowns["all"]
    per = evaluation.evaluate_split([a, b], 0.5, per_image_prf=True).breakdowns["all"]
    assert pooled.precision == pytest.approx(2 / 3)
    assert per.precision == pytest.approx((0.5 + 1.0) / 2)


def test_report_serialization():
    rep = evaluation.evaluate_split([_img([0, 0, 1], [0, 0, 1], sim=np.ones((3, 3)))], 0.5, "WEA", -1.0)
    d = json.loads(rep.to_json())
    assert d["method"] == "WEA" and set(d["breakdowns"]) == set(evaluation.BREAKDOWNS)
    assert rep.table().splitlines()[1].startswith("WEA")
