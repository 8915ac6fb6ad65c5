import math

import numpy as np
import pytest

from oracles import best_threshold_f
from vgp import optimize
from vgp.optimize import GPSurrogate, tune_preference, tune_threshold


def test_gp_interpolates_observations():
    x = np.array([0.1, 0.4, 0.8])
    y = np.array([1.0, -2.0, 0.5])
    gp = GPSurrogate(x, y, length_scale=0.2)
    mean, var = gp.predict(x)
    np.testing.assert_allclose(mean, y, atol=1e-8)
    assert np.all(var == 0)


def test_ei_zero_at_observed_points():
    x = np.array([0.0, 0.5, 1.0])
    gp = optimize.fit_gp(x, np.array([0.2, 0.9, 0.1]), (0.0, 1.0))
    assert np.abs(optimize.expected_improvement(gp, x, 0.9)).max() <= 1e-12
    assert optimize.expected_improvement(gp, np.array([0.25]), 0.9)[0] > 0


def test_finds_quadratic_peak():
    hits = 0
    for seed in range(10):
        res = tune_preference(lambda p: -(p - 0.3) ** 2, (0.0, 1.0), budget=20, seed=seed)
        assert len(res.history) == 20
        hits += abs(res.best_x - 0.3) <= 0.05
    assert hits >= 9


def test_non_finite_values_treated_as_worst():
    calls = []

    def f(p):
        calls.append(p)
        return float("nan") if p > 0.7 else -(p - 0.2) ** 2

    res = tune_preference(f, (0.0, 1.0), budget=12, seed=0)
    assert math.isfinite(res.best_y)
    assert all(math.isfinite(y) for _, y in res.history)
    assert abs(res.best_x - 0.2) < 0.1


def test_bad_arguments():
    with pytest.raises(ValueError):
        tune_preference(lambda p: p, (1.0, 0.0))
    with pytest.raises(ValueError):
        tune_preference(lambda p: p, (0.0, 1.0), budget=3)


def test_preference_bounds():
    lo, hi = optimize.preference_bounds([0.0, 0.5, 1.0])
    assert hi == pytest.approx(0.5) and lo < 0.0
    lo, hi = optimize.preference_bounds([0.3, 0.3])
    assert lo < hi


def test_threshold_examples():
    r = tune_threshold([0.9, 0.9, 0.1, 0.1], [True, True, False, False])
    assert r.threshold == pytest.approx(0.5) and r.f_score == 1.0

    r = tune_threshold([0.2, 0.7, 0.4], [True, True, True])
    assert r.f_score == 1.0 and r.threshold < 0.2

    # inverted scores: only the predict-everything cut helps
    r = tune_threshold([0.1, 0.2, 0.8, 0.9], [True, False, False, False])
    p = 0.25
    assert r.f_score == pytest.approx(2 * p / (p + 1))
    assert r.threshold < 0.1


def test_threshold_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(2, 20))
        s = np.round(rng.random(n), 1)
        g = rng.random(n) < 0.4
        if not g.any():
            g[0] = True
        r = tune_threshold(s, g)
        assert r.f_score == pytest.approx(best_threshold_f(s.tolist(), g.tolist()), abs=1e-12)
        pred = s > r.threshold
        tp = (pred & g).sum()
        assert r.recall == pytest.approx(tp / g.sum())
