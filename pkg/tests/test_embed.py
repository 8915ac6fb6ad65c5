import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vgp import embed


def table(text):
    return embed.load_word_vectors(io.StringIO(text))


def test_load_word_vectors():
    t = table("red 1.0 0.0\nblue 0.0 1.0\n")
    assert t.dim == 2 and len(t) == 2
    np.testing.assert_array_equal(t.get("Red"), [1.0, 0.0])


def test_first_duplicate_wins():
    t = table("red 1 0\nred 0 1\n")
    np.testing.assert_array_equal(t.get("red"), [1.0, 0.0])


@pytest.mark.parametrize("text", ["red 1 0\nblue 1\n", "red x y\n", "", "red\n"])
def test_bad_vector_files(text):
    with pytest.raises(embed.LoadError):
        table(text)


def test_embed_average():
    t = table("red 1 0\njersey 0 1\n")
    v, oov = embed.embed_average(["red", "jersey"], t)
    np.testing.assert_allclose(v, [0.5, 0.5])
    assert not oov
    v, _ = embed.embed_average(["jersey", "zzz"], t)
    np.testing.assert_array_equal(v, [0.0, 1.0])
    v, oov = embed.embed_average(["zzz", "qqq"], t)
    assert oov and not v.any()


def test_mixture_two_clouds():
    rng = np.random.default_rng(3)
    a = rng.normal(0, 0.5, size=(300, 2))
    b = rng.normal(10, 0.5, size=(300, 2))
    m = embed.fit_mixture(np.vstack([a, b]), 2, seed=0)
    means = m.means[np.argsort(m.means[:, 0])]
    np.testing.assert_allclose(means[0], a.mean(axis=0), atol=0.1)
    np.testing.assert_allclose(means[1], b.mean(axis=0), atol=0.1)


def test_mixture_single_component_is_sample_mean():
    x = np.random.default_rng(0).normal(size=(50, 4))
    m = embed.fit_mixture(x, 1)
    np.testing.assert_allclose(m.means[0], x.mean(axis=0), rtol=0, atol=1e-12)


def test_mixture_deterministic_and_monotone():
    x = np.random.default_rng(1).normal(size=(200, 3))
    m1 = embed.fit_mixture(x, 4, seed=7)
    m2 = embed.fit_mixture(x, 4, seed=7)
    np.testing.assert_array_equal(m1.means, m2.means)
    np.testing.assert_array_equal(m1.scales, m2.scales)
    assert all(b >= a - 1e-9 * abs(a) for a, b in zip(m1.loglik, m1.loglik[1:]))


def test_mixture_scale_floor():
    x = np.vstack([np.zeros((10, 2)), np.ones((10, 2))])
    m = embed.fit_mixture(x, 2)
    assert (m.scales >= embed.SCALE_FLOOR).all()


def _model(k, d, seed=0):
    rng = np.random.default_rng(seed)
    w = rng.random(k) + 0.1
    return embed.MixtureModel(w / w.sum(), rng.normal(size=(k, d)), rng.random((k, d)) + 0.5)


def test_fisher_length():
    assert embed.encode_fisher(np.ones((3, 2)), _model(3, 2)).shape == (12,)
    assert 2 * embed.FULL_PRESET["components"] * embed.FULL_PRESET["dim"] == 18000


def test_fisher_layout_location_block_first():
    m = _model(2, 3)
    x = m.means[:1] + 1e-3  # near component 0, tiny location gradient
    fv = embed.encode_fisher(x, m)
    # raw location gradient of component 0 for one vector: r * (x - mu) / (sd * sqrt(w))
    assert np.all(np.sign(fv[:3]) == np.sign(1e-3 / m.scales[0]))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 1000))
def test_fisher_unit_norm_and_order_invariant(t, seed):
    rng = np.random.default_rng(seed)
    m = _model(3, 4, seed)
    x = rng.normal(size=(t, 4))
    fv = embed.encode_fisher(x, m)
    assert abs(np.linalg.norm(fv) - 1) < 1e-9
    np.testing.assert_allclose(embed.encode_fisher(x[::-1], m), fv, atol=1e-12)


def test_pca_plane_exact():
    rng = np.random.default_rng(0)
    basis = np.linalg.qr(rng.normal(size=(5, 2)))[0].T
    x = rng.normal(size=(40, 2)) @ basis + 3.0
    p = embed.fit_pca(x, 2)
    recon = embed.apply_pca(x, p) @ p.components + p.mean
    assert np.abs(recon - x).max() < 1e-8


def test_pca_full_rank_preserves_distances():
    x = np.random.default_rng(1).normal(size=(30, 4))
    z = embed.apply_pca(x, embed.fit_pca(x, 4))
    d = lambda a: np.linalg.norm(a[:, None] - a[None], axis=2)
    assert np.abs(d(z) - d(x)).max() < 1e-8


def test_pca_planted_spectrum():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(20000, 3)) * np.sqrt([9.0, 1.0, 0.01])
    x = x @ np.linalg.qr(rng.normal(size=(3, 3)))[0]
    p = embed.fit_pca(x, 3)
    assert p.explained_variance[0] / p.explained_variance.sum() >= 0.89


def test_pca_sign_convention():
    x = np.random.default_rng(4).normal(size=(20, 3))
    p = embed.fit_pca(x, 2)
    q = embed.fit_pca(-x, 2)
    np.testing.assert_allclose(p.components, q.components, atol=1e-12)
    for row in p.components:
        assert row[np.abs(row).argmax()] > 0


def test_cosine():
    assert embed.cosine_similarity([1, 2], [1, 2]) == pytest.approx(1.0)
    assert embed.cosine_similarity([1, 0], [0, 3]) == 0.0
    assert embed.cosine_similarity([1, 0], [1, 1]) == pytest.approx(0.70711, abs=1e-5)
    assert embed.cosine_similarity([0, 0], [1, 1]) == 0.0
    with pytest.raises(ValueError):
        embed.cosine_similarity([1, 0], [1, 0, 0])


def test_cosine_matrix_matches_pairwise():
    x = np.random.default_rng(5).normal(size=(6, 3))
    x[2] = 0
    m = embed.cosine_matrix(x)
    for i in range(6):
        for j in range(6):
            if i != j:
                assert m[i, j] == pytest.approx(embed.cosine_similarity(x[i], x[j]), abs=1e-12)
