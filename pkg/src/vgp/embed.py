"""Entity feature vectors: word-embedding averages and Fisher vectors."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

# Full-scale settings; tests and the toy pipeline use smaller ones.
FULL_PRESET = {"dim": 300, "components": 30, "pca_dim": 4096}

SCALE_FLOOR = 1e-4


class LoadError(ValueError):
    pass


@dataclass(frozen=True)
class WordVectorTable:
    dim: int
    vectors: dict[str, np.ndarray]

    def get(self, token: str):
        return self.vectors.get(token.lower())

    def __contains__(self, token: str) -> bool:
        return token.lower() in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)


def load_word_vectors(stream) -> WordVectorTable:
    dim = None
    vectors: dict[str, np.ndarray] = {}
    for lineno, line in enumerate(stream, 1):
        parts = line.split()
        if not parts:
            continue
        token, nums = parts[0].lower(), parts[1:]
        try:
            vec = np.array([float(x) for x in nums])
        except ValueError:
            raise LoadError(f"line {lineno}: non-numeric field") from None
        if dim is None:
            if not nums:
                raise LoadError(f"line {lineno}: no vector values")
            dim = len(nums)
        elif len(nums) != dim:
            raise LoadError(f"line {lineno}: expected {dim} values, got {len(nums)}")
        vectors.setdefault(token, vec)
    if dim is None:
        raise LoadError("no word vectors found")
    return WordVectorTable(dim, vectors)


def token_matrix(tokens, table: WordVectorTable) -> np.ndarray:
    """Stack the in-vocabulary token vectors (shape ``(k, D)``, k may be 0)."""
    rows = [table.get(t) for t in tokens]
    rows = [r for r in rows if r is not None]
    if not rows:
        return np.zeros((0, table.dim))
    return np.vstack(rows)


def embed_average(tokens, table: WordVectorTable) -> tuple[np.ndarray, bool]:
    """Mean word vector of ``tokens``; returns ``(vector, oov)``.

    Out-of-vocabulary tokens are skipped. If nothing is found the zero vector is
    returned with ``oov=True``.
    """
    m = token_matrix(tokens, table)
    if len(m) == 0:
        return np.zeros(table.dim), True
    return m.mean(axis=0), False


@dataclass(frozen=True)
class MixtureModel:
    weights: np.ndarray  # (K,)
    means: np.ndarray  # (K, D)
    scales: np.ndarray  # (K, D) standard deviations
    loglik: tuple[float, ...] = ()

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def _log_resp(x, weights, means, scales):
    var = scales**2
    logp = -0.5 * (
        np.sum(np.log(2 * np.pi * var), axis=1)[None, :]
        + np.sum((x[:, None, :] - means[None]) ** 2 / var[None], axis=2)
    )
    logp += np.log(weights)[None, :]
    mx = logp.max(axis=1, keepdims=True)
    lse = mx + np.log(np.exp(logp - mx).sum(axis=1, keepdims=True))
    return logp - lse, lse[:, 0]


def _kmeanspp(x, k, rng):
    n = len(x)
    centers = [x[rng.integers(n)]]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centers.append(x[idx])
        d2 = np.minimum(d2, np.sum((x - x[idx]) ** 2, axis=1))
    return np.array(centers)


def fit_mixture(vectors, n_components: int, seed: int = 0, max_iter: int = 200,
                tol: float = 1e-6) -> MixtureModel:
    """Diagonal Gaussian mixture fitted by EM from k-means++ seeding.

    Stops when the relative log-likelihood improvement drops below ``tol``.
    Scales that collapse are floored at ``SCALE_FLOOR``.
    """
    x = np.asarray(vectors, dtype=float)
    n, dim = x.shape
    if n_components < 1 or n < n_components:
        raise ValueError(f"need at least {n_components} samples, got {n}")
    rng = np.random.default_rng(seed)
    means = _kmeanspp(x, n_components, rng)
    # hard assignment to seeds for the initial weights and scales
    lab = np.argmin(((x[:, None, :] - means[None]) ** 2).sum(axis=2), axis=1)
    global_sd = np.maximum(x.std(axis=0), SCALE_FLOOR)
    weights = np.empty(n_components)
    scales = np.empty_like(means)
    for k in range(n_components):
        mem = x[lab == k]
        weights[k] = max(len(mem), 1)
        scales[k] = mem.std(axis=0) if len(mem) > 1 else global_sd
    weights /= weights.sum()
    scales = np.maximum(scales, SCALE_FLOOR)

    history: list[float] = []
    floored = False
    for _ in range(max_iter):
        log_r, lse = _log_resp(x, weights, means, scales)
        ll = float(lse.sum())
        if history and ll < history[-1] - 1e-9 * abs(history[-1]) and not floored:
            raise AssertionError(f"EM log-likelihood decreased: {history[-1]} -> {ll}")
        converged = bool(history) and (ll - history[-1]) <= tol * abs(history[-1])
        history.append(ll)
        if converged:
            break
        r = np.exp(log_r)
        nk = np.maximum(r.sum(axis=0), 1e-12)
        weights = nk / n
        means = (r.T @ x) / nk[:, None]
        var = (r.T @ x**2) / nk[:, None] - means**2
        sd = np.sqrt(np.maximum(var, 0.0))
        floored = bool((sd < SCALE_FLOOR).any())
        if floored:
            log.warning("mixture component scale underflow; flooring at %g", SCALE_FLOOR)
        scales = np.maximum(sd, SCALE_FLOOR)
    return MixtureModel(weights, means, scales, tuple(history))


def encode_fisher(token_vectors, model: MixtureModel) -> np.ndarray:
    """Fisher vector of a set of word vectors, length ``2 * K * D``.

    Location gradients for all components come first, then scale gradients;
    the result is signed-square-rooted and L2-normalized.
    """
    x = np.atleast_2d(np.asarray(token_vectors, dtype=float))
    if x.shape[0] == 0:
        raise ValueError("Fisher encoding needs at least one vector")
    t = len(x)
    log_r, _ = _log_resp(x, model.weights, model.means, model.scales)
    r = np.exp(log_r)  # (T, K)
    z = (x[:, None, :] - model.means[None]) / model.scales[None]  # (T, K, D)
    g_mu = np.einsum("tk,tkd->kd", r, z) / (t * np.sqrt(model.weights)[:, None])
    g_sd = np.einsum("tk,tkd->kd", r, z**2 - 1) / (t * np.sqrt(2 * model.weights)[:, None])
    fv = np.concatenate([g_mu.ravel(), g_sd.ravel()])
    fv = np.sign(fv) * np.sqrt(np.abs(fv))
    norm = np.linalg.norm(fv)
    return fv / norm if norm > 0 else fv


@dataclass(frozen=True)
class PCAProjection:
    mean: np.ndarray
    components: np.ndarray  # (out_dim, in_dim), orthonormal rows
    explained_variance: np.ndarray

    @property
    def out_dim(self) -> int:
        return self.components.shape[0]


def fit_pca(vectors, out_dim: int) -> PCAProjection:
    x = np.asarray(vectors, dtype=float)
    n, dim = x.shape
    if out_dim > min(n, dim):
        raise ValueError(f"out_dim {out_dim} exceeds min(samples={n}, dim={dim})")
    mean = x.mean(axis=0)
    _, s, vt = np.linalg.svd(x - mean, full_matrices=False)
    comps = vt[:out_dim]
    # sign convention: largest-magnitude loading positive
    flip = np.sign(comps[np.arange(out_dim), np.abs(comps).argmax(axis=1)])
    comps = comps * flip[:, None]
    var = s[:out_dim] ** 2 / max(n - 1, 1)
    return PCAProjection(mean, comps, var)


def apply_pca(v, proj: PCAProjection) -> np.ndarray:
    return (np.asarray(v, dtype=float) - proj.mean) @ proj.components.T


def cosine_similarity(ti, tj) -> float:
    ti = np.asarray(ti, dtype=float)
    tj = np.asarray(tj, dtype=float)
    if ti.shape != tj.shape:
        raise ValueError(f"dimension mismatch: {ti.shape} vs {tj.shape}")
    ni, nj = np.linalg.norm(ti), np.linalg.norm(tj)
    if ni == 0 or nj == 0:
        return 0.0
    return float(np.clip(ti @ tj / (ni * nj), -1.0, 1.0))


def cosine_matrix(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    norms = np.linalg.norm(x, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    u = x / safe[:, None]
    return np.clip(u @ u.T, -1.0, 1.0)
