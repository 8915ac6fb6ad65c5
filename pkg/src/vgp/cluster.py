"""Affinity propagation over per-image similarity matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ScoreError(ValueError):
    pass


@dataclass(frozen=True)
class APConfig:
    preference: float = 0.0
    damping: float = 0.5
    max_iter: int = 200
    convergence_iter: int = 15

    def __post_init__(self):
        if not 0.0 <= self.damping < 1.0:
            raise ValueError(f"damping must be in [0, 1), got {self.damping}")
        if self.max_iter < 1 or self.convergence_iter < 1:
            raise ValueError("iteration counts must be positive")


@dataclass
class APState:
    responsibility: np.ndarray
    availability: np.ndarray
    iteration: int = 0


@dataclass
class Clustering:
    exemplar_of: np.ndarray  # exemplar index for each point
    exemplars: list[int]
    iterations: int = 0
    converged: bool = False
    state: APState | None = field(default=None, repr=False)

    @property
    def labels(self) -> np.ndarray:
        order = {e: k for k, e in enumerate(self.exemplars)}
        return np.array([order[e] for e in self.exemplar_of], dtype=int)

    @property
    def clusters(self) -> list[list[int]]:
        out = {e: [] for e in self.exemplars}
        for i, e in enumerate(self.exemplar_of):
            out[int(e)].append(i)
        return list(out.values())


def build_similarity_matrix(n: int, scorer, preference: float) -> np.ndarray:
    """Dense ``n x n`` similarity matrix with ``preference`` on the diagonal.

    ``scorer(i, j)`` is called for every ordered pair; the result is
    symmetrized by averaging both orders.
    """
    s = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            v = float(scorer(i, j))
            if not math.isfinite(v):
                raise ScoreError(f"non-finite similarity {v} for pair ({i}, {j})")
            s[i, j] = v
    s = (s + s.T) / 2
    np.fill_diagonal(s, preference)
    return s


def responsibility_update(s: np.ndarray, a: np.ndarray) -> np.ndarray:
    """r(i,j) = s(i,j) - max_{j' != j} [a(i,j') + s(i,j')]."""
    n = len(s)
    as_ = a + s
    rows = np.arange(n)
    first = as_.argmax(axis=1)
    best = as_[rows, first]
    as_[rows, first] = -np.inf
    second = as_.max(axis=1) if n > 1 else np.full(n, -np.inf)
    r = s - best[:, None]
    r[rows, first] = s[rows, first] - second
    return r


def availability_update(r: np.ndarray) -> np.ndarray:
    """a(i,j) = min{0, r(j,j) + sum_{i' not in {i,j}} max(0, r(i',j))};
    a(j,j) = sum_{i' != j} max(0, r(i',j))."""
    rp = np.maximum(r, 0.0)
    np.fill_diagonal(rp, np.diag(r))
    col = rp.sum(axis=0)
    a = col[None, :] - rp
    diag = np.diag(a).copy()
    a = np.minimum(a, 0.0)
    np.fill_diagonal(a, diag)
    return a


def _assign(s: np.ndarray, exemplars: np.ndarray) -> np.ndarray:
    idx = exemplars[np.argmax(s[:, exemplars], axis=1)]
    idx[exemplars] = exemplars
    return idx


def affinity_propagation(s, cfg: APConfig | None = None, preference: float | None = None) -> Clustering:
    """Cluster with damped responsibility/availability message passing.

    The diagonal of ``s`` is replaced by ``preference`` if given, else by
    ``cfg.preference``. Iteration stops once the exemplar set has been
    stable for ``convergence_iter`` iterations or after ``max_iter``.
    """
    cfg = cfg or APConfig()
    s = np.array(s, dtype=float)
    n = len(s)
    if s.shape != (n, n) or n == 0:
        raise ValueError(f"similarity matrix must be square and non-empty, got {s.shape}")
    pref = cfg.preference if preference is None else preference
    np.fill_diagonal(s, pref)
    if n == 1:
        return Clustering(np.zeros(1, dtype=int), [0], 0, True,
                          APState(np.zeros((1, 1)), np.zeros((1, 1))))

    lam = cfg.damping
    r = np.zeros((n, n))
    a = np.zeros((n, n))
    last = None
    stable = 0
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        r = (1 - lam) * responsibility_update(s, a) + lam * r
        a = (1 - lam) * availability_update(r) + lam * a
        ex = tuple(np.flatnonzero(np.diag(r) + np.diag(a) > 0))
        if ex == last:
            stable += 1
        else:
            stable, last = 1, ex
        if stable >= cfg.convergence_iter and ex:
            converged = True
            break

    state = APState(r, a, it)
    ex = np.flatnonzero(np.diag(r) + np.diag(a) > 0)
    if len(ex) == 0:
        k = int(np.argmax(np.diag(r) + np.diag(a)))
        return Clustering(np.full(n, k), [k], it, converged, state)
    exemplar_of = _assign(s, ex)
    return Clustering(exemplar_of, [int(e) for e in ex], it, converged, state)
