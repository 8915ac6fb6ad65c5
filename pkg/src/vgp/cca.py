"""Regularized, eigenvalue-scaled CCA between entity and region features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class RankDeficientError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class CCAModel:
    mean_x: np.ndarray
    mean_y: np.ndarray
    wx: np.ndarray  # (dx, out_dim), columns scaled by corr**power
    wy: np.ndarray  # (dy, out_dim)
    correlations: np.ndarray  # descending
    reg: float
    power: float

    @property
    def out_dim(self) -> int:
        return self.wx.shape[1]

    def swapped(self) -> "CCAModel":
        return CCAModel(self.mean_y, self.mean_x, self.wy, self.wx, self.correlations,
                        self.reg, self.power)


def _inv_sqrt(c, what):
    vals, vecs = np.linalg.eigh(c)
    if vals.min() <= 1e-12 * max(vals.max(), 1e-300):
        raise RankDeficientError(
            f"{what} covariance is rank deficient; fit with a positive regularizer (reg > 0)")
    return (vecs / np.sqrt(vals)) @ vecs.T


def fit_cca(x, y, out_dim: int, reg: float = 1e-4, power: float = 1.0) -> CCAModel:
    """Fit CCA on paired rows of ``x`` (entity view) and ``y`` (region view).

    ``reg`` is relative: each view's covariance gets ``reg * mean(diag(C))``
    added to its diagonal. Projection columns are scaled by
    ``correlation ** power``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if y.ndim == 1:
        y = y[:, None]
    n = len(x)
    if len(y) != n:
        raise ValueError("views must have the same number of rows")
    if out_dim > min(x.shape[1], y.shape[1]) or n <= out_dim:
        raise ValueError(f"out_dim {out_dim} too large for views {x.shape}, {y.shape}")
    mx, my = x.mean(axis=0), y.mean(axis=0)
    xc, yc = x - mx, y - my
    cxx = xc.T @ xc / (n - 1)
    cyy = yc.T @ yc / (n - 1)
    cxy = xc.T @ yc / (n - 1)
    cxx += reg * np.mean(np.diag(cxx)) * np.eye(len(cxx))
    cyy += reg * np.mean(np.diag(cyy)) * np.eye(len(cyy))
    ix = _inv_sqrt(cxx, "entity-view")
    iy = _inv_sqrt(cyy, "region-view")
    # singular values of the whitened cross-covariance are the canonical
    # correlations; their squares solve (Cxx^-1 Cxy Cyy^-1 Cyx) w = rho^2 w
    u, s, vt = np.linalg.svd(ix @ cxy @ iy)
    k = out_dim
    u, s, v = u[:, :k], s[:k], vt[:k].T
    # fix signs so the largest loading of each entity-view direction is positive
    flip = np.sign(u[np.abs(u).argmax(axis=0), np.arange(k)])
    flip[flip == 0] = 1
    u, v = u * flip, v * flip
    corr = np.clip(s, 0.0, 1.0)
    scale = corr**power
    return CCAModel(mx, my, (ix @ u) * scale, (iy @ v) * scale, corr, reg, power)


def project_entity(v, model: CCAModel) -> tuple[np.ndarray, bool]:
    """Project an entity vector into the shared space and L2-normalize.

    Returns ``(vector, flagged)``; a zero input gives a flagged zero vector.
    """
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != len(model.mean_x):
        raise ValueError(f"expected dimension {len(model.mean_x)}, got {v.shape[-1]}")
    if not np.any(v):
        return np.zeros(model.out_dim), True
    z = (v - model.mean_x) @ model.wx
    norm = np.linalg.norm(z)
    if norm == 0:
        return z, True
    return z / norm, False


def project_region(v, model: CCAModel) -> np.ndarray:
    z = (np.asarray(v, dtype=float) - model.mean_y) @ model.wy
    norm = np.linalg.norm(z)
    return z / norm if norm > 0 else z
