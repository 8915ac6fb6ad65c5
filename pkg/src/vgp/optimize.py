"""Preference tuning by 1-D Bayesian optimization, and threshold tuning."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm, qmc

log = logging.getLogger(__name__)

JITTER = 1e-8
GRID_POINTS = 512
INITIAL_DESIGN = 5


@dataclass
class GPSurrogate:
    """Zero-mean GP with a squared-exponential kernel on standardized targets."""

    x: np.ndarray
    y: np.ndarray
    length_scale: float = 0.2
    signal_var: float = 1.0
    noise_var: float = 0.0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self._mu = self.y.mean() if len(self.y) else 0.0
        sd = self.y.std() if len(self.y) > 1 else 0.0
        self._sd = sd if sd > 0 else 1.0
        k = self.kernel(self.x, self.x) + (self.noise_var + JITTER * self.signal_var) * np.eye(len(self.x))
        self._chol = np.linalg.cholesky(k)
        yz = (self.y - self._mu) / self._sd
        self._alpha = np.linalg.solve(self._chol.T, np.linalg.solve(self._chol, yz))
        self._yz = yz

    def kernel(self, a, b):
        d = np.subtract.outer(np.asarray(a, float), np.asarray(b, float))
        return self.signal_var * np.exp(-0.5 * (d / self.length_scale) ** 2)

    def log_marginal_likelihood(self) -> float:
        n = len(self._yz)
        return float(-0.5 * self._yz @ self._alpha - np.log(np.diag(self._chol)).sum()
                     - 0.5 * n * math.log(2 * math.pi))

    def predict(self, xs) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and variance in the original objective units."""
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        ks = self.kernel(xs, self.x)
        mean = ks @ self._alpha
        v = np.linalg.solve(self._chol, ks.T)
        var = self.signal_var - np.sum(v**2, axis=0)
        # anything at the jitter level is numerical residue of an observed point
        var = np.where(var <= 10 * (JITTER * self.signal_var + self.noise_var), 0.0, var)
        var[var < 0] = 0.0
        return self._mu + self._sd * mean, var * self._sd**2


def expected_improvement(gp: GPSurrogate, xs, best: float) -> np.ndarray:
    mean, var = gp.predict(xs)
    sd = np.sqrt(var)
    ei = np.zeros_like(mean)
    ok = sd > 0
    z = (mean[ok] - best) / sd[ok]
    ei[ok] = (mean[ok] - best) * norm.cdf(z) + sd[ok] * norm.pdf(z)
    return np.maximum(ei, 0.0)


def fit_gp(x, y, bounds, noise_var: float = 0.0) -> GPSurrogate:
    """Pick length-scale and signal variance from a 3x3 grid by marginal likelihood."""
    width = bounds[1] - bounds[0]
    best = None
    for ls in (0.05 * width, 0.15 * width, 0.4 * width):
        for sv in (0.5, 1.0, 2.0):
            try:
                gp = GPSurrogate(x, y, ls, sv, noise_var)
            except np.linalg.LinAlgError:
                continue
            lml = gp.log_marginal_likelihood()
            if best is None or lml > best[0]:
                best = (lml, gp)
    if best is None:
        raise np.linalg.LinAlgError("no kernel setting gave a positive-definite Gram matrix")
    return best[1]


@dataclass
class TuningResult:
    best_x: float
    best_y: float
    history: list[tuple[float, float]] = field(default_factory=list)

    def dump(self, f):
        for it, (x, y) in enumerate(self.history):
            f.write(f"{it}\t{x!r}\t{y!r}\n")


def tune_preference(objective, bounds=(0.0, 1.0), budget: int = 25, seed: int = 0,
                    noise_var: float = 0.0) -> TuningResult:
    """Maximize a scalar ``objective(preference)`` within ``bounds``.

    A 5-point Latin-hypercube design is followed by expected-improvement
    steps, each maximized over a 512-point grid.
    """
    lo, hi = float(bounds[0]), float(bounds[1])
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        raise ValueError(f"bad bounds {bounds}")
    if budget < INITIAL_DESIGN:
        raise ValueError(f"budget must be at least {INITIAL_DESIGN}")
    rng = np.random.default_rng(seed)
    design = qmc.LatinHypercube(d=1, seed=rng).random(INITIAL_DESIGN)[:, 0]
    grid = np.linspace(lo, hi, GRID_POINTS)

    xs: list[float] = []
    raw: list[float] = []

    def observe(x):
        x = float(np.clip(x, lo, hi))
        y = float(objective(x))
        xs.append(x)
        raw.append(y)

    def cleaned():
        finite = [v for v in raw if math.isfinite(v)]
        worst = min(finite) if finite else 0.0
        return np.array([v if math.isfinite(v) else worst for v in raw])

    for u in design:
        observe(lo + u * (hi - lo))
    while len(xs) < budget:
        ys = cleaned()
        gp = fit_gp(xs, ys, (lo, hi), noise_var)
        ei = expected_improvement(gp, grid, ys.max())
        if ei.max() > 0:
            x_next = grid[int(np.argmax(ei))]
        else:
            # nothing left to gain under the model: probe the least explored point
            dist = np.min(np.abs(grid[:, None] - np.asarray(xs)[None, :]), axis=1)
            x_next = grid[int(np.argmax(dist))]
        observe(x_next)
    ys = cleaned()
    k = int(np.argmax(ys))
    return TuningResult(xs[k], float(ys[k]), list(zip(xs, ys.tolist())))


def preference_bounds(offdiag) -> tuple[float, float]:
    """[q01 - range, q50] of the off-diagonal similarities."""
    v = np.asarray(offdiag, dtype=float)
    q01, q50 = np.quantile(v, [0.01, 0.5])
    span = v.max() - v.min()
    lo = q01 - span
    if not lo < q50:
        lo = q50 - 1.0
    return float(lo), float(q50)


@dataclass(frozen=True)
class ThresholdResult:
    threshold: float
    precision: float
    recall: float
    f_score: float


def tune_threshold(scores, gold) -> ThresholdResult:
    """Threshold maximizing pairwise F (ties: higher precision, then lower threshold).

    Candidates are the midpoints between consecutive distinct scores, a value
    just below the minimum (everything predicted) and the maximum (nothing
    predicted).
    """
    s = np.asarray(scores, dtype=float)
    g = np.asarray(gold, dtype=bool)
    n_pos = int(g.sum())
    if n_pos == 0:
        raise ValueError("no gold-positive pairs")
    vals = np.unique(s)
    cands = np.concatenate([[np.nextafter(vals[0], -np.inf)], (vals[:-1] + vals[1:]) / 2, [vals[-1]]])
    order = np.argsort(-s, kind="stable")
    gs = g[order]
    tp_cum = np.concatenate([[0], np.cumsum(gs)])
    # number of scores strictly above each candidate
    n_pred = len(s) - np.searchsorted(np.sort(s), cands, side="right")
    tp = tp_cum[n_pred]
    prec = np.where(n_pred > 0, tp / np.maximum(n_pred, 1), 1.0)
    rec = tp / n_pos
    f = np.where(prec + rec > 0, 2 * prec * rec / np.maximum(prec + rec, 1e-300), 0.0)
    best = None
    for k in range(len(cands)):
        key = (f[k], prec[k], -cands[k])
        if best is None or key > best[0]:
            best = (key, k)
    k = best[1]
    return ThresholdResult(float(cands[k]), float(prec[k]), float(rec[k]), float(f[k]))
