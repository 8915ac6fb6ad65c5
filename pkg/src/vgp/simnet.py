"""Supervised pairwise similarity: text-only MLP and attention fusion net.

Forward and backward passes are written out by hand in numpy. Both entities
of a pair go through the same fusion parameters; the MLP sees the
concatenation ``[x_i, x_j]`` and emits one logit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SNN = "SNN"
SNN_IMAGE = "SNN_IMAGE"
MODES = (SNN, SNN_IMAGE)

NORM_EPS = 1e-12

FUSION_KEYS = ("W1", "b1", "W2", "b2", "w", "U", "d")
MLP_KEYS = ("M1", "c1", "M2", "c2")


@dataclass
class FusionParams:
    mode: str
    tensors: dict[str, np.ndarray]

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")

    def __getitem__(self, key):
        return self.tensors[key]

    @property
    def keys(self) -> tuple[str, ...]:
        return (FUSION_KEYS + MLP_KEYS) if self.mode == SNN_IMAGE else MLP_KEYS

    def copy(self) -> "FusionParams":
        return FusionParams(self.mode, {k: v.copy() for k, v in self.tensors.items()})

    def astype(self, dtype) -> "FusionParams":
        return FusionParams(self.mode, {k: v.astype(dtype).astype(float) for k, v in self.tensors.items()})


def init_params(mode: str, d_t: int, d_v: int = 0, d_h: int = 512, d_y: int = 512,
                d_mlp: int = 128, seed: int = 0) -> FusionParams:
    rng = np.random.default_rng(seed)

    def dense(rows, cols):
        return rng.normal(0.0, 1.0 / math.sqrt(cols), size=(rows, cols))

    p: dict[str, np.ndarray] = {}
    if mode == SNN_IMAGE:
        if d_v <= 0:
            raise ValueError("SNN_IMAGE needs the feature-map width d_v")
        p["W1"] = dense(d_h, d_v)
        p["b1"] = np.zeros(d_h)
        p["W2"] = dense(d_h, d_t)
        p["b2"] = np.zeros(d_h)
        p["w"] = rng.normal(0.0, 1.0 / math.sqrt(d_h), size=d_h)
        p["U"] = dense(d_y, d_v + d_h)
        p["d"] = np.zeros(d_y)
        d_x = d_y
    else:
        d_x = d_t
    p["M1"] = dense(d_mlp, 2 * d_x)
    p["c1"] = np.zeros(d_mlp)
    p["M2"] = rng.normal(0.0, 1.0 / math.sqrt(d_mlp), size=d_mlp)
    p["c2"] = np.zeros(1)
    return FusionParams(mode, p)


def _l2norm(z):
    n = np.linalg.norm(z, axis=-1, keepdims=True)
    return z / np.maximum(n, NORM_EPS), n


def _l2norm_back(u, n, g):
    big = n > NORM_EPS
    proj = g - u * np.sum(u * g, axis=-1, keepdims=True)
    return np.where(big, proj / np.maximum(n, NORM_EPS), g / NORM_EPS)


def softmax(e, axis=-1):
    z = e - e.max(axis=axis, keepdims=True)
    x = np.exp(z)
    return x / x.sum(axis=axis, keepdims=True)


@dataclass
class FusionActivations:
    v_tilde: np.ndarray  # (B, N, d_h)
    t_tilde: np.ndarray  # (B, d_h)
    h: np.ndarray  # (B, N, d_h)
    energies: np.ndarray  # (B, N)
    attention: np.ndarray  # (B, N)
    context: np.ndarray  # (B, d_v)
    y: np.ndarray  # (B, d_y)
    # backward cache
    pre_h: np.ndarray = field(repr=False, default=None)
    nv: np.ndarray = field(repr=False, default=None)
    nt: np.ndarray = field(repr=False, default=None)
    c_hat: np.ndarray = field(repr=False, default=None)
    nc: np.ndarray = field(repr=False, default=None)
    q: np.ndarray = field(repr=False, default=None)
    t: np.ndarray = field(repr=False, default=None)
    V: np.ndarray = field(repr=False, default=None)


def forward_fusion(t, V, params: FusionParams):
    """Fuse entity vectors ``t`` (B, d_t) with feature maps ``V`` (B, N, d_v).

    Unbatched inputs ``(d_t,)`` / ``(N, d_v)`` are accepted as well. Returns
    ``(y, activations)``.
    """
    t = np.asarray(t, dtype=float)
    V = np.asarray(V, dtype=float)
    single = t.ndim == 1
    if single:
        t, V = t[None], V[None]
    W1, b1, W2, b2, w, U, d = (params[k] for k in FUSION_KEYS)
    vt, nv = _l2norm(V @ W1.T + b1)
    tt, nt = _l2norm(t @ W2.T + b2)
    pre = vt + tt[:, None, :]
    h = np.maximum(pre, 0.0)
    e = h @ w
    a = softmax(e)
    c = np.einsum("bn,bnd->bd", a, V)
    c_hat, nc = _l2norm(c)
    q = np.concatenate([c_hat, tt], axis=1)
    y = q @ U.T + d
    act = FusionActivations(vt, tt, h, e, a, c, y, pre, nv, nt, c_hat, nc, q, t, V)
    if single:
        return y[0], act
    return y, act


def backward_fusion(dy, act: FusionActivations, params: FusionParams) -> dict[str, np.ndarray]:
    W1, b1, W2, b2, w, U, d = (params[k] for k in FUSION_KEYS)
    d_v = act.V.shape[2]
    g = {"U": dy.T @ act.q, "d": dy.sum(axis=0)}
    dq = dy @ U
    dc = _l2norm_back(act.c_hat, act.nc, dq[:, :d_v])
    dtt = dq[:, d_v:].copy()
    da = np.einsum("bd,bnd->bn", dc, act.V)
    a = act.attention
    de = a * (da - np.sum(a * da, axis=1, keepdims=True))
    g["w"] = np.einsum("bn,bnh->h", de, act.h)
    dpre = de[:, :, None] * w * (act.pre_h > 0)
    dtt += dpre.sum(axis=1)
    dzv = _l2norm_back(act.v_tilde, act.nv, dpre)
    g["W1"] = np.einsum("bnh,bnd->hd", dzv, act.V)
    g["b1"] = dzv.sum(axis=(0, 1))
    dzt = _l2norm_back(act.t_tilde, act.nt, dtt)
    g["W2"] = dzt.T @ act.t
    g["b2"] = dzt.sum(axis=0)
    return g


def _mlp_forward(xi, xj, params):
    x = np.concatenate([xi, xj], axis=1)
    z1 = x @ params["M1"].T + params["c1"]
    g1 = np.maximum(z1, 0.0)
    logit = g1 @ params["M2"] + params["c2"][0]
    return logit, (x, z1, g1)


def _mlp_backward(dlogit, cache, params):
    x, z1, g1 = cache
    grads = {"M2": g1.T @ dlogit, "c2": np.array([dlogit.sum()])}
    dz1 = np.outer(dlogit, params["M2"]) * (z1 > 0)
    grads["M1"] = dz1.T @ x
    grads["c1"] = dz1.sum(axis=0)
    dx = dz1 @ params["M1"]
    half = dx.shape[1] // 2
    return grads, dx[:, :half], dx[:, half:]


def pair_logits(ti, tj, V, params: FusionParams, keep=False):
    """Logits for ordered pairs; ``V`` is (B, N, d_v) or None in SNN mode."""
    ti = np.atleast_2d(np.asarray(ti, dtype=float))
    tj = np.atleast_2d(np.asarray(tj, dtype=float))
    if params.mode == SNN_IMAGE:
        if V is None:
            raise ValueError("SNN_IMAGE scoring needs a feature map")
        V = np.asarray(V, dtype=float)
        if V.ndim == 2:
            V = np.broadcast_to(V, (len(ti),) + V.shape)
        b = len(ti)
        y, act = forward_fusion(np.concatenate([ti, tj]), np.concatenate([V, V]), params)
        xi, xj = y[:b], y[b:]
    else:
        act = None
        xi, xj = ti, tj
    logit, cache = _mlp_forward(xi, xj, params)
    if keep:
        return logit, (cache, act)
    return logit


def sigmoid(x):
    x = np.asarray(x, dtype=float)
    return np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))


def score_pair(ti, tj, V, params: FusionParams, mode: str | None = None):
    """Symmetric similarity in (0, 1): sigmoid of the mean logit over both orders."""
    if mode is not None and mode != params.mode:
        raise ValueError(f"parameters are for {params.mode}, not {mode}")
    li = pair_logits(ti, tj, V, params)
    lj = pair_logits(tj, ti, V, params)
    s = sigmoid((li + lj) / 2)
    return float(s[0]) if np.ndim(ti) == 1 else s


def ensemble_score(s_snn, s_img):
    return (np.asarray(s_snn, dtype=float) + np.asarray(s_img, dtype=float)) / 2


def bce_with_logits(logit, label):
    logit = np.asarray(logit, dtype=float)
    label = np.asarray(label, dtype=float)
    return np.maximum(logit, 0) - logit * label + np.log1p(np.exp(-np.abs(logit)))


def loss_and_grads(params: FusionParams, ti, tj, V, labels, weight_decay: float = 0.0):
    """Mean sigmoid cross-entropy plus ``weight_decay / 2 * ||theta||^2``."""
    labels = np.asarray(labels, dtype=float)
    b = len(labels)
    logit, (cache, act) = pair_logits(ti, tj, V, params, keep=True)
    loss = float(bce_with_logits(logit, labels).mean())
    dlogit = (sigmoid(logit) - labels) / b
    grads, dxi, dxj = _mlp_backward(dlogit, cache, params)
    if params.mode == SNN_IMAGE:
        grads.update(backward_fusion(np.concatenate([dxi, dxj]), act, params))
    if weight_decay:
        for k in params.keys:
            loss += 0.5 * weight_decay * float(np.sum(params[k] ** 2))
            grads[k] = grads[k] + weight_decay * params[k]
    return loss, grads, act


def gradient_check(params: FusionParams, ti, tj, V, labels, eps: float = 1e-5,
                   weight_decay: float = 1e-4) -> dict[str, float]:
    """Relative error between analytic and central-difference gradients.

    Returns ``{tensor name: ||g_analytic - g_numeric|| / (||g_analytic|| + ||g_numeric||)}``;
    tensors whose gradients are both exactly zero report 0.
    """
    _, grads, _ = loss_and_grads(params, ti, tj, V, labels, weight_decay)
    out = {}
    for k in params.keys:
        theta = params.tensors[k]
        num = np.zeros_like(theta)
        flat = theta.reshape(-1)
        nflat = num.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + eps
            lp, _, _ = loss_and_grads(params, ti, tj, V, labels, weight_decay)
            flat[i] = old - eps
            lm, _, _ = loss_and_grads(params, ti, tj, V, labels, weight_decay)
            flat[i] = old
            nflat[i] = (lp - lm) / (2 * eps)
        denom = np.linalg.norm(grads[k]) + np.linalg.norm(num)
        out[k] = 0.0 if denom == 0 else float(np.linalg.norm(grads[k] - num) / denom)
    return out


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 300
    positive_fraction: float = 0.15
    learning_rate: float = 0.01
    lr_decay: float = 0.5
    weight_decay: float = 1e-4
    epochs: int = 5
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if not 0 < self.positive_fraction < 1:
            raise ValueError("positive_fraction must be in (0, 1)")
        if self.batch_size < 2 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be positive")

    @property
    def positives_per_batch(self) -> int:
        return int(round(self.positive_fraction * self.batch_size))

    @property
    def negatives_per_batch(self) -> int:
        return self.batch_size - self.positives_per_batch

    def lr_at(self, epoch: int) -> float:
        return self.learning_rate * self.lr_decay**epoch


@dataclass
class PairDataset:
    """Labelled entity pairs; ``image`` indexes into ``feature_maps``."""

    ti: np.ndarray
    tj: np.ndarray
    labels: np.ndarray
    image: np.ndarray | None = None
    feature_maps: np.ndarray | None = None  # (n_images, N, d_v)

    def maps(self, idx):
        if self.feature_maps is None:
            return None
        return self.feature_maps[self.image[idx]]


@dataclass
class TrainLog:
    epoch_loss: list[float] = field(default_factory=list)
    epoch_lr: list[float] = field(default_factory=list)
    step_loss: list[float] = field(default_factory=list)
    attention_sum_error: list[float] = field(default_factory=list)
    batch_positives: list[int] = field(default_factory=list)


class Adam:
    def __init__(self, params: FusionParams, cfg: TrainConfig):
        self.cfg = cfg
        self.m = {k: np.zeros_like(params[k]) for k in params.keys}
        self.v = {k: np.zeros_like(params[k]) for k in params.keys}
        self.t = 0

    def step(self, params: FusionParams, grads, lr: float):
        c = self.cfg
        self.t += 1
        for k in params.keys:
            self.m[k] = c.beta1 * self.m[k] + (1 - c.beta1) * grads[k]
            self.v[k] = c.beta2 * self.v[k] + (1 - c.beta2) * grads[k] ** 2
            mh = self.m[k] / (1 - c.beta1**self.t)
            vh = self.v[k] / (1 - c.beta2**self.t)
            params.tensors[k] -= lr * mh / (np.sqrt(vh) + c.adam_eps)


def train(data: PairDataset, params: FusionParams, cfg: TrainConfig = TrainConfig()):
    """Mini-batch Adam on sigmoid cross-entropy; returns ``(params, log)``.

    Every batch holds ``positives_per_batch`` positives (cycling through a
    shuffled list of all positives) and ``negatives_per_batch`` negatives
    drawn at random. One epoch covers every positive once.
    """
    labels = np.asarray(data.labels).astype(bool)
    pos = np.flatnonzero(labels)
    neg = np.flatnonzero(~labels)
    if len(pos) == 0:
        raise ValueError("training needs at least one positive pair")
    if len(neg) == 0:
        raise ValueError("training needs at least one negative pair")
    if params.mode == SNN_IMAGE and data.feature_maps is None:
        raise ValueError("SNN_IMAGE training needs feature maps")
    rng = np.random.default_rng(cfg.seed)
    params = params.copy()
    opt = Adam(params, cfg)
    n_p, n_n = cfg.positives_per_batch, cfg.negatives_per_batch
    log = TrainLog()
    for epoch in range(cfg.epochs):
        lr = cfg.lr_at(epoch)
        order = rng.permutation(pos)
        n_batches = math.ceil(len(order) / n_p)
        losses = []
        for b in range(n_batches):
            take = np.arange(b * n_p, (b + 1) * n_p) % len(order)
            p_idx = order[take]
            n_idx = rng.choice(neg, size=n_n, replace=len(neg) < n_n)
            idx = np.concatenate([p_idx, n_idx])
            loss, grads, act = loss_and_grads(params, data.ti[idx], data.tj[idx], data.maps(idx),
                                              labels[idx], cfg.weight_decay)
            opt.step(params, grads, lr)
            losses.append(loss)
            log.step_loss.append(loss)
            log.batch_positives.append(int(labels[idx].sum()))
            if act is not None:
                log.attention_sum_error.append(float(np.abs(act.attention.sum(axis=1) - 1).max()))
        log.epoch_loss.append(float(np.mean(losses)))
        log.epoch_lr.append(lr)
    return params, log


def attention_map(t, V, params: FusionParams) -> np.ndarray:
    """Attention over the N grid cells, reshaped to ``(sqrt(N), sqrt(N))``."""
    _, act = forward_fusion(t, V, params)
    a = act.attention[0]
    side = math.isqrt(len(a))
    if side * side != len(a):
        raise ValueError(f"feature map has {len(a)} cells, not a square grid")
    return a.reshape(side, side)
