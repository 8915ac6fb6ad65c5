"""Clustering and pairwise evaluation of VGP extraction."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from math import comb

import numpy as np

BREAKDOWNS = ("all", "single", "multi")


def _as_labels(part) -> list:
    if hasattr(part, "labels") and not isinstance(part, (list, tuple, np.ndarray)):
        lab = part.labels
        return list(lab() if callable(lab) else lab)
    return list(part)


def adjusted_rand_index(pred, gold) -> float:
    """ARI between two labelings of the same items.

    Identical partitions (including ``n <= 1``) score 1.0; a zero
    denominator with differing partitions scores 0.0.
    """
    p = _as_labels(pred)
    g = _as_labels(gold)
    if len(p) != len(g):
        raise ValueError(f"partitions cover different item counts: {len(p)} vs {len(g)}")
    n = len(p)
    if n <= 1:
        return 1.0
    pu = {v: k for k, v in enumerate(dict.fromkeys(p))}
    gu = {v: k for k, v in enumerate(dict.fromkeys(g))}
    table = np.zeros((len(pu), len(gu)), dtype=np.int64)
    for a, b in zip(p, g):
        table[pu[a], gu[b]] += 1
    index = sum(comb(int(x), 2) for x in table.ravel())
    sum_a = sum(comb(int(x), 2) for x in table.sum(axis=1))
    sum_b = sum(comb(int(x), 2) for x in table.sum(axis=0))
    total = comb(n, 2)
    expected = sum_a * sum_b / total
    maximum = (sum_a + sum_b) / 2
    if maximum == expected:
        same = (table > 0).sum(axis=1).max() == 1 and (table > 0).sum(axis=0).max() == 1
        return 1.0 if same else 0.0
    return float((index - expected) / (maximum - expected))


def pair_labels(labels) -> tuple[np.ndarray, np.ndarray]:
    """Upper-triangle index pairs and whether each pair shares a label."""
    labels = np.asarray(_as_labels(labels))
    iu, ju = np.triu_indices(len(labels), k=1)
    return np.stack([iu, ju], axis=1), labels[iu] == labels[ju]


def pairwise_prf(scores, threshold: float, gold) -> tuple[float, float, float]:
    """Precision, recall and F over pairs predicted by ``score > threshold``.

    ``gold`` holds a boolean per pair. With no predictions precision is 1.0.
    """
    scores = np.asarray(scores, dtype=float)
    gold = np.asarray(gold, dtype=bool)
    if gold.shape != scores.shape:
        raise ValueError("scores and gold labels differ in shape")
    n_pos = int(gold.sum())
    if n_pos == 0:
        raise ValueError("no gold-positive pairs")
    pred = scores > threshold
    tp = int((pred & gold).sum())
    n_pred = int(pred.sum())
    precision = tp / n_pred if n_pred else 1.0
    recall = tp / n_pos
    f = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f


@dataclass
class BreakdownScores:
    ari: float = float("nan")
    precision: float = float("nan")
    recall: float = float("nan")
    f_score: float = float("nan")
    images: int = 0
    entities: int = 0
    pairs: int = 0


@dataclass
class EvalReport:
    method: str
    threshold: float
    preference: float
    breakdowns: dict[str, BreakdownScores] = field(default_factory=dict)

    @property
    def ari(self) -> float:
        return self.breakdowns["all"].ari

    @property
    def f_score(self) -> float:
        return self.breakdowns["all"].f_score

    def to_dict(self) -> dict:
        return {"method": self.method, "threshold": self.threshold, "preference": self.preference,
                "breakdowns": {k: asdict(v) for k, v in self.breakdowns.items()}}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def table(self) -> str:
        head = f"{'method':<22}" + "".join(f"{c:>26}" for c in ("ARI", "Precision", "Recall", "F-score"))
        cols = []
        for name in ("ari", "precision", "recall", "f_score"):
            vals = [getattr(self.breakdowns[b], name) for b in BREAKDOWNS]
            cols.append(" / ".join(f"{100 * v:6.2f}" for v in vals))
        return head + "\n" + f"{self.method:<22}" + "".join(f"{c:>26}" for c in cols)


@dataclass
class ImageResult:
    """Per-image inputs to :func:`evaluate_split`."""

    image_id: str
    n_tokens: list[int]  # normalized token count per entity
    pred_labels: list[int]
    gold_labels: list[int]
    similarity: np.ndarray  # off-diagonal entries are used


def _subset(n_tokens, which):
    if which == "all":
        return list(range(len(n_tokens)))
    if which == "single":
        return [i for i, k in enumerate(n_tokens) if k == 1]
    return [i for i, k in enumerate(n_tokens) if k >= 2]


def evaluate_split(results: list[ImageResult], threshold: float, method: str = "",
                   preference: float = float("nan"), per_image_prf: bool = False) -> EvalReport:
    """Mean ARI over images plus pooled pairwise P/R/F for each breakdown.

    The single/multi breakdowns restrict both clustering and pairs to
    entities with one / several normalized tokens, so mixed pairs count
    only under "all".
    """
    report = EvalReport(method, threshold, preference)
    for which in BREAKDOWNS:
        aris, scores, gold, per_img = [], [], [], []
        n_ent = 0
        for res in results:
            idx = _subset(res.n_tokens, which)
            if not idx:
                continue
            pl = [res.pred_labels[i] for i in idx]
            gl = [res.gold_labels[i] for i in idx]
            aris.append(adjusted_rand_index(pl, gl))
            n_ent += len(idx)
            pairs, same = pair_labels(gl)
            if len(pairs):
                sub = np.asarray(idx)
                s = res.similarity[sub[pairs[:, 0]], sub[pairs[:, 1]]]
                scores.append(s)
                gold.append(same)
                if per_image_prf and same.any():
                    per_img.append(pairwise_prf(s, threshold, same))
        b = BreakdownScores(images=len(aris), entities=n_ent)
        if aris:
            b.ari = float(np.mean(aris))
        if scores:
            s, g = np.concatenate(scores), np.concatenate(gold)
            b.pairs = len(s)
            if per_image_prf and per_img:
                b.precision, b.recall, b.f_score = (float(x) for x in np.mean(per_img, axis=0))
            elif g.any():
                b.precision, b.recall, b.f_score = pairwise_prf(s, threshold, g)
        report.breakdowns[which] = b
    return report
