"""Slow, independent reference computations used to check the fast code."""

import itertools
import math


def ari_by_pairs(pred, gold):
    """ARI from pair-agreement counts over all item pairs."""
    n = len(pred)
    a = b = c = d = 0
    for i, j in itertools.combinations(range(n), 2):
        sp, sg = pred[i] == pred[j], gold[i] == gold[j]
        if sp and sg:
            a += 1
        elif sp:
            b += 1
        elif sg:
            c += 1
        else:
            d += 1
    den = (a + b) * (b + d) + (a + c) * (c + d)
    if den == 0:
        same = all((pred[i] == pred[j]) == (gold[i] == gold[j])
                   for i, j in itertools.combinations(range(n), 2))
        return 1.0 if same else 0.0
    return 2.0 * (a * d - b * c) / den


def prf_naive(labels_gold, sim, threshold):
    """Pairwise precision/recall/F by looping over every entity pair."""
    n = len(labels_gold)
    tp = fp = fn = 0
    for i in range(n):
        for j in range(i + 1, n):
            pred = sim[i][j] > threshold
            gold = labels_gold[i] == labels_gold[j]
            tp += pred and gold
            fp += pred and not gold
            fn += gold and not pred
    p = tp / (tp + fp) if tp + fp else 1.0
    r = tp / (tp + fn)
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def ap_exhaustive(s, preference):
    """Exemplar set maximizing net similarity (preference per exemplar plus
    each point's similarity to its exemplar), searched over all subsets."""
    n = len(s)
    best = None
    for k in range(1, n + 1):
        for ex in itertools.combinations(range(n), k):
            total = preference * k
            for i in range(n):
                if i not in ex:
                    total += max(s[i][e] for e in ex)
            if best is None or total > best[0]:
                best = (total, ex)
    return set(best[1])


def best_threshold_f(scores, gold):
    """Best pairwise F over every distinct cut, trying all thresholds."""
    vals = sorted(set(scores))
    cands = [vals[0] - 1.0] + vals
    best = 0.0
    npos = sum(gold)
    for t in cands:
        tp = sum(1 for s, g in zip(scores, gold) if s > t and g)
        npred = sum(1 for s in scores if s > t)
        p = tp / npred if npred else 1.0
        r = tp / npos
        f = 2 * p * r / (p + r) if p + r else 0.0
        best = max(best, f)
    return best


def _dot(u, v):
    return sum(a * b for a, b in zip(u, v))


def _matvec(m, v):
    return [_dot(row, v) for row in m]


def _unit(v):
    n = math.sqrt(_dot(v, v))
    return [x / max(n, 1e-12) for x in v]


def fusion_output(t, V, p):
    """One entity through the attention fusion net, written with plain lists."""
    W1, b1, W2, b2, w, U, d = (p[k].tolist() for k in ("W1", "b1", "W2", "b2", "w", "U", "d"))
    tt = _unit([x + y for x, y in zip(_matvec(W2, list(t)), b2)])
    energies = []
    for v in V:
        vt = _unit([x + y for x, y in zip(_matvec(W1, list(v)), b1)])
        h = [max(x + y, 0.0) for x, y in zip(vt, tt)]
        energies.append(_dot(w, h))
    top = max(energies)
    ex = [math.exp(e - top) for e in energies]
    z = sum(ex)
    att = [e / z for e in ex]
    ctx = [sum(att[n] * V[n][k] for n in range(len(V))) for k in range(len(V[0]))]
    q = _unit(ctx) + tt
    return [x + y for x, y in zip(_matvec(U, q), d)], att


def mlp_logit(xi, xj, p):
    M1, c1, M2, c2 = (p[k].tolist() for k in ("M1", "c1", "M2", "c2"))
    x = list(xi) + list(xj)
    hidden = [max(z + c, 0.0) for z, c in zip(_matvec(M1, x), c1)]
    return _dot(M2, hidden) + c2[0]


def pair_similarity(ti, tj, V, p):
    if V is not None:
        yi, _ = fusion_output(ti, V, p)
        yj, _ = fusion_output(tj, V, p)
    else:
        yi, yj = list(ti), list(tj)
    m = (mlp_logit(yi, yj, p) + mlp_logit(yj, yi, p)) / 2
    return 1.0 / (1.0 + math.exp(-m))
