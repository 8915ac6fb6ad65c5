"""Translation-probability similarity from image-pivoted caption pairs.

Captions of the same image are paired into a pseudo-parallel corpus, aligned
with IBM Model 1 in both directions, symmetrized with grow-diag-final-and,
and entity pairs whose words align consistently are counted.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

NULL = "<null>"

Span = tuple[int, int]  # [start, end)


@dataclass(frozen=True)
class SentencePair:
    image_id: str
    src_index: int
    tgt_index: int
    src: tuple[str, ...]
    tgt: tuple[str, ...]
    src_spans: tuple[tuple[Span, str], ...] = ()  # (span, entity form)
    tgt_spans: tuple[tuple[Span, str], ...] = ()

    @property
    def pair_id(self) -> str:
        return f"{self.image_id}:{self.src_index}-{self.tgt_index}"

    def reversed(self) -> "SentencePair":
        return SentencePair(self.image_id, self.tgt_index, self.src_index, self.tgt, self.src,
                            self.tgt_spans, self.src_spans)


def build_pseudo_parallel(images) -> list[SentencePair]:
    """All unordered caption pairs per image, entity spans carried over.

    ``images`` maps image id to an object with ``captions`` and ``entities``
    (see :class:`vgp.corpus.ImageRecord`). Tokens are case-folded and spans
    are trimmed to the entity's content words.
    """
    pairs = []
    for image_id, rec in images.items():
        spans = defaultdict(list)
        for e in rec.entities:
            spans[e.caption_index].append((e.content_span, e.form))
        caps = sorted(rec.captions, key=lambda c: c.caption_index)
        for a, b in itertools.combinations(caps, 2):
            pairs.append(SentencePair(
                image_id, a.caption_index, b.caption_index,
                tuple(t.lower() for t in a.tokens), tuple(t.lower() for t in b.tokens),
                tuple(spans[a.caption_index]), tuple(spans[b.caption_index])))
    return pairs


@dataclass
class LexiconTable:
    """IBM Model 1 lexical parameters ``t(target | source)``."""

    prob: dict[str, dict[str, float]]
    loglik: list[float] = field(default_factory=list)

    def __call__(self, tgt: str, src: str) -> float:
        return self.prob.get(src, {}).get(tgt, 0.0)


def _corpus_loglik(bitext, prob, null=True):
    total = 0.0
    for src, tgt in bitext:
        srcn = (NULL,) + src if null else src
        norm = len(srcn)
        for f in tgt:
            total += math.log(sum(prob[e][f] for e in srcn) / norm)
    return total


def train_ibm1(bitext: Sequence[tuple[Sequence[str], Sequence[str]]], iterations: int = 5,
               seed: int = 0, null: bool = True) -> LexiconTable:
    """Train IBM Model 1 by EM, modelling ``t(tgt | src)``.

    ``bitext`` is a sequence of (source tokens, target tokens). Unless
    ``null=False`` a NULL token is added on the source side. Parameters start
    uniform over the targets each source word co-occurs with; the update order
    is fixed, so the result does not depend on ``seed`` (kept for interface
    symmetry).
    """
    bitext = [(tuple(s), tuple(t)) for s, t in bitext if len(t) > 0 and (null or len(s) > 0)]
    head = (NULL,) if null else ()
    cooc: dict[str, set[str]] = defaultdict(set)
    for src, tgt in bitext:
        for e in head + src:
            cooc[e].update(tgt)
    if not bitext or not cooc:
        raise ValueError("empty vocabulary: nothing to align")
    prob = {e: {f: 1.0 / len(fs) for f in sorted(fs)} for e, fs in sorted(cooc.items())}
    history = [_corpus_loglik(bitext, prob, null)]
    for _ in range(iterations):
        counts: dict[str, dict[str, float]] = {e: dict.fromkeys(fs, 0.0) for e, fs in prob.items()}
        for src, tgt in bitext:
            srcn = head + src
            for f in tgt:
                z = sum(prob[e][f] for e in srcn)
                for e in srcn:
                    counts[e][f] += prob[e][f] / z
        for e, row in counts.items():
            tot = sum(row.values())
            prob[e] = {f: c / tot for f, c in row.items()}
        history.append(_corpus_loglik(bitext, prob, null))
    return LexiconTable(prob, history)


def viterbi_align(src: Sequence[str], tgt: Sequence[str], lexicon: LexiconTable) -> set[tuple[int, int]]:
    """Best source position for every target word under Model 1.

    Links are ``(source index, target index)``. A target word stays unlinked
    only if NULL is strictly more probable than every source word; ties among
    source words go to the smaller index.
    """
    links = set()
    for j, f in enumerate(tgt):
        best_i, best_p = None, 0.0
        for i, e in enumerate(src):
            p = lexicon(f, e)
            if p > best_p:
                best_i, best_p = i, p
        if best_i is not None and best_p >= lexicon(f, NULL):
            links.add((best_i, j))
    return links


_NEIGHBORS = ((-1, 0), (0, -1), (1, 0), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1))


def symmetrize_gdfa(forward: Iterable[tuple[int, int]], backward: Iterable[tuple[int, int]],
                    src_len: int, tgt_len: int, final: str = "both") -> set[tuple[int, int]]:
    """grow-diag-final-and over two alignments given as (source, target) links.

    ``backward`` must already be expressed in (source, target) order. The
    grow step adds union points in the 8-neighbourhood of current points
    while either endpoint is unaligned. In the final step a candidate must
    have both endpoints unaligned; with ``final="both"`` it must also be in
    both directional alignments, while ``final="either"`` takes candidates
    from each direction in turn (the Moses behaviour).
    """
    fwd = {p for p in forward if 0 <= p[0] < src_len and 0 <= p[1] < tgt_len}
    bwd = {p for p in backward if 0 <= p[0] < src_len and 0 <= p[1] < tgt_len}
    union = fwd | bwd
    out = fwd & bwd
    src_aligned = {i for i, _ in out}
    tgt_aligned = {j for _, j in out}

    changed = True
    while changed:
        changed = False
        for i in range(src_len):
            for j in range(tgt_len):
                if (i, j) not in out:
                    continue
                for di, dj in _NEIGHBORS:
                    ni, nj = i + di, j + dj
                    if (ni, nj) in union and (ni, nj) not in out and (
                            ni not in src_aligned or nj not in tgt_aligned):
                        out.add((ni, nj))
                        src_aligned.add(ni)
                        tgt_aligned.add(nj)
                        changed = True

    if final == "both":
        sources = [fwd & bwd]
    elif final == "either":
        sources = [fwd, bwd]
    else:
        raise ValueError(f"unknown final mode {final!r}")
    for alignment in sources:
        for i, j in sorted(alignment):
            if i not in src_aligned and j not in tgt_aligned:
                out.add((i, j))
                src_aligned.add(i)
                tgt_aligned.add(j)
    return out


def consistent(span_i: Span, span_j: Span, links: Iterable[tuple[int, int]]) -> bool:
    (a0, a1), (b0, b1) = span_i, span_j
    inside = False
    for s, t in links:
        in_s = a0 <= s < a1
        in_t = b0 <= t < b1
        if in_s and in_t:
            inside = True
        elif in_s or in_t:
            return False
    return inside


def extract_entity_pairs(pair: SentencePair, links) -> list[tuple[str, str]]:
    """Entity pairs whose words are consistently aligned to each other."""
    links = list(links)
    out = []
    for span_i, form_i in pair.src_spans:
        for span_j, form_j in pair.tgt_spans:
            if consistent(span_i, span_j, links):
                out.append((form_i, form_j))
    return out


@dataclass
class TranslationTable:
    """Symmetric co-occurrence counts over entity forms.

    With ``transposed=False`` conditionals follow the formula as printed:
    ``p(i|j) = c(i,j) / sum_k c(i,k)`` and ``p(j|i) = c(i,j) / sum_k c(j,k)``.
    ``transposed=True`` swaps the normalizers. The product used as the
    similarity is the same under both readings.
    """

    counts: Counter = field(default_factory=Counter)
    transposed: bool = False

    def __post_init__(self):
        self._marg: Counter = Counter()
        for (a, b), c in self.counts.items():
            self._marg[a] += c
            if a != b:
                self._marg[b] += c

    @staticmethod
    def _key(i, j):
        return (i, j) if i <= j else (j, i)

    def add(self, i: str, j: str, n: int = 1):
        self.counts[self._key(i, j)] += n
        self._marg[i] += n
        if i != j:
            self._marg[j] += n

    def count(self, i: str, j: str) -> int:
        return self.counts.get(self._key(i, j), 0)

    def marginal(self, i: str) -> int:
        return self._marg.get(i, 0)

    def p_i_given_j(self, i: str, j: str) -> float:
        c = self.count(i, j)
        if c == 0:
            return 0.0
        return c / self.marginal(j if self.transposed else i)

    def p_j_given_i(self, i: str, j: str) -> float:
        c = self.count(i, j)
        if c == 0:
            return 0.0
        return c / self.marginal(i if self.transposed else j)

    def rows(self):
        for (a, b) in sorted(self.counts):
            yield a, b, self.counts[(a, b)], self.p_i_given_j(a, b), self.p_j_given_i(a, b)

    def dump(self, f):
        for a, b, c, pij, pji in self.rows():
            f.write(f"{a}\t{b}\t{c}\t{pij!r}\t{pji!r}\n")

    @classmethod
    def load(cls, f, transposed=False) -> "TranslationTable":
        counts = Counter()
        for line in f:
            if not line.strip():
                continue
            a, b, c = line.rstrip("\n").split("\t")[:3]
            counts[cls._key(a, b)] += int(c)
        return cls(counts, transposed)


def translation_similarity(i: str, j: str, table: TranslationTable) -> float:
    return table.p_i_given_j(i, j) * table.p_j_given_i(i, j)


@dataclass
class AlignmentRun:
    pairs: list[SentencePair]
    forward: LexiconTable
    backward: LexiconTable
    alignments: list[set[tuple[int, int]]]
    table: TranslationTable


def build_translation_table(images, iterations: int = 5, seed: int = 0,
                            transposed: bool = False, final: str = "both",
                            null: bool = True) -> AlignmentRun:
    """Run the whole alignment pipeline over a corpus of images."""
    pairs = build_pseudo_parallel(images)
    fwd = train_ibm1([(p.src, p.tgt) for p in pairs], iterations, seed, null)
    bwd = train_ibm1([(p.tgt, p.src) for p in pairs], iterations, seed, null)
    table = TranslationTable(Counter(), transposed)
    alignments = []
    for p in pairs:
        f_links = viterbi_align(p.src, p.tgt, fwd)
        b_links = {(i, j) for j, i in viterbi_align(p.tgt, p.src, bwd)}
        links = symmetrize_gdfa(f_links, b_links, len(p.src), len(p.tgt), final)
        alignments.append(links)
        for a, b in extract_entity_pairs(p, links):
            table.add(a, b)
    return AlignmentRun(pairs, fwd, bwd, alignments, table)


def dump_alignments(run: AlignmentRun, f):
    for p, links in zip(run.pairs, run.alignments):
        f.write(p.pair_id + "\t" + " ".join(f"{s}-{t}" for s, t in sorted(links)) + "\n")
