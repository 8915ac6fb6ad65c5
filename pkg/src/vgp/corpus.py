"""Entity-annotated caption corpora.

Annotation lines look like::

    <image_id>\t<caption_index>\t<text with [/EN#<chain>/<type>(/<type>)* phrase] spans>

An optional regions sidecar lists ``<image_id>\t<chain_id>\t<x1>,<y1>,<x2>,<y2>``;
chains missing from it have no region.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Iterable

STOPWORDS_VERSION = "vgp-stop-1"

_TAG = re.compile(r"/EN#(\S*)")


class ParseError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


@dataclass(frozen=True)
class RawCaption:
    image_id: str
    caption_index: int
    text: str
    tokens: tuple[str, ...] = ()


@dataclass(frozen=True)
class Entity:
    image_id: str
    caption_index: int
    span_index: int
    chain_id: int
    types: tuple[str, ...]
    surface_tokens: tuple[str, ...]
    start: int
    end: int
    normalized_tokens: tuple[str, ...] = ()
    has_region: bool = True

    @property
    def key(self) -> str:
        return f"{self.caption_index}:{self.span_index}"

    @property
    def primary_type(self) -> str:
        return self.types[0]

    @property
    def content_span(self) -> tuple[int, int]:
        """Token range trimmed to the words that survived stop-word removal."""
        keep = set(self.normalized_tokens)
        pos = [self.start + k for k, t in enumerate(self.surface_tokens) if t.lower() in keep]
        if not pos:
            return self.start, self.end
        return pos[0], pos[-1] + 1

    @property
    def form(self) -> str:
        toks = self.normalized_tokens or tuple(t.lower() for t in self.surface_tokens)
        return " ".join(toks)


@dataclass
class GoldClustering:
    image_id: str
    clusters: dict[tuple[int, str], list[int]] = field(default_factory=dict)

    def labels(self, n: int | None = None) -> list[int]:
        """Cluster label per entity index (labels follow first appearance)."""
        if n is None:
            n = sum(len(m) for m in self.clusters.values())
        out = [-1] * n
        for lab, members in enumerate(self.clusters.values()):
            for i in members:
                out[i] = lab
        return out


@dataclass
class ImageRecord:
    image_id: str
    captions: list[RawCaption]
    entities: list[Entity]


def load_stopwords(path=None) -> frozenset[str]:
    if path is None:
        text = resources.files("vgp.data").joinpath("stopwords.txt").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    words = frozenset(w.strip().lower() for w in text.splitlines() if w.strip())
    if not words:
        raise ValueError("empty stop-word list")
    return words


def _parse_markup(text: str, lineno: int):
    """Split markup text into plain tokens plus entity spans."""
    tokens: list[str] = []
    spans = []
    pos = 0
    while pos < len(text):
        open_at = text.find("[", pos)
        close_at = text.find("]", pos)
        if close_at != -1 and (open_at == -1 or close_at < open_at):
            raise ParseError(lineno, "unbalanced ']'")
        if open_at == -1:
            tokens.extend(text[pos:].split())
            break
        tokens.extend(text[pos:open_at].split())
        end = text.find("]", open_at)
        nested = text.find("[", open_at + 1)
        if end == -1 or (nested != -1 and nested < end):
            raise ParseError(lineno, "unbalanced '['")
        inner = text[open_at + 1:end].split()
        if not inner or not inner[0].startswith("/EN#"):
            raise ParseError(lineno, f"malformed entity tag in {text[open_at:end + 1]!r}")
        tag = _TAG.fullmatch(inner[0])
        parts = tag.group(1).split("/") if tag else []
        try:
            chain_id = int(parts[0])
        except (ValueError, IndexError):
            raise ParseError(lineno, f"non-integer chain id in {inner[0]!r}") from None
        types = tuple(p for p in parts[1:] if p)
        if not types:
            raise ParseError(lineno, f"missing entity type in {inner[0]!r}")
        phrase = inner[1:]
        if not phrase:
            raise ParseError(lineno, "empty entity phrase")
        spans.append((chain_id, types, tuple(phrase), len(tokens), len(tokens) + len(phrase)))
        tokens.extend(phrase)
        pos = end + 1
    return tokens, spans


def parse_annotations(lines: Iterable[str]) -> tuple[list[RawCaption], list[Entity]]:
    """Parse annotation records into captions and (unnormalized) entities."""
    captions: list[RawCaption] = []
    entities: list[Entity] = []
    seen = set()
    for lineno, line in enumerate(lines, 1):
        line = line.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ParseError(lineno, "expected 3 tab-separated fields")
        image_id, idx, markup = fields
        try:
            caption_index = int(idx)
        except ValueError:
            raise ParseError(lineno, f"bad caption index {idx!r}") from None
        if (image_id, caption_index) in seen:
            raise ParseError(lineno, f"duplicate caption {image_id}/{caption_index}")
        seen.add((image_id, caption_index))
        tokens, spans = _parse_markup(markup, lineno)
        captions.append(RawCaption(image_id, caption_index, " ".join(tokens), tuple(tokens)))
        for k, (chain_id, types, phrase, start, end) in enumerate(spans):
            entities.append(Entity(image_id, caption_index, k, chain_id, types, phrase, start, end))
    return captions, entities


def strip_markup(text: str) -> str:
    tokens, _ = _parse_markup(text, 0)
    return " ".join(tokens)


def normalize_entity(e: Entity, stops: frozenset[str]) -> Entity:
    folded = tuple(t.lower() for t in e.surface_tokens)
    kept = tuple(t for t in folded if t not in stops)
    return replace(e, normalized_tokens=kept or folded)


def merge_duplicates(entities: list[Entity]) -> tuple[list[Entity], dict[str, str]]:
    """Collapse entities with identical normalized tokens.

    The survivor is the one with the lowest caption index, then the leftmost
    span. Returns the survivors (in caption/span order) and a map from every
    input key to its survivor's key.
    """
    ordered = sorted(entities, key=lambda e: (e.caption_index, e.start, e.span_index))
    by_form: dict[tuple[str, ...], Entity] = {}
    mapping: dict[str, str] = {}
    for e in ordered:
        rep = by_form.setdefault(e.normalized_tokens, e)
        mapping[e.key] = rep.key
    return list(by_form.values()), mapping


def filter_evaluable(entities: list[Entity]) -> list[Entity]:
    return [e for e in entities if e.has_region and "notvisual" not in e.types]


def evaluable_entities(entities: list[Entity]) -> list[Entity]:
    """Filter then merge; ``entities`` must already be normalized."""
    merged, _ = merge_duplicates(filter_evaluable(entities))
    return merged


def build_gold_clusters(entities: list[Entity]) -> GoldClustering:
    image_id = entities[0].image_id if entities else ""
    clusters: dict[tuple[int, str], list[int]] = {}
    for i, e in enumerate(entities):
        clusters.setdefault((e.chain_id, e.primary_type), []).append(i)
    return GoldClustering(image_id, clusters)


def load_regions(lines: Iterable[str]) -> set[tuple[str, int]]:
    regions = set()
    for lineno, line in enumerate(lines, 1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.rstrip("\n").split("\t")
        if len(fields) != 3:
            raise ParseError(lineno, "expected <image_id>\\t<chain_id>\\t<box>")
        try:
            chain = int(fields[1])
            box = [float(x) for x in fields[2].split(",")]
        except ValueError:
            raise ParseError(lineno, "bad chain id or box") from None
        if len(box) != 4:
            raise ParseError(lineno, "box needs 4 coordinates")
        regions.add((fields[0], chain))
    return regions


def load_corpus(path, regions_path=None, stopwords=None) -> dict[str, ImageRecord]:
    """Read an annotation file into normalized per-image records."""
    stops = stopwords if stopwords is not None else load_stopwords()
    with open(path, encoding="utf-8") as f:
        captions, entities = parse_annotations(f)
    regions = None
    if regions_path is not None:
        with open(regions_path, encoding="utf-8") as f:
            regions = load_regions(f)
    images: dict[str, ImageRecord] = {}
    for c in captions:
        images.setdefault(c.image_id, ImageRecord(c.image_id, [], [])).captions.append(c)
    for e in entities:
        e = normalize_entity(e, stops)
        if regions is not None:
            e = replace(e, has_region=(e.image_id, e.chain_id) in regions)
        images[e.image_id].entities.append(e)
    for rec in images.values():
        rec.captions.sort(key=lambda c: c.caption_index)
        rec.entities.sort(key=lambda e: (e.caption_index, e.span_index))
    return dict(sorted(images.items()))
