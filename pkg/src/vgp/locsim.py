"""Similarity from shared phrase-localization candidates."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

log = logging.getLogger(__name__)

DEFAULT_CANDIDATES = 30


class LoadError(ValueError):
    pass


@dataclass
class LocalizationTable:
    """Per-entity localization probabilities over its top candidates.

    Keys are ``(image_id, entity_key)``; values map region id to probability.
    """

    probs: dict[tuple[str, str], dict[str, float]] = field(default_factory=dict)
    scores: dict[tuple[str, str], dict[str, float]] = field(default_factory=dict)

    def __contains__(self, key) -> bool:
        return key in self.probs

    def get(self, image_id: str, entity_key: str):
        return self.probs.get((image_id, entity_key))


def _normalize(scores: dict[str, float]) -> dict[str, float]:
    total = sum(scores.values())
    if total <= 0:
        return {r: 1.0 / len(scores) for r in scores}
    return {r: s / total for r, s in scores.items()}


def build_table(scores: dict[tuple[str, str], dict[str, float]],
                candidates: int = DEFAULT_CANDIDATES) -> LocalizationTable:
    """Keep each entity's top ``candidates`` regions and normalize scores."""
    table = LocalizationTable()
    for key, regs in sorted(scores.items()):
        top = sorted(regs.items(), key=lambda kv: (-kv[1], kv[0]))[:candidates]
        kept = dict(top)
        table.scores[key] = kept
        table.probs[key] = _normalize(kept)
    return table


def load_localization_scores(stream, candidates: int = DEFAULT_CANDIDATES,
                             known=None) -> LocalizationTable:
    """Read ``<image_id>\\t<entity_key>\\t<region_id>\\t<score>`` lines.

    ``known`` is an optional set of valid ``(image_id, entity_key)`` keys.
    """
    raw: dict[tuple[str, str], dict[str, float]] = {}
    for lineno, line in enumerate(stream, 1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.rstrip("\n").split("\t")
        if len(fields) != 4:
            raise LoadError(f"line {lineno}: expected 4 tab-separated fields")
        image_id, ekey, region, score = fields
        try:
            value = float(score)
        except ValueError:
            raise LoadError(f"line {lineno}: non-numeric score {score!r}") from None
        if value < 0:
            raise LoadError(f"line {lineno}: negative score {value}")
        if known is not None and (image_id, ekey) not in known:
            raise LoadError(f"line {lineno}: unknown entity {image_id}/{ekey}")
        raw.setdefault((image_id, ekey), {})[region] = value
    return build_table(raw, candidates)


def localization_similarity(image_id: str, key_i: str, key_j: str,
                            table: LocalizationTable) -> float:
    """Sum over shared candidate regions of ``p(i|r) * p(j|r)``."""
    pi = table.get(image_id, key_i)
    pj = table.get(image_id, key_j)
    if pi is None or pj is None:
        missing = key_i if pi is None else key_j
        log.warning("no localization scores for %s/%s; similarity 0", image_id, missing)
        return 0.0
    if len(pj) < len(pi):
        pi, pj = pj, pi
    return sum(p * pj[r] for r, p in pi.items() if r in pj)
