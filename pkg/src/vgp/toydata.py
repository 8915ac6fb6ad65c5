"""Seeded synthetic data for tests and the toy pipeline.

The toy corpus has images described by five captions each. Every image
shows a few concepts drawn from a fixed inventory; captions mention them
with varying paraphrases. Word vectors, feature maps, region vectors and
localization scores are generated so that paraphrases of one concept are
related in each modality.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import tensorio

# concept class -> (entity type, paraphrase heads, modifiers)
CONCEPTS = {
    "man": ("people", ["man", "guy", "gentleman", "male"], ["young", "tall", "bearded"]),
    "woman": ("people", ["woman", "lady", "female", "girl"], ["young", "blond", "smiling"]),
    "child": ("people", ["child", "kid", "toddler", "boy"], ["little", "small", "happy"]),
    "dog": ("animals", ["dog", "puppy", "pooch", "canine"], ["brown", "furry", "black"]),
    "horse": ("animals", ["horse", "pony", "stallion", "mare"], ["white", "galloping", "large"]),
    "shirt": ("clothing", ["shirt", "jersey", "tee", "top"], ["red", "striped", "uniform"]),
    "hat": ("clothing", ["hat", "cap", "helmet", "beanie"], ["blue", "knit", "baseball"]),
    "ball": ("other", ["ball", "football", "soccerball", "sphere"], ["round", "leather", "bouncing"]),
    "bike": ("vehicles", ["bike", "bicycle", "cycle", "mountainbike"], ["green", "racing", "old"]),
    "car": ("vehicles", ["car", "automobile", "sedan", "vehicle"], ["silver", "parked", "fast"]),
    "street": ("scene", ["street", "road", "avenue", "sidewalk"], ["busy", "wet", "empty"]),
    "beach": ("scene", ["beach", "shore", "coast", "seaside"], ["sandy", "sunny", "rocky"]),
    "grass": ("scene", ["grass", "lawn", "field", "meadow"], ["green", "tall", "lush"]),
    "water": ("scene", ["water", "lake", "river", "pond"], ["blue", "calm", "murky"]),
}

TEMPLATES_2 = [
    "{0} is next to {1} .",
    "{0} stands near {1} .",
    "there is {0} beside {1} .",
    "{0} can be seen with {1} .",
]
TEMPLATES_3 = [
    "{0} is next to {1} on {2} .",
    "{0} with {1} stands by {2} .",
    "{0} and {1} are near {2} .",
    "in the photo {0} is close to {1} and {2} .",
]
NOTVISUAL = ["the crowd", "the moment", "the day", "the scene"]
ARTICLES = ["a", "the"]


@dataclass
class ToyConcept:
    chain_id: int
    name: str
    etype: str
    cells: list[int]
    has_region: bool = True


def _phrase(name, rng):
    _, heads, mods = CONCEPTS[name]
    head = heads[rng.integers(len(heads))]
    words = [mods[rng.integers(len(mods))], head] if rng.random() < 0.5 else [head]
    return [ARTICLES[rng.integers(len(ARTICLES))]] + words


def make_toy_corpus(n_images: int = 20, seed: int = 0, grid: int = 4):
    """Return ``(annotation_lines, region_lines, concepts_per_image)``."""
    rng = np.random.default_rng(seed)
    names = sorted(CONCEPTS)
    lines, region_lines, layout = [], [], {}
    chain = 100
    for m in range(n_images):
        image_id = f"img{m:03d}"
        k = 3 if rng.random() < 0.6 else 4
        # distinct types within an image keep gold keys unambiguous
        picked, types = [], set()
        for name in rng.permutation(names):
            etype = CONCEPTS[name][0]
            if etype in types:
                continue
            picked.append(str(name))
            types.add(etype)
            if len(picked) == k:
                break
        cells = rng.permutation(grid * grid)
        concepts = []
        for c, name in enumerate(picked):
            chain += 1
            concepts.append(ToyConcept(chain, name, CONCEPTS[name][0],
                                       sorted(int(x) for x in cells[3 * c:3 * c + 3])))
        if rng.random() < 0.25:
            concepts[-1].has_region = False
        layout[image_id] = concepts
        for con in concepts:
            if con.has_region:
                x, y = con.cells[0] % grid, con.cells[0] // grid
                region_lines.append(f"{image_id}\t{con.chain_id}\t{x * 10},{y * 10},{x * 10 + 9},{y * 10 + 9}")
        for cap in range(5):
            n_mention = 3 if len(concepts) >= 3 and rng.random() < 0.6 else 2
            main = concepts[0]
            others = [concepts[i] for i in rng.permutation(np.arange(1, len(concepts)))[:n_mention - 1]]
            mentioned = [main] + others
            order = rng.permutation(len(mentioned))
            spans = []
            for i in order:
                con = mentioned[i]
                spans.append(f"[/EN#{con.chain_id}/{con.etype} {' '.join(_phrase(con.name, rng))}]")
            tmpl = (TEMPLATES_3 if len(spans) == 3 else TEMPLATES_2)[rng.integers(4)]
            text = tmpl.format(*spans)
            if rng.random() < 0.3:
                text = text[:-2] + f" while [/EN#1/notvisual {NOTVISUAL[rng.integers(len(NOTVISUAL))]}] watches ."
            lines.append(f"{image_id}\t{cap}\t{text}")
    return lines, region_lines, layout


def make_word_vectors(dim: int = 16, seed: int = 0, spread: float = 0.35) -> dict[str, np.ndarray]:
    """Vectors for every word the toy corpus can emit.

    Heads and modifiers of a concept sit around the concept's centroid;
    modifiers shared between concepts get the mean of their centroids.
    """
    cents = concept_centroids(dim, seed)
    rng = np.random.default_rng([seed, 1])
    words: dict[str, list[np.ndarray]] = {}
    for name in sorted(CONCEPTS):
        _, heads, mods = CONCEPTS[name]
        for w in heads + mods:
            words.setdefault(w, []).append(cents[name])
    out = {}
    for w in sorted(words):
        base = np.mean(words[w], axis=0)
        out[w] = base + spread * rng.normal(size=dim) / np.sqrt(dim)
    for w in sorted({"crowd", "moment", "day", "scene"}):
        out[w] = rng.normal(size=dim) / np.sqrt(dim)
    return out


def concept_centroids(dim: int = 16, seed: int = 0) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    cents = {name: rng.normal(size=dim) for name in sorted(CONCEPTS)}
    return {k: v / np.linalg.norm(v) for k, v in cents.items()}


def make_feature_maps(layout, d_v: int = 8, grid: int = 4, seed: int = 0, noise: float = 0.3):
    """Feature map per image: concept cells carry that concept's visual prototype."""
    rng = np.random.default_rng(seed)
    protos = {name: rng.normal(size=d_v) for name in sorted(CONCEPTS)}
    maps = {}
    for image_id in sorted(layout):
        V = noise * rng.normal(size=(grid * grid, d_v))
        for con in layout[image_id]:
            V[con.cells] += protos[con.name]
        maps[image_id] = V
    return maps


def make_region_vectors(layout, word_dim: int = 16, d_r: int = 12, seed: int = 0,
                        noise: float = 0.1, word_seed: int = 0):
    """Region vector per (image, chain): a fixed linear map of the concept centroid plus noise."""
    rng = np.random.default_rng(seed)
    cents = concept_centroids(word_dim, word_seed)
    A = rng.normal(size=(d_r, word_dim)) / np.sqrt(word_dim)
    out = {}
    for image_id in sorted(layout):
        for con in layout[image_id]:
            out[(image_id, con.chain_id)] = A @ cents[con.name] + noise * rng.normal(size=d_r)
    return out


def make_localization_scores(images, layout, seed: int = 0, distractors: int = 6,
                             eps: float = 0.3, mislocalize: float = 0.2):
    """Score lines ``(image_id, entity_key, region_id, score)``.

    Each entity's gold region receives ``1 - eps`` of the score mass and the
    rest is spread over distractor regions; with probability
    ``mislocalize`` the mass goes to another concept's region instead.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for image_id in sorted(images):
        regions = [f"r{c.chain_id}" for c in layout[image_id]]
        extra = [f"d{k}" for k in range(distractors)]
        for e in images[image_id].entities:
            if "notvisual" in e.types:
                continue
            gold = f"r{e.chain_id}"
            target = gold
            if rng.random() < mislocalize and len(regions) > 1:
                target = regions[rng.integers(len(regions))]
            others = [r for r in regions + extra if r != target]
            w = rng.dirichlet(np.ones(len(others))) * eps
            rows.append((image_id, e.key, target, 1.0 - eps))
            for r, s in zip(others, w):
                rows.append((image_id, e.key, r, float(s)))
    return rows


def make_pair_dataset(n_pos: int = 500, n_neg: int = 3000, n_clusters: int = 10, d_t: int = 16,
                      grid: int = 4, d_v: int = 8, n_images: int = 50, seed: int = 0,
                      proto_seed: int = 0, noise: float = 0.1):
    """Labelled pairs whose entity vectors encode a latent cluster identity.

    Positive pairs share a cluster, negatives do not. Every pair is tied to
    an image whose feature map contains the prototypes of its clusters.
    Returns ``(ti, tj, labels, image_index, feature_maps)``.
    """
    prng = np.random.default_rng(proto_seed)
    text_proto = prng.normal(size=(n_clusters, d_t))
    vis_proto = prng.normal(size=(n_clusters, d_v))
    rng = np.random.default_rng(seed)
    n = grid * grid
    img_clusters = np.array([rng.choice(n_clusters, size=3, replace=False) for _ in range(n_images)])
    maps = noise * rng.normal(size=(n_images, n, d_v))
    for m in range(n_images):
        cells = rng.permutation(n)
        for c, k in enumerate(img_clusters[m]):
            maps[m, cells[3 * c:3 * c + 3]] += vis_proto[k]
    ti, tj, lab, img = [], [], [], []
    for label, count in ((1, n_pos), (0, n_neg)):
        for _ in range(count):
            m = rng.integers(n_images)
            if label:
                a = b = img_clusters[m][rng.integers(3)]
            else:
                a, b = rng.choice(img_clusters[m], size=2, replace=False)
            ti.append(text_proto[a] + noise * rng.normal(size=d_t))
            tj.append(text_proto[b] + noise * rng.normal(size=d_t))
            lab.append(label)
            img.append(m)
    return np.array(ti), np.array(tj), np.array(lab), np.array(img), maps


def write_toy_dataset(out_dir, n_images: int = 20, seed: int = 0, word_dim: int = 16,
                      d_v: int = 8, d_r: int = 12, grid: int = 4) -> dict[str, str]:
    """Write a complete toy dataset and return the file paths by role."""
    from .corpus import load_corpus

    os.makedirs(out_dir, exist_ok=True)
    lines, region_lines, layout = make_toy_corpus(n_images, seed, grid)
    paths = {
        "corpus": os.path.join(out_dir, "captions.tsv"),
        "regions": os.path.join(out_dir, "regions.tsv"),
        "word_vectors": os.path.join(out_dir, "word_vectors.txt"),
        "feature_maps": os.path.join(out_dir, "feature_maps.tsv"),
        "localization": os.path.join(out_dir, "localization.tsv"),
        "region_vectors": os.path.join(out_dir, "region_vectors.tsv"),
        "splits": os.path.join(out_dir, "splits.tsv"),
    }
    with open(paths["corpus"], "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    with open(paths["regions"], "w", encoding="utf-8") as f:
        f.write("\n".join(region_lines) + "\n")
    with open(paths["word_vectors"], "w", encoding="utf-8") as f:
        for w, v in make_word_vectors(word_dim, seed).items():
            f.write(w + " " + " ".join(f"{x:.6f}" for x in v) + "\n")

    maps = make_feature_maps(layout, d_v, grid, seed)
    fm_dir = os.path.join(out_dir, "feature_maps")
    os.makedirs(fm_dir, exist_ok=True)
    with open(paths["feature_maps"], "w", encoding="utf-8") as f:
        for image_id, V in maps.items():
            tensorio.write_tensor(os.path.join(fm_dir, f"{image_id}.vgpt"), V)
            f.write(f"{image_id}\tfeature_maps/{image_id}.vgpt\n")

    regs = make_region_vectors(layout, word_dim, d_r, seed, word_seed=seed)
    keys = sorted(regs)
    tensorio.write_tensor(os.path.join(out_dir, "region_vectors.vgpt"), np.array([regs[k] for k in keys]))
    with open(paths["region_vectors"], "w", encoding="utf-8") as f:
        for row, (image_id, chain) in enumerate(keys):
            f.write(f"{image_id}\t{chain}\t{row}\n")

    images = load_corpus(paths["corpus"], paths["regions"])
    with open(paths["localization"], "w", encoding="utf-8") as f:
        for image_id, key, region, score in make_localization_scores(images, layout, seed):
            f.write(f"{image_id}\t{key}\t{region}\t{score:.6f}\n")

    ids = sorted(layout)
    n_train = n_images // 2
    n_val = (n_images - n_train) // 2
    with open(paths["splits"], "w", encoding="utf-8") as f:
        for k, image_id in enumerate(ids):
            split = "train" if k < n_train else "val" if k < n_train + n_val else "test"
            f.write(f"{image_id}\t{split}\n")
    return paths
