"""End-to-end VGP extraction: features, similarities, tuning, clustering, evaluation.

Every stage reads its inputs from and writes its outputs to a workspace
directory, so a run can be restarted from any intermediate artifact and
still reproduce the same downstream results.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import align, cca, cluster, corpus, embed, evaluation, locsim, optimize, simnet, tensorio

log = logging.getLogger(__name__)

UNSUPERVISED = ("PL", "TP", "WEA", "FV", "FV_CCA")
SUPERVISED = ("SNN", "SNN_IMAGE", "ENSEMBLE")
METHODS = UNSUPERVISED + SUPERVISED
VECTOR_KINDS = ("WEA", "FV", "FV_CCA")


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    out_dir: str = "vgp_out"
    corpus: str = ""
    regions: str = ""
    word_vectors: str = ""
    feature_maps: str = ""
    localization: str = ""
    region_vectors: str = ""
    splits: str = ""
    stopwords: str = ""

    method: str = "WEA"
    vectors: str = "WEA"
    snn_checkpoint: str = ""
    snn_image_checkpoint: str = ""

    seed: int = 0
    jobs: int = 1

    fv_components: int = 4
    pca_dim: int = 32
    cca_dim: int = 8
    cca_reg: float = 1e-4
    cca_power: float = 1.0
    ibm_iterations: int = 5
    ibm_null: bool = True
    tp_transposed: bool = False
    candidates: int = 30

    damping: float = 0.5
    max_iter: int = 200
    convergence_iter: int = 15
    bo_budget: int = 25

    batch_size: int = 300
    positive_fraction: float = 0.15
    learning_rate: float = 0.01
    lr_decay: float = 0.5
    weight_decay: float = 1e-4
    epochs: int = 5
    d_h: int = 32
    d_y: int = 32
    d_mlp: int = 128

    per_image_prf: bool = False

    @property
    def label(self) -> str:
        if self.method in SUPERVISED:
            return f"{self.method} ({self.vectors})"
        return self.method

    @property
    def tag(self) -> str:
        return self.label.replace(" (", "_").replace(")", "").replace(" ", "_")

    def path(self, *parts) -> str:
        return os.path.join(self.out_dir, *parts)

    def ap_config(self, preference: float = 0.0) -> cluster.APConfig:
        return cluster.APConfig(preference, self.damping, self.max_iter, self.convergence_iter)

    def train_config(self) -> simnet.TrainConfig:
        return simnet.TrainConfig(self.batch_size, self.positive_fraction, self.learning_rate,
                                  lr_decay=self.lr_decay, weight_decay=self.weight_decay, epochs=self.epochs, seed=self.seed)


def _coerce(value: str, like):
    value = value.strip()
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
        value = value[1:-1]
    if isinstance(like, bool):
        if value.lower() in ("true", "1", "yes"):
            return True
        if value.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"not a boolean: {value!r}")
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    return value


def parse_config(text: str, base: PipelineConfig | None = None, base_dir: str = "") -> PipelineConfig:
    """Parse ``key = value`` lines (``#`` comments, ``[section]`` headers ignored).

    Relative paths are resolved against ``base_dir``.
    """
    cfg = dataclasses.replace(base) if base else PipelineConfig()
    names = {f.name for f in dataclasses.fields(PipelineConfig)}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line or (line.startswith("[") and line.endswith("]")):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in names:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        setattr(cfg, key, _coerce(value, getattr(cfg, key)))
    if base_dir:
        for key in PATH_KEYS:
            v = getattr(cfg, key)
            if v and not os.path.isabs(v):
                setattr(cfg, key, os.path.normpath(os.path.join(base_dir, v)))
    return cfg


PATH_KEYS = ("out_dir", "corpus", "regions", "word_vectors", "feature_maps", "localization",
             "region_vectors", "splits", "stopwords", "snn_checkpoint", "snn_image_checkpoint")


def load_config(path: str, overrides: dict | None = None) -> PipelineConfig:
    with open(path, encoding="utf-8") as f:
        cfg = parse_config(f.read(), base_dir=os.path.dirname(os.path.abspath(path)))
    for k, v in (overrides or {}).items():
        if v is not None:
            setattr(cfg, k, _coerce(str(v), getattr(cfg, k)))
    return cfg


def format_config(cfg: PipelineConfig) -> str:
    return "".join(f"{f.name} = {getattr(cfg, f.name)}\n" for f in dataclasses.fields(cfg))


def required_inputs(cfg: PipelineConfig) -> list[str]:
    need = ["corpus", "splits"]
    vec_kind = cfg.vectors if cfg.method in SUPERVISED else cfg.method
    if cfg.method == "PL":
        need.append("localization")
    if vec_kind in VECTOR_KINDS:
        need.append("word_vectors")
    if vec_kind == "FV_CCA":
        need.append("region_vectors")
    if cfg.method in ("SNN_IMAGE", "ENSEMBLE"):
        need.append("feature_maps")
    return need


def validate(cfg: PipelineConfig):
    """Fail before any computation if the method lacks an input."""
    if cfg.method not in METHODS:
        raise ConfigError(f"unknown method {cfg.method!r}; choose from {', '.join(METHODS)}")
    if cfg.method in SUPERVISED and cfg.vectors not in VECTOR_KINDS:
        raise ConfigError(f"unknown entity-vector kind {cfg.vectors!r}")
    for key in required_inputs(cfg):
        path = getattr(cfg, key)
        if not path:
            raise ConfigError(f"method {cfg.method} needs {key}")
        if not os.path.exists(path):
            raise ConfigError(f"{key} not found: {path}")
    if cfg.method == "ENSEMBLE":
        for key in ("snn_checkpoint", "snn_image_checkpoint"):
            path = getattr(cfg, key)
            if not path or not os.path.exists(os.path.join(path, "manifest.json")):
                raise ConfigError(f"checkpoint required: ENSEMBLE needs a trained {key}")


# ---------------------------------------------------------------- data

@dataclass
class Dataset:
    images: dict[str, corpus.ImageRecord]
    split_of: dict[str, str]
    entities: dict[str, list[corpus.Entity]] = field(default_factory=dict)

    def ids(self, split: str) -> list[str]:
        return [i for i in self.images if self.split_of.get(i) == split]

    def gold_labels(self, image_id: str) -> list[int]:
        ents = self.entities[image_id]
        return corpus.build_gold_clusters(ents).labels(len(ents))


def load_splits(path) -> dict[str, str]:
    out = {}
    for row in tensorio.read_index(path):
        if len(row) != 2 or row[1] not in ("train", "val", "test"):
            raise ConfigError(f"bad split line {row!r}")
        out[row[0]] = row[1]
    return out


def load_dataset(cfg: PipelineConfig) -> Dataset:
    stops = corpus.load_stopwords(cfg.stopwords or None)
    images = corpus.load_corpus(cfg.corpus, cfg.regions or None, stops)
    ds = Dataset(images, load_splits(cfg.splits))
    for image_id, rec in images.items():
        ds.entities[image_id] = corpus.evaluable_entities(rec.entities)
    return ds


def write_entities(cfg: PipelineConfig, ds: Dataset) -> str:
    path = cfg.path("entities.tsv")
    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for image_id, ents in ds.entities.items():
            gold = ds.gold_labels(image_id)
            for e, g in zip(ents, gold):
                f.write(f"{image_id}\t{ds.split_of.get(image_id, '')}\t{e.key}\t{e.chain_id}\t"
                        f"{'/'.join(e.types)}\t{g}\t{e.form}\n")
    return path


# ---------------------------------------------------------------- features

def _word_table(cfg):
    with open(cfg.word_vectors, encoding="utf-8") as f:
        return embed.load_word_vectors(f)


def _load_region_vectors(cfg) -> dict[tuple[str, int], np.ndarray]:
    base = os.path.splitext(cfg.region_vectors)[0]
    mat = tensorio.read_tensor(base + ".vgpt")
    return {(row[0], int(row[1])): mat[int(row[2])] for row in tensorio.read_index(cfg.region_vectors)}


def compute_vectors(cfg: PipelineConfig, ds: Dataset, kind: str) -> dict[str, np.ndarray]:
    """Entity vectors of ``kind`` for every image (rows follow ``ds.entities``).

    Mixture, PCA and CCA models are fitted on the training split only.
    """
    table = _word_table(cfg)
    train_ids = ds.ids("train")
    if kind == "WEA":
        return {i: np.array([embed.embed_average(e.normalized_tokens, table)[0] for e in ents])
                .reshape(len(ents), table.dim) for i, ents in ds.entities.items()}

    train_tokens = [embed.token_matrix(e.normalized_tokens, table)
                    for i in train_ids for e in ds.entities[i]]
    sample = np.vstack([m for m in train_tokens if len(m)])
    gmm = embed.fit_mixture(sample, cfg.fv_components, seed=cfg.seed)
    fv_dim = 2 * gmm.n_components * gmm.dim

    def fisher(e):
        m = embed.token_matrix(e.normalized_tokens, table)
        return embed.encode_fisher(m, gmm) if len(m) else np.zeros(fv_dim)

    fvs = {i: np.array([fisher(e) for e in ents]).reshape(len(ents), fv_dim)
           for i, ents in ds.entities.items()}
    train_fv = np.vstack([fvs[i] for i in train_ids])
    pca = embed.fit_pca(train_fv, min(cfg.pca_dim, *train_fv.shape))
    reduced = {i: embed.apply_pca(v, pca) if len(v) else np.zeros((0, pca.out_dim))
               for i, v in fvs.items()}
    if kind == "FV":
        return reduced

    regions = _load_region_vectors(cfg)
    xs, ys = [], []
    for i in train_ids:
        for e, v in zip(ds.entities[i], reduced[i]):
            r = regions.get((i, e.chain_id))
            if r is not None:
                xs.append(v)
                ys.append(r)
    model = cca.fit_cca(np.array(xs), np.array(ys), cfg.cca_dim, cfg.cca_reg, cfg.cca_power)
    return {i: np.array([cca.project_entity(v, model)[0] for v in vs]).reshape(len(vs), model.out_dim)
            for i, vs in reduced.items()}


def write_vectors(cfg: PipelineConfig, ds: Dataset, kind: str, vectors) -> str:
    os.makedirs(cfg.path("vectors"), exist_ok=True)
    rows, index = [], []
    for image_id, ents in ds.entities.items():
        for e, v in zip(ents, vectors[image_id]):
            index.append(f"{image_id}\t{e.key}\t{len(rows)}\n")
            rows.append(v)
    tensorio.write_tensor(cfg.path("vectors", f"{kind}.vgpt"), np.array(rows))
    with open(cfg.path("vectors", f"{kind}.tsv"), "w", encoding="utf-8") as f:
        f.writelines(index)
    return cfg.path("vectors", f"{kind}.vgpt")


def read_vectors(cfg: PipelineConfig, ds: Dataset, kind: str) -> dict[str, np.ndarray]:
    mat = tensorio.read_tensor(cfg.path("vectors", f"{kind}.vgpt"))
    where = {(r[0], r[1]): int(r[2]) for r in tensorio.read_index(cfg.path("vectors", f"{kind}.tsv"))}
    return {i: mat[[where[(i, e.key)] for e in ents]].reshape(len(ents), mat.shape[1])
            for i, ents in ds.entities.items()}


def vectors_for(cfg: PipelineConfig, ds: Dataset, kind: str):
    """Stored entity vectors of ``kind``, computing and writing them if absent."""
    if not os.path.exists(cfg.path("vectors", f"{kind}.vgpt")):
        write_vectors(cfg, ds, kind, compute_vectors(cfg, ds, kind))
    return read_vectors(cfg, ds, kind)


def load_feature_maps(cfg: PipelineConfig) -> dict[str, np.ndarray]:
    base = os.path.dirname(os.path.abspath(cfg.feature_maps))
    return {row[0]: tensorio.read_tensor(os.path.join(base, row[1]))
            for row in tensorio.read_index(cfg.feature_maps)}


# ---------------------------------------------------------------- alignment

def run_alignment(cfg: PipelineConfig, ds: Dataset) -> align.TranslationTable:
    run = align.build_translation_table(ds.images, cfg.ibm_iterations, cfg.seed, cfg.tp_transposed,
                                        null=cfg.ibm_null)
    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(cfg.path("translation_table.tsv"), "w", encoding="utf-8") as f:
        run.table.dump(f)
    with open(cfg.path("alignments.tsv"), "w", encoding="utf-8") as f:
        align.dump_alignments(run, f)
    return run.table


def translation_table(cfg: PipelineConfig, ds: Dataset) -> align.TranslationTable:
    path = cfg.path("translation_table.tsv")
    if not os.path.exists(path):
        run_alignment(cfg, ds)
    with open(path, encoding="utf-8") as f:
        return align.TranslationTable.load(f, cfg.tp_transposed)


# ---------------------------------------------------------------- supervised

def training_pairs(ds: Dataset, vectors, image_ids, maps=None) -> simnet.PairDataset:
    ti, tj, lab, img = [], [], [], []
    stack = []
    for i in image_ids:
        ents = ds.entities[i]
        if len(ents) < 2:
            continue
        gold = ds.gold_labels(i)
        k = len(stack)
        if maps is not None:
            stack.append(maps[i])
        else:
            stack.append(None)
        for a in range(len(ents)):
            for b in range(a + 1, len(ents)):
                ti.append(vectors[i][a])
                tj.append(vectors[i][b])
                lab.append(int(gold[a] == gold[b]))
                img.append(k)
    fm = np.array(stack) if maps is not None else None
    return simnet.PairDataset(np.array(ti), np.array(tj), np.array(lab), np.array(img), fm)


def save_checkpoint(path: str, params: simnet.FusionParams, meta: dict):
    os.makedirs(path, exist_ok=True)
    shapes = {}
    for k in params.keys:
        tensorio.write_tensor(os.path.join(path, f"{k}.vgpt"), params[k])
        shapes[k] = list(params[k].shape)
    manifest = dict(meta, mode=params.mode, shapes=shapes)
    with open(os.path.join(path, "manifest.json"), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def load_checkpoint(path: str) -> tuple[simnet.FusionParams, dict]:
    with open(os.path.join(path, "manifest.json"), encoding="utf-8") as f:
        manifest = json.load(f)
    tensors = {k: tensorio.read_tensor(os.path.join(path, f"{k}.vgpt")).reshape(shape)
               for k, shape in manifest["shapes"].items()}
    return simnet.FusionParams(manifest["mode"], tensors), manifest


def train_model(cfg: PipelineConfig, ds: Dataset, mode: str, out: str | None = None) -> str:
    vectors = vectors_for(cfg, ds, cfg.vectors)
    maps = load_feature_maps(cfg) if mode == simnet.SNN_IMAGE else None
    data = training_pairs(ds, vectors, ds.ids("train"), maps)
    d_t = data.ti.shape[1]
    d_v = data.feature_maps.shape[2] if maps is not None else 0
    params = simnet.init_params(mode, d_t, d_v, cfg.d_h, cfg.d_y, cfg.d_mlp, seed=cfg.seed)
    params, tlog = simnet.train(data, params, cfg.train_config())
    out = out or cfg.path("checkpoints", f"{mode}_{cfg.vectors}")
    meta = {"seed": cfg.seed, "vectors": cfg.vectors, "epoch_loss": tlog.epoch_loss,
            "epoch_lr": tlog.epoch_lr, "config": dataclasses.asdict(cfg.train_config())}
    save_checkpoint(out, params, meta)
    return out


# ---------------------------------------------------------------- similarities

def _supervised_scorer(cfg, ds, vectors, checkpoint):
    params, manifest = load_checkpoint(checkpoint)
    if manifest.get("vectors", cfg.vectors) != cfg.vectors:
        raise ConfigError(f"checkpoint {checkpoint} was trained on {manifest['vectors']} vectors")
    maps = load_feature_maps(cfg) if params.mode == simnet.SNN_IMAGE else None

    def score(image_id):
        v = vectors[image_id]
        n = len(v)
        s = np.zeros((n, n))
        if n < 2:
            return s
        iu, ju = np.triu_indices(n, 1)
        V = maps[image_id] if maps is not None else None
        vals = simnet.score_pair(v[iu], v[ju], V, params)
        s[iu, ju] = vals
        s[ju, iu] = vals
        return s

    return score


def similarity_functions(cfg: PipelineConfig, ds: Dataset):
    """``image_id -> off-diagonal similarity matrix`` for the configured method."""
    m = cfg.method
    if m == "PL":
        with open(cfg.localization, encoding="utf-8") as f:
            table = locsim.load_localization_scores(f, cfg.candidates)

        def score(image_id):
            ents = ds.entities[image_id]
            return cluster.build_similarity_matrix(
                len(ents), lambda a, b: locsim.localization_similarity(
                    image_id, ents[a].key, ents[b].key, table), 0.0)
        return score
    if m == "TP":
        table = translation_table(cfg, ds)

        def score(image_id):
            ents = ds.entities[image_id]
            return cluster.build_similarity_matrix(
                len(ents), lambda a, b: align.translation_similarity(ents[a].form, ents[b].form, table), 0.0)
        return score
    if m in VECTOR_KINDS:
        vectors = vectors_for(cfg, ds, m)

        def score(image_id):
            s = embed.cosine_matrix(vectors[image_id]) if len(vectors[image_id]) else np.zeros((0, 0))
            np.fill_diagonal(s, 0.0)
            return s
        return score
    vectors = vectors_for(cfg, ds, cfg.vectors)
    if m == "ENSEMBLE":
        f_snn = _supervised_scorer(cfg, ds, vectors, cfg.snn_checkpoint)
        f_img = _supervised_scorer(cfg, ds, vectors, cfg.snn_image_checkpoint)
        return lambda image_id: simnet.ensemble_score(f_snn(image_id), f_img(image_id))
    key = "snn_checkpoint" if m == "SNN" else "snn_image_checkpoint"
    ckpt = getattr(cfg, key)
    if not ckpt or not os.path.exists(os.path.join(ckpt, "manifest.json")):
        ckpt = train_model(cfg, ds, simnet.SNN if m == "SNN" else simnet.SNN_IMAGE)
    return _supervised_scorer(cfg, ds, vectors, ckpt)


def sim_dir(cfg: PipelineConfig) -> str:
    return cfg.path("sim", cfg.tag)


def compute_similarities(cfg: PipelineConfig, ds: Dataset, splits=("val", "test")) -> str:
    score = similarity_functions(cfg, ds)
    out = sim_dir(cfg)
    os.makedirs(out, exist_ok=True)
    ids = [i for s in splits for i in ds.ids(s)]
    with _pool(cfg) as pool:
        mats = list(pool.map(score, ids))
    with open(os.path.join(out, "index.tsv"), "w", encoding="utf-8") as f:
        for image_id, s in zip(ids, mats):
            if len(s):
                tensorio.write_tensor(os.path.join(out, f"{image_id}.vgpt"), s)
                f.write(f"{image_id}\t{image_id}.vgpt\n")
    return out


def read_similarities(cfg: PipelineConfig) -> dict[str, np.ndarray]:
    out = sim_dir(cfg)
    return {row[0]: tensorio.read_tensor(os.path.join(out, row[1]))
            for row in tensorio.read_index(os.path.join(out, "index.tsv"))}


def _pool(cfg):
    return ThreadPoolExecutor(max_workers=max(1, cfg.jobs))


# ---------------------------------------------------------------- tuning, clustering

def cluster_images(cfg: PipelineConfig, sims: dict[str, np.ndarray], ids, preference: float):
    ap = cfg.ap_config(preference)
    with _pool(cfg) as pool:
        return dict(zip(ids, pool.map(lambda i: cluster.affinity_propagation(sims[i], ap), ids)))


def tune(cfg: PipelineConfig, ds: Dataset, sims: dict[str, np.ndarray]) -> dict:
    val = [i for i in ds.ids("val") if i in sims]
    if not val:
        raise ConfigError("no validation images with entities")

    def objective(pref):
        clus = cluster_images(cfg, sims, val, pref)
        return float(np.mean([evaluation.adjusted_rand_index(clus[i].labels, ds.gold_labels(i))
                              for i in val]))

    offdiag, scores, gold = [], [], []
    for i in val:
        s = sims[i]
        iu, ju = np.triu_indices(len(s), 1)
        offdiag.append(s[iu, ju])
        pairs, same = evaluation.pair_labels(ds.gold_labels(i))
        scores.append(s[pairs[:, 0], pairs[:, 1]])
        gold.append(same)
    bounds = optimize.preference_bounds(np.concatenate(offdiag))
    res = optimize.tune_preference(objective, bounds, cfg.bo_budget, cfg.seed)
    thr = optimize.tune_threshold(np.concatenate(scores), np.concatenate(gold))
    with open(cfg.path(f"tuning_{cfg.tag}.tsv"), "w", encoding="utf-8") as f:
        res.dump(f)
    tuned = {"preference": res.best_x, "val_ari": res.best_y, "threshold": thr.threshold,
             "val_precision": thr.precision, "val_recall": thr.recall, "val_f_score": thr.f_score,
             "bounds": list(bounds)}
    with open(cfg.path(f"tuned_{cfg.tag}.json"), "w", encoding="utf-8") as f:
        json.dump(tuned, f, indent=2, sort_keys=True)
        f.write("\n")
    return tuned


def read_tuned(cfg: PipelineConfig) -> dict:
    with open(cfg.path(f"tuned_{cfg.tag}.json"), encoding="utf-8") as f:
        return json.load(f)


def run_clustering(cfg: PipelineConfig, ds: Dataset, sims, preference: float, split="test") -> str:
    ids = [i for i in ds.ids(split) if i in sims]
    clus = cluster_images(cfg, sims, ids, preference)
    path = cfg.path(f"clusters_{cfg.tag}.tsv")
    with open(path, "w", encoding="utf-8") as f:
        for i in ids:
            ents = ds.entities[i]
            for k, ex in enumerate(clus[i].exemplar_of):
                f.write(f"{i}\t{ents[k].key}\t{ents[int(ex)].key}\n")
    return path


def read_clusterings(path) -> dict[str, dict[str, str]]:
    out: dict[str, dict[str, str]] = {}
    for image_id, key, ex in tensorio.read_index(path):
        out.setdefault(image_id, {})[key] = ex
    return out


def evaluate(cfg: PipelineConfig, ds: Dataset, sims, clusters_path: str, tuned: dict,
             split="test") -> evaluation.EvalReport:
    assigned = read_clusterings(clusters_path)
    results = []
    for i in ds.ids(split):
        ents = ds.entities[i]
        if not ents:
            continue
        ex = assigned[i]
        labels = {}
        pred = [labels.setdefault(ex[e.key], len(labels)) for e in ents]
        results.append(evaluation.ImageResult(i, [len(e.normalized_tokens) for e in ents], pred,
                                              ds.gold_labels(i), sims[i]))
    report = evaluation.evaluate_split(results, tuned["threshold"], cfg.label, tuned["preference"],
                                       cfg.per_image_prf)
    write_report(cfg, report)
    return report


def write_report(cfg: PipelineConfig, report: evaluation.EvalReport):
    with open(cfg.path(f"report_{cfg.tag}.json"), "w", encoding="utf-8") as f:
        f.write(report.to_json() + "\n")
    with open(cfg.path(f"report_{cfg.tag}.txt"), "w", encoding="utf-8") as f:
        f.write(report.table() + "\n")


def run_pipeline(cfg: PipelineConfig) -> evaluation.EvalReport:
    """Run every stage for ``cfg.method`` and return the test-split report."""
    validate(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    ds = load_dataset(cfg)
    write_entities(cfg, ds)
    compute_similarities(cfg, ds)
    sims = read_similarities(cfg)
    tuned = tune(cfg, ds, sims)
    clusters_path = run_clustering(cfg, ds, sims, tuned["preference"])
    return evaluate(cfg, ds, sims, clusters_path, tuned)


# ---------------------------------------------------------------- attention

def emit_attention(cfg: PipelineConfig, image_id: str, keys: tuple[str, str], checkpoint: str,
                   out_path: str | None = None) -> dict[str, np.ndarray]:
    """Attention grids of an entity pair under an SNN_IMAGE checkpoint, written as TSV."""
    params, manifest = load_checkpoint(checkpoint)
    if params.mode != simnet.SNN_IMAGE:
        raise ConfigError("attention needs an SNN_IMAGE checkpoint")
    cfg = dataclasses.replace(cfg, vectors=manifest.get("vectors", cfg.vectors))
    ds = load_dataset(cfg)
    if image_id not in ds.entities:
        raise KeyError(f"unknown image {image_id!r}")
    maps = load_feature_maps(cfg)
    if image_id not in maps:
        raise KeyError(f"no feature map for image {image_id!r}")
    vectors = vectors_for(cfg, ds, cfg.vectors)
    row = {e.key: k for k, e in enumerate(ds.entities[image_id])}
    grids = {}
    for key in keys:
        if key not in row:
            raise KeyError(f"unknown entity {image_id}/{key}")
        grids[key] = simnet.attention_map(vectors[image_id][row[key]], maps[image_id], params)
    out_path = out_path or cfg.path(f"attention_{image_id}.tsv")
    with open(out_path, "w", encoding="utf-8") as f:
        for key, g in grids.items():
            for r, line in enumerate(g):
                f.write(f"{image_id}\t{key}\t{r}\t" + "\t".join(f"{x:.8f}" for x in line) + "\n")
    return grids


def toy_config_text(paths: dict[str, str], base_dir: str) -> str:
    rel = {k: os.path.relpath(v, base_dir) for k, v in paths.items()}
    return (
        "# toy VGP dataset\n"
        f"corpus = {rel['corpus']}\n"
        f"regions = {rel['regions']}\n"
        f"word_vectors = {rel['word_vectors']}\n"
        f"feature_maps = {rel['feature_maps']}\n"
        f"localization = {rel['localization']}\n"
        f"region_vectors = {rel['region_vectors']}\n"
        f"splits = {rel['splits']}\n"
        "out_dir = out\n"
        "method = WEA\n"
        "# ten training images give only a couple of batches per epoch\n"
        "epochs = 40\n"
        "lr_decay = 0.95\n"
    )
