"""Command-line entry point: ``vgp <command> --config run.cfg [options]``.

Each command runs one pipeline stage and leaves its artifacts in the
configured ``out_dir`` for the next one, so ``parse``, ``embed``, ``align``,
``train``, ``sim``, ``tune``, ``cluster`` and ``eval`` can be run one at a time
or all at once with ``run``.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

from . import pipeline, simnet, toydata


def _overrides(args) -> dict:
    over = {}
    for item in args.set or []:
        if "=" not in item:
            raise pipeline.ConfigError(f"--set expects key=value, got {item!r}")
        k, v = (s.strip() for s in item.split("=", 1))
        over[k] = v
    for name in ("method", "vectors", "jobs", "seed", "out_dir"):
        v = getattr(args, name, None)
        if v is not None:
            over[name] = v
    names = {f.name for f in dataclasses.fields(pipeline.PipelineConfig)}
    bad = sorted(set(over) - names)
    if bad:
        raise pipeline.ConfigError(f"unknown config key(s): {', '.join(bad)}")
    return over


def _config(args) -> pipeline.PipelineConfig:
    over = _overrides(args)
    if args.config:
        return pipeline.load_config(args.config, over)
    cfg = pipeline.PipelineConfig()
    for k, v in over.items():
        setattr(cfg, k, pipeline._coerce(str(v), getattr(cfg, k)))
    return cfg


def _dataset(cfg):
    os.makedirs(cfg.out_dir, exist_ok=True)
    return pipeline.load_dataset(cfg)


def cmd_parse(cfg, args):
    ds = _dataset(cfg)
    path = pipeline.write_entities(cfg, ds)
    n = sum(len(v) for v in ds.entities.values())
    print(f"{len(ds.images)} images, {n} evaluable entities -> {path}")


def cmd_embed(cfg, args):
    kind = args.kind or (cfg.method if cfg.method in pipeline.VECTOR_KINDS else cfg.vectors)
    if kind not in pipeline.VECTOR_KINDS:
        raise pipeline.ConfigError(f"unknown entity-vector kind {kind!r}")
    ds = _dataset(cfg)
    vecs = pipeline.compute_vectors(cfg, ds, kind)
    print(pipeline.write_vectors(cfg, ds, kind, vecs))


def cmd_align(cfg, args):
    ds = _dataset(cfg)
    table = pipeline.run_alignment(cfg, ds)
    print(f"{len(table.counts)} entity pairs -> {cfg.path('translation_table.tsv')}")


def cmd_train(cfg, args):
    ds = _dataset(cfg)
    print(pipeline.train_model(cfg, ds, args.mode, args.output))


def cmd_sim(cfg, args):
    pipeline.validate(cfg)
    ds = _dataset(cfg)
    print(pipeline.compute_similarities(cfg, ds))


def cmd_tune(cfg, args):
    ds = _dataset(cfg)
    tuned = pipeline.tune(cfg, ds, pipeline.read_similarities(cfg))
    print(f"preference {tuned['preference']:.6g} (val ARI {tuned['val_ari']:.4f}), "
          f"threshold {tuned['threshold']:.6g} (val F {tuned['val_f_score']:.4f})")


def cmd_cluster(cfg, args):
    ds = _dataset(cfg)
    pref = args.preference if args.preference is not None else pipeline.read_tuned(cfg)["preference"]
    print(pipeline.run_clustering(cfg, ds, pipeline.read_similarities(cfg), pref))


def cmd_eval(cfg, args):
    ds = _dataset(cfg)
    report = pipeline.evaluate(cfg, ds, pipeline.read_similarities(cfg),
                               cfg.path(f"clusters_{cfg.tag}.tsv"), pipeline.read_tuned(cfg))
    print(report.table())


def cmd_report(cfg, args):
    ext = "json" if args.json else "txt"
    with open(cfg.path(f"report_{cfg.tag}.{ext}"), encoding="utf-8") as f:
        sys.stdout.write(f.read())


def cmd_attn(cfg, args):
    ckpt = args.checkpoint or cfg.snn_image_checkpoint
    if not ckpt:
        raise pipeline.ConfigError("checkpoint required: pass --checkpoint or set snn_image_checkpoint")
    grids = pipeline.emit_attention(cfg, args.image, tuple(args.keys), ckpt, args.output)
    for key, g in grids.items():
        print(f"{args.image} {key}")
        for row in g:
            print("  " + " ".join(f"{x:.3f}" for x in row))


def cmd_run(cfg, args):
    print(pipeline.run_pipeline(cfg).table())


def cmd_toy(cfg, args):
    paths = toydata.write_toy_dataset(args.directory, n_images=args.images, seed=args.toy_seed)
    path = os.path.join(args.directory, "toy.cfg")
    with open(path, "w", encoding="utf-8") as f:
        f.write(pipeline.toy_config_text(paths, args.directory))
    print(path)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="key = value configuration file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a configuration key (repeatable)")
    common.add_argument("--method", choices=pipeline.METHODS)
    common.add_argument("--vectors", choices=pipeline.VECTOR_KINDS,
                        help="entity vectors used by the supervised methods")
    common.add_argument("--jobs", type=int, help="worker threads for per-image stages")
    common.add_argument("--seed", type=int)
    common.add_argument("--out-dir", dest="out_dir")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="vgp", description="Visually grounded paraphrase extraction.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help):
        sp = sub.add_parser(name, parents=[common], help=help)
        sp.set_defaults(func=fn)
        return sp

    add("parse", cmd_parse, "load the corpus and write the evaluable entities")
    sp = add("embed", cmd_embed, "compute entity vectors")
    sp.add_argument("--kind", choices=pipeline.VECTOR_KINDS)
    add("align", cmd_align, "align the pseudo-parallel corpus and build the translation table")
    sp = add("train", cmd_train, "train a supervised similarity model")
    sp.add_argument("--mode", choices=simnet.MODES, default=simnet.SNN)
    sp.add_argument("-o", "--output", help="checkpoint directory")
    add("sim", cmd_sim, "score entity pairs for the validation and test images")
    add("tune", cmd_tune, "tune the preference and the pairwise threshold on validation images")
    sp = add("cluster", cmd_cluster, "cluster test-image entities")
    sp.add_argument("--preference", type=float, help="skip the tuned value")
    add("eval", cmd_eval, "score the test clustering and write the report")
    sp = add("report", cmd_report, "print a written report")
    sp.add_argument("--json", action="store_true")
    sp = add("attn", cmd_attn, "emit attention grids for entities of one image")
    sp.add_argument("image")
    sp.add_argument("keys", nargs="+", help="entity keys such as 0:1")
    sp.add_argument("--checkpoint")
    sp.add_argument("-o", "--output")
    add("run", cmd_run, "run every stage for the configured method")
    sp = add("toy", cmd_toy, "write the synthetic toy dataset and its config")
    sp.add_argument("directory")
    sp.add_argument("--images", type=int, default=20)
    sp.add_argument("--toy-seed", type=int, default=0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args) if args.command != "toy" else None
        args.func(cfg, args)
    except (pipeline.ConfigError, OSError, KeyError, ValueError) as exc:
        print(f"vgp: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
