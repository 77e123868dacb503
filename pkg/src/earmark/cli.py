"""Command-line entry point: synth | prepare | train | eval | predict | gradcheck.

Every command is deterministic given its flags, config, and inputs.
Output directories and checkpoints are never overwritten without --force.
Exit codes: 0 ok, 1 config error, 2 I/O error, 3 validation error,
4 numeric check failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, replace

import numpy as np

from . import checks, metrics, model as model_mod, synth
from .archive import read_scp, write_feature_archive
from .augment import add_noise_at_snr, make_rir, reverberate
from .audio import Waveform, read_wav
from .config import (ExperimentConfig, load_experiment_config, synth_spec_from_dict)
from .errors import ConfigError, NumericError, PipelineError, ValidationError
from .features import fbank, mean_normalize
from .manifest import ShardPlan, parse_manifest_dir, shard_dataset

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_VALIDATION = 3
EXIT_NUMERIC = 4


def _load_config(args) -> ExperimentConfig:
    if getattr(args, "config", None):
        return load_experiment_config(args.config)
    return ExperimentConfig()


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _require_fresh(path: str, force: bool) -> None:
    exists = os.path.isdir(path) and os.listdir(path) if os.path.isdir(path) \
        else os.path.exists(path)
    if exists and not force:
        raise FileExistsError(f"{path} already exists; pass --force to overwrite")


def cmd_synth(args) -> int:
    if args.n < 2:
        raise ConfigError(f"need --n >= 2, got {args.n}")
    spec = synth.preset(args.preset)
    if args.config:
        with open(args.config, encoding="utf-8") as f:
            raw = json.load(f)
        overrides = raw.get("synth", {})
        if overrides:
            spec = synth_spec_from_dict({**asdict(spec), **overrides})
    _require_fresh(args.out, args.force)
    summary = synth.generate_dataset(args.n, spec, args.out, args.seed)
    _say(args, f"{summary['positives']} positive / {summary['negatives']} negative")
    _say(args, f"wrote {summary['n']} clips under {summary['out_dir']}")
    return EXIT_OK


def _augment_waveform(wave: Waveform, mode: str, cfg: ExperimentConfig, seed_key: list) -> Waveform:
    rng = np.random.default_rng(seed_key)
    if mode in ("noise", "both"):
        noise = Waveform(synth.pink_noise(len(wave.samples), rng, rms=0.05), wave.sample_rate)
        snr = float(rng.uniform(*cfg.augment.snr_db))
        wave = add_noise_at_snr(wave, noise, snr, seed=int(rng.integers(2**31)))
    if mode in ("reverb", "both"):
        rt60 = float(rng.uniform(*cfg.augment.rt60_s))
        wave = reverberate(wave, make_rir(rt60, seed=int(rng.integers(2**31))))
    return wave


def cmd_prepare(args) -> int:
    cfg = _load_config(args)
    manifest = parse_manifest_dir(args.data)
    if args.train_shards >= args.shards:
        raise ConfigError(f"--train-shards {args.train_shards} must be < --shards {args.shards}")
    plan = ShardPlan(shards_per_class=args.shards, train_shards=args.train_shards,
                     test_shards=args.shards - args.train_shards, seed=args.seed)
    assignment = shard_dataset(manifest, plan)
    _require_fresh(args.out, args.force)
    os.makedirs(args.out, exist_ok=True)

    by_id = manifest.by_id()
    feature_of = {}
    for i, rec in enumerate(manifest.records):
        wave = read_wav(rec.wav_path)
        if args.augment != "none":
            wave = _augment_waveform(wave, args.augment, cfg, [args.seed, i])
        feats = fbank(wave, cfg.slu.fbank)
        if cfg.slu.mean_normalize:
            feats = mean_normalize(feats)
        feature_of[rec.utt_id] = feats

    class_tag = {0: "neg", 1: "pos"}
    scp_paths = {"train": [], "test": []}
    for label in (0, 1):
        for shard in range(plan.shards_per_class):
            members = assignment.shard_members(label, shard)
            ark = os.path.join(args.out, f"{class_tag[label]}.{shard:02d}.fark")
            scp = os.path.join(args.out, f"{class_tag[label]}.{shard:02d}.scp")
            write_feature_archive(((u, feature_of[u]) for u in members), ark, scp)
            split = "train" if shard < plan.train_shards else "test"
            scp_paths[split].append(scp)
    for split, paths in scp_paths.items():
        with open(os.path.join(args.out, f"{split}.scp"), "w", encoding="utf-8") as out:
            for path in paths:
                with open(path, encoding="utf-8") as f:
                    out.write(f.read())
    with open(os.path.join(args.out, "labels"), "w", encoding="utf-8") as f:
        for rec in manifest.records:
            f.write(f"{rec.utt_id} {rec.label}\n")
    summary = {
        "utterances": len(manifest),
        "positives": len(manifest.class_ids(1)),
        "negatives": len(manifest.class_ids(0)),
        "archives": 2 * plan.shards_per_class,
        "train_utts": len(assignment.train_ids),
        "test_utts": len(assignment.test_ids),
        "augment": args.augment,
        "seed": args.seed,
    }
    with open(os.path.join(args.out, "prepare.json"), "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    _say(args, f"{summary['archives']} archives ({plan.shards_per_class} per class), "
               f"train {summary['train_utts']} / test {summary['test_utts']}")
    return EXIT_OK


def _read_labels(features_dir: str) -> dict[str, int]:
    labels = {}
    with open(os.path.join(features_dir, "labels"), encoding="utf-8") as f:
        for line in f:
            utt_id, value = line.split()
            labels[utt_id] = int(value)
    return labels


def cmd_train(args) -> int:
    cfg = _load_config(args)
    train_cfg = cfg.train if args.seed is None else replace(cfg.train, seed=args.seed)
    _require_fresh(args.out_ckpt, args.force)
    examples = model_mod.examples_from_scp(os.path.join(args.features, "train.scp"),
                                           _read_labels(args.features))
    net = model_mod.SluModel(cfg.slu)
    result, optimizer = model_mod.train(net, examples, train_cfg,
                                        log=None if args.quiet else sys.stdout)
    model_mod.save_checkpoint(args.out_ckpt, net, optimizer, train_cfg,
                              epochs_done=train_cfg.epochs)
    final = result.history[-1]
    _say(args, f"saved {args.out_ckpt} after {result.steps} steps "
               f"(final loss {final['mean_loss']:.4f}, train F1 {final['train_f1']:.4f})")
    return EXIT_OK


def cmd_eval(args) -> int:
    net, _, _ = model_mod.load_checkpoint(args.ckpt)
    examples = model_mod.examples_from_scp(os.path.join(args.features, "test.scp"),
                                           _read_labels(args.features))
    _, rep = model_mod.evaluate(net, examples, model_name=args.name)
    print(metrics.format_json([rep]) if args.json else metrics.format_table([rep]))
    return EXIT_OK


def cmd_predict(args) -> int:
    net, _, _ = model_mod.load_checkpoint(args.ckpt)
    pred = model_mod.predict(net, args.wav)
    parts = [f"label={pred.label}"]
    parts += [f"p{i}={p:.6f}" for i, p in enumerate(pred.probabilities)]
    if pred.event_time_s is not None:
        parts.append(f"event_time_s={pred.event_time_s:.3f}")
    print(" ".join(parts))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    results = checks.gradient_suite(args.seed if args.seed is not None else 0)
    width = max(len(name) for name, _ in results)
    failed = []
    for name, err in results:
        status = "ok" if err < checks.GRADCHECK_TOLERANCE else "FAIL"
        print(f"{name.ljust(width)}  max_rel_err={err:.3e}  {status}")
        if err >= checks.GRADCHECK_TOLERANCE:
            failed.append(name)
    if failed:
        raise NumericError(f"gradient check failed for: {', '.join(failed)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="earmark",
        description="Abnormal-event detection pipeline: synthesize data, prepare "
                    "features, train, evaluate, and predict.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed_default=0):
        p.add_argument("--config", help="experiment config JSON")
        p.add_argument("--seed", type=int, default=seed_default)
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")
        p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("synth", help="generate a synthetic labeled dataset")
    p.add_argument("--n", type=int, required=True, help="number of clips (>= 2)")
    p.add_argument("--out", required=True)
    p.add_argument("--preset", choices=("easy", "hard"), default="easy")
    common(p)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("prepare", help="features + per-class sharded archives")
    p.add_argument("--data", required=True, help="manifest directory")
    p.add_argument("--out", required=True)
    p.add_argument("--augment", choices=("none", "noise", "reverb", "both"), default="none")
    p.add_argument("--shards", type=int, default=32)
    p.add_argument("--train-shards", type=int, default=30)
    common(p)
    p.set_defaults(handler=cmd_prepare)

    p = sub.add_parser("train", help="train a classifier on prepared features")
    p.add_argument("--features", required=True, help="directory from `prepare`")
    p.add_argument("--out-ckpt", required=True)
    common(p, seed_default=None)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    p.add_argument("--features", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--json", action="store_true", help="emit the JSON report")
    p.add_argument("--name", default="model", help="row label for the table")
    common(p)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("predict", help="classify a single WAV file")
    p.add_argument("--wav", required=True)
    p.add_argument("--ckpt", required=True)
    common(p)
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("gradcheck", help="finite-difference check of every layer")
    common(p)
    p.set_defaults(handler=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
