"""``wavedbn`` command-line front end.

Subcommands: ``train``, ``eval``, ``bench``, ``decompose``, ``inspect``.
Exit codes: 0 success, 1 validation error, 2 I/O or format error, 3 numerical
failure (non-finite parameters).
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import modelfile, wavelet
from .config import RunConfig, default_text
from .dataset import (LabeledDataset, load_coil20, load_pgm, load_pgm_directory, load_usps,
                      select_classes, split_holdout, write_pgm)
from .dbn import accuracy, build_dbn, finetune, pretrain
from .ensemble import Preprocessing, evaluate_ensemble, train_ensemble
from .errors import ValidationError, WaveDbnError
from .report import ReportRecord, confusion_text

log = logging.getLogger("wavedbn")

MODEL_NAME = "model.wdbn"
REPORT_NAME = "report.txt"
TABLE_NAME = "report_table.txt"


# ------------------------------------------------------------------ helpers


def load_run_data(cfg: RunConfig) -> tuple[LabeledDataset, LabeledDataset]:
    """Dataset per the config, restricted to ``classes`` and split into train/test."""
    if cfg.dataset_kind == "usps":
        train, test = load_usps(cfg.train_path, cfg.test_path)
        if cfg.classes:
            train, test = select_classes(train, cfg.classes), select_classes(test, cfg.classes)
        return train, test
    if cfg.dataset_kind == "coil20":
        ds = load_coil20(cfg.data_path)
    else:
        ds = load_pgm_directory(cfg.data_path)
    if cfg.classes:
        ds = select_classes(ds, cfg.classes)
    return split_holdout(ds, cfg.split_spec())


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        changes["workers"] = args.workers
    if getattr(args, "out", None) is not None:
        changes["out_dir"] = args.out
    if getattr(args, "data", None) is not None:
        if cfg.dataset_kind == "usps":
            parts = args.data.split(",")
            if len(parts) != 2:
                raise ValidationError("--data for usps takes TRAIN_FILE,TEST_FILE")
            changes["train_path"], changes["test_path"] = parts
        else:
            changes["data_path"] = args.data
    cfg = replace(cfg, **changes)
    cfg.validate()
    return cfg


def _preprocessing(cfg: RunConfig, ds: LabeledDataset) -> Preprocessing:
    h, w = ds.image_shape
    return Preprocessing(h, w, cfg.downsample, cfg.wavelet)


def _train(cfg: RunConfig, train: LabeledDataset, workers: int, use_processes=None):
    start = time.perf_counter()
    model, timings = train_ensemble(
        train.images, train.labels, cfg.hidden, cfg.dbn_config(), _preprocessing(cfg, train),
        n_classes=train.n_classes, workers=workers, use_processes=use_processes,
        visible_kind=cfg.visible_kind,
    )
    return model, timings, time.perf_counter() - start


def _write_reports(out_dir: Path, record: ReportRecord):
    (out_dir / REPORT_NAME).write_text(record.to_text())
    (out_dir / TABLE_NAME).write_text(record.table())


# ------------------------------------------------------------- subcommands


def cmd_train(args) -> int:
    cfg = _apply_overrides(RunConfig.from_file(args.config), args)
    train, test = load_run_data(cfg)
    log.info("training 16 DBNs on %d images (%d test), hidden %s",
             len(train), len(test), list(cfg.hidden))
    model, timings, wall = _train(cfg, train, cfg.effective_workers())
    record = ReportRecord(
        kind="train",
        n_classes=model.n_classes,
        weights=model.weights,
        splits={"train": evaluate_ensemble(model, train.images, train.labels),
                "test": evaluate_ensemble(model, test.images, test.labels)},
        pretrain_seconds=np.array([t.pretrain_seconds for t in timings]),
        finetune_seconds=np.array([t.finetune_seconds for t in timings]),
        total_wall_seconds=wall,
        config=cfg.echo(),
    )
    out_dir = Path(cfg.out_dir)
    modelfile.save(model, out_dir / MODEL_NAME,
                   modelfile.Provenance(config_hash=cfg.digest(), seed=cfg.seed))
    _write_reports(out_dir, record)
    sys.stdout.write(record.table())
    print(f"model written to {out_dir / MODEL_NAME}")
    return 0


def cmd_eval(args) -> int:
    model, _ = modelfile.load(args.model)
    cfg = _apply_overrides(RunConfig.from_file(args.config), args)
    train, test = load_run_data(cfg)
    if args.split == "train":
        ds = train
    elif args.split == "test":
        ds = test
    else:
        ds = LabeledDataset(np.concatenate([train.images, test.images]),
                            np.concatenate([train.labels, test.labels]),
                            train.n_classes, train.class_ids, train.class_names)
    if ds.n_classes != model.n_classes:
        raise ValidationError(f"model predicts {model.n_classes} classes, "
                              f"dataset has {ds.n_classes}")
    metrics = evaluate_ensemble(model, ds.images, ds.labels)
    record = ReportRecord(kind="eval", n_classes=model.n_classes, weights=model.weights,
                          splits={args.split: metrics}, config=cfg.echo())
    print(f"accuracy: {100 * metrics.accuracy:.4f}%")
    print(f"error: {metrics.error_percent:.4f}%")
    print("confusion matrix:")
    sys.stdout.write(confusion_text(metrics.confusion))
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        _write_reports(Path(args.out), record)
    return 0


def cmd_bench(args) -> int:
    cfg = _apply_overrides(RunConfig.from_file(args.config), args)
    train, test = load_run_data(cfg)
    workers = cfg.effective_workers()

    seq_model, seq_timings, seq_wall = _train(cfg, train, 1)
    par_model, _, par_wall = _train(cfg, train, workers, use_processes=True)
    fixed = modelfile.Provenance(config_hash=cfg.digest(), seed=cfg.seed, timestamp="-")
    identical = modelfile.dumps(seq_model, fixed) == modelfile.dumps(par_model, fixed)

    # Monolithic baseline: one DBN on the (optionally downsampled) raw pixels.
    pre = _preprocessing(cfg, train)

    def raw(images):
        x = images
        if pre.downsample == 2:
            x = wavelet.downsample_2x(x)
        return wavelet.flatten(x)

    x_train, x_test = raw(train.images), raw(test.images)
    dbn_cfg = cfg.dbn_config()
    mono = build_dbn(x_train.shape[1], cfg.hidden, train.n_classes, seed=cfg.seed,
                     visible_kind=cfg.visible_kind)
    start = time.perf_counter()
    mono, _ = pretrain(mono, x_train, dbn_cfg)
    mid = time.perf_counter()
    mono, _ = finetune(mono, x_train, train.labels, dbn_cfg)
    mono_pre, mono_fine = mid - start, time.perf_counter() - mid
    mono_seconds = mono_pre + mono_fine

    member_seconds = np.array([t.total_seconds for t in seq_timings])
    member_params = seq_model.dbns[0].n_parameters()
    mono_params = mono.n_parameters()
    extra = {
        "bench.workers": str(workers),
        "bench.ensemble_sequential_wall_seconds": f"{seq_wall:.6g}",
        "bench.ensemble_parallel_wall_seconds": f"{par_wall:.6g}",
        "bench.parallel_matches_sequential": str(identical).lower(),
        "bench.member_parameters": str(member_params),
        "bench.monolithic_parameters": str(mono_params),
        "bench.member_mean_seconds": f"{member_seconds.mean():.6g}",
        "bench.member_max_seconds": f"{member_seconds.max():.6g}",
        "bench.monolithic_pretrain_seconds": f"{mono_pre:.6g}",
        "bench.monolithic_finetune_seconds": f"{mono_fine:.6g}",
        "bench.monolithic_seconds": f"{mono_seconds:.6g}",
        "bench.speedup_per_dbn": f"{mono_seconds / member_seconds.mean():.6g}",
        "bench.speedup_parallel_ensemble": f"{mono_seconds / par_wall:.6g}",
        "bench.monolithic_train_accuracy": repr(accuracy(mono, x_train, train.labels)),
        "bench.monolithic_test_accuracy": repr(accuracy(mono, x_test, test.labels)),
    }
    record = ReportRecord(
        kind="bench",
        n_classes=seq_model.n_classes,
        weights=seq_model.weights,
        splits={"train": evaluate_ensemble(seq_model, train.images, train.labels),
                "test": evaluate_ensemble(seq_model, test.images, test.labels)},
        pretrain_seconds=np.array([t.pretrain_seconds for t in seq_timings]),
        finetune_seconds=np.array([t.finetune_seconds for t in seq_timings]),
        total_wall_seconds=seq_wall,
        config=cfg.echo(),
        extra=extra,
    )
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_reports(out_dir, record)
    sys.stdout.write(record.table())
    return 0


def cmd_decompose(args) -> int:
    img = load_pgm(args.image)
    bands = wavelet.decompose_full_2level(img, args.wavelet)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    # Spreads at round-off level are treated as flat bands.
    flat = 1e-9 * max(1.0, float(np.abs(bands).max()))
    print(f"{'file':<12} {'band':>6} {'min':>14} {'max':>14}")
    for j, band in enumerate(bands):
        lo, hi = float(band.min()), float(band.max())
        if hi - lo > flat:
            pixels = np.round((band - lo) / (hi - lo) * 255)
        else:
            pixels = np.full(band.shape, 128)
        name = f"band_{j:02d}.pgm"
        write_pgm(out_dir / name, pixels)
        print(f"{name:<12} {wavelet.SUBBAND_NAMES[j]:>6} {lo:>14.6g} {hi:>14.6g}")
    return 0


def cmd_inspect(args) -> int:
    model, prov = modelfile.load(args.model)
    pre = model.preprocessing
    print(f"format: {modelfile.MAGIC} v{modelfile.FORMAT_VERSION}")
    print(f"input: {pre.input_height}x{pre.input_width}, downsample {pre.downsample}, "
          f"wavelet {pre.wavelet}, sub-band {pre.subband_shape[0]}x{pre.subband_shape[1]}")
    print(f"architecture: {pre.feature_dim} -> {' -> '.join(map(str, model.hidden_sizes))} "
          f"-> softmax({model.n_classes})  [{model.dbns[0].n_parameters()} parameters per DBN]")
    print(f"provenance: config_hash={prov.config_hash} seed={prov.seed} "
          f"timestamp={prov.timestamp}")
    print(f"{'DBN':>4} {'band':>6} {'weight':>20} {'scale min':>14} {'scale max':>14}")
    for j in range(wavelet.N_SUBBANDS):
        print(f"{j:>4} {wavelet.SUBBAND_NAMES[j]:>6} {float(model.weights[j])!r:>20} "
              f"{model.scalers[j, 0]:>14.6g} {model.scalers[j, 1]:>14.6g}")
    return 0


# --------------------------------------------------------------------- main


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wavedbn", description=__doc__.splitlines()[0])
    parser.add_argument("--print-defaults", action="store_true",
                        help="print the default configuration file and exit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def run_flags(p):
        p.add_argument("--config", required=True, help="run configuration file")
        p.add_argument("--data", help="dataset directory (usps: TRAIN,TEST files)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--workers", type=int, help="parallel DBN trainings (0 = all cores)")

    p = sub.add_parser("train", help="train a 16-DBN ensemble and write model + report")
    run_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved model")
    p.add_argument("--model", required=True)
    run_flags(p)
    p.add_argument("--split", choices=("test", "train", "all"), default="test")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="compare the ensemble with one raw-pixel DBN")
    run_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("decompose", help="write the 16 sub-bands of a PGM image")
    p.add_argument("image")
    p.add_argument("--out", required=True)
    p.add_argument("--wavelet", default="haar", choices=sorted(wavelet.FILTERS))
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("inspect", help="describe a saved model")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.print_defaults:
        sys.stdout.write(default_text())
        return 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except WaveDbnError as exc:
        print(f"wavedbn {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"wavedbn {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
