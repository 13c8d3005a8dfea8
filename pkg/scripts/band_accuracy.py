#!/usr/bin/env python3
"""Per-sub-band accuracy and ensemble weight for one training run.

Shows which of the 16 sub-band DBNs carry the vote, e.g.

    python scripts/band_accuracy.py configs/coil20_subset.cfg --data /data/coil-20-proc
"""
import argparse
from dataclasses import replace

from wavedbn.cli import load_run_data
from wavedbn.config import RunConfig
from wavedbn.ensemble import Preprocessing, evaluate_ensemble, train_ensemble
from wavedbn.wavelet import SUBBAND_NAMES


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("config")
    p.add_argument("--data")
    p.add_argument("--seed", type=int, default=0)
    a = p.parse_args()
    cfg = replace(RunConfig.from_file(a.config), seed=a.seed)
    if a.data and cfg.dataset_kind == "usps":
        train_path, test_path = a.data.split(",")
        cfg = replace(cfg, train_path=train_path, test_path=test_path)
    elif a.data:
        cfg = replace(cfg, data_path=a.data)
    train, test = load_run_data(cfg)
    model, _ = train_ensemble(
        train.images, train.labels, cfg.hidden, cfg.dbn_config(),
        Preprocessing(*train.image_shape, cfg.downsample, cfg.wavelet),
        n_classes=train.n_classes, workers=cfg.effective_workers(),
    )
    m = evaluate_ensemble(model, test.images, test.labels)
    print(f"{'DBN':>4} {'band':>6} {'weight':>8} {'test %':>8}")
    for j in range(16):
        print(f"{j:>4} {SUBBAND_NAMES[j]:>6} {model.weights[j]:>8.4f} "
              f"{100 * m.member_accuracy[j]:>8.2f}")
    print(f"ensemble test accuracy {100 * m.accuracy:.2f}%")


if __name__ == "__main__":
    main()
