#!/usr/bin/env python3
"""Train and evaluate one configuration over several master seeds.

Prints one line per seed (train/test accuracy, mean time per DBN) and a
summary, e.g.

    python scripts/run_seeds.py configs/coil20_full.cfg --data /data/coil-20-proc
"""
import argparse
import time
from dataclasses import replace

import numpy as np

from wavedbn.cli import load_run_data
from wavedbn.config import RunConfig
from wavedbn.ensemble import Preprocessing, evaluate_ensemble, train_ensemble


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("config")
    p.add_argument("--data", help="dataset directory (usps: TRAIN,TEST)")
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    p.add_argument("--workers", type=int)
    a = p.parse_args()

    cfg = RunConfig.from_file(a.config)
    if a.data:
        if cfg.dataset_kind == "usps":
            train_path, test_path = a.data.split(",")
            cfg = replace(cfg, train_path=train_path, test_path=test_path)
        else:
            cfg = replace(cfg, data_path=a.data)
    if a.workers is not None:
        cfg = replace(cfg, workers=a.workers)

    test_accs = []
    print(f"{'seed':>6} {'train %':>9} {'test %':>9} {'s/DBN':>8} {'wall s':>8}")
    for seed in a.seeds:
        run = replace(cfg, seed=seed)
        train, test = load_run_data(run)
        start = time.perf_counter()
        model, timings = train_ensemble(
            train.images, train.labels, run.hidden, run.dbn_config(),
            Preprocessing(*train.image_shape, run.downsample, run.wavelet),
            n_classes=train.n_classes, workers=run.effective_workers(),
            visible_kind=run.visible_kind,
        )
        wall = time.perf_counter() - start
        tr = evaluate_ensemble(model, train.images, train.labels).accuracy
        te = evaluate_ensemble(model, test.images, test.labels).accuracy
        per_dbn = np.mean([t.total_seconds for t in timings])
        test_accs.append(te)
        print(f"{seed:>6} {100 * tr:>9.2f} {100 * te:>9.2f} {per_dbn:>8.2f} {wall:>8.1f}")
    accs = np.array(test_accs)
    print(f"test accuracy: mean {100 * accs.mean():.2f}%, min {100 * accs.min():.2f}%, "
          f"max {100 * accs.max():.2f}%")


if __name__ == "__main__":
    main()
