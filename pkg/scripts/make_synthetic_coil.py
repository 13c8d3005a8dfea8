#!/usr/bin/env python3
"""Write a COIL-20-named directory of synthetic 128x128 PGM images.

Useful for exercising the loaders, the CLI and the benchmark without the
real dataset.  Accuracy on these images says nothing about COIL-20.
"""
import argparse

from wavedbn.synthetic import write_coil_like


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("out", help="output directory")
    p.add_argument("--objects", type=int, default=20)
    p.add_argument("--views", type=int, default=72)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.02)
    a = p.parse_args()
    path = write_coil_like(a.out, n_objects=a.objects, n_views=a.views, seed=a.seed,
                           noise=a.noise)
    print(f"wrote {a.objects * a.views} images to {path}")


if __name__ == "__main__":
    main()
