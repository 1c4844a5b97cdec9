#!/usr/bin/env python3
"""Generate a synthetic evaluation dataset (MIDI + page images + annotations).

The output directory is ready for `snapscore evaluate`:

    python scripts/make_synth_dataset.py out/dataset --scores 10 --pages 2
    snapscore evaluate out/dataset/annotations.json \
        --midi-dir out/dataset/midi --image-dir out/dataset/images --baseline
"""

import argparse

from snapscore.synthetic import write_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("out_dir")
    ap.add_argument("--scores", type=int, default=10)
    ap.add_argument("--pages", type=int, default=1,
                    help="pages photographed per score")
    ap.add_argument("--measures", type=int, default=12,
                    help="piece length in measures")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    ds = write_dataset(args.out_dir, n_scores=args.scores,
                       pages_per_score=args.pages, seed=args.seed,
                       n_measures=args.measures)
    n_images = args.scores * args.pages
    print(f"wrote {args.scores} scores / {n_images} page images under "
          f"{args.out_dir}")
    print(f"annotations: {ds['annotations']}")


if __name__ == "__main__":
    main()
