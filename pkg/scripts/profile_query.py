#!/usr/bin/env python3
"""Profile one photo -> MIDI-interval query and print the stage breakdown.

By default a synthetic page is rendered and queried against its own piece;
pass --image and --midi to profile a real pair instead.
"""

import argparse
import time

import numpy as np

from snapscore.align import align
from snapscore.bootleg import midi_bootleg
from snapscore.config import Config
from snapscore.imgio import load_image
from snapscore.midi import cluster_onsets, parse_midi
from snapscore.sheet import process_image
from snapscore.synthetic import PageLayout, make_score, render_page


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--image", help="sheet music photo (PNG/JPEG)")
    ap.add_argument("--midi", help="reference MIDI file")
    ap.add_argument("--spacing", type=int, default=16,
                    help="staff spacing of the synthetic page")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--config", help="JSON config file")
    args = ap.parse_args()
    if bool(args.image) != bool(args.midi):
        ap.error("--image and --midi go together")

    cfg = Config.load_json(open(args.config).read()) if args.config else Config()

    if args.image:
        raster = load_image(args.image)
        events = cluster_onsets(parse_midi(open(args.midi, "rb").read()),
                                cfg.onset_cluster_tol)
        truth = None
    else:
        rng = np.random.default_rng(args.seed)
        score = make_score("profile", rng, n_measures=12)
        page = render_page(score.events,
                           PageLayout(spacing=args.spacing, n_systems=2),
                           first_measure=3, seed=args.seed)
        raster = page.image
        events = score.events
        truth = (page.first_event * 0.5, (page.last_event + 1) * 0.5)

    t0 = time.perf_counter()
    result = process_image(raster, cfg)
    reference = midi_bootleg(events)
    alignment = align(result.score, reference, events, cfg)
    wall = time.perf_counter() - t0

    stages = {**result.timings, **alignment.stage_timings}
    total = sum(stages.values())
    print(f"{'stage':<20}{'seconds':>9}{'share':>8}")
    print("-" * 37)
    for name, secs in sorted(stages.items(), key=lambda kv: -kv[1]):
        print(f"{name:<20}{secs:>9.3f}{secs / total:>8.1%}")
    print("-" * 37)
    print(f"{'total (staged)':<20}{total:>9.3f}")
    print(f"{'total (wall)':<20}{wall:>9.3f}")
    print(f"\npredicted interval: [{alignment.interval[0]:.2f}, "
          f"{alignment.interval[1]:.2f}] s "
          f"(events {alignment.event_start}..{alignment.event_end})")
    if truth:
        print(f"rendered interval:  [{truth[0]:.2f}, {truth[1]:.2f}] s")


if __name__ == "__main__":
    main()
