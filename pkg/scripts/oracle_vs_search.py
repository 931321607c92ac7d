#!/usr/bin/env python3
"""Compare tree-search interpolation against the brute-force oracle.

Runs story-shaped keyframe pairs on a toy dataset and reports how often the
searched reward lands within the tolerance of the exhaustive optimum, plus
timing. Useful when tuning search parameters.

    python scripts/oracle_vs_search.py --runs 50 --seed 1234567 --tolerance 0.05
"""

import argparse
import random
import time

import factweave as fw
from factweave.dataset import EnumerationCaps
from factweave.embedding import ReferenceEmbedder
from factweave.oracle import oracle_interpolate
from factweave.search import applicable_actions, expand_action

TOY_CSV = """Country,Sport,Sex,Gold
Norway,Biathlon,Female,5
Norway,Biathlon,Male,4
Norway,Skiing,Female,7
Germany,Biathlon,Female,3
Germany,Skiing,Male,2
China,Skiing,Female,1
China,Biathlon,Male,2
USA,Skiing,Female,4
USA,Biathlon,Male,3
France,Skiing,Male,1
"""


def story_pair(dataset, space, embedder, rng, hops=4, min_span=0.8):
    while True:
        fs = rng.choice(space)
        cur = fs
        draft = rng.choice(space)
        ok = True
        for _ in range(hops):
            actions = applicable_actions(cur, draft)
            rng.shuffle(actions)
            stepped = False
            for action in actions:
                children = expand_action(dataset, cur, action, draft, branch_cap=6,
                                         rng=rng)
                if children:
                    cur = rng.choice(children)
                    stepped = True
                    break
            if not stepped:
                ok = False
                break
        if not ok or cur.token() == fs.token():
            continue
        if fw.distance(embedder.embed(fs), embedder.embed(cur)) < min_span:
            continue
        return fs, cur


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--runs", type=int, default=50)
    parser.add_argument("--seed", type=int, default=1234567)
    parser.add_argument("--n", type=int, default=3)
    parser.add_argument("--tolerance", type=float, default=0.05)
    args = parser.parse_args()

    dataset = fw.load_dataset(TOY_CSV)
    caps = EnumerationCaps(max_filters=1, max_filter_values=3)
    space = list(fw.enumerate_facts(dataset, caps))
    embedder = ReferenceEmbedder(fw.EmbedderConfig())
    rng = random.Random(args.seed)
    print(f"fact space: {len(space)} facts; {args.runs} runs, n={args.n}")

    passes = 0
    total_gap = 0.0
    for i in range(args.runs):
        fs, ft = story_pair(dataset, space, embedder, rng)
        span = fw.distance(embedder.embed(fs), embedder.embed(ft))
        t0 = time.monotonic()
        result = fw.interpolate(dataset, fs, ft,
                                fw.InterpolationConfig(n=args.n, rng_seed=i),
                                embedder=embedder)
        search_s = time.monotonic() - t0
        oracle = oracle_interpolate(dataset, fs, ft, args.n, caps=caps,
                                    embedder=embedder)
        reward = result.rewards[-1] if len(result.facts) == args.n else float("-inf")
        gap = oracle.reward - reward
        total_gap += max(gap, 0.0)
        ok = reward >= oracle.reward - args.tolerance * span
        passes += ok
        print(f"  run {i:02d}: search={reward:8.4f} oracle={oracle.reward:8.4f} "
              f"gap={gap:7.4f} span={span:.3f} {search_s:5.2f}s {'ok' if ok else 'MISS'}")
    print(f"\npass rate: {passes}/{args.runs} ({passes / args.runs:.0%}), "
          f"mean positive gap {total_gap / args.runs:.4f}")


if __name__ == "__main__":
    main()
