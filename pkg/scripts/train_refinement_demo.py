#!/usr/bin/env python3
"""Fit the embedding refinement on a synthetic trigram corpus and report the
loss trajectory plus the effect on trigram geometry.

    python scripts/train_refinement_demo.py --trigrams 60 --epochs 40
"""

import argparse

import numpy as np

import factweave as fw
from factweave.embedding import ReferenceEmbedder


def synthetic_corpus(n):
    labels = [f"G{i}" for i in range(30)]
    out = []
    for i in range(n):
        base = fw.DataFact(
            fw.FactType.DISTRIBUTION, breakdown=f"B{i % 6}",
            measure=fw.Measure("V", fw.Aggregation.SUM), focus=(labels[i % 30],),
        )
        out.append(fw.Trigram(
            base,
            base.with_(focus=(labels[(i + 4) % 30],)),
            base.with_(focus=(labels[(i + 11) % 30],), breakdown=f"B{(i + 1) % 6}"),
        ))
    return out


def midpoint_gap(trigrams, embedder, refinement=None):
    gaps = []
    for t in trigrams:
        va, vb, vc = (embedder.embed(f) for f in t.facts())
        if refinement is not None:
            va, vb, vc = refinement @ va, refinement @ vb, refinement @ vc
        gaps.append(float(np.linalg.norm(vb - (va + vc) / 2)))
    return float(np.mean(gaps))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trigrams", type=int, default=60)
    parser.add_argument("--epochs", type=int, default=40)
    parser.add_argument("--alpha", type=float, default=0.5)
    parser.add_argument("--lr", type=float, default=0.01)
    parser.add_argument("--dim", type=int, default=64)
    args = parser.parse_args()

    corpus = synthetic_corpus(args.trigrams)
    config = fw.EmbedderConfig(dimension=args.dim)
    embedder = ReferenceEmbedder(config)

    loss = fw.trigram_loss(corpus, args.alpha, config)
    print(f"initial loss {loss:.4f}  mean midpoint gap "
          f"{midpoint_gap(corpus, embedder):.4f}")

    trained = config
    for epoch in range(0, args.epochs, 5):
        trained = fw.train_refinement(
            corpus, fw.TrainConfig(alpha=args.alpha, learning_rate=args.lr, epochs=5),
            trained,
        )
        loss = fw.trigram_loss(corpus, args.alpha, trained)
        gap = midpoint_gap(corpus, embedder, trained.refinement)
        print(f"after {epoch + 5:3d} epochs: loss {loss:.4f}  midpoint gap {gap:.4f}")


if __name__ == "__main__":
    main()
