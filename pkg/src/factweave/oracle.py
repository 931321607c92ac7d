"""Brute-force interpolation oracle.

Instead of searching, enumerate every valid fact within the caps, order the
candidates by their projection onto the keyframe segment, and pick the
order-preserving assignment that minimizes total distance to the straight-line
midpoints. The tree search should land within tolerance of this answer on any
dataset small enough to enumerate; the acceptance suite and the `oracle` CLI
command both drive this module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, EngineThresholds, EnumerationCaps, enumerate_facts
from .embedding import EmbedderConfig, ReferenceEmbedder
from .errors import CapacityError, DegenerateKeyframesError
from .facts import DataFact
from .search import compute_midpoints, monotone_assignment, path_reward


@dataclass(frozen=True)
class OracleResult:
    facts: tuple[DataFact, ...]
    reward: float
    candidates: int


def oracle_interpolate(dataset: Dataset, fs: DataFact, ft: DataFact, n: int,
                       caps: EnumerationCaps = EnumerationCaps(),
                       embedder_config: EmbedderConfig = EmbedderConfig(),
                       embedder=None,
                       thresholds: EngineThresholds = EngineThresholds()) -> OracleResult:
    """Exact midpoint assignment over the exhaustively enumerated fact space.

    Raises CapacityError (from enumeration) when the space exceeds the hard
    limit, and DegenerateKeyframesError for coinciding keyframes.
    """
    if embedder is None:
        embedder = ReferenceEmbedder(embedder_config)
    if fs.token() == ft.token():
        raise DegenerateKeyframesError("keyframes are canonically identical")
    vs = np.asarray(embedder.embed(fs), dtype=np.float64)
    vt = np.asarray(embedder.embed(ft), dtype=np.float64)
    span = vt - vs
    norm = float(np.linalg.norm(span))
    if norm == 0.0:
        raise DegenerateKeyframesError("keyframes embed to the same vector")
    direction = span / norm

    exclude = {fs.token(), ft.token()}
    candidates: list[tuple[float, str, DataFact, np.ndarray]] = []
    for fact in enumerate_facts(dataset, caps, thresholds):
        token = fact.token()
        if token in exclude:
            continue
        vec = np.asarray(embedder.embed(fact), dtype=np.float64)
        projection = float(np.dot(vec - vs, direction))
        candidates.append((projection, token, fact, vec))
    if len(candidates) < n:
        raise CapacityError(
            f"only {len(candidates)} candidate facts exist, need {n}",
            estimate=len(candidates),
        )
    candidates.sort(key=lambda c: (c[0], c[1]))
    vectors = [c[3] for c in candidates]
    midpoints = compute_midpoints(vs, vt, n)
    indices = monotone_assignment(vectors, midpoints)
    chosen = [candidates[i] for i in indices]
    reward = path_reward([c[3] for c in chosen], vs, vt)
    return OracleResult(
        facts=tuple(c[2] for c in chosen),
        reward=reward,
        candidates=len(candidates),
    )
