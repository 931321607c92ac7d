"""Fact embedding: facts -> fixed-dimension vectors with interpolation-friendly
geometry.

The reference map hashes each tokenization slot into its own sub-block of the
vector (Gaussian unit features seeded from a salted hash), weights the blocks,
and scales the result to unit norm. Because the blocks are near-orthogonal,
editing one slot moves the vector strictly less than editing two, which is the
locality the interpolation search relies on. A trainable linear refinement
(d x d matrix) sits on top and is fit with gradient descent on the trigram
loss; an externally trained model can be plugged in through the embedding
table format instead.
"""

from __future__ import annotations

import base64
import hashlib
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    DegenerateVectorError,
    DimensionError,
    FormatError,
    TrainingDivergedError,
    ValidationError,
)
from .facts import DataFact, tokenize_fact

SLOTS = ("type", "subspace", "measure", "breakdown", "focus", "meta")
_EMPTY = "(none)"


@dataclass(frozen=True)
class SlotWeights:
    """Relative contribution of each tokenization slot to the vector.

    Defaults are tuned so that the slot-locality suite passes with margin;
    retune here if the weighting scheme changes.
    """

    type: float = 1.5
    subspace: float = 1.0
    measure: float = 1.2
    breakdown: float = 1.2
    focus: float = 0.8
    meta: float = 0.6

    def as_tuple(self) -> tuple[float, ...]:
        return (self.type, self.subspace, self.measure, self.breakdown, self.focus, self.meta)


@dataclass(frozen=True, eq=False)
class EmbedderConfig:
    dimension: int = 128
    weights: SlotWeights = field(default_factory=SlotWeights)
    salt: str = "factweave-embed-v1"
    refinement: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.dimension < len(SLOTS):
            raise ValidationError(f"embedding dimension must be at least {len(SLOTS)}")
        if any(w <= 0 for w in self.weights.as_tuple()):
            raise ValidationError("slot weights must be positive")
        if self.refinement is not None:
            r = np.asarray(self.refinement, dtype=np.float64)
            if r.shape != (self.dimension, self.dimension):
                raise DimensionError(
                    f"refinement matrix shape {r.shape} != ({self.dimension}, {self.dimension})"
                )
            if not np.isfinite(r).all():
                raise ValidationError("refinement matrix must be finite")
            object.__setattr__(self, "refinement", r)


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 0.5
    learning_rate: float = 0.01
    epochs: int = 50

    def __post_init__(self):
        if self.alpha < 0:
            raise ValidationError("alpha must be non-negative")
        if self.learning_rate <= 0:
            raise ValidationError("learning rate must be positive")


@dataclass(frozen=True)
class Trigram:
    """Three facts in narrative order; the unit the loss is summed over."""

    a: DataFact
    b: DataFact
    c: DataFact

    def __post_init__(self):
        tokens = {self.a.token(), self.b.token(), self.c.token()}
        if len(tokens) != 3:
            raise ValidationError("trigram facts must be pairwise distinct")

    def facts(self) -> tuple[DataFact, DataFact, DataFact]:
        return (self.a, self.b, self.c)


def _block_sizes(dimension: int) -> tuple[int, ...]:
    base, extra = divmod(dimension, len(SLOTS))
    return tuple(base + (1 if i < extra else 0) for i in range(len(SLOTS)))


@lru_cache(maxsize=65536)
def _token_vector(salt: str, slot: str, token: str, size: int) -> np.ndarray:
    digest = hashlib.blake2b(f"{salt}|{slot}|{token}".encode("utf-8"), digest_size=8).digest()
    seed = int.from_bytes(digest, "big")
    rng = np.random.Generator(np.random.PCG64(seed))
    v = rng.standard_normal(size)
    v /= np.linalg.norm(v)
    v.setflags(write=False)
    return v


def _slot_tokens(fact: DataFact) -> dict[str, tuple[str, ...]]:
    subspace = []
    for f in fact.subspace:
        subspace.extend((f"f:{f.field}", f"v:{f.field}={f.value}"))
    meta_payload = fact.meta.extra or fact.meta.second_field or ""
    return {
        "type": (fact.type.value,),
        "subspace": tuple(subspace) or (_EMPTY,),
        "measure": (f"f:{fact.measure.field or _EMPTY}", f"a:{fact.measure.aggregation.value}"),
        "breakdown": (fact.breakdown or _EMPTY,),
        "focus": tuple(f"i:{item}" for item in fact.focus) or (_EMPTY,),
        "meta": (meta_payload or _EMPTY,),
    }


class ReferenceEmbedder:
    """Deterministic hashed-feature embedder; pure function of (fact, config)."""

    def __init__(self, config: EmbedderConfig = EmbedderConfig()):
        self.config = config
        self._sizes = _block_sizes(config.dimension)
        self._scale = 1.0 / float(np.linalg.norm(config.weights.as_tuple()))
        self._cache: dict[str, np.ndarray] = {}

    def base(self, fact: DataFact) -> np.ndarray:
        """Reference feature map before refinement; always unit norm."""
        token = tokenize_fact(fact)
        cached = self._cache.get(token)
        if cached is not None:
            return cached
        tokens = _slot_tokens(fact)
        weights = self.config.weights.as_tuple()
        blocks = []
        for slot, size, weight in zip(SLOTS, self._sizes, weights):
            acc = np.zeros(size)
            for tok in tokens[slot]:
                acc += _token_vector(self.config.salt, slot, tok, size)
            norm = np.linalg.norm(acc)
            if norm > 0:
                acc = acc * (weight / norm)
            blocks.append(acc)
        v = np.concatenate(blocks) * self._scale
        v.setflags(write=False)
        self._cache[token] = v
        return v

    def embed(self, fact: DataFact) -> np.ndarray:
        v = self.base(fact)
        if self.config.refinement is not None:
            v = self.config.refinement @ v
        return v


class LookupEmbedder:
    """Embedder backed by an imported token->vector table.

    Misses either fall back to the reference map (recorded in `misses`) or
    raise, depending on the configured behavior.
    """

    def __init__(self, table: dict[str, np.ndarray], config: EmbedderConfig,
                 on_miss: str = "fallback"):
        if on_miss not in ("fallback", "error"):
            raise ValidationError("on_miss must be 'fallback' or 'error'")
        self.table = table
        self.config = config
        self.on_miss = on_miss
        self.misses: list[str] = []
        self._reference = ReferenceEmbedder(config)

    def embed(self, fact: DataFact) -> np.ndarray:
        return self.embed_detailed(fact)[0]

    def embed_detailed(self, fact: DataFact) -> tuple[np.ndarray, bool]:
        token = tokenize_fact(fact)
        hit = self.table.get(token)
        if hit is not None:
            return hit, True
        if self.on_miss == "error":
            raise ValidationError(f"no table entry for fact {token!r}")
        self.misses.append(token)
        return self._reference.embed(fact), False


def embed(fact: DataFact, config: EmbedderConfig = EmbedderConfig()) -> np.ndarray:
    return ReferenceEmbedder(config).embed(fact)


# --- vector geometry ---------------------------------------------------------

def _check_dims(u: np.ndarray, v: np.ndarray):
    if u.shape != v.shape:
        raise DimensionError(f"vector dimensions differ: {u.shape} vs {v.shape}")


def distance(u: np.ndarray, v: np.ndarray) -> float:
    u, v = np.asarray(u, dtype=np.float64), np.asarray(v, dtype=np.float64)
    _check_dims(u, v)
    return float(np.linalg.norm(u - v))


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    u, v = np.asarray(u, dtype=np.float64), np.asarray(v, dtype=np.float64)
    _check_dims(u, v)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise DegenerateVectorError("cosine similarity of a zero vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


# --- trigram loss and refinement training -------------------------------------

def trigram_loss_vectors(triples: Iterable[tuple[np.ndarray, np.ndarray, np.ndarray]],
                         alpha: float) -> float:
    """Loss over raw vector triples: squared deviation of the middle vector
    from the endpoint midpoint, plus alpha times the squared adjacent-pair
    distances (the trigram-length term)."""
    total = 0.0
    for va, vb, vc in triples:
        va, vb, vc = (np.asarray(x, dtype=np.float64) for x in (va, vb, vc))
        mid = (va + vc) / 2.0
        total += float(np.sum((vb - mid) ** 2))
        total += alpha * float(np.sum((va - vb) ** 2) + np.sum((vb - vc) ** 2))
    return total


def trigram_loss(trigrams: Sequence[Trigram], alpha: float,
                 config: EmbedderConfig = EmbedderConfig(), embedder=None) -> float:
    if not trigrams:
        raise ValidationError("trigram list must be non-empty")
    emb = embedder if embedder is not None else ReferenceEmbedder(config)
    return trigram_loss_vectors(
        ((emb.embed(t.a), emb.embed(t.b), emb.embed(t.c)) for t in trigrams), alpha
    )


def _quadratic_form(trigrams: Sequence[Trigram], alpha: float, base_embedder) -> np.ndarray:
    """M such that loss(R) = tr(R M R^T) over base vectors x with v = R x."""
    d = base_embedder.config.dimension
    m = np.zeros((d, d))
    for t in trigrams:
        xa, xb, xc = (base_embedder.base(f) for f in t.facts())
        u1 = xb - (xa + xc) / 2.0
        u2 = xa - xb
        u3 = xb - xc
        m += np.outer(u1, u1) + alpha * (np.outer(u2, u2) + np.outer(u3, u3))
    return m


def refinement_gradient(trigrams: Sequence[Trigram], alpha: float,
                        config: EmbedderConfig) -> np.ndarray:
    """Analytic gradient of trigram_loss with respect to the refinement matrix."""
    base = ReferenceEmbedder(replace(config, refinement=None))
    r = config.refinement if config.refinement is not None else np.eye(config.dimension)
    return 2.0 * r @ _quadratic_form(trigrams, alpha, base)


def train_refinement(trigrams: Sequence[Trigram], train_config: TrainConfig,
                     config: EmbedderConfig = EmbedderConfig()) -> EmbedderConfig:
    """Fit the linear refinement by gradient descent on the trigram loss.

    Uses a halving line search, so the loss is non-increasing across accepted
    epochs; training stops early once no step length improves it. Note the
    loss is minimized by the zero matrix, so small epoch counts (enough to
    line up the corpus, not collapse it) are the useful regime.
    """
    if len(trigrams) < 10:
        raise ValidationError(f"need at least 10 trigrams, got {len(trigrams)}")
    base = ReferenceEmbedder(replace(config, refinement=None))
    m = _quadratic_form(trigrams, train_config.alpha, base)
    r = (config.refinement.copy() if config.refinement is not None
         else np.eye(config.dimension))

    def loss_of(mat: np.ndarray) -> float:
        return float(np.sum((mat @ m) * mat))

    loss = loss_of(r)
    lr = train_config.learning_rate
    bad_epochs = 0
    for _ in range(train_config.epochs):
        grad = 2.0 * r @ m
        gnorm = float(np.linalg.norm(grad))
        if gnorm < 1e-15:
            break
        step = lr
        improved = False
        for _ in range(40):
            candidate = r - step * grad
            candidate_loss = loss_of(candidate)
            if candidate_loss <= loss + 1e-6:
                r, loss = candidate, candidate_loss
                improved = True
                break
            step /= 2.0
        if not improved:
            bad_epochs += 1
            if bad_epochs >= 5:
                raise TrainingDivergedError(
                    f"loss failed to decrease for {bad_epochs} consecutive epochs"
                )
            break
        bad_epochs = 0
    return replace(config, refinement=r)


# --- embedding table import/export ----------------------------------------------

def export_embedding_table(facts: Sequence[DataFact],
                           config: EmbedderConfig = EmbedderConfig(),
                           embedder=None) -> str:
    """Render the table file: a dim header then token<TAB>base64(f64le) lines."""
    emb = embedder if embedder is not None else ReferenceEmbedder(config)
    lines = [f"dim={config.dimension}"]
    seen = set()
    for fact in facts:
        token = tokenize_fact(fact)
        if token in seen:
            continue
        seen.add(token)
        vec = np.asarray(emb.embed(fact), dtype="<f8")
        lines.append(f"{token}\t{base64.b64encode(vec.tobytes()).decode('ascii')}")
    return "\n".join(lines) + "\n"


def import_embedding_table(text: str, config: EmbedderConfig = EmbedderConfig(),
                           on_miss: str = "fallback") -> LookupEmbedder:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("dim="):
        raise FormatError("embedding table must start with a dim=<d> header", line=1)
    try:
        dim = int(lines[0][4:])
    except ValueError:
        raise FormatError("bad dim header", line=1) from None
    if dim != config.dimension:
        raise DimensionError(f"table dimension {dim} != configured {config.dimension}")
    table: dict[str, np.ndarray] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise FormatError("expected token<TAB>vector", line=lineno)
        token, payload = parts
        try:
            raw = base64.b64decode(payload, validate=True)
        except Exception:
            raise FormatError("vector is not valid base64", line=lineno) from None
        if len(raw) != dim * 8:
            raise FormatError(
                f"vector has {len(raw) // 8} components, expected {dim}", line=lineno
            )
        vec = np.frombuffer(raw, dtype="<f8").astype(np.float64)
        vec.setflags(write=False)
        table[token] = vec
    return LookupEmbedder(table, config, on_miss=on_miss)
