import math
import random

import numpy as np
import pytest

import factweave as fw
from factweave.embedding import ReferenceEmbedder, refinement_gradient
from factweave.errors import (
    DegenerateVectorError,
    DimensionError,
    FormatError,
    ValidationError,
)

def _base_fact():
    return fw.DataFact(
        fw.FactType.DISTRIBUTION,
        subspace=fw.Subspace((fw.Filter("Sex", "Female"),)),
        breakdown="Country",
        measure=fw.Measure("Gold", fw.Aggregation.SUM),
        focus=("China",),
    )


def test_embed_deterministic():
    fact = _base_fact()
    assert np.array_equal(fw.embed(fact), fw.embed(fact))


def test_embed_dimension_and_unit_norm():
    for d in (6, 32, 128):
        config = fw.EmbedderConfig(dimension=d)
        v = fw.embed(_base_fact(), config)
        assert v.shape == (d,)
        assert float(np.linalg.norm(v)) <= 1.0 + 1e-9
        assert np.isfinite(v).all()
    # at practical dimensions every block contributes and the norm is exactly 1
    for d in (32, 128):
        v = fw.embed(_base_fact(), fw.EmbedderConfig(dimension=d))
        assert math.isclose(float(np.linalg.norm(v)), 1.0, rel_tol=1e-9)


def test_embed_rejects_invalid_fact():
    with pytest.raises(ValidationError):
        fw.embed(fw.DataFact(fw.FactType.TREND, breakdown="Year"))


def test_single_slot_edit_closer_than_double():
    base = _base_fact()
    focus_edit = base.with_(focus=("Norway",))
    double_edit = base.with_(focus=("Norway",), breakdown="Sport")
    v0, v1, v2 = (fw.embed(f) for f in (base, focus_edit, double_edit))
    assert fw.distance(v0, v1) < fw.distance(v0, v2)


def test_slot_locality_suite():
    """Randomized single-edit vs double-edit locality, >= 99% of cases."""
    rng = random.Random(2)
    countries = [f"C{i}" for i in range(12)]
    sports = [f"S{i}" for i in range(8)]
    emb = ReferenceEmbedder(fw.EmbedderConfig())
    wins = total = 0
    for _ in range(400):
        base = fw.DataFact(
            fw.FactType.DISTRIBUTION,
            subspace=fw.Subspace((fw.Filter("Sex", rng.choice(["F", "M"])),)),
            breakdown=rng.choice(countries),
            measure=fw.Measure(rng.choice(sports), fw.Aggregation.SUM),
            focus=(rng.choice(countries),),
        )
        single = base.with_(focus=(rng.choice([c for c in countries
                                               if (c,) != base.focus]),))
        double = single.with_(breakdown=rng.choice(
            [c for c in countries if c != base.breakdown]
        ))
        v0, v1, v2 = emb.base(base), emb.base(single), emb.base(double)
        total += 1
        if fw.distance(v0, v1) < fw.distance(v0, v2):
            wins += 1
    assert wins / total >= 0.99


def test_distance_basics():
    assert fw.distance(np.zeros(4), np.zeros(4)) == 0.0
    u, v = np.array([0.0, 0.0]), np.array([3.0, 4.0])
    assert fw.distance(u, v) == 5.0
    assert fw.distance(u, v) == fw.distance(v, u)
    with pytest.raises(DimensionError):
        fw.distance(np.zeros(3), np.zeros(4))


def test_cosine_basics():
    v = np.array([1.0, 2.0, 3.0])
    assert math.isclose(fw.cosine_similarity(v, v), 1.0)
    assert math.isclose(fw.cosine_similarity(v, 2 * v), 1.0)
    assert math.isclose(
        fw.cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 1.0])), 0.0
    )
    with pytest.raises(DegenerateVectorError):
        fw.cosine_similarity(v, np.zeros(3))


def test_cosine_bounds_random():
    rng = np.random.default_rng(3)
    for _ in range(200):
        u = rng.standard_normal(16)
        v = rng.standard_normal(16)
        c = fw.cosine_similarity(u, v)
        assert -1.0 <= c <= 1.0
        assert fw.distance(u, v) >= 0.0


# --- trigram loss ------------------------------------------------------------------

def test_loss_zero_on_collinear_equally_spaced():
    triples = [(np.array([0.0, 0.0]), np.array([1.0, 1.0]), np.array([2.0, 2.0]))]
    assert fw.trigram_loss_vectors(triples, alpha=0.0) == 0.0


def test_loss_is_squared_offset_from_midpoint():
    v = np.array([2.0, -1.0, 0.5])
    e = np.array([0.1, -0.2, 0.3])
    triples = [(v, v + e, v)]
    assert math.isclose(fw.trigram_loss_vectors(triples, 0.0), float(np.sum(e * e)),
                        rel_tol=1e-12)


def test_loss_hand_computed_case():
    triples = [(np.array([0.0, 0.0]), np.array([1.0, 1.0]), np.array([2.0, 0.0]))]
    assert math.isclose(fw.trigram_loss_vectors(triples, alpha=1.0), 5.0, rel_tol=1e-12)


def _toy_trigrams(n, rng=None):
    rng = rng or random.Random(0)
    countries = [f"C{i}" for i in range(20)]
    trigrams = []
    for i in range(n):
        base = fw.DataFact(
            fw.FactType.DISTRIBUTION, breakdown=f"B{i % 5}",
            measure=fw.Measure("V", fw.Aggregation.SUM), focus=(countries[i % 20],),
        )
        b = base.with_(focus=(countries[(i + 3) % 20],))
        c = base.with_(focus=(countries[(i + 7) % 20],), breakdown=f"B{(i + 1) % 5}")
        trigrams.append(fw.Trigram(base, b, c))
    return trigrams


def test_trigram_requires_distinct_facts():
    f = _base_fact()
    with pytest.raises(ValidationError):
        fw.Trigram(f, f, f.with_(focus=("Norway",)))


def test_gradient_matches_finite_differences():
    config = fw.EmbedderConfig(dimension=8)
    rng = np.random.default_rng(11)
    r0 = np.eye(8) + 0.05 * rng.standard_normal((8, 8))
    config = fw.EmbedderConfig(dimension=8, refinement=r0)
    trigrams = _toy_trigrams(3)
    grad = refinement_gradient(trigrams, alpha=0.5, config=config)

    eps = 1e-6
    loss0 = fw.trigram_loss(trigrams, 0.5, config)
    worst = 0.0
    for i in range(8):
        for j in range(8):
            shifted = r0.copy()
            shifted[i, j] += eps
            plus = fw.trigram_loss(trigrams, 0.5, fw.EmbedderConfig(8, refinement=shifted))
            shifted[i, j] -= 2 * eps
            minus = fw.trigram_loss(trigrams, 0.5, fw.EmbedderConfig(8, refinement=shifted))
            fd = (plus - minus) / (2 * eps)
            denom = max(abs(fd), abs(grad[i, j]), 1e-8)
            worst = max(worst, abs(fd - grad[i, j]) / denom)
    assert worst < 1e-4, f"worst relative gradient error {worst}"
    assert loss0 >= 0.0


def test_train_monotone_loss():
    trigrams = _toy_trigrams(30)
    config = fw.EmbedderConfig(dimension=32)
    tc = fw.TrainConfig(alpha=0.5, learning_rate=0.01, epochs=25)
    losses = [fw.trigram_loss(trigrams, tc.alpha, config,
                              embedder=ReferenceEmbedder(config))]
    trained = config
    for _ in range(5):
        trained = fw.train_refinement(trigrams, fw.TrainConfig(tc.alpha, tc.learning_rate, 5),
                                      trained)
        losses.append(fw.trigram_loss(trigrams, tc.alpha, trained))
    for before, after in zip(losses, losses[1:]):
        assert after <= before + 1e-9
    assert losses[-1] < losses[0]


def test_train_noop_at_optimum_via_lookup_table():
    """A corpus whose embedded trigrams are exactly collinear has zero
    first-term gradient; training with alpha=0 must not move the loss."""
    config = fw.EmbedderConfig(dimension=16)
    trigrams = _toy_trigrams(12)
    rng = np.random.default_rng(4)
    table = {}
    for t in trigrams:
        va = rng.standard_normal(16)
        step = rng.standard_normal(16)
        table[t.a.token()] = va
        table[t.b.token()] = va + step
        table[t.c.token()] = va + 2 * step  # b is exactly the midpoint
    lookup = fw.LookupEmbedder(table, config)
    loss = fw.trigram_loss(trigrams, 0.0, config, embedder=lookup)
    assert loss < 1e-18


def test_train_requires_ten_trigrams():
    with pytest.raises(ValidationError):
        fw.train_refinement(_toy_trigrams(4), fw.TrainConfig(), fw.EmbedderConfig(dimension=8))


# --- table import/export ----------------------------------------------------------------

def test_table_round_trip():
    config = fw.EmbedderConfig(dimension=24)
    facts = [t.a for t in _toy_trigrams(6)] + [_base_fact()]
    text = fw.export_embedding_table(facts, config)
    lookup = fw.import_embedding_table(text, config, on_miss="error")
    for fact in facts:
        np.testing.assert_array_equal(lookup.embed(fact), fw.embed(fact, config))


def test_table_dimension_mismatch():
    text = fw.export_embedding_table([_base_fact()], fw.EmbedderConfig(dimension=16))
    with pytest.raises(DimensionError):
        fw.import_embedding_table(text, fw.EmbedderConfig(dimension=8))


def test_table_miss_fallback_is_flagged():
    config = fw.EmbedderConfig(dimension=16)
    text = fw.export_embedding_table([_base_fact()], config)
    lookup = fw.import_embedding_table(text, config, on_miss="fallback")
    other = _base_fact().with_(focus=("Norway",))
    vec, hit = lookup.embed_detailed(other)
    assert not hit
    np.testing.assert_array_equal(vec, fw.embed(other, config))
    assert lookup.misses == [other.token()]


def test_table_miss_error_mode():
    config = fw.EmbedderConfig(dimension=16)
    lookup = fw.import_embedding_table("dim=16\n", config, on_miss="error")
    with pytest.raises(ValidationError):
        lookup.embed(_base_fact())


def test_table_malformed():
    with pytest.raises(FormatError):
        fw.import_embedding_table("not a header\n", fw.EmbedderConfig(dimension=8))
    with pytest.raises(FormatError, match="line 2"):
        fw.import_embedding_table("dim=8\ngarbage-line-without-tab\n",
                                  fw.EmbedderConfig(dimension=8))
