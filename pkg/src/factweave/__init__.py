"""factweave: keyframe-driven data story engine.

Facts over a tabular dataset are embedded into a vector space; a constrained
tree search interpolates between succeeding keyframes to propose the story
pieces in between.
"""

from .facts import (
    Aggregation,
    DataFact,
    FactType,
    Filter,
    Measure,
    Meta,
    Subspace,
    generate_caption,
    parse_fact_spec,
    fact_to_spec,
    serialize_fact_spec,
    tokenize_fact,
)
from .dataset import (
    Dataset,
    EngineThresholds,
    EnumerationCaps,
    FactView,
    FieldKind,
    FieldSchema,
    ScoredFact,
    aggregate,
    apply_subspace,
    enumerate_facts,
    evaluate_fact,
    load_dataset,
    recommend_facts,
    validate_fact,
)
from .embedding import (
    EmbedderConfig,
    LookupEmbedder,
    ReferenceEmbedder,
    SlotWeights,
    TrainConfig,
    Trigram,
    cosine_similarity,
    distance,
    embed,
    export_embedding_table,
    import_embedding_table,
    train_refinement,
    trigram_loss,
    trigram_loss_vectors,
)
from .search import (
    ActionKind,
    InterpolationConfig,
    InterpolationResult,
    applicable_actions,
    compute_midpoints,
    expand_action,
    interpolate,
    path_reward,
    recommend_alternatives,
)

__version__ = "0.1.0"
