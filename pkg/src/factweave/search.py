"""Fact interpolation: constrained edit actions plus Monte Carlo tree search.

Between two keyframe facts the searcher walks the valid fact space one edit
action at a time, rewarding paths that hug the straight line between the
keyframe vectors, then hands back the path nodes closest to the evenly spaced
midpoints on that line. Seven constrained actions define the neighborhood of
a fact; every expanded candidate is validated against the dataset before it
enters the tree.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .dataset import (
    Dataset,
    EngineThresholds,
    FieldKind,
    ScoredFact,
    fitted_direction,
    group_z_scores,
    validate_fact,
)
from .embedding import EmbedderConfig, ReferenceEmbedder, cosine_similarity
from .errors import (
    DegenerateDirectionError,
    DegenerateKeyframesError,
    DimensionError,
    FactweaveError,
    ValidationError,
)
from .facts import (
    Aggregation,
    DataFact,
    EMPTY_META,
    FactType,
    Filter,
    Measure,
    Meta,
    Subspace,
)


class ActionKind(str, Enum):
    MODIFY_BREAKDOWN = "modifyBreakdown"
    MODIFY_MEASURE = "modifyMeasure"
    MODIFY_SUBSPACE = "modifySubspace"
    MODIFY_FOCUS = "modifyFocus"
    MODIFY_TYPE = "modifyType"
    ADD_SUBSPACE = "addSubspace"
    REMOVE_SUBSPACE = "removeSubspace"


# Slots an action is allowed to touch. Meta rides along everywhere because it
# is derived annotation (trend direction, extreme kind) recomputed from the
# data for every candidate; modifyType additionally repairs whatever the new
# type's structure requires.
ALLOWED_EDITS: dict[ActionKind, frozenset[str]] = {
    ActionKind.MODIFY_BREAKDOWN: frozenset({"breakdown", "meta"}),
    ActionKind.MODIFY_MEASURE: frozenset({"measure", "meta"}),
    ActionKind.MODIFY_SUBSPACE: frozenset({"subspace", "meta"}),
    ActionKind.MODIFY_FOCUS: frozenset({"focus", "meta"}),
    ActionKind.MODIFY_TYPE: frozenset(
        {"type", "subspace", "breakdown", "measure", "focus", "meta"}
    ),
    ActionKind.ADD_SUBSPACE: frozenset({"subspace", "meta"}),
    ActionKind.REMOVE_SUBSPACE: frozenset({"subspace", "meta"}),
}


def changed_slots(a: DataFact, b: DataFact) -> set[str]:
    out = set()
    if a.type != b.type:
        out.add("type")
    if a.subspace != b.subspace:
        out.add("subspace")
    if a.breakdown != b.breakdown:
        out.add("breakdown")
    if a.measure != b.measure:
        out.add("measure")
    if a.focus != b.focus:
        out.add("focus")
    if a.meta != b.meta:
        out.add("meta")
    return out


@dataclass(frozen=True)
class InterpolationConfig:
    n: int = 3
    lambda_rel: float = 0.15
    max_iterations: int = 2000
    min_iterations: int = 400  # keep polishing after the first lambda hit
    rollout_depth: int = 3
    exploration_c: float = 0.5
    branch_cap: int = 8
    rng_seed: int = 7
    time_budget_ms: int = 10_000

    def __post_init__(self):
        if self.n < 1 or self.max_iterations < 1 or self.rollout_depth < 1 \
                or self.branch_cap < 1 or self.time_budget_ms < 1:
            raise ValidationError("interpolation config values must be positive")
        if self.min_iterations < 0:
            raise ValidationError("min_iterations must be non-negative")
        if not (0.0 < self.lambda_rel <= 1.0):
            raise ValidationError("lambda_rel must lie in (0, 1]")
        if self.exploration_c < 0:
            raise ValidationError("exploration constant must be non-negative")


@dataclass(frozen=True)
class InterpolationResult:
    facts: tuple[DataFact, ...]
    rewards: tuple[float, ...]
    iterations: int
    terminated: str  # "reached-lambda" | "budget-exhausted"
    warnings: tuple[str, ...] = ()


# --- Eq.-2 midpoints and the Eq.-3 path reward ----------------------------------

def compute_midpoints(vs: np.ndarray, vt: np.ndarray, n: int) -> list[np.ndarray]:
    """Evenly spaced interpolants v_k = vs + k/(n+1) * (vt - vs), k = 1..n."""
    vs = np.asarray(vs, dtype=np.float64)
    vt = np.asarray(vt, dtype=np.float64)
    if vs.shape != vt.shape:
        raise DimensionError(f"vector dimensions differ: {vs.shape} vs {vt.shape}")
    if n < 1:
        raise ValidationError("midpoint count must be positive")
    return [vs + (k / (n + 1)) * (vt - vs) for k in range(1, n + 1)]


def path_reward(path_vectors: Sequence[np.ndarray], vs: np.ndarray, vt: np.ndarray) -> float:
    """Negated mean deviation of a search path from the segment direction.

    Each path point is compared to an expected position that advances along
    the vs->vt direction by that step's length; a path exactly on the segment
    scores 0, anything else is negative.
    """
    vs = np.asarray(vs, dtype=np.float64)
    vt = np.asarray(vt, dtype=np.float64)
    if not path_vectors:
        raise ValidationError("path must be non-empty")
    direction = vt - vs
    norm = float(np.linalg.norm(direction))
    if norm == 0.0:
        raise DegenerateDirectionError("segment endpoints coincide")
    u = direction / norm
    expected = vs
    total = 0.0
    for vj in path_vectors:
        vj = np.asarray(vj, dtype=np.float64)
        if vj.shape != vs.shape:
            raise DimensionError(f"vector dimensions differ: {vj.shape} vs {vs.shape}")
        step = float(np.linalg.norm(vj - expected))
        expected = expected + u * step
        total += float(np.linalg.norm(vj - expected))
    return -total / len(path_vectors)


# --- Table-1 action conditions -----------------------------------------------------

def applicable_actions(current: DataFact, target: DataFact) -> list[ActionKind]:
    """Actions whose condition holds for (current, target).

    The add/removeSubspace conditions are swapped relative to the printed
    table so they honor the stated goal of approaching the target's data
    scope, and modifyFocus's focus-equals-subspace guard only bites when the
    current focus is non-empty (see README, "Action conditions").
    """
    actions: list[ActionKind] = []
    if current.breakdown != target.breakdown:
        actions.append(ActionKind.MODIFY_BREAKDOWN)
    if current.measure != target.measure:
        actions.append(ActionKind.MODIFY_MEASURE)
    if current.subspace != target.subspace and len(current.subspace) == len(target.subspace):
        actions.append(ActionKind.MODIFY_SUBSPACE)
    if current.focus != target.focus and not (
        current.focus and set(current.focus) == set(target.subspace.values())
    ):
        actions.append(ActionKind.MODIFY_FOCUS)
    actions.append(ActionKind.MODIFY_TYPE)
    if len(current.subspace) < len(target.subspace):
        actions.append(ActionKind.ADD_SUBSPACE)
    if len(current.subspace) > len(target.subspace):
        actions.append(ActionKind.REMOVE_SUBSPACE)
    return actions


# --- candidate generation per action -------------------------------------------------

def _labels(dataset: Dataset, fact: DataFact) -> list[str]:
    if fact.breakdown is None:
        return ["all"]
    try:
        return [label for label, _ in
                dataset.groups(fact.subspace, fact.breakdown, fact.measure)]
    except Exception:
        return []


def _finalize_meta(dataset: Dataset, fact: DataFact,
                   thresholds: EngineThresholds) -> Optional[DataFact]:
    """Recompute derived meta from the data; None when no legal meta exists."""
    try:
        if fact.type is FactType.TREND:
            groups = dataset.groups(fact.subspace, fact.breakdown, fact.measure)
            direction = fitted_direction([v for _, v in groups], thresholds.trend_slope_eps)
            if direction is None:
                return None
            return fact.with_(meta=Meta(extra=direction))
        if fact.type is FactType.EXTREME:
            if not fact.focus:
                return None
            groups = dataset.groups(fact.subspace, fact.breakdown, fact.measure)
            if not groups:
                return None
            top = max(groups, key=lambda g: g[1])[0]
            bottom = min(groups, key=lambda g: g[1])[0]
            # keep a consistent existing kind (top and bottom can coincide)
            if fact.meta.extra == "minimum" and fact.focus[0] == bottom:
                return fact
            if fact.meta.extra == "maximum" and fact.focus[0] == top:
                return fact
            if fact.focus[0] == top:
                return fact.with_(meta=Meta(extra="maximum"))
            if fact.focus[0] == bottom:
                return fact.with_(meta=Meta(extra="minimum"))
            return None
        if fact.type is FactType.ASSOCIATION:
            return fact.with_(meta=Meta(second_field=fact.meta.second_field))
        if fact.meta != EMPTY_META:
            return fact.with_(meta=EMPTY_META)
        return fact
    except Exception:
        return None


def _breakdown_pool(dataset: Dataset) -> list[Optional[str]]:
    pool: list[Optional[str]] = [
        f.name for f in dataset.fields_of_kind(FieldKind.CATEGORICAL, FieldKind.TEMPORAL)
    ]
    pool.append(None)
    return pool


def _measure_pool(dataset: Dataset) -> list[Measure]:
    pool = [Measure(None, Aggregation.COUNT)]
    for f in dataset.fields_of_kind(FieldKind.NUMERICAL):
        for agg in (Aggregation.SUM, Aggregation.AVERAGE, Aggregation.MINIMUM,
                    Aggregation.MAXIMUM):
            pool.append(Measure(f.name, agg))
    return pool


def _candidates_modify_breakdown(dataset, fact, target):
    approach = [fact.with_(breakdown=target.breakdown)]
    pool = [fact.with_(breakdown=b) for b in _breakdown_pool(dataset) if b != fact.breakdown]
    return approach, pool


def _candidates_modify_measure(dataset, fact, target):
    approach = [fact.with_(measure=target.measure)]
    pool = [fact.with_(measure=m) for m in _measure_pool(dataset) if m != fact.measure]
    return approach, pool


def _candidates_modify_subspace(dataset, fact, target):
    approach = [fact.with_(subspace=target.subspace)]
    pool = []
    filters = list(fact.subspace)
    other_fields = dataset.fields_of_kind(FieldKind.CATEGORICAL, FieldKind.TEMPORAL)
    for i, flt in enumerate(filters):
        # same field, different value
        fld = dataset.field(flt.field) if dataset.has_field(flt.field) else None
        values = list(fld.domain) if fld is not None and fld.kind is not FieldKind.NUMERICAL \
            else []
        for v in values:
            if v != flt.value:
                new = filters[:i] + [Filter(flt.field, v)] + filters[i + 1:]
                pool.append(fact.with_(subspace=Subspace(tuple(new))))
        # different field entirely
        used = {f.field for f in filters} - {flt.field}
        for fld2 in other_fields:
            if fld2.name in used or fld2.name == flt.field:
                continue
            for v in fld2.domain:
                new = filters[:i] + [Filter(fld2.name, v)] + filters[i + 1:]
                pool.append(fact.with_(subspace=Subspace(tuple(new))))
    return approach, pool


def _candidates_modify_focus(dataset, fact, target):
    approach = [fact.with_(focus=target.focus)]
    labels = _labels(dataset, fact)
    pool = []
    if fact.focus:
        for i in range(len(fact.focus)):
            for label in labels:
                if label in fact.focus:
                    continue
                new = list(fact.focus)
                new[i] = label
                pool.append(fact.with_(focus=tuple(new)))
        pool.append(fact.with_(focus=()))  # dropping focus is a focus edit too
    else:
        pool.extend(fact.with_(focus=(label,)) for label in labels)
    return approach, pool


def _candidates_add_subspace(dataset, fact, target):
    existing = set(fact.subspace.fields())
    approach = [
        fact.with_(subspace=Subspace(tuple(fact.subspace) + (flt,)))
        for flt in target.subspace if flt.field not in existing
    ]
    pool = []
    for fld in dataset.fields_of_kind(FieldKind.CATEGORICAL, FieldKind.TEMPORAL):
        if fld.name in existing:
            continue
        for v in fld.domain:
            pool.append(
                fact.with_(subspace=Subspace(tuple(fact.subspace) + (Filter(fld.name, v),)))
            )
    return approach, pool


def _candidates_remove_subspace(dataset, fact, target):
    target_filters = set(target.subspace)
    removals = []
    for i, flt in enumerate(fact.subspace):
        remaining = Subspace(tuple(f for j, f in enumerate(fact.subspace) if j != i))
        removals.append((flt in target_filters, fact.with_(subspace=remaining)))
    # removing a filter the target does not share approaches its scope fastest
    approach = [f for shared, f in removals if not shared]
    pool = [f for shared, f in removals if shared]
    return approach, pool


def _pick_breakdown(dataset, fact, target, kind: Optional[FieldKind] = None) -> Optional[str]:
    options = []
    if fact.breakdown is not None:
        options.append(fact.breakdown)
    if target.breakdown is not None:
        options.append(target.breakdown)
    options.extend(f.name for f in dataset.fields_of_kind(
        *( (kind,) if kind else (FieldKind.CATEGORICAL, FieldKind.TEMPORAL) )
    ))
    for name in options:
        if dataset.has_field(name):
            f = dataset.field(name)
            if f.kind is FieldKind.NUMERICAL:
                continue
            if kind is not None and f.kind is not kind:
                continue
            return name
    return None


def _convert_type(dataset: Dataset, fact: DataFact, new_type: FactType,
                  target: DataFact, thresholds: EngineThresholds) -> list[DataFact]:
    """Candidates for changing the fact's type, repairing required slots."""
    numeric = [f.name for f in dataset.fields_of_kind(FieldKind.NUMERICAL)]
    out: list[DataFact] = []

    def with_groups(draft: DataFact) -> list[str]:
        return _labels(dataset, draft)

    if new_type is FactType.VALUE:
        out.append(fact.with_(type=new_type, breakdown=None, focus=()))
    elif new_type is FactType.ASSOCIATION:
        measure = fact.measure
        if measure.aggregation is Aggregation.COUNT or measure.field is None:
            mfield = target.measure.field if target.measure.field in numeric else \
                (numeric[0] if numeric else None)
            if mfield is None:
                return []
            agg = target.measure.aggregation if target.measure.aggregation is not \
                Aggregation.COUNT else Aggregation.SUM
            measure = Measure(mfield, agg)
        second_options = [target.meta.second_field, target.measure.field] + numeric
        second = next(
            (s for s in second_options if s in numeric and s != measure.field), None
        )
        if second is None:
            return []
        out.append(fact.with_(type=new_type, breakdown=None, focus=(),
                              measure=measure, meta=Meta(second_field=second)))
    else:
        kind = FieldKind.TEMPORAL if new_type is FactType.TREND else (
            FieldKind.CATEGORICAL if new_type is FactType.CATEGORIZATION else None
        )
        bd = fact.breakdown
        if bd is None or (kind is not None and
                          (not dataset.has_field(bd) or dataset.field(bd).kind is not kind)):
            bd = _pick_breakdown(dataset, fact, target, kind)
        if bd is None:
            return []
        measure = fact.measure
        if new_type is FactType.CATEGORIZATION:
            measure = Measure(None, Aggregation.COUNT)
        elif new_type is FactType.PROPORTION and measure.aggregation not in (
            Aggregation.SUM, Aggregation.COUNT
        ):
            measure = Measure(measure.field, Aggregation.SUM)
        draft = fact.with_(type=new_type, breakdown=bd, measure=measure, meta=EMPTY_META)
        labels = with_groups(draft)
        if not labels:
            return []
        if new_type is FactType.DIFFERENCE:
            if len(labels) < 2:
                return []
            pairs: list[tuple[str, str]] = []
            if len(target.focus) == 2 and all(x in labels for x in target.focus):
                pairs.append(target.focus)
            # mixes of a target focus item with other labels keep the search
            # dense near the target's neighborhood
            for anchor in target.focus:
                if anchor in labels:
                    for other in labels:
                        if other != anchor:
                            pairs.append((anchor, other))
            pairs.append((labels[0], labels[1]))
            seen_pairs = set()
            for pair in pairs:
                key = tuple(sorted(pair))
                if key not in seen_pairs:
                    seen_pairs.add(key)
                    out.append(draft.with_(focus=pair))
        elif new_type is FactType.PROPORTION:
            options = [x for x in target.focus if x in labels] + labels
            for focus in dict.fromkeys(options):
                out.append(draft.with_(focus=(focus,)))
        elif new_type is FactType.EXTREME:
            groups = dataset.groups(draft.subspace, bd, measure)
            if groups:
                top = max(groups, key=lambda g: g[1])[0]
                bottom = min(groups, key=lambda g: g[1])[0]
                out.append(draft.with_(focus=(top,), meta=Meta(extra="maximum")))
                out.append(draft.with_(focus=(bottom,), meta=Meta(extra="minimum")))
        elif new_type is FactType.OUTLIER:
            groups = dataset.groups(draft.subspace, bd, measure)
            zs = group_z_scores([v for _, v in groups])
            for (label, _), z in zip(groups, zs):
                if abs(z) >= thresholds.outlier_z:
                    out.append(draft.with_(focus=(label,)))
        else:  # trend, categorization, distribution, rank
            options: list[tuple[str, ...]] = [()]
            if len(fact.focus) == 1 and fact.focus[0] in labels:
                options.append(fact.focus)
            if len(target.focus) == 1 and target.focus[0] in labels:
                options.append(target.focus)
            for focus in dict.fromkeys(options):
                out.append(draft.with_(focus=focus))
    return out


def _candidates_modify_type(dataset, fact, target, thresholds):
    # Table-1 branch order: the two assignment branches, then the general one.
    # The assignment drafts keep the fact's own type when that stays valid and
    # otherwise fall back to type conversions of the drafted slots, since the
    # action owns the type slot anyway.
    def with_conversions(drafts):
        approach = list(drafts)
        pool = []
        for draft in drafts:
            for t in FactType:
                if t is draft.type:
                    continue
                pool.extend(_convert_type(dataset, draft, t, target, thresholds))
        return approach, pool

    if target.focus and len(fact.subspace) == 0 and len(target.subspace) == 0:
        if target.breakdown is None:
            return [], []
        return with_conversions([
            fact.with_(subspace=Subspace((Filter(target.breakdown, x),)))
            for x in target.focus
        ])
    if len(target.subspace) > 0 and len(fact.focus) == 0 and len(target.focus) == 0:
        return with_conversions(
            [fact.with_(focus=(flt.value,)) for flt in target.subspace]
        )
    approach = []
    if target.type != fact.type:
        approach = _convert_type(dataset, fact, target.type, target, thresholds)
    pool = []
    for t in FactType:
        if t in (fact.type, target.type):
            continue
        pool.extend(_convert_type(dataset, fact, t, target, thresholds))
    return approach, pool


_CANDIDATE_BUILDERS = {
    ActionKind.MODIFY_BREAKDOWN: _candidates_modify_breakdown,
    ActionKind.MODIFY_MEASURE: _candidates_modify_measure,
    ActionKind.MODIFY_SUBSPACE: _candidates_modify_subspace,
    ActionKind.MODIFY_FOCUS: _candidates_modify_focus,
    ActionKind.ADD_SUBSPACE: _candidates_add_subspace,
    ActionKind.REMOVE_SUBSPACE: _candidates_remove_subspace,
}


def _segment_distance(x: np.ndarray, vs: np.ndarray, vt: np.ndarray) -> float:
    span = vt - vs
    denom = float(np.dot(span, span))
    t = float(np.dot(x - vs, span)) / denom if denom else 0.0
    t = min(max(t, 0.0), 1.0)
    return float(np.linalg.norm(x - (vs + t * span)))


def expand_action(dataset: Dataset, fact: DataFact, action: ActionKind, target: DataFact,
                  branch_cap: int = 8, rng: Optional[random.Random] = None,
                  thresholds: EngineThresholds = EngineThresholds(),
                  corridor=None) -> list[DataFact]:
    """Valid children of `fact` under one action, target-approaching first.

    The candidate that copies the target's slot value is always tried first;
    the rest of the pool is sampled with the provided rng until the branch
    cap is filled. When a (embedder, vs, vt) corridor is given, the sample is
    biased towards candidates near the keyframe segment (the rng still breaks
    ties within proximity buckets). Every returned child validates against
    the dataset, differs canonically from the parent, and touches only the
    slots the action names (plus recomputed meta).
    """
    if rng is None:
        rng = random.Random(0)
    if action not in applicable_actions(fact, target):
        raise ValidationError(f"action {action.value} is not applicable here")
    if action is ActionKind.MODIFY_TYPE:
        approach, pool = _candidates_modify_type(dataset, fact, target, thresholds)
    else:
        approach, pool = _CANDIDATE_BUILDERS[action](dataset, fact, target)

    parent_token = fact.token()
    out: list[DataFact] = []
    seen = {parent_token}

    def consider(candidate: DataFact) -> None:
        final = _finalize_meta(dataset, candidate, thresholds)
        if final is None:
            return
        token = final.token()
        if token in seen:
            return
        if not validate_fact(dataset, final, thresholds).valid:
            seen.add(token)
            return
        seen.add(token)
        out.append(final)

    for candidate in approach:
        if len(out) >= branch_cap:
            break
        consider(candidate)
    pool = list(pool)
    rng.shuffle(pool)
    if corridor is not None:
        embedder, vs, vt, bucket_cache = corridor

        def bucket(candidate: DataFact) -> float:
            token = candidate.token()
            hit = bucket_cache.get(token)
            if hit is None:
                try:
                    vec = np.asarray(embedder.embed(candidate), dtype=np.float64)
                    hit = round(_segment_distance(vec, vs, vt), 1)
                except FactweaveError:
                    hit = math.inf
                bucket_cache[token] = hit
            return hit

        pool.sort(key=bucket)  # stable: rng order survives within buckets
    for candidate in pool:
        if len(out) >= branch_cap:
            break
        consider(candidate)
    return out


# --- the search tree -----------------------------------------------------------------

@dataclass
class SearchNode:
    fact: DataFact
    vector: np.ndarray
    token: str
    parent: Optional["SearchNode"] = None
    incoming_action: Optional[ActionKind] = None
    children: list["SearchNode"] = field(default_factory=list)
    visits: int = 0
    total_reward: float = 0.0
    expanded_actions: set[ActionKind] = field(default_factory=set)
    applicable: Optional[tuple[ActionKind, ...]] = None

    @property
    def average_reward(self) -> float:
        return self.total_reward / self.visits if self.visits else 0.0

    def path_from_root(self) -> list["SearchNode"]:
        chain = []
        node: Optional[SearchNode] = self
        while node is not None:
            chain.append(node)
            node = node.parent
        return chain[::-1]

    def is_fully_expanded(self) -> bool:
        return self.applicable is not None and not (
            set(self.applicable) - self.expanded_actions
        )


class _Search:
    """One interpolation run: owns the tree, caches, rng, and budgets."""

    def __init__(self, dataset: Dataset, fs: DataFact, ft: DataFact,
                 config: InterpolationConfig, embedder,
                 thresholds: EngineThresholds):
        self.dataset = dataset
        self.config = config
        self.embedder = embedder
        self.thresholds = thresholds
        self.rng = random.Random(config.rng_seed)
        self.ft = ft
        self.ft_token = ft.token()
        self.fs_token = fs.token()
        self.vs = np.asarray(embedder.embed(fs), dtype=np.float64)
        self.vt = np.asarray(embedder.embed(ft), dtype=np.float64)
        self.span = float(np.linalg.norm(self.vt - self.vs))
        self.lam = config.lambda_rel * self.span
        self.root = SearchNode(fact=fs, vector=self.vs, token=self.fs_token)
        self._expansions: dict[tuple[str, ActionKind], tuple[DataFact, ...]] = {}
        self._buckets: dict[str, float] = {}
        self.iterations = 0
        self.lambda_node: Optional[SearchNode] = None
        self.open_nodes = 1  # nodes with actions left to expand

    # -- caching helpers --

    def _expand_cached(self, fact: DataFact, action: ActionKind) -> tuple[DataFact, ...]:
        key = (fact.token(), action)
        hit = self._expansions.get(key)
        if hit is None:
            hit = tuple(expand_action(
                self.dataset, fact, action, self.ft,
                branch_cap=self.config.branch_cap, rng=self.rng,
                thresholds=self.thresholds,
                corridor=(self.embedder, self.vs, self.vt, self._buckets),
            ))
            self._expansions[key] = hit
        return hit

    def _rollout_step(self, fact: DataFact, action: ActionKind) -> Optional[DataFact]:
        """One random valid child for simulation; skips the full branch-set
        scoring when the pair has not been expanded in the tree yet."""
        cached = self._expansions.get((fact.token(), action))
        if cached is not None:
            return self.rng.choice(cached) if cached else None
        children = expand_action(
            self.dataset, fact, action, self.ft,
            branch_cap=1, rng=self.rng, thresholds=self.thresholds,
        )
        return children[0] if children else None

    # -- MCTS steps --

    def _select(self) -> SearchNode:
        node = self.root
        while True:
            if node.applicable is None:
                node.applicable = tuple(applicable_actions(node.fact, self.ft))
            if not node.is_fully_expanded():
                return node
            if not node.children:
                return node  # terminal leaf
            node = self._best_child(node)

    def _best_child(self, node: SearchNode) -> SearchNode:
        c = self.config.exploration_c
        log_parent = math.log(node.visits + 1)
        best = None
        best_rank: Optional[tuple[int, float]] = None
        for child in node.children:
            if child.visits == 0:
                rank = (1, 0.0)  # unvisited children first
            else:
                rank = (0, child.average_reward + c * math.sqrt(log_parent / child.visits))
            if best_rank is None or rank > best_rank or (
                rank == best_rank and child.token < best.token
            ):
                best, best_rank = child, rank
        return best

    def _expand(self, node: SearchNode) -> list[SearchNode]:
        was_open = not node.is_fully_expanded()
        ancestors = {n.token for n in node.path_from_root()}
        existing = {c.token for c in node.children}
        added: list[SearchNode] = []
        # walk pending actions until one yields a new child, so iterations
        # are not wasted on duplicate-only expansions
        while not added:
            pending = [a for a in node.applicable if a not in node.expanded_actions]
            if not pending:
                break
            action = pending[0]
            node.expanded_actions.add(action)
            for fact in self._expand_cached(node.fact, action):
                token = fact.token()
                if token in ancestors or token in existing:
                    continue
                child = SearchNode(
                    fact=fact,
                    vector=np.asarray(self.embedder.embed(fact), dtype=np.float64),
                    token=token,
                    parent=node,
                    incoming_action=action,
                )
                node.children.append(child)
                existing.add(token)
                added.append(child)
                self.open_nodes += 1
        if was_open and node.is_fully_expanded():
            self.open_nodes -= 1
        return added

    def _rollout(self, node: SearchNode) -> float:
        vectors = [n.vector for n in node.path_from_root()[1:]]
        fact = node.fact
        vector = node.vector
        for _ in range(self.config.rollout_depth):
            if float(np.linalg.norm(vector - self.vt)) < self.lam:
                break
            actions = applicable_actions(fact, self.ft)
            if not actions:
                break
            child = self._rollout_step(fact, self.rng.choice(actions))
            if child is None:
                break
            fact = child
            vector = np.asarray(self.embedder.embed(fact), dtype=np.float64)
            vectors.append(vector)
        return path_reward(vectors, self.vs, self.vt)

    def _backpropagate(self, node: Optional[SearchNode], reward: float) -> None:
        cursor = node
        while cursor is not None:
            cursor.visits += 1
            cursor.total_reward += reward
            cursor = cursor.parent

    def _usable_path_length(self, node: SearchNode) -> int:
        seen = set()
        for n in node.path_from_root():
            if n.token not in (self.fs_token, self.ft_token):
                seen.add(n.token)
        return len(seen)

    def _seed_approach_lattice(self, node_cap: int = 256, per_action: int = 2) -> None:
        """Pre-grow the tree along target-approaching chains.

        Applying the target's slot values in every order spans the lattice of
        partial mixes between the keyframes; those facts are the natural
        inhabitants of the interpolation corridor, so make sure the search
        starts with them before the stochastic phase refines the tree.
        """
        count = 0
        stack = [(self.root, 0)]
        while stack and count < node_cap:
            node, depth = stack.pop()
            if depth >= 7:
                continue
            if node.applicable is None:
                node.applicable = tuple(applicable_actions(node.fact, self.ft))
            ancestors = {n.token for n in node.path_from_root()}
            existing = {c.token for c in node.children}
            for action in node.applicable:
                for fact in self._expand_cached(node.fact, action)[:per_action]:
                    token = fact.token()
                    if token in ancestors or token in existing:
                        continue
                    child = SearchNode(
                        fact=fact,
                        vector=np.asarray(self.embedder.embed(fact), dtype=np.float64),
                        token=token,
                        parent=node,
                        incoming_action=action,
                    )
                    node.children.append(child)
                    existing.add(token)
                    self.open_nodes += 1
                    count += 1
                    if token != self.ft_token:
                        stack.append((child, depth + 1))
                    if float(np.linalg.norm(child.vector - self.vt)) < self.lam:
                        if self.lambda_node is None or (
                            self._usable_path_length(child)
                            > self._usable_path_length(self.lambda_node)
                        ):
                            self.lambda_node = child

    def run(self, min_usable: int) -> str:
        budget = self.config.time_budget_ms / 1000.0
        deadline = time.monotonic() + budget - min(0.25, 0.2 * budget)
        self._seed_approach_lattice()
        while self.iterations < self.config.max_iterations and self.open_nodes > 0:
            if time.monotonic() >= deadline:
                break
            if self.iterations >= self.config.min_iterations and \
                    self.lambda_node is not None and \
                    self._usable_path_length(self.lambda_node) >= min_usable:
                break
            node = self._select()
            added = self._expand(node)
            candidates = added if added else (
                [node] if node.is_fully_expanded() and not node.children else []
            )
            self.iterations += 1
            if not candidates:
                continue  # expansion produced nothing this iteration
            best_node = None
            best_reward = -math.inf
            for child in candidates:
                reward = self._rollout(child)
                # every simulated child keeps its own estimate so UCT can
                # rank siblings; the best reward walks up the ancestors
                child.visits += 1
                child.total_reward += reward
                if reward > best_reward or (
                    reward == best_reward and child.token < best_node.token
                ):
                    best_node, best_reward = child, reward
            self._backpropagate(best_node.parent, best_reward)
            for child in candidates:
                if float(np.linalg.norm(child.vector - self.vt)) < self.lam:
                    if self.lambda_node is None or (
                        self._usable_path_length(child)
                        > self._usable_path_length(self.lambda_node)
                    ):
                        self.lambda_node = child
        return "reached-lambda" if self.lambda_node is not None else "budget-exhausted"

    # -- path extraction and midpoint matching --

    def select_path(self, n_target: int) -> tuple[list[SearchNode], list[SearchNode]]:
        """Pick the root-to-leaf path whose midpoint assignment scores best.

        Paths are ranked by: reaching the target's lambda-ball, number of
        midpoints they can serve, and the path reward of the assigned facts
        (the quantity the search optimizes). Each candidate path is truncated
        at its closest approach to the target, since nodes past that point
        wander away from the segment. Returns (path nodes, assigned nodes).
        """
        leaves = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if not node.children:
                leaves.append(node)
            else:
                stack.extend(node.children)
        midpoint_cache: dict[int, list[np.ndarray]] = {}
        best_path_nodes: list[SearchNode] = []
        best_matched: list[SearchNode] = []
        best_key = None
        best_token = None
        for leaf in leaves:
            path = leaf.path_from_root()
            if len(path) < 2:
                continue
            dists = [float(np.linalg.norm(n.vector - self.vt)) for n in path[1:]]
            cut = min(range(len(dists)), key=lambda i: dists[i])
            path = path[: cut + 2]
            usable = self.usable_nodes(path)
            k = min(n_target, len(usable))
            if k == 0:
                continue
            if k not in midpoint_cache:
                midpoint_cache[k] = compute_midpoints(self.vs, self.vt, k)
            indices = monotone_assignment([n.vector for n in usable], midpoint_cache[k])
            matched = [usable[i] for i in indices]
            reward = path_reward([n.vector for n in matched], self.vs, self.vt)
            reaches = 1 if dists[cut] < self.lam else 0
            key = (reaches, k, reward, -dists[cut])
            if best_key is None or key > best_key or (
                key == best_key and leaf.token < best_token
            ):
                best_path_nodes, best_matched = path, matched
                best_key, best_token = key, leaf.token
        return best_path_nodes, best_matched

    def usable_nodes(self, path: list[SearchNode]) -> list[SearchNode]:
        seen = set()
        out = []
        for node in path:
            if node.token in (self.fs_token, self.ft_token) or node.token in seen:
                continue
            seen.add(node.token)
            out.append(node)
        return out

    def match_tree(self, n: int) -> list[SearchNode]:
        """Match midpoints against every distinct fact in the tree (Alg-1
        style Match over T), ordered by projection onto the segment so the
        assignment stays monotone along the storytelling direction. The
        distance-minimal assignment is then hill-climbed on the actual path
        reward (slot-by-slot swaps within the monotone order)."""
        distinct: dict[str, SearchNode] = {}
        stack = [self.root]
        while stack:
            node = stack.pop()
            stack.extend(node.children)
            if node.token in (self.fs_token, self.ft_token) or node.token in distinct:
                continue
            distinct[node.token] = node
        direction = (self.vt - self.vs) / (self.span or 1.0)
        ordered = sorted(
            distinct.values(),
            key=lambda nd: (float(np.dot(nd.vector - self.vs, direction)), nd.token),
        )
        k = min(n, len(ordered))
        if k == 0:
            return []
        midpoints = compute_midpoints(self.vs, self.vt, k)
        picked = monotone_assignment([nd.vector for nd in ordered], midpoints)
        if k == 1:
            # a single slot has no neighbor constraints; the reward would pull
            # it onto the ray instead of the midpoint, so keep the closest fact
            return [ordered[picked[0]]]

        def reward_of(indices: list[int]) -> float:
            return path_reward([ordered[i].vector for i in indices], self.vs, self.vt)

        best = list(picked)
        best_reward = reward_of(best)
        window = 12
        for _ in range(2):
            improved = False
            for slot in range(k):
                lo = best[slot - 1] + 1 if slot > 0 else 0
                hi = best[slot + 1] if slot + 1 < k else len(ordered)
                lo = max(lo, best[slot] - window)
                hi = min(hi, best[slot] + window + 1)
                for candidate in range(lo, hi):
                    if candidate == best[slot]:
                        continue
                    trial = best[:slot] + [candidate] + best[slot + 1:]
                    trial_reward = reward_of(trial)
                    if trial_reward > best_reward + 1e-12:
                        best, best_reward = trial, trial_reward
                        improved = True
            if not improved:
                break
        return [ordered[i] for i in best]


def monotone_assignment(vectors: Sequence[np.ndarray],
                        midpoints: Sequence[np.ndarray]) -> list[int]:
    """Min-total-distance assignment of midpoints to vectors with strictly
    increasing vector indices. Returns one vector index per midpoint."""
    n_mid = len(midpoints)
    n_vec = len(vectors)
    if n_mid == 0 or n_vec < n_mid:
        raise ValidationError("not enough vectors to match midpoints")
    cost = np.array(
        [[float(np.linalg.norm(v - m)) for v in vectors] for m in midpoints]
    )
    dp = np.full((n_mid, n_vec), np.inf)
    choice = np.zeros((n_mid, n_vec), dtype=int)
    dp[0] = cost[0]
    for k in range(1, n_mid):
        best_prev = np.inf
        best_idx = -1
        for i in range(k, n_vec):
            if dp[k - 1][i - 1] < best_prev:
                best_prev = dp[k - 1][i - 1]
                best_idx = i - 1
            dp[k][i] = cost[k][i] + best_prev
            choice[k][i] = best_idx
    end = int(np.argmin(dp[n_mid - 1]))
    picked = [end]
    for k in range(n_mid - 1, 0, -1):
        end = int(choice[k][end])
        picked.append(end)
    picked.reverse()
    return picked


def _prepare(dataset: Dataset, fs: DataFact, ft: DataFact, embedder,
             thresholds: EngineThresholds):
    for name, fact in (("start", fs), ("target", ft)):
        report = validate_fact(dataset, fact, thresholds)
        if not report.valid:
            raise ValidationError(
                f"{name} keyframe is invalid: {report.violations[0].rule}", report=report
            )
    if fs.token() == ft.token():
        raise DegenerateKeyframesError("keyframes are canonically identical")
    vs = np.asarray(embedder.embed(fs), dtype=np.float64)
    vt = np.asarray(embedder.embed(ft), dtype=np.float64)
    if float(np.linalg.norm(vt - vs)) == 0.0:
        raise DegenerateKeyframesError("keyframes embed to the same vector")
    return vs, vt


def interpolate(dataset: Dataset, fs: DataFact, ft: DataFact,
                config: InterpolationConfig = InterpolationConfig(),
                embedder_config: EmbedderConfig = EmbedderConfig(),
                embedder=None,
                thresholds: EngineThresholds = EngineThresholds()) -> InterpolationResult:
    """Generate config.n intermediate facts between two keyframes.

    Runs the constrained-action tree search until the frontier is within
    lambda of the target (or budgets run out), picks the maximum-reward
    root-to-leaf path, and matches its nodes to the straight-line midpoints
    under an order-preserving assignment. Deterministic for a fixed rng seed
    whenever the time budget is not the binding constraint.
    """
    if embedder is None:
        embedder = ReferenceEmbedder(embedder_config)
    _prepare(dataset, fs, ft, embedder, thresholds)
    search = _Search(dataset, fs, ft, config, embedder, thresholds)
    terminated = search.run(min_usable=config.n)

    matched = search.match_tree(config.n)
    warnings = []
    if len(matched) < config.n:
        warnings.append("short-path")
    if not matched:
        return InterpolationResult((), (), search.iterations, terminated, tuple(warnings))
    vectors: list[np.ndarray] = []
    rewards = []
    for node in matched:
        vectors.append(node.vector)
        rewards.append(path_reward(vectors, search.vs, search.vt))
    return InterpolationResult(
        facts=tuple(node.fact for node in matched),
        rewards=tuple(rewards),
        iterations=search.iterations,
        terminated=terminated,
        warnings=tuple(warnings),
    )


def recommend_alternatives(dataset: Dataset, f_prev: DataFact, f_next: DataFact,
                           config: InterpolationConfig = InterpolationConfig(),
                           embedder_config: EmbedderConfig = EmbedderConfig(),
                           embedder=None,
                           thresholds: EngineThresholds = EngineThresholds()
                           ) -> list[ScoredFact]:
    """All distinct valid facts on the best path between two neighbors,
    scored by cosine proximity to the single midpoint (shifted into [0, 1])."""
    if embedder is None:
        embedder = ReferenceEmbedder(embedder_config)
    _prepare(dataset, f_prev, f_next, embedder, thresholds)
    search = _Search(dataset, f_prev, f_next, config, embedder, thresholds)
    search.run(min_usable=1)
    path, _ = search.select_path(1)
    nodes = search.usable_nodes(path)
    midpoint = compute_midpoints(search.vs, search.vt, 1)[0]
    scored = [
        ScoredFact(node.fact, (1.0 + cosine_similarity(node.vector, midpoint)) / 2.0)
        for node in nodes
    ]
    scored.sort(key=lambda s: (-s.significance, s.fact.token()))
    return scored
