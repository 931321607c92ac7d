"""Data-fact vocabulary: the atomic unit a story is made of.

A fact is a 5-tuple {type, subspace, breakdown, measure, focus} plus a meta
annotation. This module owns the structural rules (what shapes are legal for
each fact type), the canonical token string used for equality and embedding,
the JSON fact-spec format, and the caption templates. Anything that needs the
actual data (does this field exist? is the subspace empty?) lives in
`factweave.dataset`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Optional

from .errors import ParseError, ValidationError


class FactType(str, Enum):
    VALUE = "value"
    DIFFERENCE = "difference"
    PROPORTION = "proportion"
    TREND = "trend"
    CATEGORIZATION = "categorization"
    DISTRIBUTION = "distribution"
    RANK = "rank"
    ASSOCIATION = "association"
    EXTREME = "extreme"
    OUTLIER = "outlier"


class Aggregation(str, Enum):
    COUNT = "count"
    SUM = "sum"
    AVERAGE = "average"
    MINIMUM = "minimum"
    MAXIMUM = "maximum"


TREND_DIRECTIONS = ("increasing", "decreasing")
EXTREME_KINDS = ("minimum", "maximum")


@dataclass(frozen=True)
class Filter:
    """One field=value constraint restricting the data scope."""

    field: str
    value: str


@dataclass(frozen=True)
class Subspace:
    """Conjunction of filters. Canonicalized: sorted by field, no duplicates."""

    filters: tuple[Filter, ...] = ()

    def __post_init__(self):
        filters = tuple(self.filters)
        fields = [f.field for f in filters]
        if len(set(fields)) != len(fields):
            raise ValidationError(
                "subspace names the same field twice", report=["subspace-duplicate-field"]
            )
        object.__setattr__(self, "filters", tuple(sorted(filters, key=lambda f: f.field)))

    def __len__(self) -> int:
        return len(self.filters)

    def __iter__(self):
        return iter(self.filters)

    def fields(self) -> tuple[str, ...]:
        return tuple(f.field for f in self.filters)

    def values(self) -> tuple[str, ...]:
        return tuple(f.value for f in self.filters)


@dataclass(frozen=True)
class Measure:
    """Numerical field plus aggregation; `count` needs no field and drops it."""

    field: Optional[str]
    aggregation: Aggregation

    def __post_init__(self):
        object.__setattr__(self, "aggregation", Aggregation(self.aggregation))
        if self.aggregation is Aggregation.COUNT:
            # count ignores the measure column, so normalize it away to keep
            # canonical equality meaningful
            object.__setattr__(self, "field", None)


@dataclass(frozen=True)
class Meta:
    """Extra annotation: trend direction, extreme kind, or the second field
    of an association."""

    extra: str = ""
    second_field: Optional[str] = None


EMPTY_META = Meta()


@dataclass(frozen=True)
class DataFact:
    type: FactType
    subspace: Subspace = field(default_factory=Subspace)
    breakdown: Optional[str] = None
    measure: Measure = field(default_factory=lambda: Measure(None, Aggregation.COUNT))
    focus: tuple[str, ...] = ()
    meta: Meta = EMPTY_META

    def __post_init__(self):
        object.__setattr__(self, "type", FactType(self.type))
        # focus is a set of highlighted groups; canonicalize the order so
        # difference(A, B) and difference(B, A) are the same fact
        object.__setattr__(self, "focus", tuple(sorted(self.focus)))
        if self.breakdown == "":
            object.__setattr__(self, "breakdown", None)

    def token(self) -> str:
        """Canonical token string; equality of facts is equality of tokens."""
        return _assemble_token(self)

    def with_(self, **changes) -> "DataFact":
        return replace(self, **changes)


@dataclass(frozen=True)
class Violation:
    rule: str
    message: str
    error_class: str = "ValidationError"

    def as_dict(self) -> dict:
        return {"rule": self.rule, "message": self.message, "errorClass": self.error_class}


# --- structural validity -----------------------------------------------------

# per-type requirements: breakdown presence (True/False/None=either),
# (min, max) focus arity, and whether a non-count measure field may appear
_BREAKDOWN_REQUIRED = {
    FactType.VALUE: False,
    FactType.DIFFERENCE: True,
    FactType.PROPORTION: True,
    FactType.TREND: True,
    FactType.CATEGORIZATION: True,
    FactType.DISTRIBUTION: True,
    FactType.RANK: True,
    FactType.ASSOCIATION: False,
    FactType.EXTREME: True,
    FactType.OUTLIER: True,
}

_FOCUS_ARITY = {
    FactType.VALUE: (0, 0),
    FactType.DIFFERENCE: (2, 2),
    FactType.PROPORTION: (1, 1),
    FactType.TREND: (0, 1),
    FactType.CATEGORIZATION: (0, 1),
    FactType.DISTRIBUTION: (0, 1),
    FactType.RANK: (0, 1),
    FactType.ASSOCIATION: (0, 1),
    FactType.EXTREME: (1, 1),
    FactType.OUTLIER: (1, 1),
}


def structural_violations(fact: DataFact) -> list[Violation]:
    """Classify the fact against the structural validity matrix.

    Returns an empty list when the shape is legal for the fact type. Rules
    that need the dataset (field kinds, group membership, data patterns) are
    not checked here; see `dataset.validate_fact`.
    """
    v: list[Violation] = []
    t = fact.type

    if len(set(fact.focus)) != len(fact.focus):
        v.append(Violation("focus-distinct", "focus items must be distinct"))
    lo, hi = _FOCUS_ARITY[t]
    if not (lo <= len(fact.focus) <= hi):
        v.append(
            Violation(
                f"{t.value}-focus-arity",
                f"{t.value} facts take between {lo} and {hi} focus items, got {len(fact.focus)}",
            )
        )

    needs_breakdown = _BREAKDOWN_REQUIRED[t]
    if needs_breakdown and fact.breakdown is None:
        v.append(Violation(f"{t.value}-breakdown-required", f"{t.value} facts need a breakdown"))
    if not needs_breakdown and fact.breakdown is not None:
        v.append(Violation(f"{t.value}-no-breakdown", f"{t.value} facts take no breakdown"))

    if fact.measure.aggregation is not Aggregation.COUNT and fact.measure.field is None:
        v.append(
            Violation(
                "measure-field-required",
                f"aggregation {fact.measure.aggregation.value} needs a measure field",
            )
        )

    if t is FactType.TREND:
        if fact.meta.extra not in TREND_DIRECTIONS:
            v.append(Violation("trend-meta", "trend facts need meta increasing|decreasing"))
    elif t is FactType.EXTREME:
        if fact.meta.extra not in EXTREME_KINDS:
            v.append(Violation("extreme-meta", "extreme facts need meta minimum|maximum"))
    elif fact.meta.extra:
        v.append(Violation("meta-extra-unexpected", f"{t.value} facts carry no meta label"))

    if t is FactType.PROPORTION:
        if fact.measure.aggregation not in (Aggregation.SUM, Aggregation.COUNT):
            v.append(
                Violation("proportion-aggregation", "proportion needs a sum or count measure")
            )
    if t is FactType.CATEGORIZATION:
        if fact.measure.aggregation is not Aggregation.COUNT:
            v.append(Violation("categorization-count", "categorization uses the count measure"))
    if t is FactType.ASSOCIATION:
        if fact.meta.second_field is None:
            v.append(Violation("association-second-field", "association needs meta.secondField"))
        elif fact.measure.field is not None and fact.meta.second_field == fact.measure.field:
            v.append(
                Violation(
                    "association-distinct-fields",
                    "association's two fields must differ",
                )
            )
        if fact.measure.aggregation is Aggregation.COUNT:
            v.append(
                Violation(
                    "association-measure-numeric",
                    "association needs a numerical (non-count) measure",
                )
            )
    elif fact.meta.second_field is not None:
        v.append(
            Violation("meta-second-field-unexpected", f"{t.value} facts carry no second field")
        )

    return v


def is_structurally_valid(fact: DataFact) -> bool:
    return not structural_violations(fact)


# --- canonical tokenization ---------------------------------------------------

_FILTER_SEP = ";"


def _measure_payload(m: Measure) -> str:
    if m.field is None:
        return m.aggregation.value
    return f"{m.field},{m.aggregation.value}"


def _meta_payload(meta: Meta) -> str:
    if meta.extra:
        return meta.extra
    if meta.second_field:
        return meta.second_field
    return ""


def _assemble_token(fact: DataFact) -> str:
    sub = _FILTER_SEP.join(f"{f.field},{f.value}" for f in fact.subspace)
    slots = [
        ("type", fact.type.value),
        ("subspace", sub),
        ("measure", _measure_payload(fact.measure)),
        ("breakdown", fact.breakdown or ""),
        ("focus", _FILTER_SEP.join(fact.focus)),
        ("meta", _meta_payload(fact.meta)),
    ]
    return " ".join(f"[{tag}]{payload}" for tag, payload in slots)


def tokenize_fact(fact: DataFact) -> str:
    """Canonical token string, e.g.

        [type]distribution [subspace]Sex,Female [measure]Gold Medal,sum
        [breakdown]Country [focus]China [meta]

    Slots always appear in this order; absent slots keep their tag with an
    empty payload. Raises ValidationError for structurally invalid facts.
    """
    violations = structural_violations(fact)
    if violations:
        raise ValidationError(
            f"fact violates rule {violations[0].rule}: {violations[0].message}",
            report=violations,
        )
    return _assemble_token(fact)


# --- fact-spec documents (JSON) ----------------------------------------------

_SPEC_KEYS = {"type", "subspace", "breakdown", "measure", "focus", "meta"}
_META_KEYS = {"extra", "secondField"}


def fact_to_spec(fact: DataFact) -> dict:
    """The JSON-able fact-spec document for a fact."""
    meta: dict[str, Any] = {"extra": fact.meta.extra}
    if fact.meta.second_field is not None:
        meta["secondField"] = fact.meta.second_field
    return {
        "type": fact.type.value,
        "subspace": [{"field": f.field, "value": f.value} for f in fact.subspace],
        "breakdown": fact.breakdown,
        "measure": {"field": fact.measure.field, "aggregation": fact.measure.aggregation.value},
        "focus": list(fact.focus),
        "meta": meta,
    }


def serialize_fact_spec(fact: DataFact) -> str:
    return json.dumps(fact_to_spec(fact), sort_keys=True)


def _expect(cond: bool, message: str, position: str):
    if not cond:
        raise ParseError(message, position)


def parse_fact_spec(doc: str | dict) -> DataFact:
    """Parse a fact-spec document (JSON text or an already-decoded object).

    Inverse of `fact_to_spec`: parse(serialize(f)) == f for every valid fact.
    Unknown fields or field values are accepted here and reported later by
    dataset validation; unknown keys, types, and aggregations are rejected.
    """
    if isinstance(doc, str):
        try:
            obj = json.loads(doc)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", e.pos) from e
    else:
        obj = doc
    _expect(isinstance(obj, dict), "fact spec must be a JSON object", "$")
    unknown = set(obj) - _SPEC_KEYS
    _expect(not unknown, f"unknown keys {sorted(unknown)}", "$")
    _expect("type" in obj, "missing required key 'type'", "$")

    try:
        ftype = FactType(obj["type"])
    except ValueError:
        raise ParseError(f"unknown fact type {obj['type']!r}", "type") from None

    filters = []
    for i, entry in enumerate(obj.get("subspace") or []):
        pos = f"subspace[{i}]"
        _expect(isinstance(entry, dict), "filter must be an object", pos)
        _expect("field" in entry and "value" in entry, "filter needs field and value", pos)
        filters.append(Filter(str(entry["field"]), str(entry["value"])))
    try:
        subspace = Subspace(tuple(filters))
    except ValidationError as e:
        raise ParseError(str(e), "subspace") from e

    breakdown = obj.get("breakdown")
    _expect(
        breakdown is None or isinstance(breakdown, str), "breakdown must be a string or null",
        "breakdown",
    )

    measure_obj = obj.get("measure") or {"field": None, "aggregation": "count"}
    _expect(isinstance(measure_obj, dict), "measure must be an object", "measure")
    _expect("aggregation" in measure_obj, "measure needs an aggregation", "measure")
    try:
        agg = Aggregation(measure_obj["aggregation"])
    except ValueError:
        raise ParseError(
            f"unknown aggregation {measure_obj['aggregation']!r}", "measure.aggregation"
        ) from None
    mfield = measure_obj.get("field")
    _expect(
        mfield is None or isinstance(mfield, str), "measure field must be a string or null",
        "measure.field",
    )
    measure = Measure(mfield, agg)

    focus_items = obj.get("focus") or []
    _expect(isinstance(focus_items, list), "focus must be a list", "focus")
    focus = tuple(str(x) for x in focus_items)

    meta_obj = obj.get("meta") or {}
    _expect(isinstance(meta_obj, dict), "meta must be an object", "meta")
    unknown_meta = set(meta_obj) - _META_KEYS
    _expect(not unknown_meta, f"unknown meta keys {sorted(unknown_meta)}", "meta")
    meta = Meta(extra=str(meta_obj.get("extra", "")), second_field=meta_obj.get("secondField"))

    return DataFact(
        type=ftype,
        subspace=subspace,
        breakdown=breakdown,
        measure=measure,
        focus=focus,
        meta=meta,
    )


# --- captions -----------------------------------------------------------------

def _fmt_num(x: float) -> str:
    if isinstance(x, float) and x.is_integer():
        return str(int(x))
    if isinstance(x, float):
        return str(round(x, 4))
    return str(x)


def _measure_phrase(fact: DataFact) -> str:
    if fact.measure.field is None:
        return "count of records"
    return f"{fact.measure.aggregation.value} of {fact.measure.field}"


def _subspace_phrase(fact: DataFact) -> str:
    if not len(fact.subspace):
        return ""
    parts = " and ".join(f"{f.field} = {f.value}" for f in fact.subspace)
    return f" for {parts}"


def _group_value(view, label: str):
    for g_label, g_value in view.groups:
        if g_label == label:
            return g_value
    return None


def generate_caption(fact: DataFact, view) -> str:
    """One deterministic English sentence for a fact, filled from its view.

    The per-type templates are documented in README.md ("Caption templates");
    unknown shapes fall back to a generic sentence rather than failing.
    """
    m = _measure_phrase(fact)
    sub = _subspace_phrase(fact)
    bd = fact.breakdown
    focus = fact.focus
    t = fact.type
    try:
        if t is FactType.VALUE:
            val = view.groups[0][1] if view.groups else None
            return f"The {m}{sub} is {_fmt_num(val)}."
        if t is FactType.DIFFERENCE:
            a, b = focus
            va, vb = _group_value(view, a), _group_value(view, b)
            return (
                f"The {m}{sub} differs between {a} ({_fmt_num(va)}) and "
                f"{b} ({_fmt_num(vb)}) across {bd}."
            )
        if t is FactType.PROPORTION:
            total = sum(value for _, value in view.groups)
            share = _group_value(view, focus[0]) / total if total else 0.0
            return (
                f"{focus[0]} accounts for {round(100 * share, 1)}% of the {m}{sub} "
                f"across {bd}."
            )
        if t is FactType.TREND:
            return f"The {m}{sub} shows an {fact.meta.extra} trend across {bd}."
        if t is FactType.CATEGORIZATION:
            return f"The data{sub} covers {len(view.groups)} categories of {bd}."
        if t is FactType.DISTRIBUTION:
            tail = f", highlighting {focus[0]}" if focus else ""
            return f"The distribution of the {m}{sub} across {bd}{tail}."
        if t is FactType.RANK:
            top = ", ".join(label for label, _ in view.groups[:3])
            return f"Ranking {bd} by the {m}{sub}, the top entries are {top}."
        if t is FactType.ASSOCIATION:
            return f"The {m} is associated with {fact.meta.second_field}{sub}."
        if t is FactType.EXTREME:
            val = _group_value(view, focus[0])
            return f"{focus[0]} has the {fact.meta.extra} {m}{sub} across {bd} ({_fmt_num(val)})."
        if t is FactType.OUTLIER:
            return f"{focus[0]} stands out as an outlier in the {m}{sub} across {bd}."
    except Exception:
        pass
    return f"A {t.value} fact about the {m}{sub}."


def parse_facts_file(text: str) -> list[DataFact]:
    """Parse a JSON array of fact-spec documents (the keyframes file format)."""
    try:
        arr = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg}", e.pos) from e
    if not isinstance(arr, list):
        raise ParseError("keyframes file must be a JSON array of fact specs", "$")
    return [parse_fact_spec(entry) for entry in arr]
