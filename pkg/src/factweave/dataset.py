"""Tabular data engine: CSV ingestion, schema inference, fact evaluation.

The pipeline for one fact is filter (subspace) -> group (breakdown) ->
aggregate (measure) -> highlight (focus). The module also owns the
data-dependent half of fact validity, exhaustive enumeration of the valid
fact space (used by search expansion and by the brute-force oracles), and
the significance scoring behind the cold-start recommendation list.
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import math
import re
from dataclasses import dataclass, field as dc_field
from enum import Enum
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .errors import (
    CapacityError,
    DomainError,
    EmptyDatasetError,
    FormatError,
    MeasureTypeError,
    SchemaError,
    ValidationError,
)
from .facts import (
    Aggregation,
    DataFact,
    FactType,
    Filter,
    Measure,
    Meta,
    Subspace,
    Violation,
    structural_violations,
)

MISSING_TOKENS = {"", "na", "n/a", "null", "nan", "none"}

_MONTHS = [
    "january", "february", "march", "april", "may", "june",
    "july", "august", "september", "october", "november", "december",
]
_MONTH_INDEX = {name: i for i, name in enumerate(_MONTHS)}
_MONTH_INDEX.update({name[:3]: i for i, name in enumerate(_MONTHS)})
_YEAR_RE = re.compile(r"^[12]\d{3}$")
_ISO_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")


class FieldKind(str, Enum):
    CATEGORICAL = "categorical"
    TEMPORAL = "temporal"
    NUMERICAL = "numerical"


def is_missing(cell: str) -> bool:
    return cell.strip().lower() in MISSING_TOKENS


def parse_number(cell: str) -> Optional[float]:
    if is_missing(cell):
        return None
    try:
        value = float(cell)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def temporal_key(cell: str) -> Optional[tuple[int, ...]]:
    """Sort key when the cell is temporal (ISO date, 4-digit year, month name)."""
    s = cell.strip()
    if _ISO_DATE_RE.match(s):
        y, m, d = s.split("-")
        return (int(y), int(m), int(d))
    if _YEAR_RE.match(s):
        return (int(s), 0, 0)
    idx = _MONTH_INDEX.get(s.lower())
    if idx is not None:
        return (0, idx, 0)
    return None


@dataclass(frozen=True)
class FieldSchema:
    name: str
    kind: FieldKind
    # categorical/temporal: ordered distinct values; numerical: (min, max)
    domain: tuple

    def as_dict(self) -> dict:
        if self.kind is FieldKind.NUMERICAL:
            lo, hi = self.domain
            return {"name": self.name, "kind": self.kind.value, "domain": {"min": lo, "max": hi}}
        return {"name": self.name, "kind": self.kind.value, "domain": {"values": list(self.domain)}}


@dataclass(frozen=True)
class FactView:
    """The evaluated data behind a fact: what a chart renders."""

    groups: tuple[tuple[str, float], ...]
    highlighted: tuple[str, ...]
    support_row_count: int
    series2: Optional[tuple[Optional[float], ...]] = None

    def as_dict(self) -> dict:
        return {
            "groups": [[label, value] for label, value in self.groups],
            "highlighted": list(self.highlighted),
            "supportRowCount": self.support_row_count,
            "series2": list(self.series2) if self.series2 is not None else None,
        }


@dataclass(frozen=True)
class ScoredFact:
    fact: DataFact
    significance: float


@dataclass(frozen=True)
class ValidityReport:
    valid: bool
    violations: tuple[Violation, ...]

    def as_dict(self) -> dict:
        return {"valid": self.valid, "violations": [v.as_dict() for v in self.violations]}


@dataclass(frozen=True)
class EngineThresholds:
    outlier_z: float = 3.0
    trend_slope_eps: float = 1e-12


@dataclass(frozen=True)
class EnumerationCaps:
    """Bounds on the enumerated fact space."""

    max_filters: int = 2
    max_filter_values: int = 20
    types: Optional[tuple[FactType, ...]] = None
    hard_limit: int = 200_000
    base_subspace: Subspace = dc_field(default_factory=Subspace)


class Dataset:
    """Immutable ingested table plus caches for repeated fact evaluation."""

    def __init__(self, dataset_id: str, schema: Sequence[FieldSchema], rows: Sequence[dict]):
        self.id = dataset_id
        self.schema = tuple(schema)
        self.rows = tuple(rows)
        self.row_count = len(self.rows)
        self._by_name = {f.name: f for f in self.schema}
        self._columns = {
            f.name: [row[f.name] for row in self.rows] for f in self.schema
        }
        self._numeric: dict[str, np.ndarray] = {}
        self._value_masks: dict[tuple[str, str], np.ndarray] = {}
        self._subspace_masks: dict[tuple, np.ndarray] = {}
        self._group_cache: dict[tuple, tuple[tuple[str, float], ...]] = {}
        for f in self.schema:
            if f.kind is FieldKind.NUMERICAL:
                col = np.array(
                    [v if (v := parse_number(c)) is not None else np.nan
                     for c in self._columns[f.name]],
                    dtype=np.float64,
                )
                self._numeric[f.name] = col

    # -- schema helpers ------------------------------------------------------

    def field(self, name: str) -> FieldSchema:
        f = self._by_name.get(name)
        if f is None:
            raise SchemaError(f"unknown field {name!r}")
        return f

    def has_field(self, name: str) -> bool:
        return name in self._by_name

    def fields_of_kind(self, *kinds: FieldKind) -> list[FieldSchema]:
        return [f for f in self.schema if f.kind in kinds]

    # -- filtering -----------------------------------------------------------

    def _mask_for(self, flt: Filter) -> np.ndarray:
        key = (flt.field, flt.value)
        mask = self._value_masks.get(key)
        if mask is None:
            col = self._columns[flt.field]
            mask = np.fromiter((c == flt.value for c in col), dtype=bool, count=len(col))
            self._value_masks[key] = mask
        return mask

    def subspace_mask(self, subspace: Subspace) -> np.ndarray:
        key = tuple((f.field, f.value) for f in subspace)
        mask = self._subspace_masks.get(key)
        if mask is None:
            mask = np.ones(self.row_count, dtype=bool)
            for flt in subspace:
                mask = mask & self._mask_for(flt)
            self._subspace_masks[key] = mask
        return mask

    def check_subspace(self, subspace: Subspace) -> None:
        """Raise SchemaError/DomainError when a filter is not answerable."""
        for flt in subspace:
            f = self.field(flt.field)
            if f.kind is FieldKind.NUMERICAL:
                raise SchemaError(f"cannot filter on numerical field {flt.field!r}")
            if flt.value not in f.domain:
                raise DomainError(f"value {flt.value!r} not in domain of {flt.field!r}")

    def support(self, subspace: Subspace) -> int:
        return int(self.subspace_mask(subspace).sum())

    # -- grouping ------------------------------------------------------------

    def group_labels(self, field_name: str, mask: np.ndarray) -> list[str]:
        """Distinct non-missing values of a field within a row mask."""
        f = self.field(field_name)
        col = self._columns[field_name]
        seen = set()
        labels = []
        for i in np.flatnonzero(mask):
            c = col[i]
            if c not in seen and not is_missing(c):
                seen.add(c)
                labels.append(c)
        if f.kind is FieldKind.TEMPORAL:
            labels.sort(key=lambda s: temporal_key(s) or (0, 0, 0))
        else:
            labels.sort()
        return labels

    def groups(self, subspace: Subspace, breakdown: Optional[str], measure: Measure
               ) -> tuple[tuple[str, float], ...]:
        """Cached filter -> group -> aggregate evaluation.

        Group order: temporal breakdowns chronological, everything else by
        descending aggregate value (ties broken by label).
        """
        key = (
            tuple((f.field, f.value) for f in subspace),
            breakdown,
            measure.field,
            measure.aggregation,
        )
        cached = self._group_cache.get(key)
        if cached is not None:
            return cached

        mask = self.subspace_mask(subspace)
        agg = measure.aggregation
        if agg is not Aggregation.COUNT:
            mfield = self.field(measure.field)
            if mfield.kind is not FieldKind.NUMERICAL:
                raise MeasureTypeError(
                    f"aggregation {agg.value} needs a numerical field, "
                    f"{measure.field!r} is {mfield.kind.value}"
                )
            numcol = self._numeric[measure.field]

        if breakdown is None:
            group_masks = [("all", mask)]
            temporal = False
        else:
            bfield = self.field(breakdown)
            temporal = bfield.kind is FieldKind.TEMPORAL
            group_masks = [
                (label, mask & self._mask_for(Filter(breakdown, label)))
                for label in self.group_labels(breakdown, mask)
            ]

        out: list[tuple[str, float]] = []
        for label, gmask in group_masks:
            n = int(gmask.sum())
            if n == 0:
                continue
            if agg is Aggregation.COUNT:
                out.append((label, float(n)))
                continue
            vals = numcol[gmask]
            vals = vals[~np.isnan(vals)]
            if vals.size == 0:
                continue  # no measurable rows in this group
            if agg is Aggregation.SUM:
                value = math.fsum(vals.tolist())  # exact rounding, order-free
            elif agg is Aggregation.AVERAGE:
                value = math.fsum(vals.tolist()) / vals.size
            elif agg is Aggregation.MINIMUM:
                value = float(vals.min())
            else:
                value = float(vals.max())
            out.append((label, value))

        if not temporal:
            out.sort(key=lambda g: (-g[1], g[0]))
        result = tuple(out)
        self._group_cache[key] = result
        return result


# --- loading -------------------------------------------------------------------

def _infer_kind(values: list[str]) -> FieldKind:
    present = [v for v in values if not is_missing(v)]
    if not present:
        return FieldKind.CATEGORICAL
    # temporal first: year columns also parse as numbers, and the engine
    # needs them temporal for trend facts
    for probe in (_ISO_DATE_RE.match, _YEAR_RE.match, lambda s: s.lower() in _MONTH_INDEX):
        if all(probe(v.strip()) for v in present):
            return FieldKind.TEMPORAL
    numeric = sum(1 for v in present if parse_number(v) is not None)
    if numeric / len(present) >= 0.95:
        return FieldKind.NUMERICAL
    return FieldKind.CATEGORICAL


def _build_schema(header: list[str], columns: dict[str, list[str]]) -> list[FieldSchema]:
    schema = []
    for name in header:
        values = columns[name]
        kind = _infer_kind(values)
        if kind is FieldKind.NUMERICAL:
            nums = [v for c in values if (v := parse_number(c)) is not None]
            domain = (min(nums), max(nums)) if nums else (None, None)
        elif kind is FieldKind.TEMPORAL:
            distinct = sorted(
                {v.strip() for v in values if not is_missing(v)},
                key=lambda s: temporal_key(s) or (0, 0, 0),
            )
            domain = tuple(distinct)
        else:
            counts: dict[str, int] = {}
            for v in values:
                if not is_missing(v):
                    counts[v] = counts.get(v, 0) + 1
            domain = tuple(sorted(counts, key=lambda s: (-counts[s], s)))
        schema.append(FieldSchema(name, kind, domain))
    return schema


def load_dataset(content: bytes | str, dataset_id: Optional[str] = None) -> Dataset:
    """Parse CSV content (UTF-8, header row first) into an immutable Dataset.

    Raises EmptyDatasetError for empty or header-only input and
    FormatError(line) for ragged rows or a broken header.
    """
    if isinstance(content, bytes):
        text = content.decode("utf-8-sig")
    else:
        text = content
    if not text.strip():
        raise EmptyDatasetError("no CSV content")

    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyDatasetError("no CSV content") from None
    header = [h.strip() for h in header]
    if any(not h for h in header):
        raise FormatError("empty column name in header", line=1)
    if len(set(header)) != len(header):
        raise FormatError("duplicate column names in header", line=1)

    rows = []
    for lineno, record in enumerate(reader, start=2):
        if not record:
            continue  # blank line
        if len(record) != len(header):
            raise FormatError(
                f"row has {len(record)} cells, header has {len(header)}", line=lineno
            )
        rows.append({name: cell.strip() for name, cell in zip(header, record)})
    if not rows:
        raise EmptyDatasetError("CSV has a header but no data rows")

    columns = {name: [row[name] for row in rows] for name in header}
    schema = _build_schema(header, columns)
    if dataset_id is None:
        dataset_id = hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]
    return Dataset(dataset_id, schema, rows)


# --- row-level operations -------------------------------------------------------

def apply_subspace(dataset: Dataset, subspace: Subspace) -> list[dict]:
    """Rows matching every filter exactly; the empty subspace keeps all rows."""
    dataset.check_subspace(subspace)
    mask = dataset.subspace_mask(subspace)
    return [dataset.rows[i] for i in np.flatnonzero(mask)]


def aggregate(rows: Iterable[dict], breakdown: Optional[str], measure: Measure
              ) -> list[tuple[str, float]]:
    """Plain per-row fold over a row subset, mirroring Dataset.groups.

    Rows with a missing breakdown cell join no group; non-count aggregations
    skip missing or non-numeric measure cells and drop groups left empty.
    Label order matches Dataset.groups: chronological when every label parses
    as temporal, otherwise descending aggregate value.
    """
    agg = measure.aggregation
    grouped: dict[str, list[float]] = {}
    counts: dict[str, int] = {}
    order: list[str] = []
    for row in rows:
        if breakdown is None:
            label = "all"
        else:
            label = row.get(breakdown, "")
            if is_missing(label):
                continue
        if label not in counts:
            counts[label] = 0
            grouped[label] = []
            order.append(label)
        counts[label] += 1
        if agg is not Aggregation.COUNT:
            value = parse_number(str(row.get(measure.field, "")))
            if value is not None:
                grouped[label].append(value)

    out = []
    for label in order:
        if agg is Aggregation.COUNT:
            out.append((label, float(counts[label])))
            continue
        vals = grouped[label]
        if not vals:
            continue
        if agg is Aggregation.SUM:
            out.append((label, math.fsum(vals)))
        elif agg is Aggregation.AVERAGE:
            out.append((label, math.fsum(vals) / len(vals)))
        elif agg is Aggregation.MINIMUM:
            out.append((label, float(min(vals))))
        else:
            out.append((label, float(max(vals))))

    labels = [label for label, _ in out]
    if breakdown is not None and labels and all(temporal_key(l) is not None for l in labels):
        out.sort(key=lambda g: temporal_key(g[0]))
    else:
        out.sort(key=lambda g: (-g[1], g[0]))
    return out


# --- statistics helpers ----------------------------------------------------------

def least_squares_slope(values: Sequence[float]) -> float:
    n = len(values)
    if n < 2:
        return 0.0
    x = np.arange(n, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    vx = x - x.mean()
    denom = float((vx * vx).sum())
    return float((vx * (y - y.mean())).sum() / denom) if denom else 0.0


def fitted_direction(values: Sequence[float], eps: float = 1e-12) -> Optional[str]:
    slope = least_squares_slope(values)
    if abs(slope) < eps:
        return None
    return "increasing" if slope > 0 else "decreasing"


def group_z_scores(values: Sequence[float]) -> list[float]:
    arr = np.asarray(values, dtype=np.float64)
    std = float(arr.std())
    if std == 0.0 or arr.size < 2:
        return [0.0] * arr.size
    mean = float(arr.mean())
    return [float((v - mean) / std) for v in arr]


def kendall_tau(values: Sequence[float]) -> float:
    """Tau of the value sequence against its index order; ties contribute 0."""
    n = len(values)
    if n < 2:
        return 0.0
    concordant = discordant = 0
    for i in range(n):
        for j in range(i + 1, n):
            if values[j] > values[i]:
                concordant += 1
            elif values[j] < values[i]:
                discordant += 1
    return (concordant - discordant) / (n * (n - 1) / 2)


# --- validity ---------------------------------------------------------------------

_MIN_GROUPS = {FactType.TREND: 3, FactType.DISTRIBUTION: 2, FactType.RANK: 2,
               FactType.CATEGORIZATION: 2}


def validate_fact(dataset: Dataset, fact: DataFact,
                  thresholds: EngineThresholds = EngineThresholds()) -> ValidityReport:
    """Full validity check: structural matrix plus data-dependent rules.

    Violations are report entries, never exceptions, so that candidate facts
    can be screened in bulk during search and enumeration.
    """
    violations = list(structural_violations(fact))

    def fail(rule: str, message: str, error_class: str = "ValidationError"):
        violations.append(Violation(rule, message, error_class))

    # field existence and kinds
    fields_ok = True
    for flt in fact.subspace:
        if not dataset.has_field(flt.field):
            fail("unknown-field", f"subspace field {flt.field!r} not in schema", "SchemaError")
            fields_ok = False
        elif dataset.field(flt.field).kind is FieldKind.NUMERICAL:
            fail("filter-kind", f"cannot filter on numerical field {flt.field!r}", "SchemaError")
            fields_ok = False
        elif flt.value not in dataset.field(flt.field).domain:
            fail(
                "filter-value-domain",
                f"value {flt.value!r} not in domain of {flt.field!r}",
                "DomainError",
            )
            fields_ok = False
    if fact.breakdown is not None:
        if not dataset.has_field(fact.breakdown):
            fail("unknown-field", f"breakdown field {fact.breakdown!r} not in schema",
                 "SchemaError")
            fields_ok = False
        elif dataset.field(fact.breakdown).kind is FieldKind.NUMERICAL:
            fail("breakdown-kind", "breakdown must be categorical or temporal", "SchemaError")
            fields_ok = False
        elif fact.type is FactType.TREND and dataset.field(fact.breakdown).kind is not FieldKind.TEMPORAL:
            fail("trend-temporal-breakdown", "trend needs a temporal breakdown", "SchemaError")
        elif (
            fact.type is FactType.CATEGORIZATION
            and dataset.field(fact.breakdown).kind is not FieldKind.CATEGORICAL
        ):
            fail("categorization-categorical-breakdown",
                 "categorization needs a categorical breakdown", "SchemaError")
    if fact.measure.field is not None:
        if not dataset.has_field(fact.measure.field):
            fail("unknown-field", f"measure field {fact.measure.field!r} not in schema",
                 "SchemaError")
            fields_ok = False
        elif dataset.field(fact.measure.field).kind is not FieldKind.NUMERICAL:
            fail("measure-kind", f"measure field {fact.measure.field!r} is not numerical",
                 "MeasureTypeError")
            fields_ok = False
    if fact.meta.second_field is not None:
        if not dataset.has_field(fact.meta.second_field):
            fail("unknown-field", f"second field {fact.meta.second_field!r} not in schema",
                 "SchemaError")
            fields_ok = False
        elif dataset.field(fact.meta.second_field).kind is not FieldKind.NUMERICAL:
            fail("second-field-kind", "association's second field must be numerical",
                 "MeasureTypeError")
            fields_ok = False

    if not fields_ok or violations:
        # data checks below need answerable fields and a structurally sound fact
        return ValidityReport(False, tuple(violations))

    if dataset.support(fact.subspace) == 0:
        fail("empty-subspace", "subspace matches no rows")
        return ValidityReport(False, tuple(violations))

    groups = dataset.groups(fact.subspace, fact.breakdown, fact.measure)
    labels = [label for label, _ in groups]
    values = [value for _, value in groups]

    min_groups = _MIN_GROUPS.get(fact.type)
    if min_groups is not None and len(groups) < min_groups:
        fail(f"{fact.type.value}-min-groups",
             f"{fact.type.value} needs at least {min_groups} groups, got {len(groups)}")
    for item in fact.focus:
        if item not in labels:
            fail("focus-not-in-groups", f"focus {item!r} is not a group label")

    if fact.type is FactType.TREND and len(groups) >= 2:
        direction = fitted_direction(values, thresholds.trend_slope_eps)
        if direction is None:
            fail("trend-direction", "series is flat; neither direction holds")
        elif direction != fact.meta.extra:
            fail("trend-direction", f"fitted direction is {direction}, meta says {fact.meta.extra}")
    elif fact.type is FactType.EXTREME and fact.focus and fact.focus[0] in labels:
        target = max(groups, key=lambda g: g[1]) if fact.meta.extra == "maximum" \
            else min(groups, key=lambda g: g[1])
        if fact.focus[0] != target[0]:
            fail("extreme-mismatch",
                 f"the {fact.meta.extra} group is {target[0]!r}, focus is {fact.focus[0]!r}")
    elif fact.type is FactType.OUTLIER and fact.focus and fact.focus[0] in labels:
        z = dict(zip(labels, group_z_scores(values)))
        if abs(z[fact.focus[0]]) < thresholds.outlier_z:
            fail("outlier-test",
                 f"|z| = {abs(z[fact.focus[0]]):.2f} < {thresholds.outlier_z} for focus group")

    return ValidityReport(not violations, tuple(violations))


def evaluate_fact(dataset: Dataset, fact: DataFact,
                  thresholds: EngineThresholds = EngineThresholds()) -> FactView:
    """FactView for a valid fact; raises ValidationError carrying the report."""
    report = validate_fact(dataset, fact, thresholds)
    if not report.valid:
        raise ValidationError(
            f"invalid fact: {report.violations[0].rule}", report=report
        )
    groups = dataset.groups(fact.subspace, fact.breakdown, fact.measure)
    series2 = None
    if fact.type is FactType.ASSOCIATION:
        second = Measure(fact.meta.second_field, fact.measure.aggregation)
        second_groups = dict(dataset.groups(fact.subspace, fact.breakdown, second))
        series2 = tuple(second_groups.get(label) for label, _ in groups)
    return FactView(
        groups=groups,
        highlighted=tuple(item for item in fact.focus if item in dict(groups)),
        support_row_count=dataset.support(fact.subspace),
        series2=series2,
    )


# --- enumeration -------------------------------------------------------------------

def _filter_values(dataset: Dataset, field_schema: FieldSchema, cap: int) -> list[str]:
    # categorical domains are stored most-frequent-first, so the cap keeps
    # the most frequent values; temporal domains stay chronological
    return list(field_schema.domain[:cap])


def _enumerable_subspaces(dataset: Dataset, caps: EnumerationCaps) -> list[Subspace]:
    base = caps.base_subspace
    used = set(base.fields())
    fields = [
        f for f in dataset.fields_of_kind(FieldKind.CATEGORICAL, FieldKind.TEMPORAL)
        if f.name not in used
    ]
    budget = max(caps.max_filters - len(base), 0)
    subspaces: list[Subspace] = [base]
    for k in range(1, budget + 1):
        for combo in itertools.combinations(fields, k):
            value_lists = [_filter_values(dataset, f, caps.max_filter_values) for f in combo]
            for values in itertools.product(*value_lists):
                filters = tuple(base.filters) + tuple(
                    Filter(f.name, v) for f, v in zip(combo, values)
                )
                subspaces.append(Subspace(filters))
    return subspaces


def _enumerable_measures(dataset: Dataset) -> list[Measure]:
    measures = [Measure(None, Aggregation.COUNT)]
    for f in dataset.fields_of_kind(FieldKind.NUMERICAL):
        for agg in (Aggregation.SUM, Aggregation.AVERAGE, Aggregation.MINIMUM,
                    Aggregation.MAXIMUM):
            measures.append(Measure(f.name, agg))
    return measures


def estimate_enumeration(dataset: Dataset, caps: EnumerationCaps = EnumerationCaps()) -> int:
    """Upper bound on candidate facts before validity filtering."""
    n_sub = len(_enumerable_subspaces(dataset, caps))
    n_measures = len(_enumerable_measures(dataset))
    breakdowns = dataset.fields_of_kind(FieldKind.CATEGORICAL, FieldKind.TEMPORAL)
    max_labels = max((len(f.domain) for f in breakdowns), default=0)
    n_numeric = len(dataset.fields_of_kind(FieldKind.NUMERICAL))
    types = caps.types or tuple(FactType)
    total = 0
    for t in types:
        if t is FactType.VALUE:
            total += n_sub * n_measures
        elif t is FactType.ASSOCIATION:
            total += n_sub * max(n_numeric * (n_numeric - 1), 0) * 4 * 2
        elif t is FactType.DIFFERENCE:
            total += n_sub * len(breakdowns) * n_measures * (max_labels * (max_labels - 1) // 2)
        elif t in (FactType.PROPORTION, FactType.EXTREME, FactType.OUTLIER):
            total += n_sub * len(breakdowns) * n_measures * max_labels
        else:  # trend, categorization, distribution, rank: optional focus
            total += n_sub * len(breakdowns) * n_measures * (max_labels + 1)
    return total


def enumerate_facts(dataset: Dataset, caps: EnumerationCaps = EnumerationCaps(),
                    thresholds: EngineThresholds = EngineThresholds()) -> Iterator[DataFact]:
    """Yield every structurally and data-valid fact within the caps, once each,
    in a deterministic order. Raises CapacityError before yielding anything
    when the candidate estimate exceeds caps.hard_limit.
    """
    estimate = estimate_enumeration(dataset, caps)
    if estimate > caps.hard_limit:
        raise CapacityError(
            f"enumeration estimate {estimate} exceeds hard limit {caps.hard_limit}",
            estimate=estimate,
        )
    types = caps.types or tuple(FactType)
    seen: set[str] = set()

    def emit(fact: DataFact) -> Iterator[DataFact]:
        token = fact.token()
        if token in seen:
            return
        if validate_fact(dataset, fact, thresholds).valid:
            seen.add(token)
            yield fact

    measures = _enumerable_measures(dataset)
    numeric_fields = [f.name for f in dataset.fields_of_kind(FieldKind.NUMERICAL)]
    breakdown_fields = dataset.fields_of_kind(FieldKind.CATEGORICAL, FieldKind.TEMPORAL)

    for subspace in _enumerable_subspaces(dataset, caps):
        if dataset.support(subspace) == 0:
            continue
        for t in types:
            if t is FactType.VALUE:
                for m in measures:
                    yield from emit(DataFact(t, subspace, None, m))
                continue
            if t is FactType.ASSOCIATION:
                for mfield in numeric_fields:
                    for agg in (Aggregation.SUM, Aggregation.AVERAGE,
                                Aggregation.MINIMUM, Aggregation.MAXIMUM):
                        for second in numeric_fields:
                            if second == mfield:
                                continue
                            base = DataFact(
                                t, subspace, None, Measure(mfield, agg),
                                meta=Meta(second_field=second),
                            )
                            yield from emit(base)
                            yield from emit(base.with_(focus=("all",)))
                continue
            for bfield in breakdown_fields:
                bd = bfield.name
                if t is FactType.TREND and bfield.kind is not FieldKind.TEMPORAL:
                    continue
                if t is FactType.CATEGORIZATION and bfield.kind is not FieldKind.CATEGORICAL:
                    continue
                for m in measures:
                    if t is FactType.CATEGORIZATION and m.aggregation is not Aggregation.COUNT:
                        continue
                    if t is FactType.PROPORTION and m.aggregation not in (
                        Aggregation.SUM, Aggregation.COUNT
                    ):
                        continue
                    groups = dataset.groups(subspace, bd, m)
                    labels = [label for label, _ in groups]
                    values = [value for _, value in groups]
                    if t is FactType.TREND:
                        direction = fitted_direction(values, thresholds.trend_slope_eps)
                        if direction is None:
                            continue
                        base = DataFact(t, subspace, bd, m, meta=Meta(extra=direction))
                        yield from emit(base)
                        for label in labels:
                            yield from emit(base.with_(focus=(label,)))
                    elif t is FactType.EXTREME:
                        if not groups:
                            continue
                        top = max(groups, key=lambda g: g[1])[0]
                        bottom = min(groups, key=lambda g: g[1])[0]
                        yield from emit(DataFact(t, subspace, bd, m, focus=(top,),
                                                 meta=Meta(extra="maximum")))
                        yield from emit(DataFact(t, subspace, bd, m, focus=(bottom,),
                                                 meta=Meta(extra="minimum")))
                    elif t is FactType.OUTLIER:
                        for label, z in zip(labels, group_z_scores(values)):
                            if abs(z) >= thresholds.outlier_z:
                                yield from emit(DataFact(t, subspace, bd, m, focus=(label,)))
                    elif t is FactType.DIFFERENCE:
                        for a, b in itertools.combinations(labels, 2):
                            yield from emit(DataFact(t, subspace, bd, m, focus=(a, b)))
                    elif t is FactType.PROPORTION:
                        for label in labels:
                            yield from emit(DataFact(t, subspace, bd, m, focus=(label,)))
                    else:  # categorization, distribution, rank
                        base = DataFact(t, subspace, bd, m)
                        yield from emit(base)
                        for label in labels:
                            yield from emit(base.with_(focus=(label,)))


# --- recommendation ------------------------------------------------------------------

def significance(dataset: Dataset, fact: DataFact,
                 thresholds: EngineThresholds = EngineThresholds()) -> float:
    """Heuristic importance in [0, 1]; see README for the scoring table."""
    groups = dataset.groups(fact.subspace, fact.breakdown, fact.measure)
    values = [value for _, value in groups]
    labels = [label for label, _ in groups]
    t = fact.type
    score = 0.0
    if t is FactType.TREND:
        score = abs(kendall_tau(values))
    elif t is FactType.OUTLIER:
        z = dict(zip(labels, group_z_scores(values)))
        score = min(1.0, abs(z.get(fact.focus[0], 0.0)) / 6.0)
    elif t is FactType.EXTREME:
        if len(values) >= 2:
            ordered = sorted(values, reverse=fact.meta.extra == "maximum")
            best, second = ordered[0], ordered[1]
            score = 1.0 - (second / best if best else 1.0) if fact.meta.extra == "maximum" \
                else 1.0 - (best / second if second else 1.0)
    elif t is FactType.PROPORTION:
        total = sum(values)
        share = dict(groups).get(fact.focus[0], 0.0) / total if total else 0.0
        score = share
    else:
        support = dataset.support(fact.subspace)
        score = 0.3 * (support / dataset.row_count if dataset.row_count else 0.0)
    return max(0.0, min(1.0, score))


def recommend_facts(dataset: Dataset, k: int, filters: Optional[Subspace] = None,
                    caps: Optional[EnumerationCaps] = None,
                    thresholds: EngineThresholds = EngineThresholds()) -> list[ScoredFact]:
    """Top-k facts by significance, deduplicated and sorted descending."""
    if k < 1:
        raise ValidationError("k must be at least 1")
    if caps is None:
        caps = EnumerationCaps()
    if filters is not None:
        caps = EnumerationCaps(
            max_filters=max(caps.max_filters, len(filters)),
            max_filter_values=caps.max_filter_values,
            types=caps.types,
            hard_limit=caps.hard_limit,
            base_subspace=filters,
        )
    scored = [
        ScoredFact(fact, significance(dataset, fact, thresholds))
        for fact in enumerate_facts(dataset, caps, thresholds)
    ]
    scored.sort(key=lambda s: (-s.significance, s.fact.token()))
    return scored[:k]
