"""Stories: ordered pieces of keyframe and machine-generated facts.

A piece is either a fact (tagged with its provenance) or an empty slot the
author left to fill in later. The story document is the self-contained JSON
export consumed by the CLI renderer and the editor UI.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .dataset import Dataset, EngineThresholds, evaluate_fact
from .errors import ParseError, ValidationError
from .facts import DataFact, fact_to_spec, generate_caption, parse_fact_spec

KEYFRAME = "keyframe"
INTERPOLATED = "interpolated"
EMPTY_SLOT = "empty-slot"
PROVENANCES = (KEYFRAME, INTERPOLATED, EMPTY_SLOT)

STORY_FORMS = ("storyline", "factsheet", "scrollup")


@dataclass(frozen=True)
class StoryPiece:
    provenance: str
    fact: Optional[DataFact] = None
    caption: Optional[str] = None

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValidationError(f"unknown provenance {self.provenance!r}")
        if self.provenance == EMPTY_SLOT:
            if self.fact is not None or self.caption is not None:
                raise ValidationError("empty-slot pieces carry no fact and no caption")
        elif self.fact is None:
            raise ValidationError(f"{self.provenance} pieces need a fact")

    def as_dict(self) -> dict:
        return {
            "fact": fact_to_spec(self.fact) if self.fact is not None else None,
            "provenance": self.provenance,
            "caption": self.caption,
        }


def piece_from_dict(obj: dict) -> StoryPiece:
    if not isinstance(obj, dict):
        raise ParseError("story piece must be an object", "$")
    provenance = obj.get("provenance", KEYFRAME)
    fact_spec = obj.get("fact")
    fact = parse_fact_spec(fact_spec) if fact_spec is not None else None
    return StoryPiece(provenance=provenance, fact=fact, caption=obj.get("caption"))


@dataclass(frozen=True)
class Story:
    id: str
    title: str
    dataset_id: str
    pieces: tuple[StoryPiece, ...] = ()

    def as_dict(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "datasetId": self.dataset_id,
            "pieces": [p.as_dict() for p in self.pieces],
        }

    def keyframe_indices(self) -> list[int]:
        return [i for i, p in enumerate(self.pieces) if p.provenance == KEYFRAME]


def story_from_dict(obj: dict) -> Story:
    return Story(
        id=obj["id"],
        title=obj.get("title", ""),
        dataset_id=obj["datasetId"],
        pieces=tuple(piece_from_dict(p) for p in obj.get("pieces", [])),
    )


def build_story_document(story: Story, dataset: Dataset, form: str = "storyline",
                         thresholds: EngineThresholds = EngineThresholds()) -> dict:
    """Self-contained export: each piece with its fact spec, evaluated data
    series, caption, and provenance, plus the form hint for renderers."""
    if form not in STORY_FORMS:
        raise ValidationError(f"unknown story form {form!r}")
    pieces = []
    for piece in story.pieces:
        if piece.provenance == EMPTY_SLOT:
            pieces.append({"provenance": EMPTY_SLOT, "fact": None, "caption": None,
                           "view": None})
            continue
        view = evaluate_fact(dataset, piece.fact, thresholds)
        pieces.append({
            "provenance": piece.provenance,
            "fact": fact_to_spec(piece.fact),
            "caption": piece.caption if piece.caption is not None
            else generate_caption(piece.fact, view),
            "view": view.as_dict(),
        })
    return {
        "id": story.id,
        "title": story.title,
        "datasetId": story.dataset_id,
        "form": form,
        "pieces": pieces,
    }


def render_markdown(document: dict) -> str:
    """Markdown rendering of a story document: one section per piece with its
    caption and provenance tag."""
    lines = [f"# {document.get('title') or 'Data story'}", ""]
    form = document.get("form", "storyline")
    lines.append(f"_form: {form}_")
    lines.append("")
    for i, piece in enumerate(document.get("pieces", []), start=1):
        provenance = piece.get("provenance", KEYFRAME)
        if provenance == EMPTY_SLOT:
            lines.append(f"## {i}. (empty slot) `[{provenance}]`")
            lines.append("")
            continue
        caption = piece.get("caption") or ""
        lines.append(f"## {i}. {caption} `[{provenance}]`")
        view = piece.get("view") or {}
        groups = view.get("groups") or []
        if groups:
            lines.append("")
            lines.append("| group | value |")
            lines.append("| --- | --- |")
            highlighted = set(view.get("highlighted") or [])
            for label, value in groups:
                marker = " *" if label in highlighted else ""
                lines.append(f"| {label}{marker} | {value} |")
        lines.append("")
    return "\n".join(lines)
