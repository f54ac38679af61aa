"""Structured isolation prompts: assembly, VLM response parsing, user edits.

The VLM is instructed to answer with a single fenced JSON array, one object
per part.  Each object becomes an :class:`IsolationPrompt`; the free-text
prompt actually sent to the image generator (``raw_text``) is assembled
deterministically from the structured fields so that prompt hashes are
stable across runs.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Mapping, Sequence

from .errors import (
    EmptyPartList,
    ImmutableField,
    NoJsonBlock,
    PartIdMismatch,
    SchemaViolation,
)

# fields a user may edit; part_id is identity, raw_text is derived
EDITABLE_FIELDS = (
    "keep_subject",
    "removal_clause",
    "pose_description",
    "camera_angle_description",
    "lighting_description",
    "occlusion_imagination",
    "negative_terms",
)

# fields that must be non-empty text: they anchor consistency with the source
_REQUIRED_TEXT = (
    "part_id",
    "keep_subject",
    "removal_clause",
    "pose_description",
    "camera_angle_description",
    "lighting_description",
)

_FENCE_RE = re.compile(r"```(?:[A-Za-z0-9_-]*)\s*\n(.*?)```", re.DOTALL)


def assemble_raw_text(
    keep_subject: str,
    removal_clause: str,
    pose_description: str,
    camera_angle_description: str,
    lighting_description: str,
    occlusion_imagination: str,
    negative_terms: Sequence[str],
) -> str:
    """Join the structured fields into the generator prompt, fixed order."""
    parts = [
        keep_subject.strip(),
        removal_clause.strip(),
        pose_description.strip(),
        camera_angle_description.strip(),
        lighting_description.strip(),
    ]
    occ = occlusion_imagination.strip()
    if occ:
        parts.append(occ)
    if negative_terms:
        parts.append("Avoid: " + ", ".join(t.strip() for t in negative_terms) + ".")
    return " ".join(p if p.endswith((".", "!", "?")) else p + "." for p in parts)


@dataclass(frozen=True)
class IsolationPrompt:
    """One part's isolation instructions, structured for editing.

    ``raw_text`` is computed by the constructor and always reflects the
    other fields; it is never accepted from outside.
    """

    part_id: str
    keep_subject: str
    removal_clause: str
    pose_description: str
    camera_angle_description: str
    lighting_description: str
    occlusion_imagination: str = ""
    negative_terms: tuple[str, ...] = ()
    raw_text: str = field(init=False)

    def __post_init__(self) -> None:
        for name in _REQUIRED_TEXT:
            value = getattr(self, name)
            if not isinstance(value, str) or not value.strip():
                raise SchemaViolation(name)
        if not isinstance(self.occlusion_imagination, str):
            raise SchemaViolation("occlusion_imagination")
        if isinstance(self.negative_terms, str) or not all(
            isinstance(t, str) for t in self.negative_terms
        ):
            raise SchemaViolation("negative_terms")
        object.__setattr__(self, "negative_terms", tuple(self.negative_terms))
        object.__setattr__(
            self,
            "raw_text",
            assemble_raw_text(
                self.keep_subject,
                self.removal_clause,
                self.pose_description,
                self.camera_angle_description,
                self.lighting_description,
                self.occlusion_imagination,
                self.negative_terms,
            ),
        )

    def to_dict(self) -> dict:
        return {
            "part_id": self.part_id,
            "keep_subject": self.keep_subject,
            "removal_clause": self.removal_clause,
            "pose_description": self.pose_description,
            "camera_angle_description": self.camera_angle_description,
            "lighting_description": self.lighting_description,
            "occlusion_imagination": self.occlusion_imagination,
            "negative_terms": list(self.negative_terms),
            "raw_text": self.raw_text,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "IsolationPrompt":
        if not isinstance(d, Mapping):
            raise SchemaViolation("entry")
        kwargs = {}
        for name in ("part_id", *EDITABLE_FIELDS):
            if name in ("occlusion_imagination", "negative_terms") and name not in d:
                continue  # optional, default applies
            if name not in d:
                raise SchemaViolation(name)
            kwargs[name] = d[name]
        if "negative_terms" in kwargs:
            terms = kwargs["negative_terms"]
            if isinstance(terms, str) or not isinstance(terms, Sequence):
                raise SchemaViolation("negative_terms")
            kwargs["negative_terms"] = tuple(terms)
        return cls(**kwargs)


def build_system_prompt(parts: Sequence, style_hints: str | None = None) -> str:
    """Instruction text sent to the VLM alongside the input image.

    Enumerates the parts once each, demands one isolation prompt per part
    covering pose, camera angle, lighting and occluded regions, embeds any
    per-part occlusion directive verbatim, and pins the response format to
    a single fenced JSON array.
    """
    if not parts:
        raise EmptyPartList()
    lines = [
        "You are given a photograph and a list of its parts. For each part,",
        "write instructions for an image generator to produce that part",
        "alone, removed from everything else, matching the photograph's",
        "pose, camera angle and lighting, and imagining any occluded",
        "regions so the part looks whole.",
        "",
        "Parts:",
    ]
    for p in parts:
        entry = f"- {p.part_id}: {p.user_description}"
        if getattr(p, "occlusion_directive", None):
            entry += f" (occluded regions: {p.occlusion_directive})"
        lines.append(entry)
    if style_hints:
        lines += ["", f"Style notes: {style_hints}"]
    lines += [
        "",
        "Respond with exactly one fenced JSON array and no other JSON. Each",
        "element must be an object with these keys:",
        '  "part_id": the part id, verbatim from the list above',
        '  "keep_subject": what to keep, one sentence',
        '  "removal_clause": what to remove, naming every other part',
        '  "pose_description": the subject pose as seen in the photograph',
        '  "camera_angle_description": the camera viewpoint',
        '  "lighting_description": the lighting',
        '  "occlusion_imagination": how to imagine hidden regions',
        '  "negative_terms": array of strings to avoid',
    ]
    return "\n".join(lines)


def parse_vlm_response(raw: str, expected_parts: Sequence[str]) -> list[IsolationPrompt]:
    """Extract and validate the VLM's fenced JSON answer.

    Tolerates prose around the fence.  Returns prompts reordered to match
    ``expected_parts``.
    """
    if not raw or not raw.strip():
        raise NoJsonBlock("empty response")
    match = _FENCE_RE.search(raw)
    if match is None:
        raise NoJsonBlock("no fenced JSON block in response")
    try:
        data = json.loads(match.group(1))
    except json.JSONDecodeError as exc:
        raise NoJsonBlock(f"fenced block is not valid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise SchemaViolation("root")
    prompts = [IsolationPrompt.from_dict(entry) for entry in data]
    got = sorted(p.part_id for p in prompts)
    want = sorted(expected_parts)
    if got != want:
        missing = sorted(set(want) - set(got))
        extra = sorted(set(got) - set(want))
        if not missing and not extra:  # same set, different multiplicity
            extra = sorted({p for p in got if got.count(p) > want.count(p)})
        raise PartIdMismatch(missing, extra)
    by_id = {p.part_id: p for p in prompts}
    return [by_id[pid] for pid in expected_parts]


def merge_user_override(prompt: IsolationPrompt, edits: Mapping[str, object]) -> IsolationPrompt:
    """Apply a partial field edit; raw_text is re-assembled automatically."""
    if "part_id" in edits:
        raise ImmutableField("part_id")
    if "raw_text" in edits:
        raise ImmutableField("raw_text")
    for name in edits:
        if name not in EDITABLE_FIELDS:
            raise SchemaViolation(str(name))
    if not edits:
        return prompt
    clean = dict(edits)
    if "negative_terms" in clean:
        terms = clean["negative_terms"]
        if isinstance(terms, str) or not isinstance(terms, Iterable):
            raise SchemaViolation("negative_terms")
        clean["negative_terms"] = tuple(terms)
    return replace(prompt, **clean)


def prompts_to_json(prompts: Sequence[IsolationPrompt]) -> str:
    """Serialize prompts as the same fenced-array payload the VLM emits."""
    return json.dumps([p.to_dict() for p in prompts], indent=2, sort_keys=True)
