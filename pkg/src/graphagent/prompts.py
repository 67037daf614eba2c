"""Prompt template assets: loading, section parsing, few-shot splicing, digests.

Templates live as plain text files (one per prompt family) so that prompts stay
data rather than code.  Action-builder templates are multi-section files using
``[section]`` headers; the other families are single-body files.  Every loaded
template's SHA-256 digest is recorded so runs can log exactly which prompt
text they used.
"""

from __future__ import annotations

import hashlib
import re
from pathlib import Path

from .errors import TemplateMissing

DEFAULT_TEMPLATE_DIR = Path(__file__).resolve().parent / "templates"

FAMILIES = (
    "task_parsing",
    "scaffold_step0",
    "scaffold_stepk",
    "augmentation",
    "action_predictive",
    "action_generative",
    "judge",
)

_SECTION_RE = re.compile(r"^\[([a-z_]+)\]$", re.MULTILINE)


def _parse_sections(body: str) -> dict[str, str]:
    """Split a ``[section]``-delimited file into name -> text."""
    matches = list(_SECTION_RE.finditer(body))
    if not matches:
        return {"main": body.strip()}
    sections: dict[str, str] = {}
    for i, m in enumerate(matches):
        end = matches[i + 1].start() if i + 1 < len(matches) else len(body)
        sections[m.group(1)] = body[m.end():end].strip()
    return sections


class TemplateLibrary:
    """All prompt families of one template directory, loaded eagerly."""

    def __init__(self, template_dir: str | Path | None = None):
        self.template_dir = Path(template_dir) if template_dir else DEFAULT_TEMPLATE_DIR
        self._sections: dict[str, dict[str, str]] = {}
        self.digests: dict[str, str] = {}
        for family in FAMILIES:
            path = self.template_dir / f"{family}.txt"
            if not path.is_file():
                raise TemplateMissing(f"template file not found: {path}")
            raw = path.read_text(encoding="utf-8")
            self.digests[family] = hashlib.sha256(raw.encode("utf-8")).hexdigest()
            self._sections[family] = _parse_sections(raw)

    def section(self, family: str, name: str = "main") -> str:
        try:
            return self._sections[family][name]
        except KeyError:
            raise TemplateMissing(f"template {family!r} has no section {name!r}") from None

    def few_shot(self, family: str) -> str:
        """Few-shot examples for a family; empty string when no asset exists."""
        path = self.template_dir / f"fewshot_{family}.txt"
        if not path.is_file():
            return ""
        return path.read_text(encoding="utf-8").strip()

    def system_prompt(self, family: str) -> str:
        """Render a single-body family with its few-shot examples spliced in."""
        body = self.section(family)
        if "{few_shot_examples}" in body:
            return body.replace("{few_shot_examples}", self.few_shot(family))
        return body
