"""Prompt template registry with slot interpolation.

Template bodies ship as versioned text assets; an override directory can
replace any of them for ablations. Rendering never mutates the body text
beyond substituting the named slots, so the wording (including the
"abstracts" phrasing in the rating and scoring templates) is preserved
exactly as shipped.
"""

from __future__ import annotations

import hashlib
import re
from importlib.resources import files
from pathlib import Path
from typing import Mapping

__all__ = [
    "PromptError",
    "PromptBindingError",
    "PromptRegistry",
    "TEMPLATE_IDS",
    "render",
    "prompt_version",
]

# template_id -> (asset file, declared slots)
_TEMPLATES: dict[str, tuple[str, tuple[str, ...]]] = {
    "Explain": ("explain.txt", ("Abstract",)),
    "ZeroShotLS": ("zeroshot_ls.txt", ("Article",)),
    "Rater": ("rater.txt", ("Summary",)),
    "ScorePrefix": ("score_prefix.txt", ("Article",)),
}

TEMPLATE_IDS = tuple(_TEMPLATES)

_SLOT_RE = re.compile(r"\{(Abstract|Article|Summary)\}")


class PromptError(Exception):
    """Base error for template loading and rendering."""


class PromptBindingError(PromptError):
    """Bindings do not cover exactly the template's slots."""


def _strip_trailing_newline(text: str) -> str:
    return text[:-1] if text.endswith("\n") else text


class PromptRegistry:
    """Immutable set of prompt templates, loaded once."""

    def __init__(self, override_dir: str | Path | None = None):
        self._bodies: dict[str, str] = {}
        self._slots: dict[str, tuple[str, ...]] = {}
        for template_id, (fname, slots) in _TEMPLATES.items():
            body = None
            if override_dir is not None:
                candidate = Path(override_dir) / fname
                if candidate.exists():
                    body = _strip_trailing_newline(candidate.read_text(encoding="utf-8"))
            if body is None:
                asset = files("laybench").joinpath("templates", fname)
                body = _strip_trailing_newline(asset.read_text(encoding="utf-8"))
            found = [m.group(1) for m in _SLOT_RE.finditer(body)]
            if sorted(found) != sorted(slots):
                raise PromptError(
                    f"template {template_id}: expected slots {slots}, found {tuple(found)}"
                )
            self._bodies[template_id] = body
            self._slots[template_id] = slots

    def body(self, template_id: str) -> str:
        self._check_id(template_id)
        return self._bodies[template_id]

    def slots(self, template_id: str) -> tuple[str, ...]:
        self._check_id(template_id)
        return self._slots[template_id]

    def excised(self, template_id: str) -> str:
        """Body with the slot markers removed: the bare prompt text."""
        return _SLOT_RE.sub("", self.body(template_id))

    def render(self, template_id: str, bindings: Mapping[str, str]) -> str:
        """Substitute the slots; bindings must cover them exactly."""
        self._check_id(template_id)
        expected = set(self._slots[template_id])
        got = set(bindings)
        if got != expected:
            missing = expected - got
            extra = got - expected
            parts = []
            if missing:
                parts.append(f"missing {sorted(missing)}")
            if extra:
                parts.append(f"unexpected {sorted(extra)}")
            raise PromptBindingError(f"template {template_id}: {', '.join(parts)}")
        return _SLOT_RE.sub(lambda m: bindings[m.group(1)], self._bodies[template_id])

    def version(self) -> str:
        """Stable digest of all template bodies, recorded in run manifests."""
        digest = hashlib.sha256()
        for template_id in TEMPLATE_IDS:
            digest.update(template_id.encode("utf-8"))
            digest.update(b"\x00")
            digest.update(self._bodies[template_id].encode("utf-8"))
            digest.update(b"\x00")
        return digest.hexdigest()[:12]

    def _check_id(self, template_id: str) -> None:
        if template_id not in self._bodies:
            raise PromptError(f"unknown template {template_id!r}; "
                              f"known: {', '.join(TEMPLATE_IDS)}")


_DEFAULT = PromptRegistry()


def render(template_id: str, bindings: Mapping[str, str]) -> str:
    return _DEFAULT.render(template_id, bindings)


def prompt_version() -> str:
    return _DEFAULT.version()
