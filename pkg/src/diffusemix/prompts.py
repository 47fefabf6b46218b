"""Conditional prompt library and the instruction template.

Prompts are short filter-like style words; each is substituted into a
single-placeholder template before it is handed to a generator backend.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import UnknownPrompt

DEFAULT_PROMPTS = (
    "autumn",
    "snowy",
    "sunset",
    "watercolor art",
    "rainbow",
    "aurora",
    "mosaic",
    "ukiyo-e",
    "a sketch with crayon",
)

DEFAULT_TEMPLATE = "A transformed version of image into {prompt}"

_PLACEHOLDER = "{prompt}"


@dataclass(frozen=True)
class PromptLibrary:
    """An ordered set of prompt strings plus the instruction template."""

    entries: tuple
    template: str = DEFAULT_TEMPLATE

    def __post_init__(self):
        entries = tuple(self.entries)
        if not entries:
            raise ValueError("prompt library must not be empty")
        if any(not e for e in entries):
            raise ValueError("prompt library must not contain empty strings")
        if len(set(entries)) != len(entries):
            raise ValueError("prompt library must not contain duplicates")
        if self.template.count(_PLACEHOLDER) != 1:
            raise ValueError(
                f"template must contain exactly one {_PLACEHOLDER} placeholder"
            )
        object.__setattr__(self, "entries", entries)

    def __len__(self) -> int:
        return len(self.entries)


def default_library() -> PromptLibrary:
    """The nine built-in prompts, in their canonical order."""
    return PromptLibrary(entries=DEFAULT_PROMPTS)


def load_prompt_file(path) -> PromptLibrary:
    """Read one prompt per line; blank lines and ``#`` comments are ignored."""
    entries = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        entries.append(line)
    return PromptLibrary(entries=tuple(entries))


def render(lib: PromptLibrary, prompt: str) -> str:
    """Substitute a library prompt into the template.

    Raises UnknownPrompt if the prompt is not a library entry.
    """
    if prompt not in lib.entries:
        raise UnknownPrompt(f"prompt {prompt!r} is not in the library")
    return lib.template.replace(_PLACEHOLDER, prompt)


def sample_prompt(lib: PromptLibrary, rng: np.random.Generator) -> str:
    """Uniformly draw one entry; deterministic for a given rng state."""
    return lib.entries[int(rng.integers(len(lib.entries)))]
