"""Loading and rendering of the canonical prompt templates.

Templates live as plain-text files in a directory and are selected by name,
so deployments can swap wording without touching code. Rendering is plain
``str.format`` with named placeholders.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .model import FocusAgentError

TEMPLATE_NAMES = (
    "PlanPrompt",
    "NewStagePrompt",
    "InsightsPrompt",
    "InactivateParticipantPrompt",
    "EngagementPrompt",
    "PartResponsePrompt",
    "ReflectionPrompt",
)


class TemplateNotFound(FocusAgentError):
    pass


class PromptLibrary:
    """Reads templates by name from a directory (packaged defaults unless overridden)."""

    def __init__(self, directory: str | Path | None = None):
        self._directory = Path(directory) if directory is not None else None
        self._cache: dict[str, str] = {}

    def load(self, name: str) -> str:
        if name in self._cache:
            return self._cache[name]
        if self._directory is not None:
            path = self._directory / f"{name}.txt"
            if not path.is_file():
                raise TemplateNotFound(f"no template {name!r} in {self._directory}")
            text = path.read_text(encoding="utf-8")
        else:
            ref = resources.files("focusagent").joinpath("data", "prompts", f"{name}.txt")
            try:
                text = ref.read_text(encoding="utf-8")
            except FileNotFoundError:
                raise TemplateNotFound(f"no packaged template {name!r}") from None
        self._cache[name] = text
        return text

    def render(self, name: str, **values: object) -> str:
        try:
            return self.load(name).format(**values).strip()
        except KeyError as exc:
            raise TemplateNotFound(f"template {name!r} is missing a value for {exc}") from None


DEFAULT_PROMPTS = PromptLibrary()
