"""Deterministic fixture scripts for scripted-backend runs.

A scripted backend replays responses in exactly the order the engines call
it, so a usable fixture set has to mirror the simulation loop: one plan
reply, then per stage an intro, engagement scores and a response per turn
until the stage time is filled, a reflection, and finally one closing reply
per persona. ``build_simulation_script`` reproduces that order for the happy
path where every turn finds a willing speaker rotating across personas.
"""

from __future__ import annotations

import json
from pathlib import Path

from .model import SessionConfig, estimate_minutes

_FILLER = (
    "honestly i try to keep my screen time in check with small routines "
    "like reading before bed and leaving the phone outside the bedroom "
    "because otherwise the scrolling never really stops for me"
).split()


def filler_sentence(words: int, tag: str) -> str:
    """Deterministic text with an exact whitespace word count."""
    assert words >= 1
    tokens = [tag]
    while len(tokens) < words:
        tokens.append(_FILLER[(len(tokens) - 1) % len(_FILLER)])
    tokens = tokens[:words]
    return " ".join(tokens) + "."


def build_simulation_script(
    config: SessionConfig,
    stage_titles: list[str] | None = None,
    response_words: int = 60,
    intro_words: int = 25,
    closing_pass_every: int = 2,
) -> list[str]:
    """Fixture list for a full simulation of ``config``.

    Engagement fixtures rotate the top score across personas so every turn
    has a speaker and stage time fills with participant responses. Every
    ``closing_pass_every``-th persona sits out the closing round with the
    PASS sentinel.
    """
    personas = config.personas
    titles = stage_titles or [f"Part {k + 1}" for k in range(config.stage_count_hint or 3)]
    per_stage = config.total_minutes / len(titles)

    script: list[str] = []
    script.append(
        "\n".join(
            f"{title} | what the group thinks about {title.lower()} | {per_stage:g}"
            for title in titles
        )
    )

    # Replicate the planner's rescale arithmetic step for step, so the number
    # of turns the builder emits per stage equals the number the engine will
    # actually consume.
    parsed = [float(f"{per_stage:g}")] * len(titles)
    factor = config.total_minutes / sum(parsed)
    allocations = [minutes * factor for minutes in parsed]
    allocations[-1] = config.total_minutes - sum(allocations[:-1])

    for stage_no, title in enumerate(titles):
        intro = filler_sentence(
            min(intro_words, config.moderator_word_limit), f"welcome-to-{stage_no}"
        )
        script.append(intro)
        accumulated = estimate_minutes(intro, config.words_per_minute)
        turn = 0
        while accumulated < allocations[stage_no]:
            speaker = turn % len(personas)
            for idx in range(len(personas)):
                script.append("9" if idx == speaker else "3")
            response = filler_sentence(response_words, f"s{stage_no}-t{turn}-{personas[speaker].id}")
            script.append(response)
            accumulated += estimate_minutes(response, config.words_per_minute)
            turn += 1
        script.append(
            f"The group compared daily habits and concerns in part {stage_no + 1}; "
            "a participant stressed balance while others described practical limits."
        )

    for idx in range(len(personas)):
        if closing_pass_every and (idx + 1) % closing_pass_every == 0:
            script.append("PASS")
        else:
            script.append(filler_sentence(20, f"closing-{personas[idx].id}"))
    return script


def write_script(script: list[str], path: str | Path) -> None:
    Path(path).write_text(json.dumps(script, indent=1), encoding="utf-8")


def load_script(path: str | Path) -> list[str]:
    """Load fixtures from a JSON-array file or a directory of text files
    replayed in sorted filename order."""
    target = Path(path)
    if target.is_dir():
        return [
            child.read_text(encoding="utf-8")
            for child in sorted(target.iterdir())
            if child.is_file()
        ]
    return json.loads(target.read_text(encoding="utf-8"))
