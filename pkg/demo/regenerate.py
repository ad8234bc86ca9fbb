"""Regenerate the bundled demo configs and fixture scripts.

Run from the repository root:  python demo/regenerate.py
"""

from __future__ import annotations

import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from focusagent.scripting import build_simulation_script, write_script  # noqa: E402
from focusagent.service.schemas import SessionConfigModel  # noqa: E402

DEMO_DIR = Path(__file__).resolve().parent

PERSONAS = """
[[personas]]
id = "ana"
name = "Ana"
age = 29
occupation = "teacher"
nationality = "Spain"
personality = "outgoing, quick to share anecdotes"

[[personas]]
id = "ben"
name = "Ben"
age = 41
occupation = "nurse"
nationality = "Ireland"
personality = "thoughtful, weighs both sides"

[[personas]]
id = "chloe"
name = "Chloe"
age = 23
occupation = "student"
nationality = "France"
personality = "curious, asks follow-up questions"
"""

TEMPLATE = """\
topic = "digital well-being"
goals = ["habits around screen time", "perceived effects on mental health"]
total_minutes = {minutes}
stage_count_hint = {stages}
{personas}"""


def main() -> None:
    for minutes, stages in ((15, 3), (30, 3), (60, 4)):
        toml_text = TEMPLATE.format(minutes=float(minutes), stages=stages, personas=PERSONAS)
        config_path = DEMO_DIR / f"config_{minutes}.toml"
        config_path.write_text(toml_text, encoding="utf-8")
        config = SessionConfigModel(**tomllib.loads(toml_text)).to_config()
        script = build_simulation_script(config)
        write_script(script, DEMO_DIR / f"script_{minutes}.json")
        print(f"config_{minutes}.toml + script_{minutes}.json ({len(script)} fixtures)")


if __name__ == "__main__":
    main()
