"""Stage prompt templates, shipped as data files.

Templates use str.format fields and always end with an ``input:`` line, which
is the key the scripted provider matches playbook entries against.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    ref = resources.files("homepilot").joinpath(f"prompts/{name}.txt")
    return ref.read_text()


def render_prompt(name: str, **fields: str) -> str:
    return load_template(name).format(**fields)
