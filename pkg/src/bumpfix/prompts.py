"""Assemble the eight repair prompt variants from the bundled templates."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .errors import MissingSectionInput

PAYLOAD_NAMES = ("client_code", "error_message", "erroneous_line", "api_diff")
_SLOT_NAMES = ("lead_sections", "trail_sections")
_PLACEHOLDER_RE = re.compile("<(" + "|".join(PAYLOAD_NAMES + _SLOT_NAMES) + ")>")

COT_TAG = "repair_strategy"


class PromptId(str, enum.Enum):
    P1 = "P1"
    P2 = "P2"
    P3 = "P3"
    P4 = "P4"
    P5 = "P5"
    P6 = "P6"
    P7 = "P7"
    P8 = "P8"


@dataclass(frozen=True)
class PromptConfig:
    id: PromptId
    include_erroneous_line: bool
    include_api_diff: bool
    use_cot: bool


# (erroneous line, api diff, chain of thought)
_FLAGS = {
    PromptId.P1: (False, False, False),
    PromptId.P2: (True, False, False),
    PromptId.P3: (False, True, False),
    PromptId.P4: (True, True, False),
    PromptId.P5: (False, False, True),
    PromptId.P6: (True, False, True),
    PromptId.P7: (False, True, True),
    PromptId.P8: (True, True, True),
}

PROMPT_LABELS = {
    PromptId.P1: "Baseline",
    PromptId.P2: "Erroneous Line",
    PromptId.P3: "APIDiff",
    PromptId.P4: "Erroneous Line + APIDiff",
    PromptId.P5: "CoT",
    PromptId.P6: "CoT + Erroneous Line",
    PromptId.P7: "CoT + APIDiff",
    PromptId.P8: "CoT + Erroneous Line + APIDiff",
}


def config_for(prompt_id: PromptId | str) -> PromptConfig:
    pid = PromptId(prompt_id)
    line, diff, cot = _FLAGS[pid]
    return PromptConfig(pid, line, diff, cot)


@dataclass(frozen=True)
class PromptText:
    text: str
    placeholders_resolved: bool = True


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    return resources.files("bumpfix").joinpath("templates", f"{name}.txt").read_text(encoding="utf-8")


def _strip_one_newline(s: str) -> str:
    return s[:-1] if s.endswith("\n") else s


def _skeleton(config: PromptConfig) -> str:
    lead = ""
    trail = []
    if config.include_erroneous_line:
        # CoT variant puts the lines right after the code fence, the plain one after the message
        if config.use_cot:
            lead = load_template("erroneous_line")
        else:
            trail.append(load_template("erroneous_line"))
    if config.include_api_diff:
        trail.append(load_template("apidiff"))
    if config.use_cot:
        trail.append(load_template("cot"))
    slots = {
        "lead_sections": lead,
        "trail_sections": "".join(fragment + "\n" for fragment in trail),
    }
    base = load_template("base")
    return base.replace("<lead_sections>", slots["lead_sections"]).replace(
        "<trail_sections>", slots["trail_sections"]
    )


def build_prompt(
    config: PromptConfig,
    class_text: str,
    error_messages: str,
    erroneous_lines_text: str = "",
    api_diff_text: str = "",
) -> PromptText:
    """Render one prompt. Payloads are inserted verbatim, minus one trailing newline."""
    if not class_text.strip():
        raise MissingSectionInput("client code is empty", section="client_code")
    if not error_messages.strip():
        raise MissingSectionInput("error message is empty", section="error_message")
    if config.include_erroneous_line and not erroneous_lines_text.strip():
        raise MissingSectionInput(f"{config.id.value} needs erroneous lines", section="erroneous_line")
    if config.include_api_diff and not api_diff_text.strip():
        raise MissingSectionInput(f"{config.id.value} needs an API diff", section="api_diff")

    values = {
        "client_code": _strip_one_newline(class_text),
        "error_message": _strip_one_newline(error_messages),
        "erroneous_line": _strip_one_newline(erroneous_lines_text),
        "api_diff": _strip_one_newline(api_diff_text),
    }
    skeleton = _skeleton(config)
    wanted = set(_PLACEHOLDER_RE.findall(skeleton))
    resolved = wanted <= set(values)
    # single pass so placeholder-like text inside payloads is never expanded
    text = _PLACEHOLDER_RE.sub(lambda m: values.get(m.group(1), m.group(0)), skeleton)
    return PromptText(text, resolved)


def render_error_messages(errors) -> str:
    """Per-file error block: one log-style entry per error, blank-line separated, log order."""
    return "\n\n".join(e.display() for e in errors)
