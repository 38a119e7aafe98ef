"""API differences between two dependency versions.

The binary comparison itself is delegated to an external differ (japicmp or
anything printing the same text report). This module parses that report,
keeps the changes relevant to the failing constructs and renders them as
prompt text.
"""

from __future__ import annotations

import enum
import logging
import re
import shlex
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DifferFailed

log = logging.getLogger(__name__)

DEFAULT_MAX_CHARS = 20_000
TRUNCATION_SENTINEL = "(diff truncated)"


class ChangeKind(str, enum.Enum):
    REMOVED_METHOD = "REMOVED_METHOD"
    NEW_METHOD = "NEW_METHOD"
    REMOVED_CLASS = "REMOVED_CLASS"
    NEW_CLASS = "NEW_CLASS"
    MODIFIED_METHOD = "MODIFIED_METHOD"
    REMOVED_FIELD = "REMOVED_FIELD"
    NEW_FIELD = "NEW_FIELD"
    NEW_EXCEPTION = "NEW_EXCEPTION"
    REMOVED_EXCEPTION = "REMOVED_EXCEPTION"
    OTHER = "OTHER"


class Visibility(str, enum.Enum):
    PUBLIC = "PUBLIC"
    PROTECTED = "PROTECTED"
    PACKAGE = "PACKAGE"
    PRIVATE = "PRIVATE"
    UNKNOWN = "UNKNOWN"


METHOD_KINDS = frozenset({ChangeKind.REMOVED_METHOD, ChangeKind.NEW_METHOD, ChangeKind.MODIFIED_METHOD})
FIELD_KINDS = frozenset({ChangeKind.REMOVED_FIELD, ChangeKind.NEW_FIELD})
CLASS_KINDS = frozenset({ChangeKind.REMOVED_CLASS, ChangeKind.NEW_CLASS})
EXCEPTION_KINDS = frozenset({ChangeKind.NEW_EXCEPTION, ChangeKind.REMOVED_EXCEPTION})


@dataclass
class ApiChange:
    kind: ChangeKind
    visibility: Visibility = Visibility.UNKNOWN
    is_static: bool | None = None
    declaring_type: str = ""
    member_name: str = ""
    signature: list[str] = field(default_factory=list)
    return_type: str = ""
    children: list["ApiChange"] = field(default_factory=list)
    raw: str = ""

    @property
    def qualified_name(self) -> str:
        if self.member_name and self.declaring_type:
            return f"{self.declaring_type}.{self.member_name}"
        return self.member_name or self.declaring_type

    @property
    def declaring_simple_name(self) -> str:
        return self.declaring_type.rsplit(".", 1)[-1] if self.declaring_type else ""

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "visibility": self.visibility.value,
            "is_static": self.is_static,
            "declaring_type": self.declaring_type,
            "member_name": self.member_name,
            "signature": list(self.signature),
            "return_type": self.return_type,
            "children": [c.to_dict() for c in self.children],
        }


@dataclass
class ApiDiffExcerpt:
    changes: list[ApiChange]
    rendered_text: str
    truncated: bool = False


# obtaining the raw report


def cache_path(cache_dir, group: str, artifact: str, old: str, new: str) -> Path:
    return Path(cache_dir) / "apidiff" / f"{group}__{artifact}__{old}__{new}.txt"


def m2_jar_path(m2_repo, group: str, artifact: str, version: str) -> Path:
    return Path(m2_repo).joinpath(*group.split("."), artifact, version, f"{artifact}-{version}.jar")


def read_precomputed(path) -> str:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"api diff file {path} not found")
    return path.read_text(encoding="utf-8")


def run_differ(command_template: str, old_jar, new_jar, timeout: float = 600) -> str:
    """Run an external differ; ``{old_jar}``/``{new_jar}`` are substituted."""
    for jar in (old_jar, new_jar):
        if not Path(jar).is_file():
            raise FileNotFoundError(f"jar {jar} not found")
    argv = [
        a.replace("{old_jar}", str(old_jar)).replace("{new_jar}", str(new_jar))
        for a in shlex.split(command_template)
    ]
    try:
        proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
    except FileNotFoundError as exc:
        raise DifferFailed(f"cannot start differ: {exc}") from exc
    except subprocess.TimeoutExpired as exc:
        raise DifferFailed(f"differ timed out after {timeout}s") from exc
    if proc.returncode != 0:
        raise DifferFailed(f"differ exited with {proc.returncode}", stderr=proc.stderr)
    return proc.stdout


@dataclass
class DiffSource:
    """Where to get the raw report for a case: a fixed file or the differ."""

    precomputed_file: str | None = None
    old_jar: str | None = None
    new_jar: str | None = None


def obtain_diff(
    case,
    source: DiffSource,
    differ_command: str | None = None,
    cache_dir=None,
) -> str:
    if source.precomputed_file:
        return read_precomputed(source.precomputed_file)
    cached = None
    if cache_dir is not None:
        cached = cache_path(
            cache_dir, case.dependency_group, case.dependency_artifact, case.old_version, case.new_version
        )
        if cached.is_file():
            return cached.read_text(encoding="utf-8")
    if not (source.old_jar and source.new_jar):
        raise FileNotFoundError("no precomputed diff and no jars to compare")
    if not differ_command:
        raise DifferFailed("no differ command configured")
    text = run_differ(differ_command, source.old_jar, source.new_jar)
    if cached is not None:
        cached.parent.mkdir(parents=True, exist_ok=True)
        tmp = cached.with_suffix(".tmp")
        tmp.write_text(text, encoding="utf-8")
        tmp.replace(cached)
    return text


# parsing

_LINE_RE = re.compile(r"^(?P<marker>---!|---|\+\+\+!|\+\+\+|\*\*\*!|\*\*\*|===)\s+(?P<what>[A-Z][A-Z ]*?):\s*(?P<body>.*)$")
_MODIFIER_RE = re.compile(r"^(?P<base>[A-Z_]+)(?:\([-+*]\))?$")
_MODIFIERS = frozenset(
    "PUBLIC PROTECTED PRIVATE PACKAGE_PROTECTED PACKAGE STATIC FINAL ABSTRACT SYNCHRONIZED "
    "TRANSIENT VOLATILE NATIVE DEFAULT SYNTHETIC BRIDGE VARARGS STRICTFP".split()
)
_CHANGE_ANNOTATION_RE = re.compile(r"\s*\(<-\s*[^()]*\)")
_TRAILER_RE = re.compile(r"\s+\((?:not serializable|default serialVersionUID changed|Serializable[^)]*)\)\s*$")

_KIND_BY_HEADER = {
    ("-", "METHOD"): ChangeKind.REMOVED_METHOD,
    ("+", "METHOD"): ChangeKind.NEW_METHOD,
    ("*", "METHOD"): ChangeKind.MODIFIED_METHOD,
    ("-", "CONSTRUCTOR"): ChangeKind.REMOVED_METHOD,
    ("+", "CONSTRUCTOR"): ChangeKind.NEW_METHOD,
    ("*", "CONSTRUCTOR"): ChangeKind.MODIFIED_METHOD,
    ("-", "FIELD"): ChangeKind.REMOVED_FIELD,
    ("+", "FIELD"): ChangeKind.NEW_FIELD,
    ("-", "EXCEPTION"): ChangeKind.REMOVED_EXCEPTION,
    ("+", "EXCEPTION"): ChangeKind.NEW_EXCEPTION,
}
_TYPE_WORDS = ("CLASS", "INTERFACE", "ENUM")


def _indent_depth(line: str) -> int:
    depth = 0
    for ch in line:
        if ch == "\t":
            depth += 1
        elif ch == " ":
            depth += 0.25
        else:
            break
    return int(depth)


def split_params(text: str) -> list[str]:
    text = text.strip()
    if not text:
        return []
    out, depth, cur = [], 0, []
    for ch in text:
        if ch in "<([":
            depth += 1
        elif ch in ">)]":
            depth -= 1
        if ch == "," and depth == 0:
            out.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    out.append("".join(cur).strip())
    return out


def _split_modifiers(body: str) -> tuple[list[str], str]:
    body = _CHANGE_ANNOTATION_RE.sub("", body)
    tokens = body.split()
    mods = []
    while tokens:
        m = _MODIFIER_RE.match(tokens[0])
        if not m:
            break
        base = m.group("base")
        if base not in _MODIFIERS and not base.startswith("NON_"):
            break
        mods.append(tokens.pop(0))
    return mods, " ".join(tokens)


def _visibility(mods: Sequence[str]) -> Visibility:
    for m in mods:
        base = m.split("(")[0]
        if base == "PUBLIC":
            return Visibility.PUBLIC
        if base == "PROTECTED":
            return Visibility.PROTECTED
        if base == "PRIVATE":
            return Visibility.PRIVATE
        if base in ("PACKAGE", "PACKAGE_PROTECTED"):
            return Visibility.PACKAGE
    return Visibility.UNKNOWN


def _staticness(mods: Sequence[str]) -> bool | None:
    bases = [m.split("(")[0] for m in mods]
    if "STATIC" in bases:
        return True
    if "NON_STATIC" in bases or mods:
        return False
    return None


def _split_qualified(name: str, context: str) -> tuple[str, str]:
    if "." in name:
        decl, simple = name.rsplit(".", 1)
        return decl, simple
    return context, name


def _parse_member(kind: ChangeKind, word: str, body: str, context: str, raw: str) -> ApiChange:
    mods, rest = _split_modifiers(body)
    change = ApiChange(kind=kind, visibility=_visibility(mods), is_static=_staticness(mods), raw=raw)
    if word == "CONSTRUCTOR":
        m = re.match(r"^(?P<name>[\w$.]+)\s*\((?P<params>.*)\)", rest)
        if m:
            decl, simple = _split_qualified(m.group("name"), context)
            change.declaring_type = decl if "." in m.group("name") else (context or m.group("name"))
            change.member_name = simple
            change.signature = split_params(m.group("params"))
            return change
    elif kind in METHOD_KINDS:
        m = re.match(r"^(?:(?P<ret>\S+(?:<[^>]*>)?(?:\[\])*)\s+)?(?P<name>[\w$.]+)\s*\((?P<params>.*)\)", rest)
        if m:
            change.return_type = m.group("ret") or ""
            change.declaring_type, change.member_name = _split_qualified(m.group("name"), context)
            change.signature = split_params(m.group("params"))
            return change
    elif kind in FIELD_KINDS:
        m = re.match(r"^(?:(?P<type>\S+)\s+)?(?P<name>[\w$.]+)\s*$", rest)
        if m:
            change.return_type = m.group("type") or ""
            change.declaring_type, change.member_name = _split_qualified(m.group("name"), context)
            return change
    # member line we could not decompose
    return ApiChange(kind=ChangeKind.OTHER, declaring_type=raw.strip(), raw=raw)


def parse_diff(raw_text: str) -> list[ApiChange]:
    """Parse a japicmp-style text report.

    Method, field and class change lines become ApiChange entries in
    document order. ``***`` class headers only set the declaring-type context
    for the member lines beneath them. Exception lines nest under the method
    above them; indentation decides nesting only where the kinds allow it.
    """
    top: list[ApiChange] = []
    # (depth, change) for entries that may own children
    stack: list[tuple[int, ApiChange]] = []
    context = ""
    context_depth = -1

    for raw in raw_text.splitlines():
        if not raw.strip():
            continue
        depth = _indent_depth(raw)
        m = _LINE_RE.match(raw.strip())
        if m is None:
            if raw.strip().startswith(("---", "+++", "***")):
                top.append(ApiChange(kind=ChangeKind.OTHER, declaring_type=raw.strip(), raw=raw))
            continue
        marker, what, body = m.group("marker"), m.group("what").strip(), m.group("body").strip()
        words = what.split()
        word = words[-1] if words else ""
        sign = marker[0]
        if marker == "===" or word == "ANNOTATION":
            continue

        if depth <= context_depth:
            context, context_depth = "", -1
        while stack and stack[-1][0] >= depth:
            stack.pop()

        # type headers start at column 0; an indented NEW INTERFACE is an implemented interface
        if depth == 0 and word in _TYPE_WORDS and words[0] in ("NEW", "REMOVED", "MODIFIED"):
            _, name = _split_modifiers(body)
            name = _TRAILER_RE.sub("", name).strip().split()[-1] if name.strip() else ""
            context, context_depth = name, depth
            stack.clear()
            if sign in "+-" and words[0] in ("NEW", "REMOVED"):
                change = ApiChange(
                    kind=ChangeKind.NEW_CLASS if sign == "+" else ChangeKind.REMOVED_CLASS,
                    declaring_type=name,
                    raw=raw,
                )
                mods, _ = _split_modifiers(body)
                change.visibility = _visibility(mods)
                change.is_static = _staticness(mods)
                top.append(change)
                stack.append((depth, change))
            continue

        kind = _KIND_BY_HEADER.get((sign, word))
        if kind is None:
            change = ApiChange(kind=ChangeKind.OTHER, declaring_type=raw.strip(), raw=raw)
            parent = stack[-1][1] if stack else None
            if parent is not None and parent.kind in CLASS_KINDS:
                parent.children.append(change)
            else:
                top.append(change)
            continue

        if kind in EXCEPTION_KINDS:
            exc = ApiChange(kind=kind, declaring_type=body.split()[-1] if body else "", raw=raw)
            owner = next((c for d, c in reversed(stack) if c.kind in METHOD_KINDS), None)
            if owner is not None:
                owner.children.append(exc)
            else:
                log.debug("exception line without a method: %r", raw)
                top.append(ApiChange(kind=ChangeKind.OTHER, declaring_type=raw.strip(), raw=raw))
            continue

        change = _parse_member(kind, word, body, context, raw)
        # methods and fields live under class-level entries only
        while stack and stack[-1][1].kind not in CLASS_KINDS:
            stack.pop()
        if stack and stack[-1][1].kind in CLASS_KINDS and stack[-1][0] < depth:
            stack[-1][1].children.append(change)
        else:
            top.append(change)
        stack.append((depth, change))
    return top


def flatten(changes: Iterable[ApiChange]) -> list[ApiChange]:
    out = []
    for c in changes:
        out.append(c)
        out.extend(flatten(c.children))
    return out


# filtering


def _matches(change: ApiChange, symbols: set[str]) -> bool:
    if (change.member_name and change.member_name in symbols) or (
        change.declaring_simple_name and change.declaring_simple_name in symbols
    ):
        return True
    # a member listed under a new/removed class selects the class entry
    return any(_matches(c, symbols) for c in change.children if c.kind not in EXCEPTION_KINDS)


def filter_relevant(changes: Sequence[ApiChange], symbols: Iterable[str]) -> list[ApiChange]:
    """Keep changes touching the given construct names.

    A top-level change is kept when its member name, its declaring type's
    simple name, or a member nested under it is a symbol, or when it is a NEW_* entry sharing a member
    name with a kept REMOVED_* entry. Children travel with their parent. An
    empty symbol set keeps everything.
    """
    symbols = set(symbols)
    if not symbols:
        return list(changes)
    direct = [c for c in changes if _matches(c, symbols)]
    removed_names = {
        c.member_name for c in direct if c.member_name and c.kind.value.startswith("REMOVED_")
    }
    kept_ids = {id(c) for c in direct}
    return [
        c
        for c in changes
        if id(c) in kept_ids
        or (c.kind.value.startswith("NEW_") and c.member_name and c.member_name in removed_names)
    ]


def relevant_first(changes: Sequence[ApiChange], symbols: Iterable[str]) -> list[ApiChange]:
    """Reorder so that relevant changes come first, preserving order otherwise."""
    kept = filter_relevant(changes, symbols) if symbols else []
    kept_ids = {id(c) for c in kept}
    return kept + [c for c in changes if id(c) not in kept_ids]


# rendering

_VERB = {
    "REMOVED": "has been removed in the new version of the dependency.",
    "NEW": "has been added in the new version of the dependency.",
    "MODIFIED": "has been modified in the new version of the dependency.",
}


_MARKER_PREFIX_RE = re.compile(r"^(?:---!|---|\+\+\+!|\+\+\+|\*\*\*!|\*\*\*|===)\s+")


def _subject(change: ApiChange) -> str:
    if change.kind in METHOD_KINDS:
        params = ", ".join(change.signature)
        if change.member_name and change.member_name == change.declaring_simple_name:
            return f"Constructor {change.declaring_type}({params})"
        return f"Method {change.qualified_name}({params})"
    if change.kind in FIELD_KINDS:
        return f"Field {change.qualified_name}"
    if change.kind in CLASS_KINDS:
        return f"Class {change.declaring_type}"
    return ""


def render_sentence(change: ApiChange) -> str:
    if change.kind is ChangeKind.OTHER:
        return f"- {_MARKER_PREFIX_RE.sub('', change.declaring_type)}"
    verb = _VERB[change.kind.value.split("_", 1)[0]]
    return f"- {_subject(change)} {verb}"


def _render_raw(change: ApiChange, indent: int = 0) -> list[str]:
    lines = ["\t" * indent + change.raw.strip()]
    for child in change.children:
        lines.extend(_render_raw(child, indent + 1))
    return lines


def _sentence_lines(change: ApiChange) -> list[str]:
    lines = [render_sentence(change)]
    # members listed under a new/removed class get their own bullets
    for child in change.children:
        if child.kind not in EXCEPTION_KINDS:
            lines.extend(_sentence_lines(child))
    return lines


def render_for_prompt(
    changes: Sequence[ApiChange],
    style: str = "sentences",
    max_chars: int | None = DEFAULT_MAX_CHARS,
) -> str:
    """Render changes as prompt text, in input order.

    ``style="sentences"`` gives one bullet sentence per change (exception
    children omitted); ``style="raw"`` reproduces the report lines with
    children indented beneath their parent. Output longer than
    ``max_chars`` is cut at a change boundary and ends with a sentinel line.
    """
    return render_excerpt(changes, style, max_chars).rendered_text


def render_excerpt(
    changes: Sequence[ApiChange],
    style: str = "sentences",
    max_chars: int | None = DEFAULT_MAX_CHARS,
) -> ApiDiffExcerpt:
    if style == "sentences":
        render_one = _sentence_lines
    elif style == "raw":
        render_one = _render_raw
    else:
        raise ValueError(f"unknown render style {style!r}")

    out: list[str] = []
    kept: list[ApiChange] = []
    used = 0
    truncated = False
    for change in changes:
        block = "\n".join(render_one(change))
        cost = len(block) + (1 if out else 0)
        if max_chars is not None and used + cost + len(TRUNCATION_SENTINEL) + 1 > max_chars:
            truncated = True
            break
        out.append(block)
        kept.append(change)
        used += cost
    if truncated:
        out.append(TRUNCATION_SENTINEL)
    return ApiDiffExcerpt(changes=kept, rendered_text="\n".join(out), truncated=truncated)


def excerpt_for_symbols(
    changes: Sequence[ApiChange],
    symbols: Iterable[str],
    mode: str = "filtered",
    style: str = "sentences",
    max_chars: int | None = DEFAULT_MAX_CHARS,
) -> ApiDiffExcerpt:
    """Select and render the diff excerpt for one failing file.

    ``mode="filtered"`` keeps relevant changes and falls back to the full
    diff when nothing matches; ``mode="full"`` renders everything with the
    relevant changes first.
    """
    symbols = set(symbols)
    if mode == "filtered":
        chosen = filter_relevant(changes, symbols) or list(changes)
    elif mode == "full":
        chosen = relevant_first(changes, symbols)
    else:
        raise ValueError(f"unknown api diff mode {mode!r}")
    return render_excerpt(chosen, style, max_chars)
