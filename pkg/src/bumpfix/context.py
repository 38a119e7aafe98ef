"""Failing-class text, erroneous lines and implicated construct names."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .logparse import CompilationError

log = logging.getLogger(__name__)

IDENT_RE = re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*")

JAVA_KEYWORDS = frozenset(
    """abstract assert boolean break byte case catch char class const continue default do
    double else enum extends final finally float for goto if implements import instanceof
    int interface long native new package private protected public return short static
    strictfp super switch synchronized this throw throws transient try void volatile while
    var record yield true false null""".split()
)

# ordered: every matching rule contributes; the fallback runs only when none match
_RULES: list[tuple[re.Pattern, tuple[int, ...]]] = [
    (re.compile(r"no suitable (?:method|constructor) found for ([A-Za-z_$][\w$]*)\("), (1,)),
    (
        re.compile(
            r"(?:cannot|can't) find symbol.*?symbol:\s*"
            r"(?:class|method|variable|interface|enum|constructor|static|record)\s+([A-Za-z_$][\w$]*)",
            re.DOTALL,
        ),
        (1,),
    ),
    (re.compile(r"method (?:[\w$]+\.)*([A-Za-z_$][\w$]*)\([^)]*\)[^\n]*?is not applicable"), (1,)),
    (re.compile(r"(?:method|constructor) ([A-Za-z_$][\w$]*) in (?:class|interface|enum) "), (1,)),
    (re.compile(r"does not override abstract method ([A-Za-z_$][\w$]*)\("), (1,)),
    (re.compile(r"cannot access (?:[\w$]+\.)*([A-Za-z_$][\w$]*)"), (1,)),
    (
        re.compile(
            r"incompatible types: (?:[\w$]+\.)*([A-Za-z_$][\w$]*)(?:<[^>]*>)? cannot be converted to "
            r"(?:[\w$]+\.)*([A-Za-z_$][\w$]*)"
        ),
        (1, 2),
    ),
]
_PACKAGE_MISSING_RE = re.compile(r"package ([\w$.]+) does not exist")
_IMPORT_RE = re.compile(r"^\s*import\s+(?:static\s+)?([\w$.]+)\s*;")


@dataclass
class ErrorContext:
    class_text: str
    erroneous_lines: list[tuple[int, str]]
    construct_symbols: set[str]
    skipped_lines: list[int] = field(default_factory=list)
    decode_replaced: bool = False


@dataclass
class ClassText:
    text: str
    lossy: bool = False


def read_client_class(workdir, file_path: str) -> ClassText:
    """Read a source file as UTF-8; invalid bytes are replaced and flagged."""
    path = Path(workdir) / file_path
    if not path.is_file():
        raise FileNotFoundError(f"{file_path} not found under {workdir}")
    data = path.read_bytes()
    try:
        return ClassText(data.decode("utf-8"))
    except UnicodeDecodeError:
        log.warning("%s is not valid UTF-8; decoding lossily", file_path)
        return ClassText(data.decode("utf-8", errors="replace"), lossy=True)


def source_lines(class_text: str) -> list[str]:
    return class_text.replace("\r\n", "\n").replace("\r", "\n").split("\n")


def extract_erroneous_lines(
    class_text: str, errors: Iterable[CompilationError], skipped: list[int] | None = None
) -> list[tuple[int, str]]:
    """One (line_number, verbatim line) entry per distinct error line, ascending.

    Errors pointing past end-of-file are dropped; their line numbers are
    appended to ``skipped`` when a list is supplied.
    """
    lines = source_lines(class_text)
    if lines and lines[-1] == "" and class_text.endswith(("\n", "\r")):
        lines = lines[:-1]
    wanted = sorted({e.line for e in errors if not e.location_missing})
    out = []
    for n in wanted:
        if 1 <= n <= len(lines):
            out.append((n, lines[n - 1]))
        else:
            log.warning("error line %d is past end of file (%d lines)", n, len(lines))
            if skipped is not None:
                skipped.append(n)
    return out


def render_erroneous_lines(entries: Sequence[tuple[int, str]]) -> str:
    return "\n".join(text for _, text in entries)


def extract_construct_symbols(error: CompilationError, source_line: str | None = None) -> set[str]:
    message = error.message
    found: set[str] = set()
    for pattern, groups in _RULES:
        for m in pattern.finditer(message):
            found.update(m.group(g) for g in groups)

    pkg = _PACKAGE_MISSING_RE.search(message)
    if pkg and source_line:
        imp = _IMPORT_RE.match(source_line)
        if imp and imp.group(1).startswith(pkg.group(1) + "."):
            found.add(imp.group(1).rsplit(".", 1)[-1])

    if not found and source_line:
        in_message = set(IDENT_RE.findall(message))
        found = {
            tok
            for tok in IDENT_RE.findall(source_line)
            if tok in in_message and tok not in JAVA_KEYWORDS
        }
    return {s for s in found if s not in JAVA_KEYWORDS}


def symbols_for_file(class_text: str, errors: Sequence[CompilationError]) -> set[str]:
    """Union of construct symbols over all errors of one file."""
    lines = source_lines(class_text)
    out: set[str] = set()
    for err in errors:
        line = lines[err.line - 1] if 1 <= err.line <= len(lines) and not err.location_missing else None
        out |= extract_construct_symbols(err, line)
    return out


def build_context(workdir, file_path: str, errors: Sequence[CompilationError]) -> ErrorContext:
    ct = read_client_class(workdir, file_path)
    skipped: list[int] = []
    entries = extract_erroneous_lines(ct.text, errors, skipped)
    return ErrorContext(
        class_text=ct.text,
        erroneous_lines=entries,
        construct_symbols=symbols_for_file(ct.text, errors),
        skipped_lines=skipped,
        decode_replaced=ct.lossy,
    )
