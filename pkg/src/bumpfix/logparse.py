"""Extract javac diagnostics from Maven build logs."""

from __future__ import annotations

import os
import re
from dataclasses import asdict, dataclass, replace
from pathlib import PurePosixPath
from typing import Iterable, Sequence

_ANSI_RE = re.compile(r"\x1b\[[0-9;]*[A-Za-z]")
_MARKER_RE = re.compile(r"^\[(ERROR|WARNING|INFO|DEBUG|WARN)\]")
# [ERROR] /abs/path/File.java:[115,43] message
_ANCHORED_RE = re.compile(r"^\[ERROR\] (?P<path>\S.*?):\[(?P<line>\d+),(?P<col>\d+)\] ?(?P<msg>.*)$")
# [ERROR] /abs/path/File.java: message   (no position; rare)
_UNANCHORED_RE = re.compile(r"^\[ERROR\] (?P<path>\S[^:\[\]]*?\.java):(?: (?P<msg>.*))?$")
# "[ERROR]   continuation" as printed in the Failed-to-execute-goal summary
_MARKED_CONTINUATION_RE = re.compile(r"^\[ERROR\] {2,}\S")


@dataclass(frozen=True)
class CompilationError:
    file_path: str
    line: int
    column: int
    message: str
    raw_block: str
    occurrences: int = 1
    location_missing: bool = False

    @property
    def headline(self) -> str:
        """First message line with whitespace collapsed."""
        return normalize_headline(self.message)

    @property
    def identity(self) -> tuple[str, int, int, str]:
        return (self.file_path, self.line, self.column, self.headline)

    def display(self) -> str:
        """Log-style rendering with a project-relative path."""
        return f"[ERROR] {self.file_path}:[{self.line},{self.column}] {self.message}"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CompilationError":
        return cls(**d)


@dataclass
class ErrorFileGroup:
    file_path: str
    errors: list[CompilationError]


def normalize_headline(message: str) -> str:
    first = message.split("\n", 1)[0]
    return " ".join(first.split())


def strip_ansi(text: str) -> str:
    return _ANSI_RE.sub("", text)


def normalize_path(path: str, workdir: str | None = None) -> str:
    path = path.strip().replace("\\", "/")
    if workdir:
        prefixes = {str(workdir).replace("\\", "/").rstrip("/")}
        try:
            prefixes.add(os.path.realpath(workdir).replace("\\", "/").rstrip("/"))
        except (OSError, ValueError):
            pass
        for prefix in sorted(prefixes, key=len, reverse=True):
            if prefix and path.startswith(prefix + "/"):
                return path[len(prefix) + 1 :]
    return str(PurePosixPath(path)) if path else path


def _is_continuation(line: str) -> bool:
    if not line.strip():
        return False
    if _MARKED_CONTINUATION_RE.match(line):
        return True
    return _MARKER_RE.match(line) is None


def _continuation_text(line: str) -> str:
    if line.startswith("[ERROR]"):
        line = line[len("[ERROR]") :]
    return line.rstrip("\r")


def parse_compilation_errors(log_text: str, workdir: str | None = None) -> list[CompilationError]:
    """Return one CompilationError per distinct diagnostic block, in log order.

    Maven prints every diagnostic twice (compiler section and goal-failure
    summary); identical blocks collapse into one entry whose ``occurrences``
    counts the repeats.
    """
    if not log_text:
        return []
    lines = strip_ansi(log_text).split("\n")
    blocks = []
    i = 0
    while i < len(lines):
        line = lines[i].rstrip("\r")
        m = _ANCHORED_RE.match(line)
        missing = False
        if m is None:
            m = _UNANCHORED_RE.match(line)
            missing = m is not None
        if m is None:
            i += 1
            continue
        j = i + 1
        while j < len(lines) and _is_continuation(lines[j].rstrip("\r")):
            j += 1
        raw_block = "\n".join(lines[i:j])
        path = normalize_path(m.group("path"), workdir)
        if workdir and path != m.group("path"):
            # keep records independent of the scratch directory the build ran in
            raw_block = raw_block.replace(m.group("path"), path, 1)
        msg_lines = [m.group("msg") or ""] + [_continuation_text(l) for l in lines[i + 1 : j]]
        message = "\n".join(msg_lines).strip("\n")
        if not message.strip():
            message = "(no message)"
        elif not msg_lines[0].strip():
            # message started on the next line
            message = message.lstrip()
        blocks.append(
            (
                path,
                1 if missing else int(m.group("line")),
                1 if missing else int(m.group("col")),
                message,
                raw_block,
                missing,
            )
        )
        i = j

    merged: dict[tuple, CompilationError] = {}
    for path, line_no, col, message, raw, missing in blocks:
        key = (path, line_no, col, normalize_headline(message))
        if key in merged:
            merged[key] = replace(merged[key], occurrences=merged[key].occurrences + 1)
        else:
            merged[key] = CompilationError(path, max(line_no, 1), max(col, 1), message, raw, 1, missing)
    return list(merged.values())


def group_by_file(errors: Iterable[CompilationError]) -> list[ErrorFileGroup]:
    groups: dict[str, ErrorFileGroup] = {}
    for err in errors:
        if err.file_path not in groups:
            groups[err.file_path] = ErrorFileGroup(err.file_path, [])
        groups[err.file_path].errors.append(err)
    return list(groups.values())


def errors_per_file(errors: Sequence[CompilationError]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for err in errors:
        counts[err.file_path] = counts.get(err.file_path, 0) + 1
    return counts
