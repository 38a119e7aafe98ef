"""Corpus of breaking dependency updates: loading, validation and filtering."""

from __future__ import annotations

import enum
import json
import re
from collections import Counter
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DuplicateCaseId, EmptyCorpus, InvalidCommitId, MalformedManifest

DEFAULT_BUILD_COMMAND = ("mvn", "test")
MANIFEST_VERSION = 1

_COMMIT_RE = re.compile(r"^[0-9a-fA-F]{40}$")


class FailureCategory(str, enum.Enum):
    DIRECT_COMPILATION = "DIRECT_COMPILATION"
    INDIRECT_COMPILATION = "INDIRECT_COMPILATION"
    JAVA_VERSION_INCOMPATIBILITY = "JAVA_VERSION_INCOMPATIBILITY"
    WERROR = "WERROR"
    DEPENDENCY_RESOLUTION_CONFLICT = "DEPENDENCY_RESOLUTION_CONFLICT"
    OTHER = "OTHER"


@dataclass(frozen=True)
class BreakingUpdateCase:
    case_id: str
    project: str
    repo_location: str
    pre_breaking_commit: str
    breaking_commit: str
    dependency_group: str
    dependency_artifact: str
    old_version: str
    new_version: str
    failure_category: FailureCategory
    build_command: tuple[str, ...] = DEFAULT_BUILD_COMMAND

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["failure_category"] = self.failure_category.value
        d["build_command"] = list(self.build_command)
        return d

    @property
    def coordinates(self) -> str:
        return f"{self.dependency_group}:{self.dependency_artifact}"


_REQUIRED = [f.name for f in fields(BreakingUpdateCase) if f.name != "build_command"]
_ALLOWED = set(_REQUIRED) | {"build_command"}


@dataclass(frozen=True)
class CorpusFilter:
    excluded_categories: frozenset[FailureCategory] = field(
        default_factory=lambda: frozenset(
            {
                FailureCategory.JAVA_VERSION_INCOMPATIBILITY,
                FailureCategory.WERROR,
                FailureCategory.DEPENDENCY_RESOLUTION_CONFLICT,
            }
        )
    )


def _case_from_dict(raw, index: int, base_dir: Path | None) -> BreakingUpdateCase:
    where = f"cases[{index}]"
    if not isinstance(raw, dict):
        raise MalformedManifest(f"{where}: expected an object", field=where)
    unknown = set(raw) - _ALLOWED
    if unknown:
        name = sorted(unknown)[0]
        raise MalformedManifest(f"{where}.{name}: unknown field", field=f"{where}.{name}")
    for name in _REQUIRED:
        if name not in raw:
            raise MalformedManifest(f"{where}.{name}: missing field", field=f"{where}.{name}")
        if name != "failure_category" and not (isinstance(raw[name], str) and raw[name]):
            raise MalformedManifest(
                f"{where}.{name}: expected a non-empty string", field=f"{where}.{name}"
            )

    try:
        category = FailureCategory(raw["failure_category"])
    except ValueError:
        raise MalformedManifest(
            f"{where}.failure_category: unknown category {raw['failure_category']!r}",
            field=f"{where}.failure_category",
        ) from None

    command = raw.get("build_command", list(DEFAULT_BUILD_COMMAND))
    if not (
        isinstance(command, list) and command and all(isinstance(a, str) for a in command)
    ):
        raise MalformedManifest(
            f"{where}.build_command: expected a non-empty list of strings",
            field=f"{where}.build_command",
        )

    for name in ("pre_breaking_commit", "breaking_commit"):
        if not _COMMIT_RE.match(raw[name]):
            raise InvalidCommitId(f"{where}.{name}: {raw[name]!r} is not a 40-hex commit id")
    if raw["pre_breaking_commit"].lower() == raw["breaking_commit"].lower():
        raise InvalidCommitId(f"{where}: pre-breaking and breaking commit are identical")
    if raw["old_version"] == raw["new_version"]:
        raise MalformedManifest(
            f"{where}.new_version: equals old_version", field=f"{where}.new_version"
        )

    repo = raw["repo_location"]
    if base_dir is not None and "://" not in repo and not Path(repo).is_absolute():
        repo = str((base_dir / repo).resolve())

    return BreakingUpdateCase(
        case_id=raw["case_id"],
        project=raw["project"],
        repo_location=repo,
        pre_breaking_commit=raw["pre_breaking_commit"],
        breaking_commit=raw["breaking_commit"],
        dependency_group=raw["dependency_group"],
        dependency_artifact=raw["dependency_artifact"],
        old_version=raw["old_version"],
        new_version=raw["new_version"],
        failure_category=category,
        build_command=tuple(command),
    )


def parse_manifest(text: str, base_dir: Path | None = None) -> list[BreakingUpdateCase]:
    """Parse manifest JSON text.

    Accepts either a bare array of cases or ``{"version": 1, "cases": [...]}``.
    Relative ``repo_location`` values are resolved against ``base_dir``.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedManifest(
            f"line {exc.lineno}, column {exc.colno}: {exc.msg}", line=exc.lineno
        ) from None

    if isinstance(data, dict):
        extra = set(data) - {"version", "cases"}
        if extra:
            raise MalformedManifest(f"unknown top-level field {sorted(extra)[0]!r}")
        if data.get("version") != MANIFEST_VERSION:
            raise MalformedManifest(f"unsupported manifest version {data.get('version')!r}")
        entries = data.get("cases", [])
    else:
        entries = data
    if not isinstance(entries, list):
        raise MalformedManifest("expected an array of case objects")

    cases = []
    seen = set()
    for i, raw in enumerate(entries):
        case = _case_from_dict(raw, i, base_dir)
        if case.case_id in seen:
            raise DuplicateCaseId(f"duplicate case_id {case.case_id!r}")
        seen.add(case.case_id)
        cases.append(case)
    return cases


def load_manifest(path) -> list[BreakingUpdateCase]:
    path = Path(path)
    return parse_manifest(path.read_text(encoding="utf-8"), base_dir=path.parent)


def dump_manifest(cases: Iterable[BreakingUpdateCase]) -> str:
    body = {"version": MANIFEST_VERSION, "cases": [c.to_dict() for c in cases]}
    return json.dumps(body, indent=2) + "\n"


def filter_cases(
    cases: Sequence[BreakingUpdateCase], corpus_filter: CorpusFilter | None = None
) -> list[BreakingUpdateCase]:
    corpus_filter = corpus_filter or CorpusFilter()
    excluded = corpus_filter.excluded_categories
    return [c for c in cases if c.failure_category not in excluded]


def _lower_median(values: Sequence[int]) -> int:
    # lower middle element for even lengths, so the result is always attained
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


@dataclass
class CorpusStats:
    cases: int
    median_files_with_errors: int
    median_errors: int
    files_histogram: dict[int, int]
    errors_histogram: dict[int, int]
    share_single_file: float


def corpus_stats(parsed: dict[str, Sequence]) -> CorpusStats:
    """Summarise initial error distribution over a corpus.

    ``parsed`` maps case_id to that case's initial list of CompilationError.
    """
    if not parsed:
        raise EmptyCorpus("no cases to summarise")
    file_counts = []
    error_counts = []
    for errors in parsed.values():
        file_counts.append(len({e.file_path for e in errors}))
        error_counts.append(len(errors))
    return CorpusStats(
        cases=len(parsed),
        median_files_with_errors=_lower_median(file_counts),
        median_errors=_lower_median(error_counts),
        files_histogram=dict(sorted(Counter(file_counts).items())),
        errors_histogram=dict(sorted(Counter(error_counts).items())),
        share_single_file=sum(1 for n in file_counts if n == 1) / len(file_counts),
    )
