"""One-case repair loop: prompt per failing file, patch, rebuild once, compare errors."""

from __future__ import annotations

import hashlib
import json
import logging
import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .apidiff import ApiChange, excerpt_for_symbols
from .build import BuildReport, Builder, OutcomeKind, check_clean, classify_outcome
from .context import build_context, render_erroneous_lines
from .errors import (
    CassetteMiss,
    InputTooLarge,
    MissingSectionInput,
    NoCodeBlock,
    NotACompilationFailure,
    ProviderError,
)
from .llm import LLMClient, ModelSpec, extract_code_block, split_repair_strategy
from .logparse import CompilationError, ErrorFileGroup, group_by_file, parse_compilation_errors
from .manifest import BreakingUpdateCase
from .prompts import PromptId, build_prompt, config_for, render_error_messages

log = logging.getLogger(__name__)

# per-file failures that leave the file untouched instead of aborting the case
_SKIPPABLE = (NoCodeBlock, CassetteMiss, ProviderError, InputTooLarge, MissingSectionInput)


@dataclass(frozen=True)
class ErrorDiff:
    fixed: int
    unresolved: int
    new: int


def error_key(err: CompilationError) -> tuple[str, str]:
    # positions are ignored: a patch shifts every line below it
    return (err.file_path, err.headline)


def diff_errors(before: Sequence[CompilationError], after: Sequence[CompilationError]) -> ErrorDiff:
    b = Counter(error_key(e) for e in before)
    a = Counter(error_key(e) for e in after)
    matched = sum(min(n, a[k]) for k, n in b.items())
    return ErrorDiff(fixed=len(before) - matched, unresolved=matched, new=len(after) - matched)


@dataclass
class RepairOutcome:
    case_id: str
    prompt_id: str
    model_name: str
    initial_errors: list[CompilationError]
    initial_error_files: list[str]
    files_patched: list[str]
    files_skipped: list[tuple[str, str]]
    final_outcome: OutcomeKind
    residual_errors: list[CompilationError]
    fixed_errors: int
    new_errors: int
    fixed_files: int
    unresolved_errors: int = 0

    @property
    def n_initial_errors(self) -> int:
        return len(self.initial_errors)

    @property
    def succeeded(self) -> bool:
        return self.final_outcome is OutcomeKind.SUCCESS

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "prompt_id": self.prompt_id,
            "model_name": self.model_name,
            "initial_errors": [e.to_dict() for e in self.initial_errors],
            "initial_error_files": list(self.initial_error_files),
            "files_patched": list(self.files_patched),
            "files_skipped": [list(s) for s in self.files_skipped],
            "final_outcome": self.final_outcome.value,
            "residual_errors": [e.to_dict() for e in self.residual_errors],
            "fixed_errors": self.fixed_errors,
            "unresolved_errors": self.unresolved_errors,
            "new_errors": self.new_errors,
            "fixed_files": self.fixed_files,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RepairOutcome":
        return cls(
            case_id=d["case_id"],
            prompt_id=d["prompt_id"],
            model_name=d["model_name"],
            initial_errors=[CompilationError.from_dict(e) for e in d["initial_errors"]],
            initial_error_files=list(d["initial_error_files"]),
            files_patched=list(d["files_patched"]),
            files_skipped=[tuple(s) for s in d["files_skipped"]],
            final_outcome=OutcomeKind(d["final_outcome"]),
            residual_errors=[CompilationError.from_dict(e) for e in d["residual_errors"]],
            fixed_errors=d["fixed_errors"],
            new_errors=d["new_errors"],
            fixed_files=d["fixed_files"],
            unresolved_errors=d.get("unresolved_errors", 0),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()


@dataclass
class RepairSettings:
    diff_mode: str = "filtered"
    diff_style: str = "sentences"
    diff_max_chars: int | None = 20_000
    llm_workers: int = 1


@dataclass
class _FileResult:
    path: str
    prompt: str | None = None
    response: str | None = None
    strategy: str | None = None
    code: str | None = None
    skip_reason: str | None = None


def _artifact_name(index: int, path: str) -> str:
    safe = re.sub(r"[^\w.-]+", "_", path)
    return f"{index:02d}-{safe}"


def write_preserving_newlines(target: Path, code: str) -> None:
    """Overwrite ``target`` with ``code`` keeping its newline style and trailing newline."""
    original = target.read_bytes() if target.exists() else b""
    newline = "\r\n" if b"\r\n" in original else "\n"
    lines = code.replace("\r\n", "\n").split("\n")
    text = newline.join(lines)
    wants_trailing = original.endswith(b"\n") if original else True
    if wants_trailing and not text.endswith(newline):
        text += newline
    target.write_bytes(text.encode("utf-8"))


def _repair_file(
    group: ErrorFileGroup,
    prompt_id: PromptId,
    model: ModelSpec,
    workspace: Path,
    llm: LLMClient,
    api_diff: Sequence[ApiChange] | None,
    settings: RepairSettings,
) -> _FileResult:
    result = _FileResult(group.file_path)
    config = config_for(prompt_id)
    try:
        ctx = build_context(workspace, group.file_path, group.errors)
    except FileNotFoundError:
        result.skip_reason = "FILE_NOT_FOUND"
        return result

    diff_text = ""
    if config.include_api_diff and api_diff:
        diff_text = excerpt_for_symbols(
            api_diff, ctx.construct_symbols, settings.diff_mode, settings.diff_style, settings.diff_max_chars
        ).rendered_text
    try:
        prompt = build_prompt(
            config,
            ctx.class_text,
            render_error_messages(group.errors),
            render_erroneous_lines(ctx.erroneous_lines),
            diff_text,
        )
        result.prompt = prompt.text
        raw = llm.complete(model, prompt.text)
        result.response = raw
        result.strategy, _ = split_repair_strategy(raw)
        result.code = extract_code_block(raw)
    except _SKIPPABLE as exc:
        log.info("skipping %s: %s", group.file_path, exc)
        result.skip_reason = exc.code
    return result


def repair_case(
    case: BreakingUpdateCase,
    prompt_id: PromptId | str,
    model: ModelSpec,
    workspace,
    *,
    llm: LLMClient,
    builder: Builder,
    api_diff: Sequence[ApiChange] | None = None,
    initial_report: BuildReport | None = None,
    artifacts_dir=None,
    settings: RepairSettings | None = None,
) -> RepairOutcome:
    """Repair every failing file of one case with a single model call each, then rebuild once."""
    prompt_id = PromptId(prompt_id)
    settings = settings or RepairSettings()
    workspace = Path(workspace)
    art = Path(artifacts_dir) if artifacts_dir is not None else None
    check_clean(workspace)

    if initial_report is None:
        initial_report = builder.run(workspace, case.build_command)
    if art is not None:
        art.mkdir(parents=True, exist_ok=True)
        (art / "build-initial.log").write_text(initial_report.log_text, encoding="utf-8")
    kind = classify_outcome(initial_report)
    if kind is not OutcomeKind.COMPILATION_FAILURE:
        raise NotACompilationFailure(f"{case.case_id}: initial build is {kind.value}")

    # the initial build may have run in a sibling copy; strip that copy's prefix
    initial = parse_compilation_errors(initial_report.log_text, initial_report.workdir)
    groups = group_by_file(initial)

    def work(group: ErrorFileGroup) -> _FileResult:
        return _repair_file(group, prompt_id, model, workspace, llm, api_diff, settings)

    if settings.llm_workers > 1 and len(groups) > 1:
        with ThreadPoolExecutor(max_workers=settings.llm_workers) as pool:
            results = list(pool.map(work, groups))
    else:
        results = [work(g) for g in groups]

    patched, skipped = [], []
    for i, res in enumerate(results):
        name = _artifact_name(i, res.path)
        if art is not None:
            if res.prompt is not None:
                _write(art / "prompts" / f"{name}.txt", res.prompt)
            if res.response is not None:
                _write(art / "responses" / f"{name}.txt", res.response)
            if res.strategy is not None:
                _write(art / "responses" / f"{name}.strategy.txt", res.strategy)
        if res.skip_reason is not None:
            skipped.append((res.path, res.skip_reason))
            continue
        write_preserving_newlines(workspace / res.path, res.code)
        patched.append(res.path)
        if art is not None:
            dest = art / "patched" / res.path
            dest.parent.mkdir(parents=True, exist_ok=True)
            dest.write_bytes((workspace / res.path).read_bytes())

    final_report = builder.run(workspace, case.build_command)
    if art is not None:
        (art / "build-final.log").write_text(final_report.log_text, encoding="utf-8")

    final_kind = classify_outcome(final_report)
    residual = parse_compilation_errors(final_report.log_text, str(workspace))
    if final_kind is OutcomeKind.SUCCESS:
        residual = []
    d = diff_errors(initial, residual)
    initial_files = sorted({e.file_path for e in initial})
    residual_files = {e.file_path for e in residual}
    outcome = RepairOutcome(
        case_id=case.case_id,
        prompt_id=prompt_id.value,
        model_name=model.model_name,
        initial_errors=initial,
        initial_error_files=initial_files,
        files_patched=patched,
        files_skipped=skipped,
        final_outcome=final_kind,
        residual_errors=residual,
        fixed_errors=d.fixed,
        new_errors=d.new,
        fixed_files=sum(1 for f in initial_files if f not in residual_files),
        unresolved_errors=d.unresolved,
    )
    if art is not None:
        (art / "outcome.json").write_text(outcome.to_json(), encoding="utf-8")
    return outcome


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def load_outcome(path) -> RepairOutcome:
    return RepairOutcome.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

