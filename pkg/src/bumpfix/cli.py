"""Command-line entry point: repair, report, parse-log, diff-api, validate-manifest."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import re
import shutil
import sys
from collections import Counter
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import apidiff
from .build import Builder, OutcomeKind, classify_outcome, prepare_workspace
from .errors import (
    BuildTimeout,
    BumpfixError,
    ConfigInvalid,
    DifferFailed,
    DuplicateCaseId,
    EmptyCorpus,
    InvalidCommitId,
    MalformedManifest,
)
from .llm import CassetteStore, LLMClient, Mode, load_providers
from .logparse import group_by_file, parse_compilation_errors
from .manifest import CorpusFilter, filter_cases, load_manifest
from .prompts import PromptId
from .repair import RepairSettings, repair_case
from .reports import RunReport, load_run

log = logging.getLogger("bumpfix")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_INTERRUPTED = 130

_CONFIG_ERRORS = (ConfigInvalid, MalformedManifest, DuplicateCaseId, InvalidCommitId, EmptyCorpus)


def slug(name: str) -> str:
    return re.sub(r"[^\w.-]+", "-", name).strip("-")


@dataclass
class RunConfig:
    manifest: str
    prompts: list[str]
    models: list[str]
    mode: str = "REPLAY"
    workspace: str = "workspaces"
    runs_dir: str = "runs"
    cassettes: str | None = "cassettes"
    providers: str = "providers.json"
    apidiff_cache: str | None = "cache"
    differ_cmd: str | None = None
    m2_repo: str | None = None
    max_parallel_builds: int = 1
    max_parallel_cases: int = 1
    timeout_secs: float = 1800.0
    diff_mode: str = "filtered"
    diff_style: str = "sentences"
    all_categories: bool = False
    keep_workspaces: bool = False
    cases: list[str] = field(default_factory=list)

    def validate(self) -> None:
        for label, path in (("manifest", self.manifest), ("providers file", self.providers)):
            if not Path(path).is_file():
                raise ConfigInvalid(f"{label} {path} not found")
        if not self.prompts:
            raise ConfigInvalid("at least one prompt is required")
        if not self.models:
            raise ConfigInvalid("at least one model is required")
        for p in self.prompts:
            try:
                PromptId(p)
            except ValueError:
                raise ConfigInvalid(f"unknown prompt {p!r}") from None
        try:
            Mode.parse(self.mode)
        except ValueError:
            raise ConfigInvalid(f"unknown mode {self.mode!r}") from None
        if Mode.parse(self.mode) is not Mode.LIVE and not self.cassettes:
            raise ConfigInvalid(f"{self.mode} mode needs --cassettes")
        if self.max_parallel_builds < 1 or self.max_parallel_cases < 1:
            raise ConfigInvalid("parallelism caps must be >= 1")
        if self.timeout_secs <= 0:
            raise ConfigInvalid("timeout must be positive")
        if self.diff_mode not in ("filtered", "full"):
            raise ConfigInvalid(f"unknown api diff mode {self.diff_mode!r}")
        if self.diff_style not in ("sentences", "raw"):
            raise ConfigInvalid(f"unknown api diff style {self.diff_style!r}")

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:8]


def make_run_id(config: RunConfig, now: datetime | None = None) -> str:
    now = now or datetime.now(timezone.utc)
    return f"{now.strftime('%Y%m%dT%H%M%SZ')}-{config.digest()}"


def _split_multi(values: list[str] | None, universe: list[str] | None = None) -> list[str]:
    out: list[str] = []
    for v in values or []:
        for part in v.split(","):
            part = part.strip()
            if not part:
                continue
            if part.lower() == "all" and universe is not None:
                out.extend(universe)
            else:
                out.append(part)
    return list(dict.fromkeys(out))


class _Emitter:
    """Line-oriented output; one JSON object per line with --format json."""

    def __init__(self, fmt: str, stream=None):
        self.fmt = fmt
        self.stream = stream or sys.stdout

    def emit(self, record: dict, text: str) -> None:
        if self.fmt == "json":
            self.stream.write(json.dumps(record, sort_keys=True) + "\n")
        else:
            self.stream.write(text + "\n")
        self.stream.flush()


# repair


def _case_diff(case, config: RunConfig):
    source = apidiff.DiffSource()
    if config.m2_repo:
        source = apidiff.DiffSource(
            old_jar=str(apidiff.m2_jar_path(config.m2_repo, case.dependency_group, case.dependency_artifact, case.old_version)),
            new_jar=str(apidiff.m2_jar_path(config.m2_repo, case.dependency_group, case.dependency_artifact, case.new_version)),
        )
    try:
        raw = apidiff.obtain_diff(case, source, config.differ_cmd, config.apidiff_cache)
    except (FileNotFoundError, DifferFailed) as exc:
        log.warning("%s: no API diff available (%s)", case.case_id, exc)
        return None
    return apidiff.parse_diff(raw)


def _prepare_base(case, config: RunConfig, run_id: str, builder: Builder):
    base = Path(config.workspace) / run_id / slug(case.case_id) / "_initial"
    prepare_workspace(case.repo_location, case.breaking_commit, base)
    report = builder.run(base, case.build_command)
    return base, report


def _run_triple(case, prompt, model, base, initial_report, config, run_id, llm, builder, api_diff):
    ws = Path(config.workspace) / run_id / slug(case.case_id) / prompt / slug(model.model_name)
    if ws.exists():
        shutil.rmtree(ws)
    shutil.copytree(base, ws, symlinks=True)
    art = Path(config.runs_dir) / run_id / slug(case.case_id) / prompt / slug(model.model_name)
    try:
        return repair_case(
            case,
            prompt,
            model,
            ws,
            llm=llm,
            builder=builder,
            api_diff=api_diff,
            initial_report=initial_report,
            artifacts_dir=art,
            settings=RepairSettings(diff_mode=config.diff_mode, diff_style=config.diff_style),
        )
    finally:
        if not config.keep_workspaces:
            shutil.rmtree(ws, ignore_errors=True)


def cmd_repair(config: RunConfig, out: _Emitter, run_id: str | None = None, transport=None) -> int:
    config.validate()
    providers = load_providers(config.providers)
    unknown = [m for m in config.models if m not in providers]
    if unknown:
        raise ConfigInvalid(f"unknown model(s) {unknown}; known: {sorted(providers)}")
    cases = load_manifest(config.manifest)
    if not config.all_categories:
        cases = filter_cases(cases, CorpusFilter())
    if config.cases:
        wanted = set(config.cases)
        cases = [c for c in cases if c.case_id in wanted]
    if not cases:
        raise EmptyCorpus("no cases selected")

    run_id = run_id or make_run_id(config)
    run_dir = Path(config.runs_dir) / run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.json").write_text(json.dumps(asdict(config), indent=2, sort_keys=True) + "\n")
    out.emit({"event": "run", "run_id": run_id, "cases": len(cases)}, f"run {run_id}: {len(cases)} case(s)")

    mode = Mode.parse(config.mode)
    llm = LLMClient(
        mode,
        CassetteStore(config.cassettes) if config.cassettes else None,
        transport=transport,
    )
    builder = Builder(config.max_parallel_builds, config.timeout_secs)
    status: dict[str, dict] = {}

    def run_case(case):
        key = case.case_id
        base, initial = _prepare_base(case, config, run_id, builder)
        try:
            kind = classify_outcome(initial)
            if kind is not OutcomeKind.COMPILATION_FAILURE:
                return [(key, None, None, None, f"initial build is {kind.value}")]
            api_diff = _case_diff(case, config)
            results = []
            for prompt in config.prompts:
                for name in config.models:
                    try:
                        outcome = _run_triple(
                            case, prompt, providers[name], base, initial, config, run_id, llm, builder, api_diff
                        )
                        results.append((key, prompt, name, outcome, None))
                    except BuildTimeout as exc:
                        results.append((key, prompt, name, None, exc.code))
                    except BumpfixError as exc:
                        results.append((key, prompt, name, None, exc.code))
            return results
        finally:
            if not config.keep_workspaces:
                shutil.rmtree(base.parent, ignore_errors=True)

    pool = ThreadPoolExecutor(max_workers=config.max_parallel_cases)
    futures = {pool.submit(run_case, c): c for c in cases}
    io_failure = None
    try:
        for fut in as_completed(futures):
            case = futures[fut]
            try:
                rows = fut.result()
            except BuildTimeout as exc:
                rows = [(case.case_id, None, None, None, exc.code)]
            except BumpfixError as exc:
                rows = [(case.case_id, None, None, None, exc.code)]
            except OSError as exc:
                io_failure = exc
                rows = [(case.case_id, None, None, None, f"IO_ERROR: {exc}")]
            for case_id, prompt, model, outcome, error in rows:
                k = "/".join(x for x in (case_id, prompt, model) if x)
                if outcome is not None:
                    rec = {
                        "case_id": case_id,
                        "prompt_id": prompt,
                        "model_name": model,
                        "final_outcome": outcome.final_outcome.value,
                        "initial_errors": outcome.n_initial_errors,
                        "fixed_errors": outcome.fixed_errors,
                        "new_errors": outcome.new_errors,
                        "files_skipped": len(outcome.files_skipped),
                    }
                    text = (
                        f"{k}: {outcome.final_outcome.value} fixed {outcome.fixed_errors}/"
                        f"{outcome.n_initial_errors} new {outcome.new_errors}"
                    )
                else:
                    rec = {"case_id": case_id, "prompt_id": prompt, "model_name": model, "error": error}
                    text = f"{k}: ERROR {error}"
                status[k] = rec
                out.emit({"event": "result", **rec}, text)
    except KeyboardInterrupt:
        # pending cases are dropped; running builds finish so workspaces stay sane
        pool.shutdown(wait=True, cancel_futures=True)
        llm.close()
        _write_status(run_dir, status)
        out.emit({"event": "interrupted", "run_id": run_id}, "interrupted")
        return EXIT_INTERRUPTED
    pool.shutdown(wait=True)
    llm.close()
    _write_status(run_dir, status)
    if io_failure is not None:
        log.error("I/O failure: %s", io_failure)
        return EXIT_IO
    out.emit({"event": "done", "run_id": run_id, "run_dir": str(run_dir)}, f"done: {run_dir}")
    return EXIT_OK


def _write_status(run_dir: Path, status: dict) -> None:
    body = [status[k] for k in sorted(status)]
    (run_dir / "status.json").write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")


# other subcommands


def _resolve_run(run: str, runs_dir: str) -> Path:
    p = Path(run)
    if p.is_dir():
        return p
    return Path(runs_dir) / run


def cmd_report(args, out: _Emitter) -> int:
    run_dir = _resolve_run(args.run, args.runs_dir)
    report = RunReport(load_run(run_dir))
    if args.output_dir:
        for p in report.write(args.output_dir):
            log.info("wrote %s", p)
    if args.format == "json":
        out.stream.write(report.to_json())
    elif args.format == "csv":
        out.stream.write(report.to_combined_csv())
    else:
        out.stream.write(report.to_markdown())
    return EXIT_OK


def cmd_parse_log(args, out: _Emitter) -> int:
    text = sys.stdin.read() if args.log == "-" else Path(args.log).read_text(encoding="utf-8", errors="replace")
    errors = parse_compilation_errors(text, args.workdir)
    for e in errors:
        out.emit(e.to_dict(), f"{e.file_path}:{e.line}:{e.column}: {e.headline}")
    if args.format != "json":
        groups = group_by_file(errors)
        out.stream.write(f"{len(errors)} error(s) in {len(groups)} file(s)\n")
    return EXIT_OK


def cmd_diff_api(args, out: _Emitter) -> int:
    if args.file:
        raw = apidiff.read_precomputed(args.file)
    elif args.old_jar and args.new_jar:
        if not args.differ_cmd:
            raise ConfigInvalid("--differ-cmd is required with --old-jar/--new-jar")
        raw = apidiff.run_differ(args.differ_cmd, args.old_jar, args.new_jar)
    else:
        raise ConfigInvalid("give --file, or --old-jar and --new-jar")
    changes = apidiff.parse_diff(raw)
    symbols = set(_split_multi(args.symbols))
    excerpt = apidiff.excerpt_for_symbols(changes, symbols, args.diff_mode, args.style, None)
    if args.format == "json":
        for c in excerpt.changes:
            out.emit(c.to_dict(), "")
    else:
        out.stream.write(excerpt.rendered_text + ("\n" if excerpt.rendered_text else ""))
    return EXIT_OK


def cmd_validate_manifest(args, out: _Emitter) -> int:
    if not args.manifest or not Path(args.manifest).is_file():
        raise ConfigInvalid(f"manifest {args.manifest} not found")
    cases = load_manifest(args.manifest)
    kept = filter_cases(cases, CorpusFilter())
    counts = Counter(c.failure_category.value for c in cases)
    record = {"cases": len(cases), "after_filter": len(kept), "categories": dict(sorted(counts.items()))}
    lines = [f"{len(cases)} case(s), {len(kept)} after default filter"]
    lines += [f"  {k}: {v}" for k, v in sorted(counts.items())]
    out.emit(record, "\n".join(lines))
    return EXIT_OK


# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", help="case manifest (JSON)")
    common.add_argument("--prompt", action="append", help="P1..P8, comma list, or 'all'; repeatable")
    common.add_argument("--model", action="append", help="model name from the providers file; repeatable")
    common.add_argument("--mode", default="replay", help="live, record or replay (default replay)")
    common.add_argument("--workspace", default="workspaces", help="scratch root for checkouts")
    common.add_argument("--max-parallel-builds", type=int, default=1)
    common.add_argument("--timeout-secs", type=float, default=1800.0)
    common.add_argument("--format", choices=("text", "json", "csv", "markdown"), default="text")
    common.add_argument("--providers", default="providers.json")
    common.add_argument("--cassettes", default="cassettes")
    common.add_argument("--runs-dir", default="runs")
    common.add_argument("--apidiff-cache", default="cache", help="directory holding apidiff/<g>__<a>__<old>__<new>.txt")
    common.add_argument("--differ-cmd", help="e.g. 'java -jar japicmp.jar --old {old_jar} --new {new_jar}'")
    common.add_argument("--m2-repo", help="local Maven repository used to locate dependency jars")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="bumpfix", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("repair", parents=[common], help="run the repair grid over a manifest")
    p.add_argument("--case", action="append", help="restrict to these case ids")
    p.add_argument("--run-id", help="override the generated run id")
    p.add_argument("--max-parallel-cases", type=int, default=1)
    p.add_argument("--api-diff-mode", dest="diff_mode", choices=("filtered", "full"), default="filtered")
    p.add_argument("--api-diff-style", dest="diff_style", choices=("sentences", "raw"), default="sentences")
    p.add_argument("--all-categories", action="store_true", help="skip the default category filter")
    p.add_argument("--keep-workspaces", action="store_true")

    p = sub.add_parser("report", parents=[common], help="metrics tables for a finished run")
    p.add_argument("--run", required=True, help="run id (under --runs-dir) or run directory")
    p.add_argument("--output-dir", help="also write report.json, report.md and CSV tables here")

    p = sub.add_parser("parse-log", parents=[common], help="list compilation errors in a build log")
    p.add_argument("--log", required=True, help="log file, or - for stdin")
    p.add_argument("--workdir", help="project root to strip from paths")

    p = sub.add_parser("diff-api", parents=[common], help="parse and render an API diff")
    p.add_argument("--file", help="precomputed differ report")
    p.add_argument("--old-jar")
    p.add_argument("--new-jar")
    p.add_argument("--symbols", action="append", help="construct names to filter on")
    p.add_argument("--style", choices=("sentences", "raw"), default="sentences")
    p.add_argument("--api-diff-mode", dest="diff_mode", choices=("filtered", "full"), default="filtered")

    sub.add_parser("validate-manifest", parents=[common], help="check a manifest and show category counts")
    return parser


def config_from_args(args) -> RunConfig:
    if not args.manifest:
        raise ConfigInvalid("--manifest is required")
    return RunConfig(
        manifest=args.manifest,
        prompts=[p.upper() for p in _split_multi(args.prompt, [p.value for p in PromptId])],
        models=_split_multi(args.model),
        mode=args.mode.upper(),
        workspace=args.workspace,
        runs_dir=args.runs_dir,
        cassettes=args.cassettes,
        providers=args.providers,
        apidiff_cache=args.apidiff_cache,
        differ_cmd=args.differ_cmd,
        m2_repo=args.m2_repo,
        max_parallel_builds=args.max_parallel_builds,
        max_parallel_cases=args.max_parallel_cases,
        timeout_secs=args.timeout_secs,
        diff_mode=args.diff_mode,
        diff_style=args.diff_style,
        all_categories=args.all_categories,
        keep_workspaces=args.keep_workspaces,
        cases=_split_multi(args.case),
    )


def main(argv=None, transport=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    out = _Emitter(args.format)
    try:
        if args.command == "repair":
            return cmd_repair(config_from_args(args), out, run_id=args.run_id, transport=transport)
        if args.command == "report":
            return cmd_report(args, out)
        if args.command == "parse-log":
            return cmd_parse_log(args, out)
        if args.command == "diff-api":
            return cmd_diff_api(args, out)
        return cmd_validate_manifest(args, out)
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, BumpfixError) as exc:
        print(f"error: {getattr(exc, 'code', 'IO_ERROR')}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
