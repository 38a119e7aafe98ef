"""Run a project's build command in a private workspace and classify the result."""

from __future__ import annotations

import enum
import logging
import os
import re
import shutil
import signal
import subprocess
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import BuildTimeout, SpawnFailure, WorkspaceDirty
from .logparse import parse_compilation_errors

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT_SECS = 30 * 60
SUCCESS_MARKER = "BUILD SUCCESS"
FAILURE_MARKER = "BUILD FAILURE"
TEST_FAILURE_MARKER = "There are test failures"
_SUREFIRE_SUMMARY_RE = re.compile(
    r"Tests run:\s*(\d+),\s*Failures:\s*(\d+),\s*Errors:\s*(\d+)", re.MULTILINE
)

ENV_ALLOWLIST = (
    "PATH",
    "HOME",
    "USER",
    "LANG",
    "LC_ALL",
    "TMPDIR",
    "JAVA_HOME",
    "M2_HOME",
    "MAVEN_HOME",
    "MAVEN_OPTS",
    "MAVEN_ARGS",
    "JAVA_TOOL_OPTIONS",
)


class OutcomeKind(str, enum.Enum):
    SUCCESS = "SUCCESS"
    COMPILATION_FAILURE = "COMPILATION_FAILURE"
    TEST_FAILURE = "TEST_FAILURE"
    OTHER_FAILURE = "OTHER_FAILURE"


@dataclass
class BuildReport:
    exit_status: int
    log_text: str
    duration: float
    workdir: str
    timed_out: bool = False


def build_env(extra: dict | None = None) -> dict[str, str]:
    env = {k: os.environ[k] for k in ENV_ALLOWLIST if k in os.environ}
    env["CI"] = "true"
    if extra:
        env.update(extra)
    return env


def _kill_tree(proc: subprocess.Popen) -> None:
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError, AttributeError):
        proc.kill()


def run_build(
    workdir,
    command: Sequence[str],
    timeout: float = DEFAULT_TIMEOUT_SECS,
    env: dict | None = None,
) -> BuildReport:
    """Run ``command`` in ``workdir``; stdout and stderr share one pipe.

    A nonzero exit is returned as data. Raises SpawnFailure when the
    executable cannot be started and BuildTimeout (carrying the partial
    report) when the limit is exceeded.
    """
    workdir = str(workdir)
    start = time.monotonic()
    try:
        proc = subprocess.Popen(
            list(command),
            cwd=workdir,
            stdout=subprocess.PIPE,
            stderr=subprocess.STDOUT,
            stdin=subprocess.DEVNULL,
            env=env if env is not None else build_env(),
            start_new_session=True,
        )
    except (FileNotFoundError, PermissionError, NotADirectoryError) as exc:
        raise SpawnFailure(f"cannot start {command[0]!r}: {exc}") from exc

    try:
        out, _ = proc.communicate(timeout=timeout)
    except subprocess.TimeoutExpired:
        _kill_tree(proc)
        out, _ = proc.communicate()
        report = BuildReport(
            exit_status=proc.returncode if proc.returncode is not None else -1,
            log_text=(out or b"").decode("utf-8", errors="replace"),
            duration=time.monotonic() - start,
            workdir=workdir,
            timed_out=True,
        )
        raise BuildTimeout(f"build exceeded {timeout}s in {workdir}", report=report) from None

    return BuildReport(
        exit_status=proc.returncode,
        log_text=out.decode("utf-8", errors="replace"),
        duration=time.monotonic() - start,
        workdir=workdir,
    )


def _has_line(log_text: str, marker: str) -> bool:
    return any(marker in line for line in log_text.splitlines())


def has_test_failures(log_text: str) -> bool:
    if TEST_FAILURE_MARKER in log_text:
        return True
    for m in _SUREFIRE_SUMMARY_RE.finditer(log_text):
        if int(m.group(2)) > 0 or int(m.group(3)) > 0:
            return True
    return False


def classify_outcome(report: BuildReport) -> OutcomeKind:
    if report.exit_status == 0 and _has_line(report.log_text, SUCCESS_MARKER):
        return OutcomeKind.SUCCESS
    if parse_compilation_errors(report.log_text, report.workdir):
        return OutcomeKind.COMPILATION_FAILURE
    if has_test_failures(report.log_text):
        return OutcomeKind.TEST_FAILURE
    return OutcomeKind.OTHER_FAILURE


class Builder:
    """Runs builds with a shared cap on how many may execute at once."""

    def __init__(
        self,
        max_parallel: int = 1,
        timeout: float = DEFAULT_TIMEOUT_SECS,
        extra_env: dict | None = None,
    ):
        if max_parallel < 1:
            raise ValueError("max_parallel must be >= 1")
        self.timeout = timeout
        self.extra_env = extra_env
        self._slots = threading.BoundedSemaphore(max_parallel)

    def run(self, workdir, command: Sequence[str]) -> BuildReport:
        with self._slots:
            log.info("building %s: %s", workdir, " ".join(command))
            return run_build(workdir, command, self.timeout, build_env(self.extra_env))


# workspaces


def _is_git_repo(path: Path) -> bool:
    return (path / ".git").exists()


def _git(args: list[str], cwd=None) -> str:
    proc = subprocess.run(
        ["git", *args], cwd=cwd, capture_output=True, text=True, check=False
    )
    if proc.returncode != 0:
        raise SpawnFailure(f"git {' '.join(args)} failed: {proc.stderr.strip()}")
    return proc.stdout


def prepare_workspace(repo_location: str, commit: str | None, dest) -> Path:
    """Make a private scratch copy of the project at ``commit``.

    Git repositories (local or remote) are cloned and checked out; plain
    directories are taken to already hold the breaking-commit snapshot and
    are copied as-is. ``dest`` must not exist or be empty.
    """
    dest = Path(dest)
    if dest.exists() and any(dest.iterdir()):
        raise WorkspaceDirty(f"workspace {dest} already has content")
    dest.parent.mkdir(parents=True, exist_ok=True)
    src = Path(repo_location)
    if "://" in repo_location or repo_location.endswith(".git") or (
        src.is_dir() and _is_git_repo(src)
    ):
        if dest.exists():
            dest.rmdir()
        _git(["clone", "--quiet", repo_location, str(dest)])
        if commit:
            _git(["checkout", "--quiet", commit], cwd=dest)
        return dest
    if not src.is_dir():
        raise FileNotFoundError(f"repository {repo_location} not found")
    if dest.exists():
        dest.rmdir()
    shutil.copytree(src, dest)
    return dest


def check_clean(workspace) -> None:
    """Raise WorkspaceDirty if a git workspace has uncommitted modifications."""
    workspace = Path(workspace)
    if _is_git_repo(workspace):
        status = _git(["status", "--porcelain", "--untracked-files=no"], cwd=workspace)
        if status.strip():
            raise WorkspaceDirty(f"{workspace} has local modifications:\n{status}")
