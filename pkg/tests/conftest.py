import shutil
from pathlib import Path

import httpx
import pytest

from bumpfix.build import OutcomeKind
from bumpfix.llm import load_providers
from bumpfix.logparse import CompilationError
from bumpfix.manifest import load_manifest
from bumpfix.repair import RepairOutcome

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = Path(__file__).resolve().parent / "fixtures"
EXCERPTS = FIXTURES / "excerpts"
GOLDENS = Path(__file__).resolve().parent / "goldens"

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, text = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {text}")


@pytest.fixture(scope="session")
def cases():
    return {c.case_id: c for c in load_manifest(FIXTURES / "manifest.json")}


@pytest.fixture(scope="session")
def providers():
    return load_providers(ROOT / "providers.json")


@pytest.fixture
def project(tmp_path):
    """Copy a fixture project into a scratch directory and return its path."""

    def copy(name: str) -> Path:
        dest = tmp_path / "ws" / name
        shutil.copytree(FIXTURES / "projects" / name, dest)
        return dest

    return copy


class NetworkTripwire(httpx.BaseTransport):
    """Transport that fails the test on any request."""

    def __init__(self):
        self.calls = 0

    def handle_request(self, request):
        self.calls += 1
        raise AssertionError(f"unexpected network request to {request.url}")


@pytest.fixture
def tripwire():
    return NetworkTripwire()


def err(path="src/A.java", line=1, col=1, message="cannot find symbol"):
    return CompilationError(path, line, col, message, raw_block=f"[ERROR] {path}:[{line},{col}] {message}")


def outcome(
    fixed=0,
    new=0,
    initial=1,
    files=1,
    fixed_files=0,
    success=False,
    case_id="c",
    prompt_id="P1",
    model_name="m",
):
    initial_errors = [err(f"f{i % files}.java", i + 1) for i in range(initial)]
    return RepairOutcome(
        case_id=case_id,
        prompt_id=prompt_id,
        model_name=model_name,
        initial_errors=initial_errors,
        initial_error_files=sorted({e.file_path for e in initial_errors}),
        files_patched=[],
        files_skipped=[],
        final_outcome=OutcomeKind.SUCCESS if success else OutcomeKind.COMPILATION_FAILURE,
        residual_errors=[],
        fixed_errors=fixed,
        new_errors=new,
        fixed_files=fixed_files,
    )
