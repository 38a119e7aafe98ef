"""Exception hierarchy.

Every harness error carries a stable ``code`` string so run records and the
CLI can report failures in a machine-readable way.
"""

from __future__ import annotations


class BumpfixError(Exception):
    code = "ERROR"

    def __init__(self, message: str = "", **details):
        super().__init__(message or self.code)
        self.details = details


# manifest
class MalformedManifest(BumpfixError):
    code = "MALFORMED_MANIFEST"


class DuplicateCaseId(BumpfixError):
    code = "DUPLICATE_CASE_ID"


class InvalidCommitId(BumpfixError):
    code = "INVALID_COMMIT_ID"


class EmptyCorpus(BumpfixError):
    code = "EMPTY_CORPUS"


# builds
class BuildTimeout(BumpfixError):
    code = "TIMEOUT"

    def __init__(self, message: str = "", report=None):
        super().__init__(message)
        self.report = report


class SpawnFailure(BumpfixError):
    code = "SPAWN_FAILURE"


class WorkspaceDirty(BumpfixError):
    code = "WORKSPACE_DIRTY"


class NotACompilationFailure(BumpfixError):
    code = "NOT_A_COMPILATION_FAILURE"


# api diff
class DifferFailed(BumpfixError):
    code = "DIFFER_FAILED"

    def __init__(self, message: str = "", stderr: str = ""):
        super().__init__(message)
        self.stderr = stderr


# prompts
class MissingSectionInput(BumpfixError):
    code = "MISSING_SECTION_INPUT"


# llm
class AuthMissing(BumpfixError):
    code = "AUTH_MISSING"


class ProviderError(BumpfixError):
    code = "PROVIDER_ERROR"

    def __init__(self, message: str = "", status: int | None = None, body: str = ""):
        super().__init__(message or f"provider returned {status}")
        self.status = status
        self.body = body


class CassetteMiss(BumpfixError):
    code = "CASSETTE_MISS"


class InputTooLarge(BumpfixError):
    code = "INPUT_TOO_LARGE"


class NoCodeBlock(BumpfixError):
    code = "NO_CODE_BLOCK"


# metrics
class EmptyInput(BumpfixError):
    code = "EMPTY_INPUT"


class ZeroDenominator(BumpfixError):
    code = "ZERO_DENOMINATOR"


# cli
class ConfigInvalid(BumpfixError):
    code = "CONFIG_INVALID"
