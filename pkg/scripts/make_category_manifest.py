"""Write a synthetic manifest with the corpus category counts used for filtering.

243 compilation-failure cases: 78 Java-version, 8 Werror, 54 classpath
conflicts (the 243 - 78 - 8 - 103 remainder), and 103 kept cases. The kept
cases alternate between direct and indirect compilation errors; only the
total matters to the filter.

    python scripts/make_category_manifest.py [output.json]
"""

import hashlib
import sys
from pathlib import Path

from bumpfix.manifest import BreakingUpdateCase, FailureCategory, dump_manifest

TOTAL = 243
JAVA_VERSION = 78
WERROR = 8
KEPT = 103
CONFLICTS = TOTAL - JAVA_VERSION - WERROR - KEPT


def _commit(tag: str) -> str:
    return hashlib.sha1(tag.encode()).hexdigest()


def build_cases() -> list[BreakingUpdateCase]:
    categories = (
        [FailureCategory.JAVA_VERSION_INCOMPATIBILITY] * JAVA_VERSION
        + [FailureCategory.WERROR] * WERROR
        + [FailureCategory.DEPENDENCY_RESOLUTION_CONFLICT] * CONFLICTS
        + [
            FailureCategory.DIRECT_COMPILATION if i % 2 == 0 else FailureCategory.INDIRECT_COMPILATION
            for i in range(KEPT)
        ]
    )
    cases = []
    for i, cat in enumerate(categories, 1):
        cid = f"case-{i:03d}"
        cases.append(
            BreakingUpdateCase(
                case_id=cid,
                project=f"project-{i:03d}",
                repo_location=f"https://example.invalid/{cid}.git",
                pre_breaking_commit=_commit(cid + ":pre"),
                breaking_commit=_commit(cid + ":breaking"),
                dependency_group="org.example",
                dependency_artifact=f"lib-{i:03d}",
                old_version="1.0",
                new_version="2.0",
                failure_category=cat,
            )
        )
    return cases


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    out = Path(argv[0]) if argv else Path(__file__).resolve().parent.parent / "tests" / "data" / "category_manifest.json"
    out.write_text(dump_manifest(build_cases()), encoding="utf-8")
    print(f"wrote {out} ({TOTAL} cases, {CONFLICTS} classpath conflicts)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
