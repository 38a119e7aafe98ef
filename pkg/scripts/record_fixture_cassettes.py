"""Regenerate the bundled fixture cassettes.

Runs the repair CLI in RECORD mode against a scripted chat endpoint that
answers every prompt with the hand-written fix for the class it names
(tests/fixtures/fixed/<project>/<Class>.java). CoT prompts get a short
<repair_strategy> section in front of the code, as a real model would.

    python scripts/record_fixture_cassettes.py [--prompt P8] [--model o3-mini]
"""

import argparse
import json
import os
import re
import shutil
import sys
import tempfile
from pathlib import Path

import httpx

from bumpfix.cli import main as cli_main

ROOT = Path(__file__).resolve().parent.parent
FIX = ROOT / "tests" / "fixtures"


def fixed_sources() -> dict[str, str]:
    out = {}
    for path in sorted((FIX / "fixed").rglob("*.java")):
        out[path.stem] = path.read_text(encoding="utf-8")
    return out


def scripted_transport(fixes: dict[str, str]) -> httpx.MockTransport:
    def handler(request: httpx.Request) -> httpx.Response:
        body = json.loads(request.content)
        prompt = body["messages"][0]["content"]
        m = re.search(r"^public class (\w+)", prompt, re.M)
        code = fixes.get(m.group(1)) if m else None
        if code is None:
            content = "I cannot repair this class."
        else:
            content = f"```java\n{code}```\n"
            if "<repair_strategy>" in prompt:
                content = (
                    "<repair_strategy>\n1. The update removed the member the code calls.\n"
                    "2. Switch to the replacement from the new version.\n</repair_strategy>\n\n" + content
                )
        reply = {
            "choices": [{"index": 0, "message": {"role": "assistant", "content": content}}],
            "usage": {"prompt_tokens": len(prompt) // 4, "completion_tokens": len(content) // 4},
        }
        return httpx.Response(200, json=reply)

    return httpx.MockTransport(handler)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--prompt", default="all")
    ap.add_argument("--model", default="o3-mini")
    ap.add_argument("--cassettes", default=str(FIX / "cassettes"))
    args = ap.parse_args(argv)

    os.environ.setdefault("OPENAI_API_KEY", "fixture-recording")
    os.environ.setdefault("GEMINI_API_KEY", "fixture-recording")
    os.environ.setdefault("OPENROUTER_API_KEY", "fixture-recording")
    scratch = Path(tempfile.mkdtemp(prefix="record-"))
    try:
        return cli_main(
            [
                "repair",
                "--manifest", str(FIX / "manifest.json"),
                "--prompt", args.prompt,
                "--model", args.model,
                "--mode", "record",
                "--providers", str(ROOT / "providers.json"),
                "--cassettes", args.cassettes,
                "--apidiff-cache", str(FIX / "cache"),
                "--workspace", str(scratch / "ws"),
                "--runs-dir", str(scratch / "runs"),
                "--run-id", "record",
            ],
            transport=scripted_transport(fixed_sources()),
        )
    finally:
        shutil.rmtree(scratch, ignore_errors=True)


if __name__ == "__main__":
    sys.exit(main())
