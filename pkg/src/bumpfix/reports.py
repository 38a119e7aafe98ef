"""Turn a run directory of outcome records into JSON, CSV and markdown tables."""

from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from pathlib import Path

from .metrics import MetricsReport, compute_report, intersection_report
from .repair import RepairOutcome, load_outcome

OUTCOME_FILE = "outcome.json"
CSV_TABLES = ("bsr", "ffsr", "cefr", "ref", "ref_median")


def load_run(run_dir) -> list[RepairOutcome]:
    """Every outcome under ``<run>/<case>/<prompt>/<model>/outcome.json``, in path order."""
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise FileNotFoundError(f"run directory {run_dir} does not exist")
    return [load_outcome(p) for p in sorted(run_dir.glob(f"*/*/*/{OUTCOME_FILE}"))]


def _prompt_order(pid: str):
    return (int(pid[1:]) if pid[1:].isdigit() else 99, pid)


def group_cells(outcomes) -> dict[tuple[str, str], list[RepairOutcome]]:
    cells = defaultdict(list)
    for o in outcomes:
        cells[(o.prompt_id, o.model_name)].append(o)
    return dict(cells)


def _fixed_sets(outcomes, by: str) -> dict[str, dict[str, set[str]]]:
    # by="model": per model, label = prompt; by="prompt": per prompt, label = model
    out: dict[str, dict[str, set[str]]] = defaultdict(lambda: defaultdict(set))
    for o in outcomes:
        outer, inner = (o.model_name, o.prompt_id) if by == "model" else (o.prompt_id, o.model_name)
        bucket = out[outer][inner]
        if o.succeeded:
            bucket.add(o.case_id)
    return out


def _intersections(outcomes) -> dict:
    result = {"prompts_per_model": {}, "models_per_prompt": {}}
    for key, by in (("prompts_per_model", "model"), ("models_per_prompt", "prompt")):
        for outer, sets in sorted(_fixed_sets(outcomes, by).items()):
            if len(sets) < 2:
                continue
            labels = sorted(sets, key=_prompt_order) if by == "model" else sorted(sets)
            rows = intersection_report({label: sets[label] for label in labels})
            result[key][outer] = [{"labels": list(c), "size": n} for c, n in rows if n]
    return result


class RunReport:
    def __init__(self, outcomes):
        self.outcomes = list(outcomes)
        self.cells: dict[tuple[str, str], MetricsReport] = {
            k: compute_report(v) for k, v in group_cells(self.outcomes).items()
        }
        self.prompts = sorted({p for p, _ in self.cells}, key=_prompt_order)
        self.models = sorted({m for _, m in self.cells})

    def to_dict(self) -> dict:
        return {
            "cells": [self.cells[k].to_dict() for k in sorted(self.cells, key=lambda k: (_prompt_order(k[0]), k[1]))],
            "intersections": _intersections(self.outcomes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def _cell_text(self, table: str, report: MetricsReport | None) -> str:
        if report is None:
            return ""
        if table == "bsr":
            return report.bsr.display()
        if table in ("ffsr", "cefr"):
            ratio = getattr(report, table)
            return ratio.display() if ratio else "n/a"
        if table == "ref":
            raw = report.ref_raw
            return f"{raw['fixed'] - raw['new']}/{raw['initial']} ({report.ref_aggregate_percent}%)"
        return f"{report.ref_median_percent}%"

    def table_rows(self, table: str) -> list[list[str]]:
        rows = [["prompt", *self.models]]
        for p in self.prompts:
            rows.append([p, *(self._cell_text(table, self.cells.get((p, m))) for m in self.models)])
        return rows

    def to_csv(self, table: str) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(self.table_rows(table))
        return buf.getvalue()

    def to_combined_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "prompt", *self.models])
        for table in CSV_TABLES:
            for row in self.table_rows(table)[1:]:
                w.writerow([table, *row])
        return buf.getvalue()

    def to_markdown(self) -> str:
        titles = {
            "bsr": "Build success rate",
            "ffsr": "File fix success rate (failed cases)",
            "cefr": "Compilation error fix rate (failed cases)",
            "ref": "Relative error fix, aggregate",
            "ref_median": "Relative error fix, median over all cases",
        }
        parts = []
        for table in CSV_TABLES:
            rows = self.table_rows(table)
            parts.append(f"## {titles[table]}\n")
            parts.append("| " + " | ".join(rows[0]) + " |")
            parts.append("|" + "---|" * len(rows[0]))
            parts.extend("| " + " | ".join(r) + " |" for r in rows[1:])
            parts.append("")
        inter = _intersections(self.outcomes)
        if inter["prompts_per_model"] or inter["models_per_prompt"]:
            parts.append("## Fixed-case intersections\n")
            for key, groups in inter.items():
                for outer, chunks in groups.items():
                    parts.append(f"{key.replace('_', ' ')}: {outer}\n")
                    parts.append("| labels | size |\n|---|---|")
                    parts.extend(f"| {', '.join(c['labels'])} | {c['size']} |" for c in chunks)
                    parts.append("")
        return "\n".join(parts)

    def write(self, out_dir) -> list[Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = [out_dir / "report.json", out_dir / "report.md"]
        written[0].write_text(self.to_json(), encoding="utf-8")
        written[1].write_text(self.to_markdown(), encoding="utf-8")
        for table in CSV_TABLES:
            p = out_dir / f"{table}.csv"
            p.write_text(self.to_csv(table), encoding="utf-8")
            written.append(p)
        return written
