"""Build success, file/error fix rates, relative error fix, and fixed-set intersections."""

from __future__ import annotations

import enum
import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .build import OutcomeKind
from .errors import EmptyInput, ZeroDenominator


def half_up_percent(value: Fraction) -> int:
    """Percent rounded half toward +inf, computed exactly."""
    return math.floor(Fraction(value) * 100 + Fraction(1, 2))


@dataclass(frozen=True)
class Ratio:
    num: int
    den: int

    def __post_init__(self):
        if self.den == 0:
            raise ZeroDenominator(f"{self.num}/0")

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.num, self.den)

    @property
    def value(self) -> float:
        return self.num / self.den

    @property
    def percent(self) -> int:
        return half_up_percent(self.fraction)

    def display(self) -> str:
        return f"{self.num}/{self.den} ({self.percent}%)"

    def to_dict(self) -> dict:
        return {"num": self.num, "den": self.den, "value": self.value, "percent": self.percent}


def ref_value(fixed: int, new: int, initial: int) -> Fraction:
    if initial == 0:
        raise ZeroDenominator("no initial errors")
    return Fraction(fixed - new, initial)


def lower_median(values: Sequence):
    if not values:
        raise EmptyInput("median of nothing")
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


class Scope(str, enum.Enum):
    ALL_CASES = "ALL_CASES"
    FAILED_CASES_ONLY = "FAILED_CASES_ONLY"


@dataclass
class MetricsInput:
    outcomes: list
    scope: Scope = Scope.FAILED_CASES_ONLY

    def __post_init__(self):
        configs = {(o.prompt_id, o.model_name) for o in self.outcomes}
        if len(configs) > 1:
            raise ValueError(f"outcomes mix configurations: {sorted(configs)}")

    def in_scope(self) -> list:
        if not self.outcomes:
            raise EmptyInput("no outcomes")
        if self.scope is Scope.ALL_CASES:
            return list(self.outcomes)
        return [o for o in self.outcomes if o.final_outcome is not OutcomeKind.SUCCESS]


def compute_bsr(inp: MetricsInput) -> Ratio:
    # every case starts as a failing build, so the denominator is all outcomes
    if not inp.outcomes:
        raise EmptyInput("no outcomes")
    fixed = sum(1 for o in inp.outcomes if o.final_outcome is OutcomeKind.SUCCESS)
    return Ratio(fixed, len(inp.outcomes))


def compute_ffsr(inp: MetricsInput) -> Ratio:
    scoped = inp.in_scope()
    return Ratio(sum(o.fixed_files for o in scoped), sum(len(o.initial_error_files) for o in scoped))


def compute_cefr(inp: MetricsInput) -> Ratio:
    scoped = inp.in_scope()
    return Ratio(sum(o.fixed_errors for o in scoped), sum(len(o.initial_errors) for o in scoped))


@dataclass
class RefResult:
    per_case: list[Fraction]
    median: Fraction
    aggregate: Fraction

    @property
    def median_percent(self) -> int:
        return half_up_percent(self.median)

    @property
    def aggregate_percent(self) -> int:
        return half_up_percent(self.aggregate)


def compute_ref(inp: MetricsInput) -> RefResult:
    scoped = inp.in_scope()
    if not scoped:
        raise EmptyInput("no outcomes in scope")
    per_case = [ref_value(o.fixed_errors, o.new_errors, len(o.initial_errors)) for o in scoped]
    aggregate = ref_value(
        sum(o.fixed_errors for o in scoped),
        sum(o.new_errors for o in scoped),
        sum(len(o.initial_errors) for o in scoped),
    )
    return RefResult(per_case, lower_median(per_case), aggregate)


@dataclass
class MetricsReport:
    prompt_id: str
    model_name: str
    cases: int
    bsr: Ratio
    ffsr: Ratio | None
    cefr: Ratio | None
    ref_median_percent: int
    ref_aggregate_percent: int
    per_case_ref: list[int]
    # median over cases that did not build, the other reading of the median
    ref_median_failed_percent: int | None = None
    ref_raw: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "prompt_id": self.prompt_id,
            "model_name": self.model_name,
            "cases": self.cases,
            "bsr": self.bsr.to_dict(),
            "ffsr_failed_cases": self.ffsr.to_dict() if self.ffsr else None,
            "cefr_failed_cases": self.cefr.to_dict() if self.cefr else None,
            "ref_median_percent_all_cases": self.ref_median_percent,
            "ref_median_percent_failed_cases": self.ref_median_failed_percent,
            "ref_aggregate_percent": self.ref_aggregate_percent,
            "per_case_ref_percent": self.per_case_ref,
            "ref_raw": self.ref_raw,
        }


def _maybe(fn, inp):
    try:
        return fn(inp)
    except (ZeroDenominator, EmptyInput):
        return None


def compute_report(outcomes: Sequence) -> MetricsReport:
    """All metrics for one (prompt, model) cell."""
    if not outcomes:
        raise EmptyInput("no outcomes")
    everything = MetricsInput(list(outcomes), Scope.ALL_CASES)
    failed = MetricsInput(list(outcomes), Scope.FAILED_CASES_ONLY)
    ref_all = compute_ref(everything)
    ref_failed = _maybe(compute_ref, failed)
    return MetricsReport(
        prompt_id=outcomes[0].prompt_id,
        model_name=outcomes[0].model_name,
        cases=len(outcomes),
        bsr=compute_bsr(everything),
        ffsr=_maybe(compute_ffsr, failed),
        cefr=_maybe(compute_cefr, failed),
        ref_median_percent=ref_all.median_percent,
        ref_aggregate_percent=ref_all.aggregate_percent,
        per_case_ref=[half_up_percent(r) for r in ref_all.per_case],
        ref_median_failed_percent=ref_failed.median_percent if ref_failed else None,
        ref_raw={
            "fixed": sum(o.fixed_errors for o in outcomes),
            "new": sum(o.new_errors for o in outcomes),
            "initial": sum(len(o.initial_errors) for o in outcomes),
        },
    )


# intersections


def intersection_report(fixed_sets: Mapping[str, Iterable]) -> list[tuple[tuple[str, ...], int]]:
    """Size of every exclusive chunk: ids fixed by exactly that combination of labels.

    Every nonempty combination is listed (zero-sized ones included), ordered by
    combination size then label order.
    """
    labels = list(fixed_sets)
    if len(labels) < 2:
        raise ValueError("need at least two labels")
    sets = {label: set(fixed_sets[label]) for label in labels}
    signature = Counter()
    for item in set().union(*sets.values()):
        signature[tuple(label for label in labels if item in sets[label])] += 1
    rows = []
    for r in range(1, len(labels) + 1):
        for combo in itertools.combinations(labels, r):
            rows.append((combo, signature.get(combo, 0)))
    return rows


def chunk_size(rows: Sequence[tuple[tuple[str, ...], int]], labels: Iterable[str]) -> int:
    wanted = set(labels)
    for combo, size in rows:
        if set(combo) == wanted:
            return size
    raise KeyError(tuple(labels))
