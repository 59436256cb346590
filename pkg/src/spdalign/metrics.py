"""Ranked-retrieval measures for saliency-ordered multi-label ground truth.

A case pairs a classifier's predictions (descending score) with the labels a
scene actually contains (descending saliency). ``top_k`` is the usual single-
truth measure; ``top_k_n`` counts a case as correct when any of the first k
predictions appears among the first n truth labels; ``avg_top_kk`` averages
top-k-k over k = 1..k_max as a single area-under-curve style score.

Case file format, one case per line::

    pred:5,2,9|truth:2,7|factors:blr,ocl

with ids as decimal integers and the factors segment optional.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import FormatError, ParameterError


@dataclass(frozen=True)
class RankedCase:
    """One evaluated item: predictions by score, truth labels by saliency."""

    predicted: tuple[int, ...]
    truth: tuple[int, ...]
    factors: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "predicted", tuple(int(p) for p in self.predicted))
        object.__setattr__(self, "truth", tuple(int(t) for t in self.truth))
        object.__setattr__(self, "factors", frozenset(str(f) for f in self.factors))
        if not self.truth:
            raise ParameterError("a case needs at least one ground-truth label")
        if len(set(self.predicted)) != len(self.predicted):
            raise ParameterError(f"duplicate predicted ids in {self.predicted}")
        if len(set(self.truth)) != len(self.truth):
            raise ParameterError(f"duplicate truth ids in {self.truth}")


def _check_window(cases: Sequence[RankedCase], k: int):
    if k < 1:
        raise ParameterError(f"k must be at least 1, got {k}")
    if not cases:
        raise ParameterError("no cases to evaluate")
    short = min(len(c.predicted) for c in cases)
    if k > short:
        raise ParameterError(f"k={k} exceeds the shortest prediction list ({short})")


def top_k(cases: Sequence[RankedCase], k: int) -> float:
    """Fraction of cases whose most salient truth label is in the first k predictions."""
    _check_window(cases, k)
    hits = sum(1 for c in cases if c.truth[0] in c.predicted[:k])
    return hits / len(cases)


def top_k_n(cases: Sequence[RankedCase], k: int, n: int) -> float:
    """Fraction of cases where the first k predictions meet the first n truth labels.

    Truth lists shorter than n are used whole.
    """
    if n < 1:
        raise ParameterError(f"n must be at least 1, got {n}")
    _check_window(cases, k)
    hits = 0
    for c in cases:
        window = set(c.truth[: min(n, len(c.truth))])
        if window.intersection(c.predicted[:k]):
            hits += 1
    return hits / len(cases)


def avg_top_kk(cases: Sequence[RankedCase], k_max: int = 5) -> float:
    """Mean of top-k-k over k = 1..k_max."""
    if k_max < 1:
        raise ParameterError(f"k_max must be at least 1, got {k_max}")
    return sum(top_k_n(cases, k, k) for k in range(1, k_max + 1)) / k_max


@dataclass(frozen=True)
class BreakdownRow:
    tag: str
    value: float
    count: int


def factor_breakdown(
    cases: Sequence[RankedCase],
    metric: Callable[[Sequence[RankedCase]], float],
    include_pairs: bool = False,
) -> list[BreakdownRow]:
    """Evaluate a metric over the whole set and over each factor-tag subset.

    The first row is always "all". Single tags follow in sorted order; with
    ``include_pairs`` every co-occurring unordered tag pair is appended as
    "a+b". Only tags and pairs that actually occur get a row.
    """
    if not cases:
        raise ParameterError("no cases to evaluate")
    rows = [BreakdownRow(tag="all", value=metric(cases), count=len(cases))]
    tags = sorted({t for c in cases for t in c.factors})
    for tag in tags:
        subset = [c for c in cases if tag in c.factors]
        rows.append(BreakdownRow(tag=tag, value=metric(subset), count=len(subset)))
    if include_pairs:
        pairs = sorted(
            {(a, b) for c in cases for a in c.factors for b in c.factors if a < b}
        )
        for a, b in pairs:
            subset = [c for c in cases if a in c.factors and b in c.factors]
            rows.append(BreakdownRow(tag=f"{a}+{b}", value=metric(subset), count=len(subset)))
    return rows


# ---------------------------------------------------------------------------
# Case file parsing
# ---------------------------------------------------------------------------

def _parse_ids(payload: str, what: str) -> tuple[int, ...]:
    if not payload:
        raise FormatError(f"empty {what} list")
    try:
        return tuple(int(part) for part in payload.split(","))
    except ValueError:
        raise FormatError(f"non-integer id in {what} list: {payload!r}") from None


def parse_case_line(line: str) -> RankedCase:
    """Parse one ``pred:...|truth:...[|factors:...]`` line into a RankedCase."""
    predicted: tuple[int, ...] | None = None
    truth: tuple[int, ...] | None = None
    factors: frozenset[str] = frozenset()
    for segment in line.strip().split("|"):
        name, sep, payload = segment.partition(":")
        if not sep:
            raise FormatError(f"segment {segment!r} is not name:payload")
        if name == "pred":
            predicted = _parse_ids(payload, "pred")
        elif name == "truth":
            truth = _parse_ids(payload, "truth")
        elif name == "factors":
            factors = frozenset(f for f in payload.split(",") if f)
        else:
            raise FormatError(f"unknown segment {name!r}")
    if predicted is None or truth is None:
        raise FormatError("line must contain both pred and truth segments")
    try:
        return RankedCase(predicted=predicted, truth=truth, factors=factors)
    except ParameterError as exc:
        raise FormatError(str(exc)) from None


def format_case(case: RankedCase) -> str:
    """Inverse of :func:`parse_case_line` (factors emitted sorted)."""
    parts = [
        "pred:" + ",".join(str(p) for p in case.predicted),
        "truth:" + ",".join(str(t) for t in case.truth),
    ]
    if case.factors:
        parts.append("factors:" + ",".join(sorted(case.factors)))
    return "|".join(parts)


def load_cases(path) -> list[RankedCase]:
    """Read a case file; malformed lines fail with their 1-based line number."""
    cases = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                cases.append(parse_case_line(line))
            except FormatError as exc:
                raise FormatError(f"{path}, line {lineno}: {exc}") from None
    return cases
