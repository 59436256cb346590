"""Ranked-retrieval measures against an exhaustive set-intersection oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spdalign.errors import FormatError, ParameterError
from spdalign.metrics import (
    RankedCase,
    avg_top_kk,
    factor_breakdown,
    format_case,
    parse_case_line,
    top_k,
    top_k_n,
)

FACTOR_VOCAB = ["clp", "lgt", "blr", "glr", "bgr", "ocl", "rot",
                "zom", "vpc", "sml", "shd", "rfl", "ok"]


# -- independent oracle -------------------------------------------------------

def oracle_top_k(cases, k):
    """Most-salient truth label scanned against the first k predictions."""
    hits = 0
    for case in cases:
        found = False
        for p in list(case.predicted)[:k]:
            if p == case.truth[0]:
                found = True
        if found:
            hits += 1
    return hits / len(cases)


def oracle_top_k_n(cases, k, n):
    """Double loop over the two windows; no set machinery."""
    hits = 0
    for case in cases:
        found = False
        for p in list(case.predicted)[:k]:
            for t in list(case.truth)[:n]:
                if p == t:
                    found = True
        if found:
            hits += 1
    return hits / len(cases)


def oracle_avg_top_kk(cases, k_max):
    return sum(oracle_top_k_n(cases, k, k) for k in range(1, k_max + 1)) / k_max


def random_cases(rng, count, k_max=5, id_pool=40, with_factors=True):
    cases = []
    for _ in range(count):
        n_pred = int(rng.integers(k_max, k_max + 6))
        predicted = rng.choice(id_pool, size=n_pred, replace=False)
        n_truth = int(rng.integers(1, 7))
        truth = rng.choice(id_pool, size=n_truth, replace=False)
        factors = []
        if with_factors:
            factors = [f for f in FACTOR_VOCAB if rng.random() < 0.15]
        cases.append(RankedCase(tuple(predicted), tuple(truth), frozenset(factors)))
    return cases


class TestRankedCase:
    def test_rejects_empty_truth(self):
        with pytest.raises(ParameterError):
            RankedCase((1, 2), ())

    def test_rejects_duplicate_predictions(self):
        with pytest.raises(ParameterError):
            RankedCase((1, 1, 2), (3,))

    def test_rejects_duplicate_truth(self):
        with pytest.raises(ParameterError):
            RankedCase((1, 2), (3, 3))


class TestTopK:
    def test_miss_at_one_hit_at_two(self):
        case = RankedCase((5, 2, 9), (2, 7))
        assert top_k([case], 1) == 0.0
        assert top_k([case], 2) == 1.0

    def test_all_correct(self):
        cases = [RankedCase((i, i + 10), (i,)) for i in range(5)]
        assert top_k(cases, 1) == 1.0

    def test_k_too_large(self):
        with pytest.raises(ParameterError):
            top_k([RankedCase((1, 2), (1,))], 3)

    def test_empty_cases(self):
        with pytest.raises(ParameterError):
            top_k([], 1)


class TestTopKN:
    def test_worked_windows(self):
        case = RankedCase((5, 2, 9), (2, 7))
        assert top_k_n([case], 1, 2) == 0.0  # pred {5} vs truth {2, 7}
        assert top_k_n([case], 2, 1) == 1.0  # pred {5, 2} vs truth {2}
        assert top_k_n([case], 3, 2) == 1.0

    def test_n_one_reduces_to_top_k(self, rng):
        cases = random_cases(rng, 300)
        for k in range(1, 6):
            assert top_k_n(cases, k, 1) == top_k(cases, k)

    def test_truth_shorter_than_n(self):
        case = RankedCase((3, 1), (9,))
        assert top_k_n([case], 2, 5) == 0.0
        case2 = RankedCase((9, 1), (9,))
        assert top_k_n([case2], 1, 5) == 1.0


class TestAvgTopKK:
    def test_perfect_predictions(self):
        cases = [RankedCase(tuple(range(i, i + 6)), (i,)) for i in range(4)]
        assert avg_top_kk(cases, 5) == 1.0

    def test_single_case_hits_from_two(self):
        # hits exactly at k in {2..5}: mean of (0, 1, 1, 1, 1) = 0.8
        case = RankedCase((9, 1, 2, 3, 4), (1,))
        assert avg_top_kk([case], 5) == pytest.approx(0.8)

    def test_bounded_by_first_and_last(self, rng):
        cases = random_cases(rng, 200)
        lo = top_k_n(cases, 1, 1)
        hi = top_k_n(cases, 5, 5)
        avg = avg_top_kk(cases, 5)
        assert lo <= avg <= hi


class TestOracleAgreement:
    def test_fuzz_10000_cases_exact(self):
        rng = np.random.default_rng(987)
        cases = random_cases(rng, 10_000)
        for k in range(1, 6):
            assert top_k(cases, k) == oracle_top_k(cases, k)
            for n in range(1, 6):
                assert top_k_n(cases, k, n) == oracle_top_k_n(cases, k, n)
        assert avg_top_kk(cases, 5) == oracle_avg_top_kk(cases, 5)

    def test_monotonicity_in_k_and_n(self):
        rng = np.random.default_rng(321)
        cases = random_cases(rng, 2_000)
        values = {(k, n): top_k_n(cases, k, n) for k in range(1, 6) for n in range(1, 6)}
        for k in range(1, 6):
            for n in range(1, 6):
                if k < 5:
                    assert values[(k, n)] <= values[(k + 1, n)]
                if n < 5:
                    assert values[(k, n)] <= values[(k, n + 1)]

    @given(st.integers(min_value=0, max_value=2**31 - 1))
    @settings(max_examples=60, deadline=None)
    def test_hypothesis_random_corpora(self, seed):
        rng = np.random.default_rng(seed)
        cases = random_cases(rng, 40)
        k = int(rng.integers(1, 6))
        n = int(rng.integers(1, 6))
        assert top_k_n(cases, k, n) == oracle_top_k_n(cases, k, n)
        assert top_k(cases, k) == oracle_top_k(cases, k)


class TestFactorBreakdown:
    def metric(self, subset):
        return top_k(subset, 1)

    def test_untagged_cases_only_all_row(self, rng):
        cases = random_cases(rng, 20, with_factors=False)
        rows = factor_breakdown(cases, self.metric)
        assert len(rows) == 1 and rows[0].tag == "all"
        assert rows[0].count == 20

    def test_single_tag_everywhere_matches_all(self, rng):
        base = random_cases(rng, 20, with_factors=False)
        cases = [RankedCase(c.predicted, c.truth, frozenset({"blr"})) for c in base]
        rows = factor_breakdown(cases, self.metric)
        by_tag = {r.tag: r for r in rows}
        assert by_tag["blr"].value == by_tag["all"].value
        assert by_tag["blr"].count == by_tag["all"].count

    def test_disjoint_tags_partition_counts(self, rng):
        base = random_cases(rng, 30, with_factors=False)
        cases = [
            RankedCase(c.predicted, c.truth, frozenset({"lgt" if i % 2 else "sml"}))
            for i, c in enumerate(base)
        ]
        rows = factor_breakdown(cases, self.metric)
        by_tag = {r.tag: r for r in rows}
        assert by_tag["lgt"].count + by_tag["sml"].count == by_tag["all"].count

    def test_pair_rows(self, rng):
        base = random_cases(rng, 10, with_factors=False)
        cases = [RankedCase(c.predicted, c.truth, frozenset({"blr", "ocl"})) for c in base]
        rows = factor_breakdown(cases, self.metric, include_pairs=True)
        tags = [r.tag for r in rows]
        assert "blr+ocl" in tags


class TestCaseFileFormat:
    def test_parse_worked_line(self):
        case = parse_case_line("pred:5,2,9|truth:2,7|factors:blr,ocl")
        assert case.predicted == (5, 2, 9)
        assert case.truth == (2, 7)
        assert case.factors == frozenset({"blr", "ocl"})

    def test_factors_optional(self):
        case = parse_case_line("pred:1,2|truth:1")
        assert case.factors == frozenset()

    def test_roundtrip(self, rng):
        for case in random_cases(rng, 50):
            assert parse_case_line(format_case(case)) == case

    @pytest.mark.parametrize("bad", [
        "pred:1,2",                     # missing truth
        "truth:1",                      # missing pred
        "pred:1,a|truth:1",             # non-integer id
        "pred:1,2|truth:1|extra:x",     # unknown segment
        "pred:1,1|truth:2",             # duplicate ids
        "nonsense",
    ])
    def test_malformed_lines(self, bad):
        with pytest.raises(FormatError):
            parse_case_line(bad)
