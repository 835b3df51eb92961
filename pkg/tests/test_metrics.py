import math

import pytest

from mdm_lab.metrics import (
    NgramLM,
    distinct_n,
    god,
    god_quintile_report,
    perplexity,
    win_rate,
)


class TestGod:
    def test_identity_order(self):
        assert god([1, 2, 3, 4]) == 0.0

    def test_full_reversal_n4(self):
        assert god([4, 3, 2, 1]) == 2.0

    def test_single_swap(self):
        assert god([2, 1, 3]) == pytest.approx(2 / 3)

    def test_rejects_non_permutation(self):
        with pytest.raises(ValueError):
            god([1, 1, 3])
        with pytest.raises(ValueError):
            god([0, 1, 2])


class TestDistinctN:
    def test_all_distinct(self):
        assert distinct_n(["a", "b", "c"], 1) == 1.0

    def test_repeats(self):
        assert distinct_n(["a", "a", "a"], 2) == 0.5

    def test_too_short_is_none(self):
        assert distinct_n(["a"], 2) is None

    def test_bad_n(self):
        with pytest.raises(ValueError):
            distinct_n(["a"], 0)


class TestNgramLM:
    def test_bigram_probabilities_sum_to_one(self):
        lm = NgramLM.train([["a", "b", "a", "c"]], order=2, alpha=0.5)
        total = sum(math.exp(lm.log_prob(t, ("a",))) for t in lm.vocab)
        assert total == pytest.approx(1.0)

    def test_seen_gram_likelier_than_unseen(self):
        lm = NgramLM.train([["a", "b"], ["a", "b"], ["a", "c"]], order=2, alpha=0.1)
        assert lm.log_prob("b", ("a",)) > lm.log_prob("c", ("a",))

    def test_perplexity_bounds(self):
        lm = NgramLM.train([["a", "b", "c"]], order=2, alpha=0.1)
        ppl = perplexity(["a", "b", "c"], lm)
        assert 1.0 < ppl < len(lm.vocab) + 1

    def test_perplexity_prefers_in_distribution_text(self):
        lm = NgramLM.train([["a", "b", "c", "a", "b", "c"]], order=2, alpha=0.1)
        assert perplexity(["a", "b", "c"], lm) < perplexity(["c", "a", "c"], lm)

    def test_empty_text_rejected(self):
        lm = NgramLM.train([["a"]], order=1)
        with pytest.raises(ValueError):
            perplexity([], lm)


class TestWinRate:
    def test_split(self):
        a, d, b = win_rate([3, 1, 2, 2], [1, 3, 2, 2])
        assert (a, d, b) == (25.0, 50.0, 25.0)

    def test_draw_tolerance(self):
        a, d, b = win_rate([1.0], [1.05], draw_tolerance=0.1)
        assert d == 100.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            win_rate([1.0], [1.0, 2.0])


class TestGodQuintileReport:
    def test_equal_bins(self):
        samples = [(float(i), i >= 5) for i in range(10)]
        report = god_quintile_report(samples)
        assert [r["count"] for r in report] == [2, 2, 2, 2, 2]
        assert [r["win_rate"] for r in report] == [0.0, 0.0, 50.0, 100.0, 100.0]
        assert report[0]["god_min"] == 0.0 and report[-1]["god_max"] == 9.0

    def test_remainder_goes_to_later_bins(self):
        samples = [(float(i), False) for i in range(7)]
        report = god_quintile_report(samples)
        assert [r["count"] for r in report] == [1, 1, 1, 2, 2]

    def test_needs_five(self):
        with pytest.raises(ValueError):
            god_quintile_report([(0.0, True)] * 4)
