import numpy as np
import pytest

from mdm_lab.core import MASK, MaskedSequence, Vocabulary
from mdm_lab.predictors import (
    BigramPredictor,
    GapProfilePredictor,
    PositionalBiasPredictor,
    ScriptedPredictor,
    nearest_unmasked_distance,
)

V = Vocabulary(size=16, mask_id=15)


class TestNearestUnmaskedDistance:
    def test_all_masked_with_prompt(self):
        x = MaskedSequence(prompt=(0,), response=[MASK] * 4, step=4)
        assert nearest_unmasked_distance(x) == [1, 2, 3, 4]

    def test_interior_anchor(self):
        x = MaskedSequence(prompt=(), response=[MASK, MASK, 7, MASK], step=3)
        assert nearest_unmasked_distance(x) == [2, 1, 0, 1]

    def test_prompt_and_anchor_both_count(self):
        x = MaskedSequence(prompt=(0,), response=[MASK, MASK, MASK, 7], step=3)
        assert nearest_unmasked_distance(x) == [1, 2, 1, 0]


class TestScriptedPredictor:
    def test_lookup_by_unmasked_set(self):
        mat0 = np.zeros((2, 16))
        mat1 = np.ones((2, 16))
        pred = ScriptedPredictor(V, 2, {frozenset(): mat0, frozenset({0}): mat1})
        x = MaskedSequence(prompt=(), response=[MASK, MASK], step=2)
        assert np.array_equal(pred.logits(x), mat0)
        x.response[0] = 3
        assert np.array_equal(pred.logits(x), mat1)

    def test_default_fallback_and_missing(self):
        mat = np.zeros((1, 16))
        pred = ScriptedPredictor(V, 1, {}, default=mat)
        x = MaskedSequence(prompt=(), response=[MASK], step=1)
        assert np.array_equal(pred.logits(x), mat)
        strict = ScriptedPredictor(V, 1, {})
        with pytest.raises(KeyError):
            strict.logits(x)


class TestPositionalBiasPredictor:
    def test_confidence_decays_with_distance(self):
        pred = PositionalBiasPredictor(V, target=[1, 2, 3, 4])
        x = MaskedSequence(prompt=(0,), response=[MASK] * 4, step=4)
        logits = pred.logits(x)
        margins = [logits[j].max() for j in range(4)]
        assert margins == sorted(margins, reverse=True)

    def test_rejects_mask_target(self):
        with pytest.raises(ValueError):
            PositionalBiasPredictor(V, target=[V.mask_id])


class TestGapProfilePredictor:
    def test_sequential_confidence_at_scale_one(self):
        pred = GapProfilePredictor(V, target=[1] * 8)
        x = MaskedSequence(prompt=(0,), response=[MASK] * 8, step=8)
        logits = pred.logits(x)
        def conf(row, scale=1.0):
            e = np.exp(scale * (row - row.max()))
            return e.max() / e.sum()
        confs = [conf(logits[j]) for j in range(8)]
        assert confs == sorted(confs, reverse=True)

    def test_evens_overtake_odds_below_scale_one(self):
        pred = GapProfilePredictor(V, target=[1] * 8)
        x = MaskedSequence(prompt=(0,), response=[MASK] * 8, step=8)
        logits = pred.logits(x)
        def conf(row, scale):
            e = np.exp(scale * (row - row.max()))
            return e.max() / e.sum()
        c = 0.7071
        evens = [conf(logits[j], c) for j in range(0, 8, 2)]
        odds = [conf(logits[j], c) for j in range(1, 8, 2)]
        assert min(evens) > max(odds)

    def test_argmax_is_target_everywhere(self):
        target = [3, 7, 2, 9]
        pred = GapProfilePredictor(V, target=target)
        x = MaskedSequence(prompt=(0,), response=[MASK] * 4, step=4)
        logits = pred.logits(x)
        assert [int(np.argmax(logits[j])) for j in range(4)] == target

    def test_vocab_size_guard(self):
        small = Vocabulary(size=4, mask_id=3)
        with pytest.raises(ValueError):
            GapProfilePredictor(small, target=[0], n_competitors=8)


class TestBigramPredictor:
    def world(self):
        # tokens: 0=a 1=b 2=c, mask=3; corpus "a b c", "a b c", "a c c"
        vocab = Vocabulary(size=4, mask_id=3, token_text=("a", "b", "c", "<mask>"))
        corpus = [[0, 1, 2], [0, 1, 2], [0, 2, 2]]
        return vocab, BigramPredictor(vocab, corpus, alpha=0.1)

    def test_forward_context_prefers_frequent_successor(self):
        vocab, pred = self.world()
        x = MaskedSequence(prompt=(0,), response=[MASK, MASK], step=2)
        logits = pred.logits(x)
        # after "a": b (count 2) beats c (count 1)
        assert logits[0][1] > logits[0][2] > logits[0][0]

    def test_backward_context_used(self):
        vocab, pred = self.world()
        x = MaskedSequence(prompt=(), response=[MASK, 2], step=1)
        logits = pred.logits(x)
        # before "c": b (count 2) beats a (count 1)
        assert logits[0][1] > logits[0][0]

    def test_both_sides_combine(self):
        vocab, pred = self.world()
        x = MaskedSequence(prompt=(0,), response=[MASK, 2], step=1)
        logits = pred.logits(x)
        # between "a" and "c": "b" dominates ("a b" x2 and "b c" x2)
        assert int(np.argmax(logits[0])) == 1

    def test_mask_token_never_predicted(self):
        vocab, pred = self.world()
        x = MaskedSequence(prompt=(), response=[MASK], step=1)
        logits = pred.logits(x)
        assert int(np.argmax(logits[0])) != vocab.mask_id

    def test_from_corpus_file(self, tmp_path):
        path = tmp_path / "corpus.txt"
        path.write_text("a b c\na b c\n")
        vocab = Vocabulary(size=4, mask_id=3, token_text=("a", "b", "c", "<mask>"))
        pred = BigramPredictor.from_corpus_file(vocab, path, {"a": 0, "b": 1, "c": 2})
        assert pred.bigram[(0, 1)] == 2
