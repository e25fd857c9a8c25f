import numpy as np
import pytest

from rexnet.emotions import CUE_NAMES, RELATIONS
from rexnet.evalsuite import MetricsReport, _ablate, ablation_report, relation_accuracy
from rexnet.relations import RelationTable


class TestAblate:
    def test_k_zero_is_identity(self):
        std = np.random.default_rng(0).normal(size=(128, 297)).astype(np.float32)
        sal = np.random.default_rng(1).uniform(0, 1, std.shape)
        out = _ablate(std, sal, 0.0)
        np.testing.assert_array_equal(out, std)

    def test_top_bins_zeroed(self):
        std = np.ones((4, 5), dtype=np.float32)
        sal = np.arange(20, dtype=float).reshape(4, 5)
        out = _ablate(std, sal, 0.25)
        assert (out == 0).sum() == 5
        assert np.all(out.ravel()[np.argsort(-sal.ravel())[:5]] == 0)

    def test_same_mask_twice_identical(self):
        std = np.random.default_rng(2).normal(size=(16, 17)).astype(np.float32)
        sal = np.random.default_rng(3).uniform(0, 1, std.shape)
        np.testing.assert_array_equal(_ablate(std, sal, 0.3), _ablate(std, sal, 0.3))

    def test_random_arm_seeded(self):
        std = np.ones((8, 9), dtype=np.float32)
        a = _ablate(std, None, 0.2, rng=np.random.default_rng(5))
        b = _ablate(std, None, 0.2, rng=np.random.default_rng(5))
        np.testing.assert_array_equal(a, b)
        assert (a == 0).sum() == round(0.2 * std.size)


class TestRelationAccuracyMacro:
    def _fixture(self):
        # Hand-computed macro fixture: predictions for two clips against a
        # fixed table; per-(cue, class) recalls averaged over supported cells.
        codes = np.ones((8, 8, 6), dtype=np.int8)  # all similar
        codes[0, 1, :] = 2  # emotion 0 vs 1: all cues higher
        codes[1, 0, :] = 0
        table = RelationTable(codes=codes)

        class Rec:
            def __init__(self, cid, rel_probs):
                self.clip_id = cid
                self.relation_probs = rel_probs

        hi = np.tile([0.9, 0.9], 6)   # decodes higher for all 6 cues
        lo = np.tile([0.1, 0.1], 6)   # decodes lower
        labels = {"a": 0, "b": 0}
        # clip a vs contrast 1 (truth: higher x6): predicted higher -> all hit
        # clip b vs contrast 1: predicted lower -> all miss
        preds = [Rec("a", {1: hi}), Rec("b", {1: lo})]
        return preds, table, labels

    def test_macro_hand_value(self):
        preds, table, labels = self._fixture()
        out = relation_accuracy(preds, table, labels)
        # Only the (cue, higher) cells have support; recall = 1/2 each.
        assert out["macro_accuracy"] == pytest.approx(0.5)
        assert out["micro_accuracy"] == pytest.approx(0.5)

    def test_class_imbalance_weighting(self):
        # Macro averaging weights each supported (cue, class) cell equally:
        # 9 correct "similar" pairs and 1 wrong "higher" pair give 0.5 macro,
        # not the 0.9 micro value.
        codes = np.ones((8, 8, 6), dtype=np.int8)
        codes[0, 2, :] = 2
        codes[2, 0, :] = 0
        table = RelationTable(codes=codes)

        class Rec:
            def __init__(self, cid, rel_probs):
                self.clip_id = cid
                self.relation_probs = rel_probs

        sim = np.tile([0.9, 0.1], 6)
        preds = [Rec(f"c{i}", {1: sim}) for i in range(9)]
        preds.append(Rec("x", {2: sim}))  # truth higher, predicted similar
        labels = {r.clip_id: 0 for r in preds}
        out = relation_accuracy(preds, table, labels)
        assert out["macro_accuracy"] == pytest.approx(0.5)
        assert out["micro_accuracy"] == pytest.approx(0.9)


class TestMetricsReport:
    def test_json_and_table(self):
        report = MetricsReport(initial_accuracy=0.9, final_accuracy=0.88,
                               relation_macro_accuracy=0.7)
        text = report.text_table()
        assert "Initial concept" in text
        assert "Cue accuracy (3 classes, 6 labels)" in text
        doc = report.to_json()
        assert '"initial_accuracy": 0.9' in doc

    def test_row_order_mirrors_reference(self):
        text = MetricsReport().text_table()
        rows = [line for line in text.splitlines() if "|" in line]
        order = ["Initial concept", "Final concept", "Absolute saliency",
                 "Contrastive saliency", "Random ablation control",
                 "Counterfactual", "Counterfactual", "Counterfactual",
                 "Cue difference relation"]
        assert [r.split(" |")[0].strip() for r in rows] == order
