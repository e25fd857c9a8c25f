import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rexnet.dsp import CueVector
from rexnet.emotions import CUE_NAMES, EMOTIONS, RELATIONS
from rexnet.relations import (HeadsModel, RelationTable, compute_cue_sd,
                              corpus_cue_map, cue_differences,
                              decode_relation_bits, derive_relation_table,
                              nnrank_decode, nnrank_encode, relation_bits,
                              weighted_cue_diffs)


class TestNNRank:
    def test_verbatim_encoding(self):
        assert nnrank_encode("lower") == (0, 0)
        assert nnrank_encode("similar") == (1, 0)
        assert nnrank_encode("higher") == (1, 1)

    def test_unknown_relation(self):
        with pytest.raises(ValueError):
            nnrank_encode("sideways")

    @pytest.mark.parametrize("relation", RELATIONS)
    def test_round_trip(self, relation):
        probs = tuple(0.99 if b else 0.01 for b in nnrank_encode(relation))
        assert nnrank_decode(probs) == relation

    def test_scan_rule_fixtures(self):
        assert nnrank_decode((0.9, 0.2)) == "similar"
        assert nnrank_decode((0.2, 0.8)) == "lower"  # scan stops at first bit
        assert nnrank_decode((0.9, 0.9)) == "higher"

    @given(st.tuples(st.floats(0.001, 0.999), st.floats(0.001, 0.999)))
    @settings(max_examples=100, deadline=None)
    def test_decode_total(self, probs):
        assert nnrank_decode(probs) in RELATIONS

    def test_bits_and_decode_roundtrip(self):
        rels = ["higher", "lower", "similar", "higher", "similar", "lower"]
        bits = relation_bits(rels)
        assert bits.shape == (12,)
        probs = np.where(bits > 0.5, 0.99, 0.01)
        assert decode_relation_bits(probs) == rels


class TestCueDifferences:
    def test_identical_vectors_zero(self):
        c = CueVector(0.2, 0.3, 200.0, 12.0, 2.5, 0.1)
        sd = np.ones(6)
        np.testing.assert_array_equal(cue_differences(c, c, sd), np.zeros(6))

    def test_antisymmetry_exact(self):
        rng = np.random.default_rng(0)
        sd = rng.uniform(0.5, 3.0, 6)
        for _ in range(20):
            a = CueVector(*rng.uniform(0.1, 5.0, 6))
            b = CueVector(*rng.uniform(0.1, 5.0, 6))
            np.testing.assert_array_equal(cue_differences(a, b, sd),
                                          -cue_differences(b, a, sd))

    def test_standardization_arithmetic(self):
        a = CueVector(0, 0, 250.0, 0, 0, 0)
        b = CueVector(0, 0, 200.0, 0, 0, 0)
        sd = np.array([1, 1, 40.0, 1, 1, 1])
        assert cue_differences(a, b, sd)[2] == pytest.approx(1.25)

    def test_weighted_concatenation(self):
        out = weighted_cue_diffs(np.zeros(6), np.zeros(6))
        assert out.shape == (12,)
        np.testing.assert_array_equal(out, 0.0)
        d, w = np.arange(6.0), np.arange(6.0) * 10
        np.testing.assert_array_equal(weighted_cue_diffs(d, w), np.concatenate([d, w]))


class TestDeriveTable:
    @pytest.fixture(scope="class")
    def table(self, small_corpus):
        return derive_relation_table(small_corpus)

    def test_diagonal_all_similar(self, table):
        for t in range(8):
            assert table.relations_for(t, t) == ["similar"] * 6

    def test_antisymmetry_all_cells(self, table):
        for a in range(8):
            for b in range(8):
                for k in range(6):
                    fwd = table.relation(a, b, k)
                    rev = table.relation(b, a, k)
                    if fwd == "similar":
                        assert rev == "similar"
                    else:
                        assert {fwd, rev} == {"higher", "lower"}

    def test_constructed_pitch_direction(self, table):
        # class 7 carrier 330 Hz vs class 0 carrier 120 Hz
        assert table.relation(7, 0, "mean_pitch") == "higher"
        assert table.relation(0, 7, "mean_pitch") == "lower"

    def test_validate_catches_broken_table(self, table):
        broken = RelationTable(codes=table.codes.copy())
        broken.codes[0, 1, 0] = 2
        broken.codes[1, 0, 0] = 2
        with pytest.raises(ValueError):
            broken.validate()

    def test_json_round_trip(self, table):
        text = table.to_json()
        again = RelationTable.from_json(text)
        assert (again.codes == table.codes).all()
        assert again.to_json() == text

    def test_insufficient_data_defaults_similar(self, tiny_corpus, caplog):
        # 4 clips/class: the train split has too few for some comparisons
        # only when clips are dropped; force it by restricting the cue map.
        import logging
        sub = tiny_corpus
        cue_map = corpus_cue_map(sub)
        metas = [m for m, _ in sub.clips]
        keep = {m.clip_id for m in metas if m.emotion != "calm"} | \
            {next(m.clip_id for m in metas if m.emotion == "calm")}
        for m in metas:
            if m.clip_id not in keep:
                sub.split[m.clip_id] = "test"
        with caplog.at_level(logging.WARNING):
            table = derive_relation_table(sub, cue_map=cue_map)
        assert table.relations_for("calm", "happy") == ["similar"] * 6


class TestHeadsModel:
    def test_shapes_and_ranges(self):
        heads = HeadsModel(rng=np.random.default_rng(0))
        rng = np.random.default_rng(1)
        my_in = rng.normal(size=(3, 112)).astype(np.float32)
        logits = heads.predict_y(my_in)
        assert logits.shape == (3, 8)
        assert np.all(np.isfinite(logits))
        mr_in = rng.normal(size=(5, 140)).astype(np.float32)
        probs = heads.predict_r_probs(mr_in)
        assert probs.shape == (5, 12)
        assert np.all(probs > 0) and np.all(probs < 1)

    def test_state_round_trip(self):
        heads = HeadsModel(rng=np.random.default_rng(2))
        clone = HeadsModel.from_config(heads.config())
        clone.load_state(heads.state())
        x = np.random.default_rng(3).normal(size=(2, 112)).astype(np.float32)
        np.testing.assert_array_equal(heads.predict_y(x), clone.predict_y(x))


def test_cue_sd_positive(small_corpus):
    cue_map = corpus_cue_map(small_corpus)
    sd = compute_cue_sd(list(cue_map.values()))
    assert sd.shape == (6,)
    assert np.all(sd > 0)
