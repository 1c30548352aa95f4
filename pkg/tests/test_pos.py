import numpy as np
import pytest

from nikudkit import data
from nikudkit.corpus import ParseError
from nikudkit.model import Model, ModelConfig
from nikudkit.pos import (
    EmptyDataset,
    LengthMismatch,
    PosEpoch,
    REFERENCE_NOTE,
    TaggedSentence,
    _scores,
    compare,
    load_conllu,
    pos_train,
    to_conllu,
    word_representations,
)

TRAIN_PATH = data.path("ud_sample/train.conllu")
DEV_PATH = data.path("ud_sample/dev.conllu")


@pytest.fixture(scope="module")
def sample():
    return load_conllu(TRAIN_PATH), load_conllu(DEV_PATH)


@pytest.fixture(scope="module")
def encoder(sample):
    train, dev = sample
    alphabet = "".join(sorted({ch for s in train + dev for ch in s.text}))
    cfg = ModelConfig(alphabet=alphabet, d_model=32, n_layers=1, n_heads=4,
                      neck_hidden=32, max_len=48)
    return Model.init(cfg, seed=0)


class TestLoadConllu:
    def test_sentence_counts(self, sample):
        train, dev = sample
        assert len(train) == 40 and len(dev) == 10

    def test_two_sentence_file(self, tmp_path):
        p = tmp_path / "two.conllu"
        p.write_text(
            "1\tשלום\t_\tNOUN\t_\t_\t0\t_\t_\t_\n\n"
            "1\tהוא\t_\tPRON\t_\t_\t0\t_\t_\t_\n"
            "2\tבא\t_\tVERB\t_\t_\t0\t_\t_\t_\n",
            encoding="utf-8")
        sents = load_conllu(str(p))
        assert len(sents) == 2
        assert sents[1].words == (("הוא", "PRON"), ("בא", "VERB"))

    def test_spans_cover_non_separators(self, sample):
        train, _ = sample
        for sent in train:
            text = sent.text
            assert len(sent.words) == len(sent.spans)
            covered = []
            last_end = -1
            for (a, b), (form, _) in zip(sent.spans, sent.words):
                assert text[a:b] == form
                assert a > last_end
                last_end = b
                covered.extend(range(a, b))
            gaps = set(range(len(text))) - set(covered)
            assert all(text[i] == " " for i in gaps)

    def test_malformed_column_count(self, tmp_path):
        p = tmp_path / "bad.conllu"
        p.write_text("1\tשלום\tNOUN\n", encoding="utf-8")
        with pytest.raises(ParseError) as e:
            load_conllu(str(p))
        assert e.value.line_no == 1

    def test_multiword_token_range(self, tmp_path):
        p = tmp_path / "mwt.conllu"
        p.write_text(
            "1-2\tבבית\t_\t_\t_\t_\t_\t_\t_\t_\n"
            "1\tב\t_\tADP\t_\t_\t0\t_\t_\t_\n"
            "2\tבית\t_\tNOUN\t_\t_\t0\t_\t_\t_\n"
            "3\tגדול\t_\tADJ\t_\t_\t0\t_\t_\t_\n",
            encoding="utf-8")
        (sent,) = load_conllu(str(p))
        assert sent.words == (("בבית", "ADP"), ("גדול", "ADJ"))

    def test_empty_node_rows_skipped(self, tmp_path):
        p = tmp_path / "nodes.conllu"
        p.write_text(
            "1\tהוא\t_\tPRON\t_\t_\t0\t_\t_\t_\n"
            "1.1\tghost\t_\tVERB\t_\t_\t_\t_\t_\t_\n"
            "2\tבא\t_\tVERB\t_\t_\t0\t_\t_\t_\n",
            encoding="utf-8")
        (sent,) = load_conllu(str(p))
        assert sent.words == (("הוא", "PRON"), ("בא", "VERB"))

    def test_round_trip(self, sample, tmp_path):
        train, _ = sample
        p = tmp_path / "rt.conllu"
        p.write_text(to_conllu(train), encoding="utf-8")
        assert load_conllu(str(p)) == train


class _StubEncoder:
    """Encoder stand-in with controllable final states."""

    def __init__(self, fn, d_model=8, max_len=64):
        from nikudkit.model import ModelConfig
        self.config = ModelConfig(alphabet="אבגדהוזחטיךכלםמןנסעףפץצקרשת ",
                                  d_model=d_model, n_layers=1, n_heads=1,
                                  neck_hidden=4, max_len=max_len)
        self.fn = fn

    def encoder_states(self, batch):
        b, t = batch.char_ids.shape
        return self.fn(b, t, self.config.d_model)


class TestWordRepresentations:
    def test_constant_states_pool_to_same_vector(self):
        v = np.arange(8.0)
        stub = _StubEncoder(lambda b, t, d: np.tile(v, (b, t, 1)))
        sent = TaggedSentence((("שלום", "NOUN"), ("עולם", "NOUN")),
                              ((0, 4), (5, 9)))
        vecs = word_representations(stub, sent)
        assert np.allclose(vecs, np.tile(v, (2, 1)))

    def test_shapes_and_determinism(self, encoder, sample):
        train, _ = sample
        sent = train[0]
        vecs = word_representations(encoder, sent)
        assert vecs.shape == (len(sent.words), encoder.config.d_model)
        again = word_representations(encoder, sent)
        assert np.array_equal(vecs, again)

    def test_pooling_linearity(self):
        rng = np.random.default_rng(0)
        base = rng.normal(size=(1, 16, 8))
        sent = TaggedSentence((("אב", "X"), ("גדה", "Y")), ((0, 2), (3, 6)))
        v1 = word_representations(_StubEncoder(lambda b, t, d: base[:, :t]), sent)
        v3 = word_representations(_StubEncoder(lambda b, t, d: 3.0 * base[:, :t]), sent)
        assert np.allclose(v3, 3.0 * v1)

    def test_long_sentence_chunked_at_word_boundaries(self, encoder):
        words = tuple((f"מילה{'א' * 8}", "NOUN") for _ in range(12))
        sent = TaggedSentence(words, tuple(
            (i * 13, i * 13 + 12) for i in range(12)))
        vecs = word_representations(encoder, sent)
        assert vecs.shape == (12, encoder.config.d_model)


class TestPosTrain:
    def test_epoch_zero_is_majority_baseline(self, encoder, sample):
        train, dev = sample
        log = pos_train(encoder, train, dev, epochs=1, seed=0)
        tags = [t for s in train for _, t in s.words]
        majority = max(set(tags), key=tags.count)
        dev_tags = [t for s in dev for _, t in s.words]
        want = sum(t == majority for t in dev_tags) / len(dev_tags)
        assert log[0].epoch == 0
        assert log[0].accuracy == pytest.approx(want)

    def test_logs_epochs_records_in_range(self, encoder, sample):
        train, dev = sample
        epochs = 3
        log = pos_train(encoder, train, dev, epochs=epochs, seed=1)
        assert len(log) == epochs + 1  # majority reference + one per epoch
        assert [r.epoch for r in log] == list(range(epochs + 1))
        assert all(0.0 <= r.accuracy <= 1.0 and 0.0 <= r.macro_f1 <= 1.0
                   for r in log)

    def test_deterministic(self, encoder, sample):
        train, dev = sample
        a = pos_train(encoder, train, dev, epochs=2, seed=5)
        b = pos_train(encoder, train, dev, epochs=2, seed=5)
        assert [(r.accuracy, r.macro_f1) for r in a] == \
               [(r.accuracy, r.macro_f1) for r in b]

    def test_finetune_encoder_path(self, sample):
        train, dev = sample
        alphabet = "".join(sorted({ch for s in train + dev for ch in s.text}))
        cfg = ModelConfig(alphabet=alphabet, d_model=16, n_layers=1, n_heads=2,
                          neck_hidden=16, max_len=48)

        def run():
            enc = Model.init(cfg, seed=3)
            return pos_train(enc, train[:8], dev[:4], epochs=1, seed=3,
                             finetune_encoder=True)

        log1, log2 = run(), run()
        assert [(r.accuracy, r.macro_f1) for r in log1] == \
               [(r.accuracy, r.macro_f1) for r in log2]
        assert all(0.0 <= r.accuracy <= 1.0 for r in log1)

    def test_empty_dataset(self, encoder, sample):
        train, dev = sample
        with pytest.raises(EmptyDataset):
            pos_train(encoder, [], dev, epochs=1)
        with pytest.raises(EmptyDataset):
            pos_train(encoder, train, [], epochs=1)


class TestScores:
    def test_macro_f1_one_iff_diagonal(self):
        diag = np.diag([3, 2, 5])
        acc, f1 = _scores(diag)
        assert acc == 1.0 and f1 == 1.0
        off = diag.copy()
        off[0, 1] = 1
        acc, f1 = _scores(off)
        assert f1 < 1.0

    def test_absent_classes_ignored(self):
        conf = np.zeros((4, 4), dtype=int)
        conf[0, 0] = 5
        conf[1, 1] = 5
        acc, f1 = _scores(conf)
        assert acc == 1.0 and f1 == 1.0


class TestCompare:
    def logs(self, acc_a, acc_b):
        a = [PosEpoch(i, x, x) for i, x in enumerate(acc_a)]
        b = [PosEpoch(i, x, x) for i, x in enumerate(acc_b)]
        return a, b

    def test_headline_delta(self):
        a, b = self.logs([0.2, 0.558, 0.60], [0.2, 0.393, 0.59])
        cmp = compare(a, b, threshold=0.02)
        assert cmp.rows[1]["acc_delta"] == pytest.approx(0.165)
        assert cmp.convergence_epoch == 2

    def test_identical_logs_converge_at_epoch_one(self):
        a, b = self.logs([0.3, 0.5, 0.6], [0.3, 0.5, 0.6])
        cmp = compare(a, b)
        assert all(r["acc_delta"] == 0.0 for r in cmp.rows)
        assert cmp.convergence_epoch == 1

    def test_length_mismatch(self):
        a, b = self.logs([0.3, 0.5], [0.3, 0.5, 0.6])
        with pytest.raises(LengthMismatch):
            compare(a, b)

    def test_render_carries_reference_note(self):
        a, b = self.logs([0.1, 0.2], [0.1, 0.3])
        text = compare(a, b).render()
        assert REFERENCE_NOTE in text
        assert "0.558" in text and "0.393" in text
