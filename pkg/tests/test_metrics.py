import numpy as np
import pytest

from nikudkit import hebrew as H
from nikudkit.hebrew import MarkedChar
from nikudkit.metrics import (
    AlignedPair,
    BaseMismatch,
    DEFAULT_PHONEMES,
    EmptyEval,
    MissingTableEntry,
    PhonemeTable,
    align,
    char_accuracy,
    decision_accuracy,
    report,
    vocalization_accuracy,
    word_accuracy,
    word_diffs,
)
from helpers import random_pair

GOLD_SHALOM = "שָׁלוֹם"
PRED_PATAH = "שַׁלוֹם"    # patah for kamatz
PRED_HIRIQ = "שִׁלוֹם"    # hiriq for kamatz
PRED_BARE = "שלום"                                            # all-none

# two-word fixture: gold dotted, pred wrong only in the second word
GOLD_TWO = "כֶּלֶב קָטָן"
PRED_TWO_PATAH = "כֶּלֶב קָטַן"
PRED_TWO_HIRIQ = "כֶּלֶב קָטִן"


class TestAlign:
    def test_shared_bases(self):
        pair = align(GOLD_SHALOM, PRED_PATAH)
        assert len(pair) == 4

    def test_identical(self):
        pair = align(GOLD_SHALOM, GOLD_SHALOM)
        assert pair.gold == pair.pred

    def test_base_mismatch_offset(self):
        with pytest.raises(BaseMismatch) as e:
            align("שלום", "שלם")
        assert e.value.offset == 2


class TestWorkedFixture:
    def test_patah_for_kamatz(self):
        pair = align(GOLD_SHALOM, PRED_PATAH)
        assert decision_accuracy(pair) == pytest.approx(8 / 9)
        assert char_accuracy(pair) == pytest.approx(3 / 4)
        assert word_accuracy(pair) == 0.0
        assert vocalization_accuracy(pair) == 1.0

    def test_hiriq_for_kamatz_changes_pronunciation(self):
        pair = align(GOLD_SHALOM, PRED_HIRIQ)
        assert vocalization_accuracy(pair) == 0.0

    def test_all_none_prediction(self):
        pair = align(GOLD_SHALOM, PRED_BARE)
        assert decision_accuracy(pair) == pytest.approx(6 / 9)
        assert char_accuracy(pair) == 0.5
        assert word_accuracy(pair) == 0.0
        assert vocalization_accuracy(pair) == 0.0

    def test_identical_pair_is_perfect(self):
        pair = align(GOLD_SHALOM, GOLD_SHALOM)
        assert (decision_accuracy(pair), char_accuracy(pair),
                word_accuracy(pair), vocalization_accuracy(pair)) == (1, 1, 1, 1)


class TestWords:
    def test_single_word_one_error(self):
        pair = align(GOLD_SHALOM, PRED_PATAH)
        assert word_accuracy(pair) == 0.0

    def test_second_word_wrong(self):
        pair = align(GOLD_TWO, PRED_TWO_PATAH)
        assert word_accuracy(pair) == 0.5
        assert vocalization_accuracy(pair) == 1.0  # patah ~ kamatz
        pair = align(GOLD_TWO, PRED_TWO_HIRIQ)
        assert word_accuracy(pair) == 0.5
        assert vocalization_accuracy(pair) == 0.5

    def test_non_hebrew_only(self):
        pair = align("abc 123", "abc 123")
        assert decision_accuracy(pair) == 1.0
        assert word_accuracy(pair) == 1.0

    def test_mark_free_gold_all_none_pred(self):
        pair = align("שלום טוב", "שלום טוב")
        r = report([pair])
        assert (r.dec, r.cha, r.wor, r.voc) == (1.0, 1.0, 1.0, 1.0)


class TestPhonemes:
    def test_vav_rules(self):
        t = DEFAULT_PHONEMES
        holam = H.LABELS.n_labels.index(H.HOLAM)
        kubutz = H.LABELS.n_labels.index(H.KUBUTZ)
        assert t.phoneme(MarkedChar("ו", d=1)) == "u"          # shuruk
        assert t.phoneme(MarkedChar("ו", n=holam)) == "o"      # vav-holam
        assert t.phoneme(MarkedChar("ו", n=kubutz)) == "vu"

    def test_bet_kaf_pe(self):
        t = DEFAULT_PHONEMES
        patah = H.LABELS.n_labels.index(H.PATAH)
        assert t.phoneme(MarkedChar("ב", d=1, n=patah)) == "ba"
        assert t.phoneme(MarkedChar("ב", n=patah)) == "va"
        assert t.phoneme(MarkedChar("ך", d=1)) == "k"
        assert t.phoneme(MarkedChar("ף")) == "f"

    def test_shin_sin(self):
        t = DEFAULT_PHONEMES
        assert t.phoneme(MarkedChar("ש", s=1)) == "ʃ"
        assert t.phoneme(MarkedChar("ש", s=2)) == "s"

    def test_missing_entry_raises(self):
        table = PhonemeTable("broken", {0: ""}, {})
        pair = align("ש", "ש")
        with pytest.raises(MissingTableEntry):
            vocalization_accuracy(pair, table)


class TestReport:
    def test_single_pair_matches_functions(self):
        pair = align(GOLD_SHALOM, PRED_PATAH)
        r = report([pair])
        assert r.dec == decision_accuracy(pair)
        assert r.cha == char_accuracy(pair)
        assert r.wor == word_accuracy(pair)
        assert r.voc == vocalization_accuracy(pair)

    def test_micro_average_pools_counts(self):
        p1 = align(GOLD_SHALOM, PRED_PATAH)        # 9 decisions, 8 right
        p2 = align(GOLD_TWO, GOLD_TWO)             # 12 decisions, all right
        r = report([p1, p2])
        assert r.dec == pytest.approx(20 / 21)
        assert r.dec != pytest.approx((8 / 9 + 1.0) / 2)

    def test_confusion_rows_sum_to_gold_counts(self):
        pair = align(GOLD_SHALOM, PRED_BARE)
        r = report([pair])
        s, d, n = r.confusion
        kamatz = H.LABELS.n_labels.index(H.KAMATZ)
        holam = H.LABELS.n_labels.index(H.HOLAM)
        assert s[1].sum() == 1 and s.sum() == 1          # one shin-dot
        assert d[0].sum() == 4 and d.sum() == 4
        assert n[0].sum() == 2 and n[kamatz].sum() == 1 and n[holam].sum() == 1

    def test_counts_and_sizes(self):
        pair = align(GOLD_SHALOM, PRED_PATAH)
        r = report([pair])
        assert r.counts == (1, 4, 4)
        assert r.word_count == 1 and r.char_count == 4

    def test_permutation_invariant(self):
        rng = np.random.default_rng(7)
        pairs = [AlignedPair(*random_pair(rng)) for _ in range(12)]
        r1 = report(pairs)
        r2 = report(list(reversed(pairs)))
        assert (r1.dec, r1.cha, r1.wor, r1.voc) == (r2.dec, r2.cha, r2.wor, r2.voc)

    def test_empty_raises(self):
        with pytest.raises(EmptyEval):
            report([])

    def test_render_is_json_with_header(self):
        import json
        r = report([align(GOLD_SHALOM, PRED_PATAH)])
        doc = json.loads(r.render())
        assert doc["phoneme_table"] == "modern-israeli-1"
        assert doc["dec"] == round(8 / 9, 6)


class TestOracleEquivalence:
    def test_random_pairs_match_brute_force(self):
        from oracles import brute_metrics
        rng = np.random.default_rng(123)
        for _ in range(300):
            gold, pred = random_pair(rng)
            pair = AlignedPair(gold, pred)
            want = brute_metrics([(gold, pred)])
            assert decision_accuracy(pair) == want["dec"]
            assert char_accuracy(pair) == want["cha"]
            assert word_accuracy(pair) == want["wor"]
            assert vocalization_accuracy(pair) == want["voc"]

    def test_ordering_invariants(self):
        # WOR <= VOC holds for every pair (same denominator, larger
        # numerator); the other orderings hold for pooled sets but can be
        # violated pair-by-pair, see test_ordering_counterexamples.
        rng = np.random.default_rng(321)
        pairs = []
        for _ in range(300):
            pair = AlignedPair(*random_pair(rng))
            pairs.append(pair)
            assert word_accuracy(pair) <= vocalization_accuracy(pair)
        r = report(pairs)
        assert r.wor <= r.voc and r.wor <= r.cha and r.cha <= r.dec


def test_ordering_counterexamples():
    # micro-averaging weights letters by their decision count and words by
    # nothing, so concentration can flip the per-pair orderings: a fully
    # wrong shin (3 decisions) against correct 2-decision letters makes
    # CHA > DEC, and errors concentrated in one long word make WOR > CHA.
    shin_wrong = align("שָׁלַ",
                       "שִּׂלַ")
    assert decision_accuracy(shin_wrong) == pytest.approx(2 / 5)
    assert char_accuracy(shin_wrong) == pytest.approx(1 / 2)
    assert char_accuracy(shin_wrong) > decision_accuracy(shin_wrong)

    long_wrong = align(
        "לַמַד אַ בַ",
        "לִמִדִ אַ בַ",
    )
    assert word_accuracy(long_wrong) == pytest.approx(2 / 3)
    assert char_accuracy(long_wrong) == pytest.approx(2 / 5)
    assert word_accuracy(long_wrong) > char_accuracy(long_wrong)


def test_word_diffs_listing():
    lines = word_diffs([align(GOLD_TWO, PRED_TWO_PATAH)]).splitlines()
    assert len(lines) == 2
    assert lines[0].endswith("ok")
    assert lines[1].endswith("voc-ok")
    gold_col, pred_col, g_ph, p_ph, verdict = lines[1].split("\t")
    assert g_ph == "katan" and p_ph == "katan"
