"""Accuracy metrics between gold and predicted dotted texts.

Four metrics, all micro-averaged over the evaluation set:

* DEC -- fraction of individual (position, category) decisions that match,
  counted only where the category is applicable.
* CHA -- fraction of Hebrew letters whose applicable decisions all match.
* WOR -- fraction of words (maximal runs of letters with applicable
  decisions) with no mistake at all.
* VOC -- fraction of words whose mistakes, if any, leave the pronunciation
  unchanged under a configurable phoneme table.

The orderings WOR <= VOC, WOR <= CHA and CHA <= DEC follow from these
definitions.  Alignment is strict: gold and prediction must share the exact
base-character sequence, insertions and deletions are not bridged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import hebrew
from .hebrew import LABELS, MarkedChar, MarkedText, decompose


class MetricsError(ValueError):
    pass


class BaseMismatch(MetricsError):
    """Gold and prediction diverge in their base-character sequences."""

    def __init__(self, offset: int, gold: str, pred: str):
        self.offset = offset
        super().__init__(
            f"base mismatch at offset {offset}: gold {gold!r} vs pred {pred!r}"
        )


class MissingTableEntry(MetricsError):
    pass


class EmptyEval(MetricsError):
    pass


@dataclass(frozen=True)
class AlignedPair:
    """A gold/prediction pairing over one shared base sequence."""

    gold: MarkedText
    pred: MarkedText

    def __post_init__(self):
        _check_bases(self.gold, self.pred)

    def __len__(self) -> int:
        return len(self.gold)


def _check_bases(gold: MarkedText, pred: MarkedText):
    for i, (g, p) in enumerate(zip(gold, pred)):
        if g.base != p.base:
            raise BaseMismatch(i, g.base, p.base)
    if len(gold) != len(pred):
        off = min(len(gold), len(pred))
        raise BaseMismatch(off, gold.bases[off:off + 1], pred.bases[off:off + 1])


def align(gold_text: str, pred_text: str) -> AlignedPair:
    """Parse two dotted strings and pair their positions one-to-one."""
    return AlignedPair(decompose(gold_text), decompose(pred_text))


@dataclass(frozen=True)
class PhonemeTable:
    """Maps marked characters to phoneme strings for the VOC metric.

    ``consonant_map`` is keyed by (base, S-index, D-index) and must cover
    every applicable combination; ``vowel_map`` is keyed by N-index.  Two
    vav rules sit on top of the maps: vav + dagesh with no vowel reads "u"
    (shuruk) and vav + holam reads "o".
    """

    version: str
    vowel_map: dict[int, str]
    consonant_map: dict[tuple[str, int, int], str]

    def phoneme(self, mc: MarkedChar) -> str:
        if mc.base == hebrew.VAV and mc.d == 1 and mc.n == 0:
            return "u"
        if mc.base == hebrew.VAV and LABELS.n_labels[mc.n] == hebrew.HOLAM:
            return "o"
        try:
            cons = self.consonant_map[(mc.base, mc.s, mc.d)]
        except KeyError:
            raise MissingTableEntry(
                f"no consonant entry for (base={mc.base!r}, s={mc.s}, d={mc.d})"
            ) from None
        try:
            vowel = self.vowel_map[mc.n]
        except KeyError:
            raise MissingTableEntry(f"no vowel entry for n={mc.n}") from None
        return cons + vowel


def _default_phoneme_table() -> PhonemeTable:
    a, e, i, o, u, schwa = "a", "e", "i", "o", "u", "ə"
    vowel_names = dict(zip(LABELS.n_names, range(len(LABELS.n_names))))
    vowels = {
        vowel_names["none"]: "",
        vowel_names["sheva"]: schwa,
        vowel_names["hataf-segol"]: e,
        vowel_names["hataf-patah"]: a,
        vowel_names["hataf-kamatz"]: o,
        vowel_names["hiriq"]: i,
        vowel_names["tsere"]: e,
        vowel_names["segol"]: e,
        vowel_names["patah"]: a,
        vowel_names["kamatz"]: a,
        vowel_names["holam"]: o,
        vowel_names["kubutz"]: u,
    }
    hard_soft = {"ב": ("b", "v"), "כ": ("k", "x"), "ך": ("k", "x"),
                 "פ": ("p", "f"), "ף": ("p", "f")}
    # one fixed symbol per remaining letter; collisions between different
    # letters are safe because aligned pairs share their base sequence
    plain = {
        "א": "ʔ", "ג": "g", "ד": "d", "ה": "h", "ו": "v", "ז": "z",
        "ח": "x", "ט": "t", "י": "y", "ל": "l", "מ": "m", "ם": "m",
        "נ": "n", "ן": "n", "ס": "s", "ע": "ʔ", "צ": "ts", "ץ": "ts",
        "ק": "k", "ר": "r", "ת": "t",
    }
    consonants: dict[tuple[str, int, int], str] = {}
    for cp in range(hebrew.ALEF, hebrew.TAV + 1):
        base = chr(cp)
        s_indices = range(3) if base == hebrew.SHIN else (0,)
        for s in s_indices:
            for d in (0, 1):
                if base == hebrew.SHIN:
                    sym = "s" if s == 2 else "ʃ"
                elif base in hard_soft:
                    sym = hard_soft[base][0 if d == 1 else 1]
                else:
                    # dagesh leaves the reading of these letters unchanged
                    sym = plain[base]
                consonants[(base, s, d)] = sym
    return PhonemeTable("modern-israeli-1", vowels, consonants)


DEFAULT_PHONEMES = _default_phoneme_table()


def _word_spans(pair: AlignedPair) -> list[tuple[int, int]]:
    """Maximal [start, end) runs of positions with applicable decisions."""
    spans = []
    start = None
    for i, mc in enumerate(pair.gold):
        if any(LABELS.applicability(mc.base)):
            if start is None:
                start = i
        elif start is not None:
            spans.append((start, i))
            start = None
    if start is not None:
        spans.append((start, len(pair.gold)))
    return spans


def _char_correct(g: MarkedChar, p: MarkedChar) -> bool:
    flags = LABELS.applicability(g.base)
    g_lab, p_lab = (g.s, g.d, g.n), (p.s, p.d, p.n)
    return all(g_lab[c] == p_lab[c] for c in range(3) if flags[c])


def decision_accuracy(pair: AlignedPair) -> float:
    """Fraction of applicable (position, category) slots predicted right."""
    num = den = 0
    for g, p in zip(pair.gold, pair.pred):
        flags = LABELS.applicability(g.base)
        g_lab, p_lab = (g.s, g.d, g.n), (p.s, p.d, p.n)
        for c in range(3):
            if flags[c]:
                den += 1
                num += g_lab[c] == p_lab[c]
    return num / den if den else 1.0


def char_accuracy(pair: AlignedPair) -> float:
    """Fraction of Hebrew letters with every applicable decision right."""
    num = den = 0
    for g, p in zip(pair.gold, pair.pred):
        if any(LABELS.applicability(g.base)):
            den += 1
            num += _char_correct(g, p)
    return num / den if den else 1.0


def word_accuracy(pair: AlignedPair) -> float:
    """Fraction of words with no diacritization mistake."""
    spans = _word_spans(pair)
    if not spans:
        return 1.0
    good = sum(
        all(_char_correct(pair.gold[i], pair.pred[i]) for i in range(a, b))
        for a, b in spans
    )
    return good / len(spans)


def _word_phonemes(marked: MarkedText, span: tuple[int, int],
                   table: PhonemeTable) -> str:
    a, b = span
    return "".join(table.phoneme(marked[i]) for i in range(a, b))


def vocalization_accuracy(pair: AlignedPair,
                          table: PhonemeTable = DEFAULT_PHONEMES) -> float:
    """Fraction of words whose gold and predicted pronunciations agree."""
    spans = _word_spans(pair)
    if not spans:
        return 1.0
    good = sum(
        _word_phonemes(pair.gold, s, table) == _word_phonemes(pair.pred, s, table)
        for s in spans
    )
    return good / len(spans)


@dataclass
class EvalReport:
    """Pooled metric values plus per-category confusion matrices."""

    dec: float
    cha: float
    wor: float
    voc: float
    counts: tuple[int, int, int]          # applicable slots per category
    confusion: tuple[np.ndarray, np.ndarray, np.ndarray]  # gold row, pred col
    word_count: int
    char_count: int
    phoneme_table: str = DEFAULT_PHONEMES.version
    notes: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "phoneme_table": self.phoneme_table,
            "dec": round(self.dec, 6),
            "cha": round(self.cha, 6),
            "wor": round(self.wor, 6),
            "voc": round(self.voc, 6),
            "counts": {"S": self.counts[0], "D": self.counts[1],
                       "N": self.counts[2]},
            "word_count": self.word_count,
            "char_count": self.char_count,
            "confusion": {
                "SDN"[c]: self.confusion[c].tolist() for c in range(3)
            },
            "notes": self.notes,
        }

    def render(self) -> str:
        return json.dumps(self.as_dict(), ensure_ascii=False, indent=2)


def report(pairs, table: PhonemeTable = DEFAULT_PHONEMES) -> EvalReport:
    """Micro-average the four metrics over a pair sequence.

    Numerators and denominators are pooled across pairs (not averaged per
    pair), so pairs of different lengths weigh by their own decision, char
    and word counts.
    """
    pairs = list(pairs)
    if not pairs:
        raise EmptyEval("no aligned pairs to score")
    k = LABELS.sizes
    confusion = tuple(np.zeros((k[c], k[c]), dtype=np.int64) for c in range(3))
    dec = np.zeros(2, dtype=np.int64)   # num, den
    cha = np.zeros(2, dtype=np.int64)
    wor = np.zeros(2, dtype=np.int64)
    voc = np.zeros(2, dtype=np.int64)
    for pair in pairs:
        for g, p in zip(pair.gold, pair.pred):
            flags = LABELS.applicability(g.base)
            g_lab, p_lab = (g.s, g.d, g.n), (p.s, p.d, p.n)
            for c in range(3):
                if flags[c]:
                    confusion[c][g_lab[c], p_lab[c]] += 1
                    dec += (g_lab[c] == p_lab[c], 1)
            if any(flags):
                cha += (_char_correct(g, p), 1)
        for span in _word_spans(pair):
            ok = all(
                _char_correct(pair.gold[i], pair.pred[i])
                for i in range(*span)
            )
            same_ph = (_word_phonemes(pair.gold, span, table)
                       == _word_phonemes(pair.pred, span, table))
            wor += (ok, 1)
            voc += (same_ph, 1)

    def frac(pair_counts):
        num, den = pair_counts
        return float(num) / float(den) if den else 1.0

    return EvalReport(
        dec=frac(dec), cha=frac(cha), wor=frac(wor), voc=frac(voc),
        counts=tuple(int(m.sum()) for m in confusion),
        confusion=confusion,
        word_count=int(wor[1]),
        char_count=int(cha[1]),
        phoneme_table=table.version,
    )


def word_diffs(pairs, table: PhonemeTable = DEFAULT_PHONEMES) -> str:
    """Human-readable per-word listing: gold, pred, phonemes, verdict."""
    lines = []
    for pair in pairs:
        for span in _word_spans(pair):
            a, b = span
            g_txt = hebrew.compose(MarkedText(pair.gold.chars[a:b]))
            p_txt = hebrew.compose(MarkedText(pair.pred.chars[a:b]))
            g_ph = _word_phonemes(pair.gold, span, table)
            p_ph = _word_phonemes(pair.pred, span, table)
            exact = all(
                _char_correct(pair.gold[i], pair.pred[i]) for i in range(a, b)
            )
            verdict = "ok" if exact else ("voc-ok" if g_ph == p_ph else "wrong")
            lines.append(f"{g_txt}\t{p_txt}\t{g_ph}\t{p_ph}\t{verdict}")
    return "\n".join(lines)
