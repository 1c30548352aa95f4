"""Lossless conversion between dotted Hebrew text and aligned label streams.

Hebrew diacritics are split into three per-letter categories:

* S -- the shin/sin dot (upper-right vs upper-left) that distinguishes the
  two readings of the base letter shin; meaningful only on that letter.
* D -- the dagesh/mapiq/shuruk dot inside a letter.
* N -- the remaining vocalization points (sheva, the hataf vowels, hiriq,
  tsere, segol, patah, kamatz, holam, kubutz).

A dotted string is decomposed into one ``MarkedChar`` per base character,
carrying one label index from each category (index 0 is always "no mark").
``compose`` is the exact inverse on canonical text: marks are re-emitted in
ascending canonical-combining-class order, which makes composed output a
fixed point of ``canonicalize``.

Canonicalization strips marks outside the label scheme (cantillation, meteg,
rafe, the upper/lower puncta) and folds the two point variants that modern
corpora use inconsistently: kamatz-katan into kamatz and holam-haser-for-vav
into holam.  Hebrew punctuation in the same Unicode block (maqaf, paseq, sof
pasuq, nun hafukha) consists of base characters and passes through untouched.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass

# Vocalization points (category N), ascending codepoint order.
SHEVA = "ְ"
HATAF_SEGOL = "ֱ"
HATAF_PATAH = "ֲ"
HATAF_KAMATZ = "ֳ"
HIRIQ = "ִ"
TSERE = "ֵ"
SEGOL = "ֶ"
PATAH = "ַ"
KAMATZ = "ָ"
HOLAM = "ֹ"
KUBUTZ = "ֻ"

DAGESH = "ּ"       # category D
SHIN_DOT = "ׁ"     # category S
SIN_DOT = "ׂ"

# Folded into the inventory above during canonicalization.
HOLAM_HASER_FOR_VAV = "ֺ"
KAMATZ_KATAN = "ׇ"

# Stripped during canonicalization: liturgical / editorial marks that the
# label scheme does not model.
METEG = "ֽ"
RAFE = "ֿ"
UPPER_DOT = "ׄ"
LOWER_DOT = "ׅ"
CANTILLATION = frozenset(chr(cp) for cp in range(0x0591, 0x05B0))

_STRIPPED = CANTILLATION | {METEG, RAFE, UPPER_DOT, LOWER_DOT}
_FOLDED = {KAMATZ_KATAN: KAMATZ, HOLAM_HASER_FOR_VAV: HOLAM}

ALEF = 0x05D0
TAV = 0x05EA
SHIN = "ש"
VAV = "ו"

FINAL_LETTERS = frozenset("ךםןףץ")


def is_hebrew_letter(ch: str) -> bool:
    """True for the 27 base letters alef..tav, final forms included."""
    return len(ch) == 1 and ALEF <= ord(ch) <= TAV


class CodecError(ValueError):
    """Base class for text <-> label-stream conversion failures."""


class DanglingMark(CodecError):
    """A Hebrew point occurred with no preceding base character."""


class DuplicateMark(CodecError):
    """Two points of the same category attached to one base character."""


class InvalidLabel(CodecError):
    """A non-none label on a base character that cannot carry it."""


@dataclass(frozen=True)
class LabelSpec:
    """The single home of the S/D/N label scheme.

    Each category is an ordered tuple of mark codepoints whose index 0 is
    the empty string, meaning "no mark of this category".
    """

    s_labels: tuple[str, ...] = ("", SHIN_DOT, SIN_DOT)
    d_labels: tuple[str, ...] = ("", DAGESH)
    n_labels: tuple[str, ...] = (
        "", SHEVA, HATAF_SEGOL, HATAF_PATAH, HATAF_KAMATZ, HIRIQ,
        TSERE, SEGOL, PATAH, KAMATZ, HOLAM, KUBUTZ,
    )
    s_names: tuple[str, ...] = ("none", "shin-dot", "sin-dot")
    d_names: tuple[str, ...] = ("none", "dagesh")
    n_names: tuple[str, ...] = (
        "none", "sheva", "hataf-segol", "hataf-patah", "hataf-kamatz",
        "hiriq", "tsere", "segol", "patah", "kamatz", "holam", "kubutz",
    )

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.s_labels), len(self.d_labels), len(self.n_labels)

    def labels(self, category: int) -> tuple[str, ...]:
        return (self.s_labels, self.d_labels, self.n_labels)[category]

    def names(self, category: int) -> tuple[str, ...]:
        return (self.s_names, self.d_names, self.n_names)[category]

    def applicability(self, base: str) -> tuple[bool, bool, bool]:
        """Per-category (S, D, N) applicability flags for one character.

        S only on shin; D and N on every Hebrew base letter; nothing on
        non-Hebrew characters.
        """
        if not is_hebrew_letter(base):
            return (False, False, False)
        return (base == SHIN, True, True)


LABELS = LabelSpec()

# mark codepoint -> (category 0/1/2, label index); only canonical marks.
_POINT_SLOT: dict[str, tuple[int, int]] = {}
for _cat in range(3):
    for _idx, _cp in enumerate(LABELS.labels(_cat)):
        if _cp:
            _POINT_SLOT[_cp] = (_cat, _idx)


def applicability(base: str) -> tuple[bool, bool, bool]:
    """(S, D, N) applicability of the default label scheme for one char."""
    return LABELS.applicability(base)


@dataclass(frozen=True)
class MarkedChar:
    """One base character plus one label index per category."""

    base: str
    s: int = 0
    d: int = 0
    n: int = 0

    def __post_init__(self):
        k_s, k_d, k_n = LABELS.sizes
        if not (0 <= self.s < k_s and 0 <= self.d < k_d and 0 <= self.n < k_n):
            raise InvalidLabel(
                f"label index out of range for {self.base!r}: "
                f"s={self.s} d={self.d} n={self.n}"
            )
        ok = LABELS.applicability(self.base)
        for cat, idx in enumerate((self.s, self.d, self.n)):
            if idx != 0 and not ok[cat]:
                raise InvalidLabel(
                    f"category {'SDN'[cat]} label on inapplicable base "
                    f"{self.base!r} (U+{ord(self.base):04X})"
                )

    @property
    def marks(self) -> str:
        """This character's marks in canonical (ccc-ascending) order."""
        points = [
            LABELS.labels(cat)[idx]
            for cat, idx in enumerate((self.s, self.d, self.n))
            if idx != 0
        ]
        return "".join(sorted(points, key=unicodedata.combining))


@dataclass(frozen=True)
class MarkedText:
    """An ordered sequence of MarkedChars; the parsed form of dotted text."""

    chars: tuple[MarkedChar, ...]

    def __len__(self) -> int:
        return len(self.chars)

    def __iter__(self):
        return iter(self.chars)

    def __getitem__(self, i) -> MarkedChar:
        return self.chars[i]

    @property
    def bases(self) -> str:
        return "".join(mc.base for mc in self.chars)


def canonicalize(text: str) -> str:
    """Normalize a string to the codec's canonical mark form.

    Drops cantillation, meteg, rafe, and the upper/lower puncta; folds
    kamatz-katan to kamatz and holam-haser-for-vav to holam; sorts every run
    of combining characters ascending by canonical combining class (stable).
    Idempotent, and total over arbitrary text.
    """
    out: list[str] = []
    run: list[str] = []

    def flush():
        if run:
            out.extend(sorted(run, key=unicodedata.combining))
            run.clear()

    for ch in text:
        if ch in _STRIPPED:
            continue
        ch = _FOLDED.get(ch, ch)
        if unicodedata.combining(ch):
            run.append(ch)
        else:
            flush()
            out.append(ch)
    flush()
    return "".join(out)


def decompose(text: str) -> MarkedText:
    """Parse dotted text into aligned (base, S, D, N) streams.

    The input is canonicalized first.  Every Hebrew point attaches to the
    nearest preceding base character; all other characters (Hebrew letters,
    punctuation, foreign text) become bases with all-none labels.

    Raises DanglingMark for a point with no preceding base, DuplicateMark
    when two points of one category land on the same base, and InvalidLabel
    for a point on a base that cannot carry it (e.g. a shin dot on lamed,
    or any point on a non-Hebrew character).
    """
    text = canonicalize(text)
    bases: list[str] = []
    slots: list[list[int]] = []
    for offset, ch in enumerate(text):
        hit = _POINT_SLOT.get(ch)
        if hit is None:
            bases.append(ch)
            slots.append([0, 0, 0])
            continue
        cat, idx = hit
        if not bases:
            raise DanglingMark(
                f"point U+{ord(ch):04X} at offset {offset} has no base"
            )
        if not LABELS.applicability(bases[-1])[cat]:
            raise InvalidLabel(
                f"point U+{ord(ch):04X} at offset {offset} not applicable "
                f"to base {bases[-1]!r}"
            )
        if slots[-1][cat] != 0:
            raise DuplicateMark(
                f"second category-{'SDN'[cat]} point at offset {offset} "
                f"on base {bases[-1]!r}"
            )
        slots[-1][cat] = idx
    return MarkedText(tuple(
        MarkedChar(b, s, d, n) for b, (s, d, n) in zip(bases, slots)
    ))


def compose(marked: MarkedText) -> str:
    """Emit dotted text: each base followed by its marks in canonical order.

    The output is a fixed point of ``canonicalize`` and re-parses to an
    identical MarkedText.  Label validity is enforced by MarkedChar itself,
    so any value of this type composes cleanly.
    """
    return "".join(mc.base + mc.marks for mc in marked)


def strip_marks(text: str) -> str:
    """The base-character sequence of ``decompose(text)``: text minus marks."""
    return decompose(text).bases
