"""Walkthrough of the dotted-text codec.

Hebrew diacritics ride on base letters as combining marks.  The codec
splits dotted text into one record per base character with three label
slots (shin/sin dot, dagesh, vowel point) and composes back losslessly.
"""

from nikudkit.hebrew import (
    applicability, canonicalize, compose, decompose, strip_marks,
)

SHALOM = "שָׁלוֹם"  # שָׁלוֹם

print("input:", SHALOM)
marked = decompose(SHALOM)
for mc in marked:
    print(f"  base {mc.base}  s={mc.s} d={mc.d} n={mc.n}  "
          f"applicable={applicability(mc.base)}")

print("round trip:", compose(marked) == SHALOM)
print("stripped:", strip_marks(SHALOM))

# mark order in the input does not matter; canonical form is fixed
scrambled = "שָׁ"  # shin, shin-dot, kamatz
print("canonicalize reorders marks:", list(canonicalize(scrambled)))

# one plain skeleton, four valid dotted readings
forms = [
    "בְּצֵלָם",
    "בִּצְלָם",
    "בְּצִלָּם",
    "בַּצֵּלָם",
]
print("four dottings of one skeleton:")
for f in forms:
    print("  ", f, "->", strip_marks(f))
