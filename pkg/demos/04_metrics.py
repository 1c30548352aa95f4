"""The four evaluation metrics, on a worked single-word example.

DEC counts individual mark decisions, CHA whole characters, WOR whole
words, and VOC words up to pronunciation: swapping kamatz for patah is a
DEC/CHA/WOR error but not a VOC error because both read as "a".
"""

from nikudkit.metrics import (
    align, char_accuracy, decision_accuracy, report,
    vocalization_accuracy, word_accuracy, word_diffs,
)

gold = "שָׁלוֹם"   # שָׁלוֹם
patah = "שַׁלוֹם"  # patah instead of kamatz
hiriq = "שִׁלוֹם"  # hiriq instead of kamatz

for name, pred in [("patah-for-kamatz", patah), ("hiriq-for-kamatz", hiriq)]:
    pair = align(gold, pred)
    print(f"{name}:")
    print(f"  DEC {decision_accuracy(pair):.6f}")
    print(f"  CHA {char_accuracy(pair):.6f}")
    print(f"  WOR {word_accuracy(pair):.6f}")
    print(f"  VOC {vocalization_accuracy(pair):.6f}")

pair = align(gold, patah)
print("\nfull report document:")
print(report([pair]).render())
print("\nper-word diff (gold, pred, phonemes, verdict):")
print(word_diffs([pair]))
