"""Seeded random generators and fixtures shared by the test suites."""

import numpy as np

from nikudkit.hebrew import ALEF, TAV, MarkedChar, MarkedText, applicability


def write_manifest(tmp_path, rows):
    """Materialize (name, era, include, split, text) rows as files plus a
    manifest; returns the manifest path."""
    lines = []
    for name, era, include, split, text in rows:
        src = tmp_path / f"{name}.txt"
        src.write_text(text, encoding="utf-8")
        lines.append(f"{name}.txt\t{era}\t{include}\t{split}\t{name}")
    mpath = tmp_path / "manifest.tsv"
    mpath.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(mpath)

BASES = [chr(cp) for cp in range(ALEF, TAV + 1)] + list("ab .,-!?123")


def random_marked_char(rng: np.random.Generator, base=None) -> MarkedChar:
    if base is None:
        base = BASES[rng.integers(len(BASES))]
    s_ok, d_ok, n_ok = applicability(base)
    return MarkedChar(
        base,
        int(rng.integers(3)) if s_ok else 0,
        int(rng.integers(2)) if d_ok else 0,
        int(rng.integers(12)) if n_ok else 0,
    )


def random_marked_text(rng: np.random.Generator, max_len=24) -> MarkedText:
    n = int(rng.integers(0, max_len + 1))
    return MarkedText(tuple(random_marked_char(rng) for _ in range(n)))


def random_pair(rng: np.random.Generator, max_len=24):
    """A (gold, pred) MarkedText pair over one base sequence.

    The prediction keeps each gold label with probability 1/2 and redraws
    it otherwise, so pairs mix easy and hard words.
    """
    gold = random_marked_text(rng, max_len)
    pred = []
    for mc in gold:
        if rng.random() < 0.5:
            pred.append(mc)
        else:
            pred.append(random_marked_char(rng, base=mc.base))
    return gold, MarkedText(tuple(pred))
