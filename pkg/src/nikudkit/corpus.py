"""Dotted-text corpus ingestion: manifests, chunking, label statistics.

A corpus is declared by a manifest of UTF-8 lines, one source file per
line, tab-separated::

    path<TAB>era<TAB>include<TAB>split<TAB>name

where era is one of tier1..tier4 (oldest to most modern), include is 0/1
(sources kept in the manifest but excluded from every downstream stage,
e.g. bible text), and split is train/dev/test.  Relative paths resolve
against the manifest's directory.

Chunking splits each file's decomposed text greedily at whitespace into
pieces of at most ``max_len`` characters, so a word is never cut.  Runs of
whitespace between words are normalized to a single space inside a chunk;
Hebrew letters are conserved exactly.
"""

from __future__ import annotations

import os
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .hebrew import LABELS, CodecError, MarkedChar, MarkedText, decompose, is_hebrew_letter

ERAS = ("tier1", "tier2", "tier3", "tier4")
SPLITS = ("train", "dev", "test")


class CorpusError(Exception):
    pass


class MissingFile(CorpusError):
    pass


class ParseError(CorpusError):
    def __init__(self, path: str, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class DuplicatePath(CorpusError):
    pass


class WordTooLong(CorpusError):
    pass


@dataclass(frozen=True)
class SourceEntry:
    path: str
    era: str
    include: bool
    split: str
    name: str


@dataclass(frozen=True, eq=False)
class Chunk:
    """A model-ready piece of one source: bases plus aligned label grids.

    ``labels`` and ``applicable`` have shape (3, len(bases)) with category
    order S, D, N; labels are zero wherever the category is inapplicable.
    """

    bases: str
    labels: np.ndarray
    applicable: np.ndarray
    source: SourceEntry
    char_count: int

    def marked(self) -> MarkedText:
        """Rebuild the gold MarkedText this chunk was cut from."""
        return MarkedText(tuple(
            MarkedChar(b, int(self.labels[0, i]), int(self.labels[1, i]),
                       int(self.labels[2, i]))
            for i, b in enumerate(self.bases)
        ))


def load_manifest(path: str) -> list[SourceEntry]:
    """Parse a manifest file into SourceEntries, in file order.

    Excluded entries (include=0) are kept and flagged; blank lines are
    skipped.  Raises MissingFile, ParseError (with line number) or
    DuplicatePath.
    """
    if not os.path.isfile(path):
        raise MissingFile(f"manifest not found: {path}")
    base_dir = os.path.dirname(os.path.abspath(path))
    entries: list[SourceEntry] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 5:
                raise ParseError(path, line_no,
                                 f"expected 5 tab-separated fields, got {len(fields)}")
            raw_path, era, include, split, name = fields
            if era not in ERAS:
                raise ParseError(path, line_no, f"unknown era {era!r}")
            if include not in ("0", "1"):
                raise ParseError(path, line_no, f"include must be 0 or 1, got {include!r}")
            if split not in SPLITS:
                raise ParseError(path, line_no, f"unknown split {split!r}")
            resolved = raw_path if os.path.isabs(raw_path) else os.path.normpath(
                os.path.join(base_dir, raw_path))
            if resolved in seen:
                raise DuplicatePath(f"{path}:{line_no}: duplicate path {raw_path!r}")
            seen.add(resolved)
            entries.append(SourceEntry(resolved, era, include == "1", split, name))
    return entries


def _chunk_from_words(words: list[list[MarkedChar]], source: SourceEntry) -> Chunk:
    chars: list[MarkedChar] = []
    space = MarkedChar(" ")
    for i, word in enumerate(words):
        if i:
            chars.append(space)
        chars.extend(word)
    bases = "".join(mc.base for mc in chars)
    n = len(chars)
    labels = np.zeros((3, n), dtype=np.int64)
    applicable = np.zeros((3, n), dtype=bool)
    for i, mc in enumerate(chars):
        labels[:, i] = (mc.s, mc.d, mc.n)
        applicable[:, i] = LABELS.applicability(mc.base)
    return Chunk(bases, labels, applicable, source,
                 sum(is_hebrew_letter(b) for b in bases))


def _text_words(marked: MarkedText) -> list[list[MarkedChar]]:
    words: list[list[MarkedChar]] = []
    current: list[MarkedChar] = []
    for mc in marked:
        if mc.base.isspace():
            if current:
                words.append(current)
                current = []
        else:
            current.append(mc)
    if current:
        words.append(current)
    return words


def _file_words(entry: SourceEntry) -> list[list[MarkedChar]]:
    if not os.path.isfile(entry.path):
        raise MissingFile(f"source not found: {entry.path}")
    with open(entry.path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        marked = decompose(text)
    except CodecError as e:
        raise type(e)(f"{entry.path}: {e}") from None
    return _text_words(marked)


def _pack_words(words, max_len: int, entry: SourceEntry,
                where: str) -> list[Chunk]:
    chunks: list[Chunk] = []
    pending: list[list[MarkedChar]] = []
    pending_len = 0
    for word in words:
        if len(word) > max_len:
            raise WordTooLong(
                f"{where}: {len(word)}-char run exceeds max_len={max_len}")
        needed = len(word) if not pending else pending_len + 1 + len(word)
        if needed > max_len:
            chunks.append(_chunk_from_words(pending, entry))
            pending, pending_len = [word], len(word)
        else:
            pending.append(word)
            pending_len = needed
    if pending:
        chunks.append(_chunk_from_words(pending, entry))
    return chunks


INLINE_SOURCE = SourceEntry("<memory>", "tier4", True, "train", "inline")


def chunks_from_text(text: str, max_len: int = 512,
                     source: SourceEntry = INLINE_SOURCE) -> list[Chunk]:
    """Chunk an in-memory dotted string the same way build_chunks does."""
    return _pack_words(_text_words(decompose(text)), max_len, source, "<text>")


def build_chunks(entries, max_len: int = 512) -> list[Chunk]:
    """Cut every included source into word-aligned chunks of <= max_len.

    Entries flagged include=0 are skipped.  Raises WordTooLong if a single
    whitespace-free run exceeds max_len; codec errors carry the file path.
    """
    if max_len < 1:
        raise ValueError("max_len must be positive")
    chunks: list[Chunk] = []
    for entry in entries:
        if not entry.include:
            continue
        chunks.extend(_pack_words(_file_words(entry), max_len, entry, entry.path))
    return chunks


def label_distribution(chunks) -> tuple[dict[int, int], dict[int, int], dict[int, int]]:
    """Label counts per category over applicable positions only."""
    counters = (Counter(), Counter(), Counter())
    for chunk in chunks:
        for c in range(3):
            idx = chunk.labels[c][chunk.applicable[c]]
            for lab, cnt in zip(*np.unique(idx, return_counts=True)):
                counters[c][int(lab)] += int(cnt)
    return tuple(dict(ctr) for ctr in counters)


def tier_partition(chunks) -> list[list[Chunk]]:
    """Group chunks by source era, ordered tier1 (oldest) to tier4 (modern).

    Groups are disjoint and cover all given chunks; a tier may be empty.
    """
    groups: list[list[Chunk]] = [[] for _ in ERAS]
    order = {era: i for i, era in enumerate(ERAS)}
    for chunk in chunks:
        groups[order[chunk.source.era]].append(chunk)
    return groups
