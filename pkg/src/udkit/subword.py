"""Wordpiece segmentation, first-piece selection and sliding windows."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

CONTINUATION = "##"
UNK, MASK, START, END = "[UNK]", "[MASK]", "[CLS]", "[SEP]"
SPECIALS = (UNK, MASK, START, END)
MAX_CHARS_PER_WORD = 100


class SubwordVocab:
    """Immutable piece<->id table. Ids are line numbers of the vocab file."""

    def __init__(self, pieces: Sequence[str]):
        self.pieces = tuple(pieces)
        self.index = {p: i for i, p in enumerate(self.pieces)}
        if len(self.index) != len(self.pieces):
            raise ValueError("vocabulary contains duplicate pieces")
        missing = [p for p in SPECIALS if p not in self.index]
        if missing:
            raise ValueError(f"vocabulary lacks special pieces {missing}")
        self.unk_id = self.index[UNK]
        self.mask_id = self.index[MASK]
        self.start_id = self.index[START]
        self.end_id = self.index[END]

    def __len__(self) -> int:
        return len(self.pieces)

    def __contains__(self, piece: str) -> bool:
        return piece in self.index

    @property
    def special_ids(self) -> frozenset[int]:
        return frozenset((self.unk_id, self.mask_id, self.start_id, self.end_id))

    @classmethod
    def load(cls, path) -> "SubwordVocab":
        with open(path, encoding="utf-8") as f:
            return cls([line.rstrip("\r\n") for line in f])

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.writelines(p + "\n" for p in self.pieces)


def build_vocab(words: Iterable[str], min_count: int = 1) -> SubwordVocab:
    """Toy vocabulary for from-scratch runs: specials, every character in both
    initial and continuation form, and every word seen at least ``min_count`` times."""
    counts = Counter(words)
    chars = sorted({c for w in counts for c in w})
    pieces = list(SPECIALS)
    pieces += chars
    pieces += [CONTINUATION + c for c in chars]
    seen = set(pieces)
    for w, n in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])):
        if n >= min_count and len(w) > 1 and w not in seen:
            pieces.append(w)
            seen.add(w)
    return SubwordVocab(pieces)


def tokenize_word(word: str, vocab: SubwordVocab) -> list[str]:
    if len(word) > MAX_CHARS_PER_WORD:
        return [UNK]
    pieces = []
    start = 0
    while start < len(word):
        end = len(word)
        found = None
        while start < end:
            piece = word[start:end]
            if start > 0:
                piece = CONTINUATION + piece
            if piece in vocab.index:
                found = piece
                break
            end -= 1
        if found is None:
            return [UNK]
        pieces.append(found)
        start = end
    return pieces


@dataclass(frozen=True)
class Window:
    start: int
    end: int
    keep_start: int
    keep_end: int


def window_long_sequence(length: int, max_len: int = 512, overlap: int = 256) -> list[Window]:
    """Split ``[0, length)`` into windows of at most ``max_len`` advancing by
    ``max_len - overlap``. Each window keeps its first ``max_len - overlap``
    positions; the last window keeps everything it has left."""
    if not max_len > overlap > 0:
        raise ValueError(f"need max_len > overlap > 0, got max_len={max_len}, overlap={overlap}")
    if length < 0:
        raise ValueError("negative sequence length")
    if length <= max_len:
        return [Window(0, length, 0, length)]
    stride = max_len - overlap
    windows = []
    start = 0
    while True:
        end = min(start + max_len, length)
        if end == length:
            windows.append(Window(start, end, start, end))
            return windows
        windows.append(Window(start, end, start, start + stride))
        start += stride


def recombine_windows(vectors, plan: Sequence[Window], concat=np.concatenate):
    """Stitch per-window outputs back into one per-position sequence."""
    if len(vectors) != len(plan):
        raise ValueError(f"{len(vectors)} window outputs for a plan of {len(plan)} windows")
    parts = []
    for vec, w in zip(vectors, plan):
        if len(vec) != w.end - w.start:
            raise ValueError(
                f"window [{w.start}, {w.end}) expects {w.end - w.start} rows, got {len(vec)}"
            )
        parts.append(vec[w.keep_start - w.start : w.keep_end - w.start])
    return parts[0] if len(parts) == 1 else concat(parts)


@dataclass(frozen=True)
class Segmentation:
    piece_ids: tuple[int, ...]
    first_piece_index: tuple[int, ...]
    window_plan: tuple[Window, ...] = field(default=())

    @property
    def content_ids(self) -> tuple[int, ...]:
        return self.piece_ids[1:-1]


def segment_sentence(
    words: Sequence[str], vocab: SubwordVocab, max_len: int = 512, overlap: int = 256
) -> Segmentation:
    """Wordpiece a sentence and wrap it in start/end pieces.

    ``first_piece_index`` indexes into ``piece_ids``. When the sequence does
    not fit in ``max_len`` the word pieces (without the two specials) are
    windowed at ``max_len - 2`` so every window plus its own start/end
    pieces still fits.
    """
    if not words:
        raise ValueError("cannot segment an empty sentence")
    ids = [vocab.start_id]
    first = []
    for w in words:
        first.append(len(ids))
        ids.extend(vocab.index[p] for p in tokenize_word(w, vocab))
    ids.append(vocab.end_id)
    plan: tuple[Window, ...] = ()
    if len(ids) > max_len:
        plan = tuple(window_long_sequence(len(ids) - 2, max_len - 2, overlap))
    return Segmentation(tuple(ids), tuple(first), plan)
