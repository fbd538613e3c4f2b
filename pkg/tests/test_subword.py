import numpy as np
import pytest
from hypothesis import given, strategies as st

from udkit.subword import (
    CONTINUATION,
    SPECIALS,
    UNK,
    SubwordVocab,
    Window,
    build_vocab,
    recombine_windows,
    segment_sentence,
    tokenize_word,
    window_long_sequence,
)

VOCAB = SubwordVocab(list(SPECIALS) + ["un", "##aff", "##able", "aff", "a", "##a", "##b", "b", "##ble"])


@pytest.mark.parametrize(
    "word, pieces",
    [
        ("unaffable", ["un", "##aff", "##able"]),
        ("affable", ["aff", "##able"]),
        ("ab", ["a", "##b"]),
        ("xyz", [UNK]),
        ("unx", [UNK]),
        ("a" * 101, [UNK]),
    ],
)
def test_greedy_longest_match(word, pieces):
    assert tokenize_word(word, VOCAB) == pieces


def test_vocab_requires_specials_and_unique_pieces():
    with pytest.raises(ValueError):
        SubwordVocab(["a", "b"])
    with pytest.raises(ValueError):
        SubwordVocab(list(SPECIALS) + ["a", "a"])


def test_vocab_file_round_trip(tmp_path):
    path = tmp_path / "vocab.txt"
    VOCAB.save(path)
    assert SubwordVocab.load(path).pieces == VOCAB.pieces


def test_first_piece_indices():
    seg = segment_sentence(["unaffable", "ab", "b"], VOCAB)
    ids = VOCAB.index
    assert seg.piece_ids == (
        VOCAB.start_id, ids["un"], ids["##aff"], ids["##able"], ids["a"], ids["##b"], ids["b"], VOCAB.end_id
    )
    assert seg.first_piece_index == (1, 4, 6)
    assert seg.window_plan == ()


def test_long_sentence_gets_a_plan():
    seg = segment_sentence(["ab"] * 300, VOCAB, max_len=512, overlap=256)
    assert len(seg.piece_ids) == 602
    assert seg.window_plan[0] == Window(0, 510, 0, 254)
    assert seg.window_plan[-1].keep_end == 600


words = st.text(alphabet="abcdé", min_size=1, max_size=12)


@given(st.lists(words, min_size=1, max_size=30))
def test_built_vocab_never_needs_unk(sentence):
    vocab = build_vocab(sentence)
    for w in sentence:
        pieces = tokenize_word(w, vocab)
        assert UNK not in pieces
        assert "".join(p.removeprefix(CONTINUATION) for p in pieces) == w
        assert all(p.startswith(CONTINUATION) for p in pieces[1:])


@given(st.integers(1, 3000), st.integers(2, 64), st.data())
def test_windows_partition(length, max_len, data):
    overlap = data.draw(st.integers(1, max_len - 1))
    plan = window_long_sequence(length, max_len, overlap)
    covered = np.zeros(length, dtype=int)
    for w in plan:
        assert 0 <= w.start <= w.keep_start < w.keep_end <= w.end <= length
        assert w.end - w.start <= max_len
        covered[w.keep_start : w.keep_end] += 1
    assert (covered == 1).all()


def test_window_arguments_checked():
    for bad in [(10, 4, 4), (10, 4, 0), (-1, 4, 2)]:
        with pytest.raises(ValueError):
            window_long_sequence(bad[0], bad[1], bad[2])


@given(st.integers(1, 200), st.integers(3, 20), st.data())
def test_recombine_restores_positions(length, max_len, data):
    overlap = data.draw(st.integers(1, max_len - 1))
    plan = window_long_sequence(length, max_len, overlap)
    seq = np.arange(length)
    outs = [seq[w.start : w.end] for w in plan]
    np.testing.assert_array_equal(recombine_windows(outs, plan), seq)


def test_recombine_rejects_wrong_sizes():
    plan = window_long_sequence(10, 6, 3)
    with pytest.raises(ValueError):
        recombine_windows([np.zeros(6)] * (len(plan) - 1), plan)
    with pytest.raises(ValueError):
        recombine_windows([np.zeros(5)] * len(plan), plan)
