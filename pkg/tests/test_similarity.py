import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import gestalt_matched
from phonalign.similarity import Block, matching_blocks, similarity, similarity_upper_bound


def test_identical():
    mb = matching_blocks("abc", "abc")
    assert mb.blocks == (Block(0, 0, 3),)
    assert mb.total_matched == 3
    assert similarity("abc", "abc") == 1.0


def test_disjoint():
    assert matching_blocks("abc", "xyz").blocks == ()
    assert similarity("abc", "xyz") == 0.0


def test_suffix():
    mb = matching_blocks("abcd", "bcd")
    assert mb.blocks == (Block(1, 0, 3),)
    assert mb.total_matched == gestalt_matched("abcd", "bcd") == 3
    assert similarity("abcd", "bcd") == 6 / 7


def test_empty_strings():
    assert similarity("", "") == 1.0
    assert similarity("", "abc") == 0.0
    assert matching_blocks("", "").blocks == ()


def test_tie_break_prefers_leftmost_block():
    # "ab" occurs twice in b; both choices match 2 characters
    assert matching_blocks("ab", "abab").blocks == (Block(0, 0, 2),)


def test_ties_are_explored_for_the_best_decomposition():
    # leftmost-only choice ("a" at 0/0) would strand "b" and "c": M = 1
    assert gestalt_matched("aba", "bca") == 2
    assert matching_blocks("aba", "bca").total_matched == 2
    assert similarity("aba", "bca") == similarity("bca", "aba")


def test_french_sentences():
    s = similarity("après une heure", "avant une heure")
    assert s == 2 * gestalt_matched("après une heure", "avant une heure") / 30
    # "a" plus " une heure": 11 matched characters out of 30
    assert s == 22 / 30


@pytest.mark.parametrize("length", range(0, 5))
def test_exhaustive_small_equal_lengths(length):
    for a in map("".join, itertools.product("abc", repeat=length)):
        for b in map("".join, itertools.product("abc", repeat=length)):
            assert matching_blocks(a, b).total_matched == gestalt_matched(a, b)


blocks_text = st.text(alphabet="abcd ", max_size=20)


@given(blocks_text, blocks_text)
def test_blocks_are_ordered_and_match(a, b):
    mb = matching_blocks(a, b)
    prev_a = prev_b = 0
    for blk in mb.blocks:
        assert blk.length > 0
        assert blk.pos_a >= prev_a and blk.pos_b >= prev_b
        assert a[blk.pos_a:blk.pos_a + blk.length] == b[blk.pos_b:blk.pos_b + blk.length]
        prev_a, prev_b = blk.pos_a + blk.length, blk.pos_b + blk.length


@given(blocks_text, blocks_text)
def test_symmetry_range_and_bound(a, b):
    s = similarity(a, b)
    assert s == similarity(b, a)
    assert 0.0 <= s <= 1.0
    assert s <= similarity_upper_bound(a, b)
    assert similarity(a, a) == 1.0
