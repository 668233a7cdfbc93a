"""Ratcliff/Obershelp gestalt pattern matching.

No junk heuristics. When several longest common substrings tie, every
choice is explored and the decomposition with the most matched characters
wins; among equally good decompositions the leftmost block in ``a`` (then
in ``b``) is kept. Taking the maximum over ties is what makes the matched
count independent of argument order.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple


class Block(NamedTuple):
    pos_a: int
    pos_b: int
    length: int


@dataclass(frozen=True)
class MatchingBlocks:
    blocks: tuple[Block, ...]

    @property
    def total_matched(self):
        return sum(b.length for b in self.blocks)


def _longest_common(a, b, alo, ahi, blo, bhi):
    """Length and start positions of every longest common substring.

    Candidates come out sorted by (pos_a, pos_b).
    """
    best = 0
    starts = []
    prev = [0] * (bhi - blo + 1)
    for i in range(alo, ahi):
        cur = [0] * (bhi - blo + 1)
        ai = a[i]
        for j in range(blo, bhi):
            if ai == b[j]:
                k = prev[j - blo] + 1
                cur[j - blo + 1] = k
                if k > best:
                    best = k
                    starts = [(i - k + 1, j - k + 1)]
                elif k == best:
                    starts.append((i - k + 1, j - k + 1))
        prev = cur
    starts.sort()
    return best, starts


def matching_blocks(a, b):
    """Recursive longest-common-substring decomposition of ``a`` and ``b``."""
    memo = {}

    def solve(alo, ahi, blo, bhi):
        key = (alo, ahi, blo, bhi)
        if key in memo:
            return memo[key]
        result = (0, ())
        if alo < ahi and blo < bhi:
            k, starts = _longest_common(a, b, alo, ahi, blo, bhi)
            for i, j in starts if k else ():
                left = solve(alo, i, blo, j)
                right = solve(i + k, ahi, j + k, bhi)
                total = left[0] + k + right[0]
                if total > result[0]:
                    result = (total, left[1] + (Block(i, j, k),) + right[1])
        memo[key] = result
        return result

    return MatchingBlocks(solve(0, len(a), 0, len(b))[1])


def similarity(a, b):
    """``2 M / (|a| + |b|)``; 1.0 for two empty strings."""
    size = len(a) + len(b)
    if size == 0:
        return 1.0
    return 2.0 * matching_blocks(a, b).total_matched / size


def similarity_upper_bound(a, b):
    """Cheap bound: similarity(a, b) never exceeds this (shared character counts)."""
    size = len(a) + len(b)
    if size == 0:
        return 1.0
    common = sum((Counter(a) & Counter(b)).values())
    return 2.0 * common / size
