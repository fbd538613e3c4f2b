"""Exhaustive optimality check of shortest_edit_script over every pair of
strings of length <= N (each) on a 3-letter alphabet.

The library only compares characters for equality, so its cost is invariant
under renaming the alphabet; pairs are therefore checked up to renaming
(letters first appear in the order a, b, c across ``x + y``). Reference
distances come from a vectorised dynamic programme over all targets at once,
itself cross-checked against breadth-first search in string space for short
strings.
"""

from __future__ import annotations

import argparse
import itertools
import sys
import time
from collections import deque

import numpy as np

from udkit.lemma_script import script_cost, shortest_edit_script

ALPHABET = "abc"


def all_targets(max_len: int) -> list[list[str]]:
    return [["".join(p) for p in itertools.product(ALPHABET, repeat=m)] for m in range(max_len + 1)]


def distances_to_all(x: str, max_len: int) -> list[np.ndarray]:
    """dist[m][k] = edit distance from x to the k-th string of length m
    (itertools.product order)."""
    n = len(x)
    col = np.arange(n + 1)[None, :]  # target "" only
    out = [col[:, n].copy()]
    for _ in range(max_len):
        children = []
        for c in ALPHABET:
            new = np.empty_like(col)
            new[:, 0] = col[:, 0] + 1
            for i in range(1, n + 1):
                sub = col[:, i - 1] + (x[i - 1] != c)
                new[:, i] = np.minimum(np.minimum(col[:, i] + 1, new[:, i - 1] + 1), sub)
            children.append(new)
        # product order: the last character varies fastest
        col = np.stack(children, axis=1).reshape(-1, n + 1)
        out.append(col[:, n].copy())
    return out


def bfs(source: str, max_len: int) -> dict[str, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        s = queue.popleft()
        nxt = []
        for i in range(len(s)):
            nxt.append(s[:i] + s[i + 1 :])
            nxt.extend(s[:i] + c + s[i + 1 :] for c in ALPHABET if c != s[i])
        if len(s) < max_len:
            nxt.extend(s[:i] + c + s[i:] for i in range(len(s) + 1) for c in ALPHABET)
        for t in nxt:
            if t not in dist:
                dist[t] = dist[s] + 1
                queue.append(t)
    return dist


def canonical(s: str) -> bool:
    seen = ""
    for ch in s:
        if ch not in seen:
            if ch != ALPHABET[len(seen)]:
                return False
            seen += ch
    return True


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--max-len", type=int, default=8)
    args = parser.parse_args(argv)
    N = args.max_len
    start = time.perf_counter()
    targets = all_targets(N)

    # cross-check the reference against graph search on short strings
    short = 4
    for m in range(short + 1):
        for x in targets[m]:
            ref = distances_to_all(x, short)
            dist = bfs(x, short)
            for k in range(short + 1):
                assert all(ref[k][j] == dist[y] for j, y in enumerate(targets[k])), x
    print(f"reference DP agrees with BFS on all pairs of length <= {short}", flush=True)

    checked = wrong = 0
    for m in range(N + 1):
        for x in targets[m]:
            if not canonical(x):
                continue
            ref = distances_to_all(x, N)
            for k in range(N + 1):
                for j, y in enumerate(targets[k]):
                    if not canonical(x + y):
                        continue
                    checked += 1
                    if script_cost(shortest_edit_script(x, y)) != ref[k][j]:
                        wrong += 1
                        print(f"MISMATCH {x!r} -> {y!r}", flush=True)
        print(f"|x| = {m} done: {checked} pairs, {wrong} wrong, {time.perf_counter() - start:.0f}s", flush=True)
    total = sum(len(t) for t in targets) ** 2
    print(f"checked {checked} canonical pairs covering all {total} pairs; {wrong} wrong; {time.perf_counter() - start:.0f}s")
    return 1 if wrong else 0


if __name__ == "__main__":
    sys.exit(main())
