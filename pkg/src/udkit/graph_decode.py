"""Maximum spanning arborescence decoding for dependency trees.

Score matrices are ``(n + 1) x n``: row ``h`` is the head (0 is the
artificial root), column ``d`` is dependent word ``d + 1``.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

BRUTE_FORCE_LIMIT = 7


def _check(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 2 or s.shape[1] < 1 or s.shape[0] != s.shape[1] + 1:
        raise ValueError(f"expected an (n+1) x n score matrix, got shape {s.shape}")
    if not np.isfinite(s).all():
        raise ValueError("score matrix contains non-finite entries")
    return s


def _square(scores: np.ndarray) -> np.ndarray:
    # square[h, d] over nodes 0..n, no arcs into the root and no self arcs
    n = scores.shape[1]
    sq = np.full((n + 1, n + 1), -np.inf)
    sq[:, 1:] = scores
    np.fill_diagonal(sq, -np.inf)
    return sq


def _find_cycle(heads: np.ndarray) -> list[int]:
    n = len(heads)
    color = np.zeros(n, dtype=np.int8)
    color[0] = 2
    for start in range(1, n):
        path = []
        node = start
        while color[node] == 0:
            color[node] = 1
            path.append(node)
            node = heads[node]
        if color[node] == 1:
            return sorted(path[path.index(node):])
        for v in path:
            color[v] = 2
    return []


def _chu_liu_edmonds(sq: np.ndarray) -> np.ndarray:
    """Best arborescence rooted at node 0 over a square score matrix.

    Returns heads for every node (heads[0] = -1). Ties go to the lower
    head index because ``argmax`` returns the first maximum.
    """
    N = sq.shape[0]
    heads = np.argmax(sq, axis=0)
    heads[0] = -1
    cycle = _find_cycle(heads)
    if not cycle:
        return heads

    in_cycle = np.zeros(N, dtype=bool)
    in_cycle[cycle] = True
    outside = [v for v in range(N) if not in_cycle[v]]
    c = len(outside)  # index of the contracted node in the smaller graph
    cyc = np.array(cycle)
    cycle_arc = sq[heads[cyc], cyc]

    small = np.full((c + 1, c + 1), -np.inf)
    out_idx = np.array(outside)
    small[:c, :c] = sq[np.ix_(out_idx, out_idx)]
    # arcs entering the cycle: break the cycle arc of the entered node
    enter_gain = sq[np.ix_(out_idx, cyc)] - cycle_arc[None, :]
    enter_best = np.argmax(enter_gain, axis=1)
    small[:c, c] = enter_gain[np.arange(c), enter_best]
    # arcs leaving the cycle
    leave = sq[np.ix_(cyc, out_idx)]
    leave_best = np.argmax(leave, axis=0)
    small[c, :c] = leave[leave_best, np.arange(c)]

    sub = _chu_liu_edmonds(small)

    result = heads.copy()
    for k, v in enumerate(outside):
        if k == 0:
            continue
        h = sub[k]
        result[v] = cyc[leave_best[k]] if h == c else outside[h]
    entry = sub[c]
    entered = cyc[enter_best[entry]]
    result[entered] = outside[entry]
    return result


def tree_score(scores, heads) -> float:
    s = np.asarray(scores, dtype=np.float64)
    heads = np.asarray(heads)
    return float(s[heads, np.arange(len(heads))].sum())


def max_arborescence(scores) -> list[int]:
    """Heads (one per word, 0 = root) of the best single-rooted tree.

    Unconstrained Chu-Liu/Edmonds runs first. If it attaches several words
    to the root, every word is tried as the only root child (root arcs of
    the others removed) and the best total wins; ties keep the lower word.
    Candidates whose optimistic bound cannot beat the incumbent are skipped.
    """
    s = _check(scores)
    n = s.shape[1]
    if n == 1:
        return [0]
    sq = _square(s)
    heads = _chu_liu_edmonds(sq)[1:]
    if int((heads == 0).sum()) == 1:
        return heads.tolist()

    best_col = sq[1:, 1:].max(axis=0)  # best non-root head per word
    free_total = best_col.sum()
    best_heads, best_score = None, -np.inf
    for r in range(1, n + 1):
        bound = sq[0, r] + free_total - best_col[r - 1]
        if best_heads is not None and bound <= best_score:
            continue
        constrained = sq.copy()
        constrained[0, 1:] = -np.inf
        constrained[0, r] = sq[0, r]
        cand = _chu_liu_edmonds(constrained)[1:]
        total = tree_score(s, cand)
        if total > best_score:
            best_heads, best_score = cand, total
    return best_heads.tolist()


def is_single_rooted_tree(heads) -> bool:
    n = len(heads)
    if n == 0 or sum(h == 0 for h in heads) != 1:
        return False
    for start in range(1, n + 1):
        node, steps = start, 0
        while node != 0:
            if not 0 <= node <= n or heads[node - 1] == node or steps > n:
                return False
            node = heads[node - 1]
            steps += 1
    return True


@lru_cache(maxsize=None)
def _all_trees(n: int) -> np.ndarray:
    choices = [[h for h in range(n + 1) if h != d] for d in range(1, n + 1)]
    trees = [h for h in itertools.product(*choices) if is_single_rooted_tree(h)]
    return np.array(trees, dtype=np.int64).reshape(len(trees), n)


def brute_force_arborescence(scores) -> list[int]:
    """Exhaustive search over single-rooted trees; lexicographically first
    among equal-score optima. Refuses n > 7."""
    s = _check(scores)
    n = s.shape[1]
    if n > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force limited to n <= {BRUTE_FORCE_LIMIT}, got {n}")
    trees = _all_trees(n)
    totals = s[trees, np.arange(n)].sum(axis=1)
    return trees[int(np.argmax(totals))].tolist()
