"""Lemmatization as classification over edit scripts.

A form is split around its longest common substring with the lemma. The
part before it and the part after it are each rewritten with a shortest
edit sequence (Wagner-Fischer, unit costs). The pair of operation lists is
the class a tagger predicts. Tags look like ``p:dd|s:`` or ``r:<lemma>``.

Operations are tuples: ``("k",)`` keep, ``("d",)`` delete,
``("s", c)`` substitute with ``c``, ``("i", c)`` insert ``c``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

Op = tuple

KEEP = ("k",)
DELETE = ("d",)


@dataclass(frozen=True)
class EditScript:
    prefix_ops: tuple[Op, ...] = ()
    suffix_ops: tuple[Op, ...] = ()
    lcs_present: bool = True
    replacement: Optional[str] = None

    @property
    def prefix_len(self) -> int:
        return _consumed(self.prefix_ops)

    @property
    def suffix_len(self) -> int:
        return _consumed(self.suffix_ops)


IDENTITY = EditScript()


class MalformedTag(ValueError):
    pass


def longest_common_substring(a: str, b: str) -> tuple[int, int, int]:
    """Return ``(start_a, start_b, length)`` of a longest common substring.

    Ties go to the smallest ``start_a``, then the smallest ``start_b``.
    """
    best = (0, 0, 0)
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        cur = [0] * (len(b) + 1)
        ai = a[i - 1]
        for j in range(1, len(b) + 1):
            if ai == b[j - 1]:
                k = prev[j - 1] + 1
                cur[j] = k
                cand = (i - k, j - k, k)
                if k > best[2] or (k == best[2] and cand[:2] < best[:2]):
                    best = cand
        prev = cur
    return best if best[2] else (0, 0, 0)


def _edit_table(source: str, target: str) -> list[list[int]]:
    # dist[i][j] = edit distance between source[i:] and target[j:]
    n, m = len(source), len(target)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n, -1, -1):
        for j in range(m, -1, -1):
            if i == n:
                dist[i][j] = m - j
            elif j == m:
                dist[i][j] = n - i
            else:
                diag = dist[i + 1][j + 1] + (source[i] != target[j])
                dist[i][j] = min(diag, dist[i + 1][j] + 1, dist[i][j + 1] + 1)
    return dist


def edit_distance(source: str, target: str) -> int:
    return _edit_table(source, target)[0][0]


def shortest_edit_script(source: str, target: str) -> list[Op]:
    """Minimal-cost operation list turning ``source`` into ``target``.

    Keep is free; substitute, delete and insert cost 1. Among equal-cost
    choices the walk prefers keep, then substitute, then delete, then insert.
    """
    dist = _edit_table(source, target)
    n, m = len(source), len(target)
    ops: list[Op] = []
    i = j = 0
    while i < n or j < m:
        here = dist[i][j]
        if i < n and j < m and source[i] == target[j] and dist[i + 1][j + 1] == here:
            ops.append(KEEP)
            i, j = i + 1, j + 1
        elif i < n and j < m and dist[i + 1][j + 1] + 1 == here:
            ops.append(("s", target[j]))
            i, j = i + 1, j + 1
        elif i < n and dist[i + 1][j] + 1 == here:
            ops.append(DELETE)
            i += 1
        else:
            ops.append(("i", target[j]))
            j += 1
    return ops


def script_cost(ops) -> int:
    return sum(op[0] != "k" for op in ops)


def apply_ops(ops, source: str) -> Optional[str]:
    """Run ``ops`` over ``source``; None if they do not consume it exactly."""
    out = []
    i = 0
    for op in ops:
        kind = op[0]
        if kind == "i":
            out.append(op[1])
            continue
        if i >= len(source):
            return None
        if kind == "k":
            out.append(source[i])
        elif kind == "s":
            out.append(op[1])
        i += 1
    if i != len(source):
        return None
    return "".join(out)


def _consumed(ops) -> int:
    return sum(op[0] != "i" for op in ops)


def compute_lemma_script(form: str, lemma: str) -> EditScript:
    start_f, start_l, length = longest_common_substring(form, lemma)
    if length == 0:
        return EditScript(lcs_present=False, replacement=lemma)
    prefix = shortest_edit_script(form[:start_f], lemma[:start_l])
    suffix = shortest_edit_script(form[start_f + length :], lemma[start_l + length :])
    return EditScript(tuple(prefix), tuple(suffix))


def apply_lemma_script(script: EditScript, form: str) -> tuple[str, bool]:
    """Apply ``script`` to ``form``.

    Returns ``(lemma, fallback)``. When the script needs more characters
    than the form has, the form is returned unchanged with ``fallback=True``.
    """
    if not script.lcs_present:
        return script.replacement, False
    pre, post = script.prefix_len, script.suffix_len
    if pre + post > len(form):
        return form, True
    head = apply_ops(script.prefix_ops, form[:pre])
    tail = apply_ops(script.suffix_ops, form[len(form) - post :])
    return head + form[pre : len(form) - post] + tail, False


def _encode_ops(ops) -> str:
    return "".join(op[0] if len(op) == 1 else op[0] + op[1] for op in ops)


def encode_tag(script: EditScript) -> str:
    if not script.lcs_present:
        return "r:" + script.replacement
    return f"p:{_encode_ops(script.prefix_ops)}|s:{_encode_ops(script.suffix_ops)}"


def _decode_ops(tag: str, pos: int, stop: Optional[str]) -> tuple[list[Op], int]:
    ops: list[Op] = []
    while pos < len(tag):
        c = tag[pos]
        if c == stop:
            return ops, pos
        if c in "kd":
            ops.append((c,))
            pos += 1
        elif c in "si":
            if pos + 1 >= len(tag):
                raise MalformedTag(f"{tag!r}: operation {c!r} lacks a character")
            ops.append((c, tag[pos + 1]))
            pos += 2
        else:
            raise MalformedTag(f"{tag!r}: unknown operation {c!r} at {pos}")
    if stop is not None:
        raise MalformedTag(f"{tag!r}: missing {stop!r} separator")
    return ops, pos


def decode_tag(tag: str) -> EditScript:
    if tag.startswith("r:"):
        if len(tag) == 2:
            raise MalformedTag(f"{tag!r}: empty replacement")
        return EditScript(lcs_present=False, replacement=tag[2:])
    if not tag.startswith("p:"):
        raise MalformedTag(f"{tag!r}: must start with 'p:' or 'r:'")
    prefix, pos = _decode_ops(tag, 2, "|")
    if not tag.startswith("|s:", pos):
        raise MalformedTag(f"{tag!r}: missing '|s:' section")
    suffix, _ = _decode_ops(tag, pos + 3, None)
    return EditScript(tuple(prefix), tuple(suffix))
