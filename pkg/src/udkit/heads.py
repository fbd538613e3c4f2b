"""Task heads: softmax taggers for UPOS, UFeats and lemma scripts, and a
biaffine arc/label scorer for dependencies."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from udkit import tensor as T
from udkit.tensor import Parameter, Tensor

UNK_TAG = "<unk>"


class TagVocab:
    """String<->index map with an unknown slot at index 0.

    Decoding the unknown slot yields ``fallback`` (by default the most
    frequent training string)."""

    def __init__(self, tags: Sequence[str], fallback: str):
        if not tags or tags[0] != UNK_TAG:
            tags = [UNK_TAG] + [t for t in tags if t != UNK_TAG]
        self.tags = list(tags)
        self.index = {t: i for i, t in enumerate(self.tags)}
        self.fallback = fallback

    @classmethod
    def from_values(cls, values: Iterable[str], fallback: Optional[str] = None) -> "TagVocab":
        counts = Counter(values)
        ordered = [t for t, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))]
        if fallback is None:
            fallback = ordered[0] if ordered else UNK_TAG
        return cls([UNK_TAG] + ordered, fallback)

    def __len__(self) -> int:
        return len(self.tags)

    def encode(self, tag: str) -> int:
        return self.index.get(tag, 0)

    def decode(self, i: int) -> str:
        return self.fallback if i == 0 else self.tags[i]

    def to_dict(self) -> dict:
        return {"tags": self.tags, "fallback": self.fallback}

    @classmethod
    def from_dict(cls, d: dict) -> "TagVocab":
        return cls(d["tags"], d["fallback"])


def _linear_params(name: str, n_in: int, n_out: int, rng, std: float) -> tuple[Parameter, Parameter]:
    return (
        Parameter(rng.normal(0.0, std, size=(n_in, n_out)), "task", name=name + ".weight"),
        Parameter(np.zeros(n_out), "task", decay=False, name=name + ".bias"),
    )


class TaggerHead:
    def __init__(self, name: str, hidden_dim: int, vocab: TagVocab, rng: np.random.Generator, std: float = 0.02):
        self.name = name
        self.vocab = vocab
        self.weight, self.bias = _linear_params(name, hidden_dim, len(vocab), rng, std)

    def parameters(self) -> list[Parameter]:
        return [self.weight, self.bias]

    def __call__(self, embeddings: Tensor) -> Tensor:
        return tag_forward(embeddings, self)


def tag_forward(embeddings: Tensor, head: TaggerHead) -> Tensor:
    return embeddings @ head.weight + head.bias


def argmax_rows(logits) -> list[int]:
    # np.argmax returns the first maximum, i.e. ties go to the lowest index
    data = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    return np.argmax(data, axis=-1).tolist()


def biaffine(head: Tensor, dep: Tensor, U: Tensor, bias: Tensor) -> Tensor:
    """``s[i, j] = head_i . U . dep_j + bias . head_i`` for head rows i, dependent rows j."""
    pairwise = head @ U @ dep.T
    return pairwise + head @ bias.reshape(-1, 1)


class BiaffineParser:
    def __init__(
        self,
        hidden_dim: int,
        labels: TagVocab,
        rng: np.random.Generator,
        arc_dim: int = 768,
        tag_dim: int = 256,
        std: float = 0.02,
    ):
        self.labels = labels
        L = len(labels)
        self.root = Parameter(rng.normal(0.0, std, size=hidden_dim), "task", name="deps.root")
        self.arc_head = _linear_params("deps.arc_head", hidden_dim, arc_dim, rng, std)
        self.arc_dep = _linear_params("deps.arc_dep", hidden_dim, arc_dim, rng, std)
        self.arc_U = Parameter(rng.normal(0.0, std, size=(arc_dim, arc_dim)), "task", name="deps.arc_U")
        self.arc_bias = Parameter(np.zeros(arc_dim), "task", decay=False, name="deps.arc_bias")
        self.label_head = _linear_params("deps.label_head", hidden_dim, tag_dim, rng, std)
        self.label_dep = _linear_params("deps.label_dep", hidden_dim, tag_dim, rng, std)
        self.label_U = Parameter(rng.normal(0.0, std, size=(L, tag_dim, tag_dim)), "task", name="deps.label_U")
        self.label_W = Parameter(rng.normal(0.0, std, size=(2 * tag_dim, L)), "task", name="deps.label_W")
        self.label_b = Parameter(np.zeros(L), "task", decay=False, name="deps.label_b")

    def parameters(self) -> list[Parameter]:
        return [
            self.root,
            *self.arc_head,
            *self.arc_dep,
            self.arc_U,
            self.arc_bias,
            *self.label_head,
            *self.label_dep,
            self.label_U,
            self.label_W,
            self.label_b,
        ]

    def _with_root(self, embeddings: Tensor) -> Tensor:
        return T.concat([self.root.reshape(1, -1), embeddings], axis=0)

    @staticmethod
    def _ff(x: Tensor, layer) -> Tensor:
        w, b = layer
        return T.gelu(x @ w + b)


def arc_scores(embeddings: Tensor, parser: BiaffineParser) -> Tensor:
    """(n+1) x n arc scores; row 0 is the root."""
    heads = parser._ff(parser._with_root(embeddings), parser.arc_head)
    deps = parser._ff(embeddings, parser.arc_dep)
    return biaffine(heads, deps, parser.arc_U, parser.arc_bias)


def label_scores(embeddings: Tensor, parser: BiaffineParser, chosen_heads) -> Tensor:
    """n x |labels| logits, each dependent scored against its chosen head."""
    n = embeddings.shape[0]
    chosen = np.asarray(chosen_heads, dtype=np.int64)
    if chosen.shape != (n,) or chosen.min() < 0 or chosen.max() > n:
        raise ValueError(f"chosen heads must be {n} integers in [0, {n}]")
    heads = parser._ff(parser._with_root(embeddings), parser.label_head)[chosen]
    deps = parser._ff(embeddings, parser.label_dep)
    return bilinear_labels(heads, deps, parser.label_U, parser.label_W, parser.label_b)


def bilinear_labels(heads: Tensor, deps: Tensor, U: Tensor, W: Tensor, b: Tensor) -> Tensor:
    """``s[j, l] = heads_j . U_l . deps_j + W_l . [heads_j; deps_j] + b_l``."""
    n, t = heads.shape
    L = U.shape[0]
    Ur = U.transpose(1, 0, 2).reshape(t, L * t)
    bil = ((heads @ Ur).reshape(n, L, t) * deps.reshape(n, 1, t)).sum(axis=2)
    return bil + T.concat([heads, deps], axis=1) @ W + b


def self_arc_mask(n: int) -> np.ndarray:
    """n x (n+1) candidate mask for dependents (rows) over heads (columns)."""
    valid = np.ones((n, n + 1), dtype=bool)
    valid[np.arange(n), np.arange(1, n + 1)] = False
    return valid


@dataclass
class Gold:
    upos: np.ndarray
    ufeats: np.ndarray
    lemmas: np.ndarray
    heads: np.ndarray
    deprels: np.ndarray


def task_losses(
    upos_logits: Tensor,
    ufeats_logits: Tensor,
    lemma_logits: Tensor,
    arcs: Tensor,
    label_logits: Tensor,
    gold: Gold,
    epsilon: float,
) -> dict[str, Tensor]:
    n = len(gold.heads)
    ce = T.label_smoothed_cross_entropy
    return {
        "upos": ce(upos_logits, gold.upos, epsilon),
        "ufeats": ce(ufeats_logits, gold.ufeats, epsilon),
        "lemmas": ce(lemma_logits, gold.lemmas, epsilon),
        "arcs": ce(arcs.T, gold.heads, epsilon, valid=self_arc_mask(n)),
        "deprels": ce(label_logits, gold.deprels, epsilon),
    }


def multitask_loss(upos_logits, ufeats_logits, lemma_logits, arcs, label_logits, gold: Gold, epsilon: float) -> Tensor:
    """Unweighted sum of the per-task smoothed cross entropies."""
    losses = task_losses(upos_logits, ufeats_logits, lemma_logits, arcs, label_logits, gold, epsilon)
    total = None
    for loss in losses.values():
        total = loss if total is None else total + loss
    return total
