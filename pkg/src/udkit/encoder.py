"""Post-norm transformer encoder that returns every layer's output, and
per-task layer attention over those outputs."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from udkit import tensor as T
from udkit.subword import recombine_windows
from udkit.tensor import Parameter, Tensor


@dataclass
class EncoderConfig:
    num_layers: int = 4
    num_heads: int = 4
    hidden_dim: int = 64
    ff_dim: int = 256
    max_positions: int = 512
    vocab_size: int = 0
    attention_dropout: float = 0.2
    hidden_dropout: float = 0.2
    init_std: float = 0.02

    def __post_init__(self):
        if self.hidden_dim % self.num_heads:
            raise ValueError(
                f"hidden_dim {self.hidden_dim} not divisible by num_heads {self.num_heads}"
            )

    @classmethod
    def base_size(cls, vocab_size: int) -> "EncoderConfig":
        return cls(num_layers=12, num_heads=12, hidden_dim=768, ff_dim=3072, vocab_size=vocab_size)

    def to_dict(self) -> dict:
        return asdict(self)


class Encoder:
    def __init__(self, config: EncoderConfig, rng: np.random.Generator):
        if config.vocab_size <= 0:
            raise ValueError("EncoderConfig.vocab_size must be set")
        self.config = config
        h, f, std = config.hidden_dim, config.ff_dim, config.init_std
        self.params: dict[str, Parameter] = {}

        def weight(name, shape):
            self.params[name] = Parameter(rng.normal(0.0, std, size=shape), "encoder", name=name)

        def const(name, shape, value):
            self.params[name] = Parameter(np.full(shape, value), "encoder", decay=False, name=name)

        weight("embeddings.word", (config.vocab_size, h))
        weight("embeddings.position", (config.max_positions, h))
        const("embeddings.ln.gain", (h,), 1.0)
        const("embeddings.ln.bias", (h,), 0.0)
        for i in range(config.num_layers):
            p = f"layers.{i}."
            for proj in ("query", "key", "value", "output"):
                weight(p + f"attention.{proj}.weight", (h, h))
                const(p + f"attention.{proj}.bias", (h,), 0.0)
            const(p + "attention.ln.gain", (h,), 1.0)
            const(p + "attention.ln.bias", (h,), 0.0)
            weight(p + "ffn.in.weight", (h, f))
            const(p + "ffn.in.bias", (f,), 0.0)
            weight(p + "ffn.out.weight", (f, h))
            const(p + "ffn.out.bias", (h,), 0.0)
            const(p + "ffn.ln.gain", (h,), 1.0)
            const(p + "ffn.ln.bias", (h,), 0.0)

    def parameters(self) -> list[Parameter]:
        return list(self.params.values())

    def _linear(self, x: Tensor, name: str) -> Tensor:
        return x @ self.params[name + ".weight"] + self.params[name + ".bias"]

    def _attention(self, x: Tensor, prefix: str, training: bool, rng) -> Tensor:
        cfg = self.config
        n, h = x.shape
        heads, dh = cfg.num_heads, h // cfg.num_heads

        def split(t):
            return t.reshape(n, heads, dh).transpose(1, 0, 2)

        q = split(self._linear(x, prefix + "query"))
        k = split(self._linear(x, prefix + "key"))
        v = split(self._linear(x, prefix + "value"))
        scores = T.scale(q @ k.transpose(0, 2, 1), 1.0 / np.sqrt(dh))
        probs = T.dropout(T.softmax(scores, axis=-1), cfg.attention_dropout, rng, training)
        ctx = (probs @ v).transpose(1, 0, 2).reshape(n, h)
        return self._linear(ctx, prefix + "output")

    def encode(self, piece_ids, training: bool = False, rng: Optional[np.random.Generator] = None) -> list[Tensor]:
        """Run the encoder on one sequence; returns one (len x hidden) tensor per layer."""
        cfg = self.config
        ids = np.asarray(piece_ids, dtype=np.int64)
        if len(ids) > cfg.max_positions:
            raise ValueError(
                f"sequence of {len(ids)} pieces exceeds max_positions {cfg.max_positions}; window it first"
            )
        if ids.size and (ids.min() < 0 or ids.max() >= cfg.vocab_size):
            raise ValueError(f"piece ids outside [0, {cfg.vocab_size})")
        P = self.params
        x = T.embedding(P["embeddings.word"], ids) + P["embeddings.position"][: len(ids)]
        x = T.layer_norm(x, P["embeddings.ln.gain"], P["embeddings.ln.bias"])
        x = T.dropout(x, cfg.hidden_dropout, rng, training)
        outputs = []
        for i in range(cfg.num_layers):
            p = f"layers.{i}."
            a = T.dropout(self._attention(x, p + "attention.", training, rng), cfg.hidden_dropout, rng, training)
            x = T.layer_norm(x + a, P[p + "attention.ln.gain"], P[p + "attention.ln.bias"])
            f = T.gelu(self._linear(x, p + "ffn.in"))
            f = T.dropout(self._linear(f, p + "ffn.out"), cfg.hidden_dropout, rng, training)
            x = T.layer_norm(x + f, P[p + "ffn.ln.gain"], P[p + "ffn.ln.bias"])
            outputs.append(x)
        return outputs

    def encode_segmentation(self, seg, piece_ids=None, training: bool = False, rng=None) -> list[Tensor]:
        """Encode a segmented sentence, windowing it if it carries a plan.

        ``piece_ids`` replaces ``seg.piece_ids`` (e.g. after input masking).
        Every window is wrapped in its own start/end pieces; the sentence's
        start row comes from the first window and its end row from the last.
        """
        ids = list(seg.piece_ids if piece_ids is None else piece_ids)
        if not seg.window_plan:
            return self.encode(ids, training, rng)
        start, content, end = ids[0], ids[1:-1], ids[-1]
        per_window = [
            self.encode([start] + content[w.start : w.end] + [end], training, rng)
            for w in seg.window_plan
        ]
        outputs = []
        for layer in range(self.config.num_layers):
            inner = recombine_windows(
                [states[layer][1:-1] for states in per_window], seg.window_plan, concat=T.concat
            )
            first = per_window[0][layer][0:1]
            last = per_window[-1][layer][-1:]
            outputs.append(T.concat([first, inner, last]))
        return outputs

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data for name, p in self.params.items()}

    def load_state_dict(self, arrays: dict[str, np.ndarray], prefix: str = "") -> None:
        problems = []
        for name, p in self.params.items():
            key = prefix + name
            if key not in arrays:
                problems.append(f"missing array {key!r} (expected shape {p.shape})")
            elif tuple(arrays[key].shape) != p.shape:
                problems.append(
                    f"array {key!r} has shape {tuple(arrays[key].shape)}, expected {p.shape}"
                )
        if problems:
            raise ValueError("; ".join(problems))
        for name, p in self.params.items():
            p.data = np.array(arrays[prefix + name], dtype=T.DTYPE)

    def save(self, path) -> None:
        T.save_arrays(path, self.state_dict())


def load_pretrained(path, config: EncoderConfig, rng: Optional[np.random.Generator] = None) -> Encoder:
    enc = Encoder(config, rng if rng is not None else np.random.default_rng(0))
    enc.load_state_dict(T.load_arrays(path))
    return enc


class LayerAttention:
    """Softmax-normalised scalar mix of encoder layers with a global scale."""

    def __init__(self, num_layers: int, task: str, layer_dropout: float = 0.1):
        self.task = task
        self.layer_dropout = layer_dropout
        self.weights = Parameter(np.zeros(num_layers), "task", decay=False, name=f"{task}.mix.weights")
        self.gamma = Parameter(np.array(1.0), "task", decay=False, name=f"{task}.mix.gamma")

    def parameters(self) -> list[Parameter]:
        return [self.weights, self.gamma]

    def __call__(self, states, dropped=None) -> Tensor:
        return layer_attention_forward(states, self, dropped)


def layer_attention_forward(states, la: LayerAttention, drop_mask=None) -> Tensor:
    return T.scalar_mix(states, la.weights, la.gamma, drop_mask)


def sample_layer_dropout(num_layers: int, prob: float, rng: np.random.Generator) -> np.ndarray:
    """Boolean mask, True = layer dropped. Redrawn until one layer survives."""
    if not 0.0 <= prob < 1.0:
        raise ValueError(f"layer dropout must be in [0, 1), got {prob}")
    if prob == 0.0:
        return np.zeros(num_layers, dtype=bool)
    while True:
        mask = rng.random(num_layers) < prob
        if not mask.all():
            return mask
