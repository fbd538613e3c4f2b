"""The joint model: encoder, one layer-attention mix per task, and the heads."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional

import numpy as np

from udkit import tensor as T
from udkit.conllu import Sentence, Token
from udkit.encoder import Encoder, EncoderConfig, LayerAttention, sample_layer_dropout
from udkit.graph_decode import max_arborescence
from udkit.heads import (
    BiaffineParser,
    Gold,
    TaggerHead,
    TagVocab,
    arc_scores,
    argmax_rows,
    label_scores,
    task_losses,
)
from udkit.lemma_script import (
    IDENTITY,
    apply_lemma_script,
    compute_lemma_script,
    decode_tag,
    encode_tag,
)
from udkit.subword import Segmentation, SubwordVocab, segment_sentence

TASKS = ("upos", "ufeats", "lemmas", "deps")
IDENTITY_TAG = encode_tag(IDENTITY)


@dataclass
class ModelConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    arc_dim: int = 768
    tag_dim: int = 256
    dropout: float = 0.5
    layer_dropout: float = 0.1
    max_len: int = 512
    overlap: int = 256

    @classmethod
    def large_heads(cls, **kwargs) -> "ModelConfig":
        """Wider task heads (tag 300, arc 800)."""
        return cls(arc_dim=800, tag_dim=300, **kwargs)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["encoder"] = EncoderConfig(**d["encoder"])
        return cls(**d)


@dataclass
class Vocabs:
    upos: TagVocab
    ufeats: TagVocab
    lemmas: TagVocab
    deprels: TagVocab

    @classmethod
    def from_sentences(cls, sentences: Iterable[Sentence]) -> "Vocabs":
        toks = [t for s in sentences for t in s.tokens]
        return cls(
            upos=TagVocab.from_values(t.upos for t in toks if t.upos is not None),
            ufeats=TagVocab.from_values(t.ufeats for t in toks),
            lemmas=TagVocab.from_values(
                (encode_tag(compute_lemma_script(t.form, t.lemma)) for t in toks if t.lemma is not None),
                fallback=IDENTITY_TAG,
            ),
            deprels=TagVocab.from_values(t.deprel for t in toks if t.deprel is not None),
        )

    def to_dict(self) -> dict:
        return {k: getattr(self, k).to_dict() for k in ("upos", "ufeats", "lemmas", "deprels")}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabs":
        return cls(**{k: TagVocab.from_dict(v) for k, v in d.items()})


@dataclass
class Example:
    sentence: Sentence
    segmentation: Segmentation
    gold: Optional[Gold] = None
    treebank: str = ""


@dataclass
class Outputs:
    upos: T.Tensor
    ufeats: T.Tensor
    lemmas: T.Tensor
    arcs: T.Tensor
    deps_embeddings: T.Tensor


def gold_targets(sentence: Sentence, vocabs: Vocabs) -> Gold:
    for field_name in ("lemma", "upos", "head", "deprel"):
        missing = [t.id for t in sentence.tokens if getattr(t, field_name) is None]
        if missing:
            raise ValueError(f"gold {field_name.upper()} missing for words {missing}")
    toks = sentence.tokens
    return Gold(
        upos=np.array([vocabs.upos.encode(t.upos) for t in toks]),
        ufeats=np.array([vocabs.ufeats.encode(t.ufeats) for t in toks]),
        lemmas=np.array([vocabs.lemmas.encode(encode_tag(compute_lemma_script(t.form, t.lemma))) for t in toks]),
        heads=np.array([t.head for t in toks]),
        deprels=np.array([vocabs.deprels.encode(t.deprel) for t in toks]),
    )


class UDModel:
    def __init__(self, config: ModelConfig, pieces: SubwordVocab, vocabs: Vocabs, seed: int = 13):
        rng = np.random.default_rng(seed)
        self.config = config
        self.pieces = pieces
        self.vocabs = vocabs
        config.encoder.vocab_size = len(pieces)
        h = config.encoder.hidden_dim
        L = config.encoder.num_layers
        self.encoder = Encoder(config.encoder, rng)
        self.mixes = {task: LayerAttention(L, task, config.layer_dropout) for task in TASKS}
        self.taggers = {
            "upos": TaggerHead("upos", h, vocabs.upos, rng),
            "ufeats": TaggerHead("ufeats", h, vocabs.ufeats, rng),
            "lemmas": TaggerHead("lemmas", h, vocabs.lemmas, rng),
        }
        self.parser = BiaffineParser(h, vocabs.deprels, rng, config.arc_dim, config.tag_dim)

    # parameters

    def named_parameters(self) -> dict[str, T.Parameter]:
        named = {"encoder." + k: p for k, p in self.encoder.params.items()}
        for la in self.mixes.values():
            for p in la.parameters():
                named[p.name] = p
        for head in self.taggers.values():
            for p in head.parameters():
                named[p.name] = p
        for p in self.parser.parameters():
            named[p.name] = p
        return named

    def parameters(self) -> list[T.Parameter]:
        return list(self.named_parameters().values())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: p.data for k, p in self.named_parameters().items()}

    def load_state_dict(self, arrays: dict[str, np.ndarray]) -> None:
        named = self.named_parameters()
        problems = []
        for k, p in named.items():
            if k not in arrays:
                problems.append(f"missing array {k!r} (expected shape {p.shape})")
            elif tuple(arrays[k].shape) != p.shape:
                problems.append(f"array {k!r} has shape {tuple(arrays[k].shape)}, expected {p.shape}")
        if problems:
            raise ValueError("; ".join(problems))
        for k, p in named.items():
            p.data = np.array(arrays[k], dtype=T.DTYPE)

    # data

    def prepare(self, sentence: Sentence, treebank: str = "", with_gold: bool = True) -> Example:
        seg = segment_sentence(sentence.forms, self.pieces, self.config.max_len, self.config.overlap)
        gold = gold_targets(sentence, self.vocabs) if with_gold else None
        return Example(sentence, seg, gold, treebank)

    # computation

    def forward(
        self,
        example: Example,
        training: bool = False,
        rng: Optional[np.random.Generator] = None,
        piece_ids=None,
        freeze_encoder: bool = False,
    ) -> Outputs:
        seg = example.segmentation
        if freeze_encoder:
            with T.no_grad():
                states = self.encoder.encode_segmentation(seg, piece_ids, training, rng)
        else:
            states = self.encoder.encode_segmentation(seg, piece_ids, training, rng)
        first = np.asarray(seg.first_piece_index)
        words = [T.dropout(s[first], self.config.dropout, rng, training) for s in states]
        L = len(words)
        emb = {}
        for task in TASKS:
            mix = self.mixes[task]
            dropped = sample_layer_dropout(L, mix.layer_dropout, rng) if training else None
            emb[task] = mix(words, dropped)
        return Outputs(
            upos=self.taggers["upos"](emb["upos"]),
            ufeats=self.taggers["ufeats"](emb["ufeats"]),
            lemmas=self.taggers["lemmas"](emb["lemmas"]),
            arcs=arc_scores(emb["deps"], self.parser),
            deps_embeddings=emb["deps"],
        )

    def loss(self, example: Example, epsilon: float, **forward_kwargs) -> tuple[T.Tensor, dict[str, float]]:
        out = self.forward(example, **forward_kwargs)
        gold = example.gold
        labels = label_scores(out.deps_embeddings, self.parser, gold.heads)
        parts = task_losses(out.upos, out.ufeats, out.lemmas, out.arcs, labels, gold, epsilon)
        total = None
        for v in parts.values():
            total = v if total is None else total + v
        return total, {k: v.item() for k, v in parts.items()}

    def predict(self, example: Example) -> Sentence:
        with T.no_grad():
            out = self.forward(example, training=False)
            heads = max_arborescence(out.arcs.data)
            labels = label_scores(out.deps_embeddings, self.parser, heads)
        v = self.vocabs
        upos, feats, scripts, rels = (argmax_rows(x) for x in (out.upos, out.ufeats, out.lemmas, labels))
        new_tokens = []
        for i, tok in enumerate(example.sentence.tokens):
            lemma, _ = apply_lemma_script(decode_tag(v.lemmas.decode(scripts[i])), tok.form)
            new_tokens.append(
                Token(
                    id=tok.id,
                    form=tok.form,
                    lemma=lemma,
                    upos=v.upos.decode(upos[i]),
                    xpos=tok.xpos,
                    ufeats=v.ufeats.decode(feats[i]),
                    head=heads[i],
                    deprel=v.deprels.decode(rels[i]),
                    deps=tok.deps,
                    misc=tok.misc,
                )
            )
        return example.sentence.with_tokens(new_tokens)

    # persistence

    def save(self, path) -> None:
        """Write weights to ``path`` (UDK1) and metadata to ``path`` + ``.json``."""
        T.save_arrays(path, self.state_dict())
        meta = {
            "config": self.config.to_dict(),
            "pieces": list(self.pieces.pieces),
            "vocabs": self.vocabs.to_dict(),
        }
        with open(str(path) + ".json", "w", encoding="utf-8") as f:
            json.dump(meta, f, ensure_ascii=False, indent=1, sort_keys=True)

    @classmethod
    def load(cls, path) -> "UDModel":
        meta_path = str(path) + ".json"
        if not os.path.exists(meta_path):
            raise FileNotFoundError(f"checkpoint metadata {meta_path} not found")
        with open(meta_path, encoding="utf-8") as f:
            meta = json.load(f)
        model = cls(
            ModelConfig.from_dict(meta["config"]),
            SubwordVocab(meta["pieces"]),
            Vocabs.from_dict(meta["vocabs"]),
        )
        model.load_state_dict(T.load_arrays(path))
        return model


def predict_sentence(sentence: Sentence, model: UDModel):
    """Return ``(upos, ufeats, lemmas, (heads, deprels))`` for one sentence."""
    pred = model.predict(model.prepare(sentence, with_gold=False))
    toks = pred.tokens
    return (
        [t.upos for t in toks],
        [t.ufeats for t in toks],
        [t.lemma for t in toks],
        ([t.head for t in toks], [t.deprel for t in toks]),
    )
