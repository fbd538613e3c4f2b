"""Desk-scale learnability experiments shared by scripts/ and the test suite."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from udkit.conllu import Sentence, concat_treebanks
from udkit.encoder import EncoderConfig
from udkit.metrics import EvalReport, evaluate
from udkit.model import ModelConfig, UDModel, Vocabs
from udkit.subword import build_vocab
from udkit.synthetic import generate
from udkit.training import EpochRecord, TrainConfig, predict_examples, train

TOY_ENCODER = dict(num_layers=4, num_heads=4, hidden_dim=64, ff_dim=256)

# Standard regularisation (masking, smoothing, dropout) stays on; only the
# rates, warmup and batch size are scaled down to a 100-sentence corpus.
OVERFIT_CONFIG = TrainConfig(
    base_lr=2e-3,
    encoder_lr=1e-3,
    warmup_steps=100,
    batch_size=8,
    epochs=200,
)

MIXING_CONFIG = TrainConfig(
    base_lr=2e-3,
    encoder_lr=1e-3,
    warmup_steps=100,
    batch_size=16,
    epochs=20,
    dropout=0.2,
    encoder_dropout=0.1,
)


def toy_model(sentences: Sequence[Sentence], seed: int = 13, arc_dim: int = 64, tag_dim: int = 32) -> UDModel:
    pieces = build_vocab(t.form for s in sentences for t in s.tokens)
    config = ModelConfig(encoder=EncoderConfig(**TOY_ENCODER), arc_dim=arc_dim, tag_dim=tag_dim)
    return UDModel(config, pieces, Vocabs.from_sentences(sentences), seed=seed)


@dataclass
class OverfitResult:
    epochs: int
    seconds: float
    upos: float
    las: float
    records: list[EpochRecord] = field(default_factory=list)


def overfit(
    sentences: Sequence[Sentence],
    config: TrainConfig = OVERFIT_CONFIG,
    upos_target: float = 0.99,
    las_target: float = 0.95,
    stop_early: bool = True,
) -> OverfitResult:
    """Train on ``sentences`` and evaluate on the same sentences every epoch.
    Stops at the first epoch meeting both targets when ``stop_early``."""
    model = toy_model(sentences, seed=config.seed)
    start = time.perf_counter()

    def done(rec: EpochRecord) -> bool:
        return stop_early and rec.dev.upos.value >= upos_target and rec.dev.las.value >= las_target

    result = train(model, concat_treebanks([("train", list(sentences))]), config, dev=list(sentences), on_epoch=done)
    last = result.records[-1]
    return OverfitResult(
        epochs=last.epoch,
        seconds=time.perf_counter() - start,
        upos=last.dev.upos.value,
        las=last.dev.las.value,
        records=result.records,
    )


@dataclass
class MixingResult:
    separate: dict[str, float]
    joint: dict[str, float]
    seconds: float

    def ratios(self) -> dict[str, float]:
        def ratio(joint: float, separate: float) -> float:
            if separate == 0:
                return 1.0 if joint == 0 else float("inf")
            return joint / separate

        return {g: ratio(self.joint[g], self.separate[g]) for g in self.separate}


def _dev_las(model: UDModel, dev: list[Sentence]) -> float:
    examples = [model.prepare(s, with_gold=False) for s in dev]
    report: EvalReport = evaluate(dev, predict_examples(model, examples))
    return report.las.value


def mixing(
    n_train: int = 200,
    n_dev: int = 100,
    config: TrainConfig = MIXING_CONFIG,
    grammars: Sequence[str] = ("svo", "sov"),
    seed: int = 13,
) -> MixingResult:
    """Dev LAS per grammar when trained alone versus jointly in mixed batches.

    The joint model sees the same number of epochs over the concatenated data."""
    start = time.perf_counter()
    data = {g: generate(g, n_train, seed + i) for i, g in enumerate(grammars)}
    dev = {g: generate(g, n_dev, seed + 100 + i) for i, g in enumerate(grammars)}
    separate = {}
    for g in grammars:
        model = toy_model(data[g], seed=config.seed)
        train(model, concat_treebanks([(g, data[g])]), config)
        separate[g] = _dev_las(model, dev[g])
    everything = [s for g in grammars for s in data[g]]
    model = toy_model(everything, seed=config.seed)
    train(model, concat_treebanks([(g, data[g]) for g in grammars]), config)
    joint = {g: _dev_las(model, dev[g]) for g in grammars}
    return MixingResult(separate, joint, time.perf_counter() - start)


def with_seed(config: TrainConfig, seed: int) -> TrainConfig:
    return replace(config, seed=seed)
