"""Fine-tuning recipe: grouped Adam under a warmup/inverse-sqrt schedule,
first-epoch encoder freezing, wordpiece masking and fuzzed length buckets."""

from __future__ import annotations

import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Optional, Sequence

import numpy as np

from udkit import tensor as T
from udkit.conllu import Dataset
from udkit.metrics import EvalReport, evaluate
from udkit.model import Example, UDModel

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    base_lr: float = 1e-3
    encoder_lr: float = 5e-5
    warmup_steps: int = 8000
    batch_size: int = 32
    epochs: int = 80
    mask_prob: float = 0.2
    label_smoothing: float = 0.03
    dropout: float = 0.5
    encoder_dropout: float = 0.2
    layer_dropout: float = 0.1
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.99
    grad_clip: float = 5.0
    length_fuzz: float = 0.1
    freeze_first_epoch: bool = True
    seed: int = 13

    def __post_init__(self):
        for name in ("mask_prob", "label_smoothing", "dropout", "encoder_dropout", "layer_dropout", "length_fuzz"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {value}")
        if self.warmup_steps < 1:
            raise ValueError("warmup_steps must be >= 1")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be positive")

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def noam_lr(step: int, warmup: int, peak_lr: float) -> float:
    """Linear warmup to ``peak_lr`` at ``warmup``, then inverse-sqrt decay."""
    if step < 1:
        raise ValueError("step counts from 1")
    return peak_lr * min(step / warmup, math.sqrt(warmup / step))


def param_groups(model: UDModel) -> dict[str, list[T.Parameter]]:
    groups: dict[str, list[T.Parameter]] = {"encoder": [], "task": []}
    for name, p in model.named_parameters().items():
        group = getattr(p, "group", None)
        if group not in groups:
            raise ValueError(f"parameter {name!r} has no optimizer group")
        groups[group].append(p)
    return groups


def freeze_schedule(epoch: int, freeze_first_epoch: bool = True) -> bool:
    """True when the encoder is trainable in ``epoch`` (1-based)."""
    if epoch < 1:
        raise ValueError("epochs count from 1")
    return not (freeze_first_epoch and epoch == 1)


def learning_rates(config: TrainConfig, epoch: int, schedule_step: int) -> dict[str, float]:
    """Per-group rates. While the encoder is frozen the task rate is held at
    ``base_lr``; afterwards both groups follow the schedule, counting
    ``schedule_step`` from the first unfrozen step."""
    if not freeze_schedule(epoch, config.freeze_first_epoch):
        return {"encoder": 0.0, "task": config.base_lr}
    factor = noam_lr(schedule_step, config.warmup_steps, 1.0)
    return {"encoder": config.encoder_lr * factor, "task": config.base_lr * factor}


def mask_inputs(piece_ids: Sequence[int], mask_prob: float, rng: np.random.Generator, mask_id: int, special_ids) -> tuple[list[int], np.ndarray]:
    """Replace each non-special piece with ``mask_id`` with probability ``mask_prob``."""
    ids = np.asarray(piece_ids, dtype=np.int64)
    eligible = ~np.isin(ids, list(special_ids))
    if mask_prob == 0.0:
        return ids.tolist(), np.zeros(len(ids), dtype=bool)
    masked = eligible & (rng.random(len(ids)) < mask_prob)
    out = np.where(masked, mask_id, ids)
    return out.tolist(), masked


def bucket_batches(lengths: Sequence[int], batch_size: int, fuzz: float, rng: np.random.Generator, treebanks: Optional[Sequence[str]] = None) -> list[list[tuple[int, str]]]:
    """One epoch of batches: shuffle, sort by fuzzed length, chunk, shuffle chunks.

    Each entry is ``(sentence index, treebank id)``."""
    n = len(lengths)
    if n == 0:
        raise ValueError("cannot batch an empty dataset")
    treebanks = treebanks if treebanks is not None else [""] * n
    order = rng.permutation(n)
    lens = np.asarray(lengths, dtype=np.float64)[order]
    keys = lens * (1.0 + rng.uniform(-fuzz, fuzz, size=n)) if fuzz > 0 else lens
    order = order[np.argsort(keys, kind="stable")]
    batches = [
        [(int(i), treebanks[i]) for i in order[k : k + batch_size]] for k in range(0, n, batch_size)
    ]
    return [batches[i] for i in rng.permutation(len(batches))]


class NonFiniteLoss(RuntimeError):
    pass


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev: Optional[EvalReport] = None

    def log_line(self) -> str:
        cells = [str(self.epoch), f"{self.train_loss:.6f}"]
        for name in ("upos", "ufeats", "lemmas", "uas", "las"):
            value = None if self.dev is None else getattr(self.dev, name).value
            cells.append("-" if value is None else f"{value:.6f}")
        return "\t".join(cells)


@dataclass
class TrainResult:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    steps: int = 0
    checkpoints: list[str] = field(default_factory=list)

    def log_lines(self, seed: int) -> list[str]:
        return [f"# seed\t{seed}"] + [r.log_line() for r in self.records]


def apply_dropout_rates(model: UDModel, config: TrainConfig) -> None:
    """Copy the config's regularisation rates onto the model."""
    model.config.dropout = config.dropout
    model.config.layer_dropout = config.layer_dropout
    model.encoder.config.hidden_dropout = config.encoder_dropout
    model.encoder.config.attention_dropout = config.encoder_dropout
    for mix in model.mixes.values():
        mix.layer_dropout = config.layer_dropout


def predict_examples(model: UDModel, examples: Sequence[Example]):
    return [model.predict(ex) for ex in examples]


def train(
    model: UDModel,
    dataset: Dataset,
    config: TrainConfig,
    dev=None,
    out_dir: Optional[str] = None,
    on_epoch: Optional[Callable[[EpochRecord], None]] = None,
) -> TrainResult:
    """Train ``model`` in place.

    ``dev`` is an optional list of gold sentences. With ``out_dir`` the
    metrics log and ``last``/``best`` checkpoints are written there; best
    is chosen by dev LAS (ties to the earlier epoch), or is the last epoch
    when there is no dev set. ``on_epoch`` may return True to stop early.
    """
    apply_dropout_rates(model, config)
    rng = np.random.default_rng(config.seed)
    examples = [model.prepare(s, tb) for s, tb in dataset.sentences]
    dev_examples = [model.prepare(s, with_gold=False) for s in dev] if dev else []
    lengths = [len(ex.sentence) for ex in examples]
    treebanks = [ex.treebank for ex in examples]
    params = model.parameters()
    optimizer = T.Adam(params, (config.beta1, config.beta2), weight_decay=config.weight_decay)
    specials = model.pieces.special_ids
    mask_id = model.pieces.mask_id

    result = TrainResult()
    best_las = -1.0
    schedule_step = 0
    for epoch in range(1, config.epochs + 1):
        encoder_on = freeze_schedule(epoch, config.freeze_first_epoch)
        total, count = 0.0, 0
        for batch in bucket_batches(lengths, config.batch_size, config.length_fuzz, rng, treebanks):
            optimizer.zero_grad()
            batch_loss = 0.0
            for idx, _ in batch:
                ex = examples[idx]
                ids, _ = mask_inputs(ex.segmentation.piece_ids, config.mask_prob, rng, mask_id, specials)
                loss, _ = model.loss(
                    ex,
                    config.label_smoothing,
                    training=True,
                    rng=rng,
                    piece_ids=ids,
                    freeze_encoder=not encoder_on,
                )
                value = loss.item()
                if not math.isfinite(value):
                    raise NonFiniteLoss(
                        f"non-finite loss {value} at step {result.steps + 1}, epoch {epoch}, "
                        f"sentence {idx} of treebank {ex.treebank!r}"
                    )
                T.scale(loss, 1.0 / len(batch)).backward()
                batch_loss += value
            T.clip_gradients(params, config.grad_clip)
            if encoder_on:
                schedule_step += 1
            optimizer.step(learning_rates(config, epoch, max(schedule_step, 1)))
            result.steps += 1
            total += batch_loss
            count += len(batch)
        record = EpochRecord(epoch, total / count)
        if dev_examples:
            record.dev = evaluate(dev, predict_examples(model, dev_examples))
        result.records.append(record)
        log.info(record.log_line())
        stop = on_epoch is not None and bool(on_epoch(record))
        if out_dir is not None:
            model.save(os.path.join(out_dir, "last.udk"))
            las = record.dev.las.value if record.dev is not None else None
            improved = las is None or las > best_las
            if improved:
                best_las = -1.0 if las is None else las
                result.best_epoch = epoch
                model.save(os.path.join(out_dir, "best.udk"))
            with open(os.path.join(out_dir, "metrics.tsv"), "w", encoding="utf-8", newline="\n") as f:
                f.write("\n".join(result.log_lines(config.seed)) + "\n")
        if stop:
            break
    if out_dir is not None:
        result.checkpoints = [os.path.join(out_dir, "best.udk"), os.path.join(out_dir, "last.udk")]
    return result


def config_dict(config: TrainConfig) -> dict:
    return asdict(config)
