"""Command-line entry point: train, predict, evaluate and small utilities."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
import tempfile
from pathlib import Path
from typing import Optional

from udkit.conllu import ConlluError, concat_treebanks, read_conllu, serialize_document, vocab_counts
from udkit.encoder import EncoderConfig
from udkit.lemma_script import MalformedTag, apply_lemma_script, compute_lemma_script, decode_tag, encode_tag
from udkit.metrics import AlignmentError, evaluate, format_report, machine_lines
from udkit.model import ModelConfig, UDModel, Vocabs
from udkit.subword import SubwordVocab, build_vocab, tokenize_word
from udkit.tensor import load_arrays
from udkit.training import NonFiniteLoss, TrainConfig, train

log = logging.getLogger("udkit")

SEED_ENV = "UDKIT_SEED"
PATH_KEYS = ("train", "dev", "vocab", "pretrained", "output_dir")
ENCODER_KEYS = ("num_layers", "num_heads", "hidden_dim", "ff_dim", "max_positions")
MODEL_KEYS = ("arc_dim", "tag_dim", "max_len", "overlap")


class ConfigError(ValueError):
    pass


@dataclasses.dataclass
class RunConfig:
    train: list[str]
    output_dir: str
    dev: Optional[str] = None
    vocab: Optional[str] = None
    pretrained: Optional[str] = None
    training: TrainConfig = dataclasses.field(default_factory=TrainConfig)
    model: ModelConfig = dataclasses.field(default_factory=ModelConfig)


def _field_types(cls) -> dict[str, type]:
    hints = {"int": int, "float": float, "bool": bool, "str": str}
    return {f.name: hints.get(str(f.type), str) for f in dataclasses.fields(cls)}


def _convert(key: str, raw: str, kind: type):
    if kind is bool:
        if raw.lower() in ("true", "yes", "1"):
            return True
        if raw.lower() in ("false", "no", "0"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected {kind.__name__}, got {raw!r}") from None


def parse_config_text(text: str, base_dir: str = ".") -> RunConfig:
    """Flat ``key = value`` lines; ``#`` starts a comment. Relative paths
    resolve against ``base_dir``. ``train`` takes a comma-separated list."""
    train_types = _field_types(TrainConfig)
    enc_types = _field_types(EncoderConfig)
    model_types = _field_types(ModelConfig)
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        known = key in PATH_KEYS or key in train_types or key in ENCODER_KEYS or key in MODEL_KEYS
        if not known:
            raise ConfigError(f"unknown config key {key!r} (line {lineno})")
        if key in values:
            raise ConfigError(f"duplicate config key {key!r} (line {lineno})")
        values[key] = value

    def path(p: str) -> str:
        return p if os.path.isabs(p) else os.path.normpath(os.path.join(base_dir, p))

    for key in ("train", "output_dir"):
        if not values.get(key):
            raise ConfigError(f"missing required key {key!r}")
    tc = {k: _convert(k, v, train_types[k]) for k, v in values.items() if k in train_types}
    enc = {k: _convert(k, v, enc_types[k]) for k, v in values.items() if k in ENCODER_KEYS}
    mod = {k: _convert(k, v, model_types[k]) for k, v in values.items() if k in MODEL_KEYS}
    if os.environ.get(SEED_ENV):
        tc["seed"] = _convert(SEED_ENV, os.environ[SEED_ENV], int)
    try:
        training = TrainConfig(**tc)
        model = ModelConfig(
            encoder=EncoderConfig(**enc),
            dropout=training.dropout,
            layer_dropout=training.layer_dropout,
            **mod,
        )
    except ValueError as e:
        raise ConfigError(str(e)) from None
    model.encoder.hidden_dropout = model.encoder.attention_dropout = training.encoder_dropout
    return RunConfig(
        train=[path(p.strip()) for p in values["train"].split(",") if p.strip()],
        output_dir=path(values["output_dir"]),
        dev=path(values["dev"]) if values.get("dev") else None,
        vocab=path(values["vocab"]) if values.get("vocab") else None,
        pretrained=path(values["pretrained"]) if values.get("pretrained") else None,
        training=training,
        model=model,
    )


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as f:
        return parse_config_text(f.read(), os.path.dirname(os.path.abspath(path)))


def check_paths(run: RunConfig) -> None:
    inputs = list(run.train) + [p for p in (run.dev, run.vocab, run.pretrained) if p]
    missing = [p for p in inputs if not os.path.isfile(p)]
    if missing:
        raise ConfigError(f"missing input file(s): {', '.join(missing)}")
    parent = os.path.dirname(os.path.abspath(run.output_dir))
    if not os.path.isdir(parent):
        raise ConfigError(f"parent of output_dir does not exist: {parent}")
    if os.path.exists(run.output_dir) and not os.path.isdir(run.output_dir):
        raise ConfigError(f"output_dir exists and is not a directory: {run.output_dir}")


def atomic_write_text(path, text: str) -> None:
    """Write to a temp file in the target directory, then rename over ``path``."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".udkit-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fail(message: str, status: int = 1) -> int:
    print(f"udkit: error: {message}", file=sys.stderr)
    return status


# commands


def cmd_train(args) -> int:
    try:
        run = load_config(args.config)
        check_paths(run)
        treebanks = [(Path(p).stem, read_conllu(p)) for p in run.train]
        dev = read_conllu(run.dev) if run.dev else None
    except (ConfigError, ConlluError, OSError) as e:
        return _fail(str(e))
    try:
        data = concat_treebanks(treebanks)
    except ValueError as e:
        return _fail(str(e))
    if len(data) == 0:
        return _fail("training data is empty")
    sentences = [s for s, _ in data.sentences]
    pieces = SubwordVocab.load(run.vocab) if run.vocab else build_vocab(t.form for s in sentences for t in s.tokens)
    try:
        model = UDModel(run.model, pieces, Vocabs.from_sentences(sentences), seed=run.training.seed)
        if run.pretrained:
            model.encoder.load_state_dict(load_arrays(run.pretrained))
    except ValueError as e:
        return _fail(str(e))
    os.makedirs(run.output_dir, exist_ok=True)
    try:
        result = train(model, data, run.training, dev=dev, out_dir=run.output_dir)
    except NonFiniteLoss as e:
        return _fail(str(e))
    except ValueError as e:
        return _fail(str(e))
    print(f"trained {len(result.records)} epochs, {result.steps} steps; best epoch {result.best_epoch}")
    print(f"checkpoints: {', '.join(result.checkpoints)}")
    return 0


def cmd_predict(args) -> int:
    try:
        model = UDModel.load(args.checkpoint)
    except (OSError, ValueError, KeyError) as e:
        return _fail(f"cannot load checkpoint {args.checkpoint}: {e}")
    try:
        sentences = read_conllu(args.input)
    except (ConlluError, OSError) as e:
        return _fail(str(e))
    try:
        predicted = [model.predict(model.prepare(s, with_gold=False)) for s in sentences]
    except ValueError as e:
        return _fail(str(e))
    atomic_write_text(args.output, serialize_document(predicted) if predicted else "")
    return 0


def cmd_evaluate(args) -> int:
    try:
        report = evaluate(read_conllu(args.gold), read_conllu(args.system), strip_subtypes=args.strip_subtypes)
    except (AlignmentError, ConlluError, OSError) as e:
        return _fail(str(e))
    print(format_report(report))
    if args.machine:
        print("\n".join(machine_lines(report)))
    return 0


def cmd_lemma_script(args) -> int:
    if args.action == "encode":
        print(encode_tag(compute_lemma_script(args.first, args.second)))
        return 0
    try:
        lemma, fallback = apply_lemma_script(decode_tag(args.first), args.second)
    except MalformedTag as e:
        return _fail(f"malformed tag: {e}")
    if fallback:
        log.warning("script does not fit %r; fell back to the form", args.second)
    print(lemma)
    return 0


def cmd_vocab_counts(args) -> int:
    try:
        data = concat_treebanks((Path(p).stem, read_conllu(p)) for p in args.files)
    except (ConlluError, OSError, ValueError) as e:
        return _fail(str(e))
    print(f"sentences\t{len(data)}")
    for key, value in vocab_counts(data).items():
        print(f"{key}\t{value}")
    return 0


def cmd_tokenize(args) -> int:
    try:
        vocab = SubwordVocab.load(args.vocab)
    except (OSError, ValueError) as e:
        return _fail(str(e))
    print(" ".join(tokenize_word(args.word, vocab)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="udkit", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train from a key = value config file")
    p.add_argument("config")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="annotate a CoNLL-U file")
    p.add_argument("checkpoint")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a system file against gold")
    p.add_argument("gold")
    p.add_argument("system")
    p.add_argument("--strip-subtypes", action="store_true", help="compare deprels on the main type only")
    p.add_argument("--machine", action="store_true", help="also print metric<TAB>value lines")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("lemma-script", help="encode (form, lemma) or apply (tag, form)")
    p.add_argument("action", choices=("encode", "apply"))
    p.add_argument("first", help="form for encode, tag for apply")
    p.add_argument("second", help="lemma for encode, form for apply")
    p.set_defaults(func=cmd_lemma_script)

    p = sub.add_parser("vocab-counts", help="label inventory sizes over CoNLL-U files")
    p.add_argument("files", nargs="+")
    p.set_defaults(func=cmd_vocab_counts)

    p = sub.add_parser("tokenize", help="wordpiece one word")
    p.add_argument("vocab")
    p.add_argument("word")
    p.set_defaults(func=cmd_tokenize)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
