import os
import subprocess
import sys
from pathlib import Path

import pytest

from udkit.cli import ConfigError, atomic_write_text, main, parse_config_text
from udkit.conllu import read_conllu, serialize_document, validate_sentence, write_conllu

DATA = Path(__file__).parent / "data"

TOY = """# toy run
train = {train}
dev = {dev}
output_dir = {out}
num_layers = 2
num_heads = 2
hidden_dim = 16
ff_dim = 32
arc_dim = 16
tag_dim = 8
epochs = {epochs}
batch_size = 4
warmup_steps = 10
"""


def write_config(tmp_path, english, epochs=80, extra=""):
    write_conllu(tmp_path / "train.conllu", english[:10])
    write_conllu(tmp_path / "dev.conllu", english[10:14])
    cfg = tmp_path / "run.cfg"
    cfg.write_text(TOY.format(train="train.conllu", dev="dev.conllu", out="out", epochs=epochs) + extra)
    return cfg


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    from udkit.conllu import read_conllu

    english = read_conllu(DATA / "en_samples.conllu")
    tmp = tmp_path_factory.mktemp("run")
    cfg = write_config(tmp, english)
    assert main(["train", str(cfg)]) == 0
    return tmp


def test_train_smoke_writes_checkpoint_and_full_log(trained):
    out = trained / "out"
    assert (out / "best.udk").exists() and (out / "last.udk").exists()
    lines = (out / "metrics.tsv").read_text().splitlines()
    assert lines[0] == "# seed\t13"
    rows = [l for l in lines if not l.startswith("#")]
    assert len(rows) == 80
    assert all(len(r.split("\t")) == 7 for r in rows)


def test_predict_output_is_valid_and_copies_other_columns(trained, tmp_path, english):
    src = tmp_path / "in.conllu"
    write_conllu(src, english[20:30])
    out = tmp_path / "pred.conllu"
    assert main(["predict", str(trained / "out" / "best.udk"), str(src), str(out)]) == 0
    pred = read_conllu(out)
    assert len(pred) == 10
    for p, g in zip(pred, english[20:30]):
        assert validate_sentence(p) == []
        assert all(t.upos and t.lemma is not None and t.deprel and t.head is not None for t in p.tokens)
        assert [t.misc for t in p.tokens] == [t.misc for t in g.tokens]
        assert [t.xpos for t in p.tokens] == [t.xpos for t in g.tokens]
        assert p.comments == g.comments and p.mwt_ranges == g.mwt_ranges
    again = tmp_path / "pred2.conllu"
    main(["predict", str(trained / "out" / "best.udk"), str(src), str(again)])
    assert out.read_bytes() == again.read_bytes()


def test_predict_empty_file(trained, tmp_path):
    src, out = tmp_path / "empty.conllu", tmp_path / "o.conllu"
    src.write_text("")
    assert main(["predict", str(trained / "out" / "last.udk"), str(src), str(out)]) == 0
    assert out.read_text() == ""


def test_predict_bad_checkpoint(tmp_path, capsys):
    src = tmp_path / "in.conllu"
    src.write_text("")
    assert main(["predict", str(tmp_path / "nope.udk"), str(src), str(tmp_path / "o")]) != 0
    assert not (tmp_path / "o").exists()


def test_evaluate_self_and_fixture(tmp_path, capsys):
    gold = DATA / "en_samples.conllu"
    assert main(["evaluate", str(gold), str(gold), "--machine"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[1].split() == ["100.00"] * 6
    assert "uas\t1.0" in out

    g = "1\ta\ta\tX\t_\t_\t0\troot\t_\t_\n2\tb\tb\tX\t_\t_\t1\tdep\t_\t_\n3\tc\tc\tX\t_\t_\t1\tdep\t_\t_\n4\td\td\tX\t_\t_\t1\tdep\t_\t_\n\n"
    s = "1\ta\ta\tX\t_\t_\t0\troot\t_\t_\n2\tb\tb\tX\t_\t_\t1\tobj\t_\t_\n3\tc\tc\tX\t_\t_\t1\tdep\t_\t_\n4\td\td\tX\t_\t_\t2\tdep\t_\t_\n\n"
    (tmp_path / "g").write_text(g)
    (tmp_path / "s").write_text(s)
    assert main(["evaluate", str(tmp_path / "g"), str(tmp_path / "s")]) == 0
    cells = capsys.readouterr().out.splitlines()[1].split()
    assert cells[3:5] == ["75.00", "50.00"]


def test_evaluate_misaligned(tmp_path, capsys):
    (tmp_path / "g").write_text("1\ta\ta\tX\t_\t_\t0\troot\t_\t_\n\n")
    (tmp_path / "s").write_text("1\ta\ta\tX\t_\t_\t0\troot\t_\t_\n2\tb\tb\tX\t_\t_\t1\tdep\t_\t_\n\n")
    assert main(["evaluate", str(tmp_path / "g"), str(tmp_path / "s")]) != 0
    assert "sentence 0" in capsys.readouterr().err


def test_lemma_script_commands(capsys):
    assert main(["lemma-script", "encode", "running", "run"]) == 0
    assert capsys.readouterr().out.strip() == "p:|s:dddd"
    assert main(["lemma-script", "apply", "p:|s:", "dog"]) == 0
    assert capsys.readouterr().out.strip() == "dog"
    assert main(["lemma-script", "apply", "p:|s:q", "dog"]) != 0


def test_vocab_counts_and_tokenize(tmp_path, capsys):
    assert main(["vocab-counts", str(DATA / "en_samples.conllu")]) == 0
    out = dict(l.split("\t") for l in capsys.readouterr().out.splitlines())
    assert int(out["sentences"]) == 84 and int(out["upos"]) > 10
    vocab = tmp_path / "vocab.txt"
    vocab.write_text("[UNK]\n[MASK]\n[CLS]\n[SEP]\nun\n##aff\n##able\n")
    assert main(["tokenize", str(vocab), "unaffable"]) == 0
    assert capsys.readouterr().out.strip() == "un ##aff ##able"


def test_missing_train_file_creates_nothing(tmp_path, english, capsys):
    cfg = write_config(tmp_path, english)
    (tmp_path / "train.conllu").unlink()
    assert main(["train", str(cfg)]) != 0
    assert "train.conllu" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_unknown_key_is_named(tmp_path, english, capsys):
    cfg = write_config(tmp_path, english, extra="learning_rate = 3\n")
    assert main(["train", str(cfg)]) != 0
    assert "learning_rate" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_config_parsing(monkeypatch):
    monkeypatch.delenv("UDKIT_SEED", raising=False)
    run = parse_config_text("train = a.conllu, b.conllu  # two\noutput_dir=o\nepochs = 3\nfreeze_first_epoch = no\nhidden_dim=32\n", "/base")
    assert run.train == ["/base/a.conllu", "/base/b.conllu"]
    assert run.training.epochs == 3 and run.training.freeze_first_epoch is False
    assert run.model.encoder.hidden_dim == 32 and run.training.seed == 13
    monkeypatch.setenv("UDKIT_SEED", "99")
    assert parse_config_text("train = a\noutput_dir = o\n").training.seed == 99
    for bad in ["train = a\n", "train = a\noutput_dir = o\nepochs = many\n", "train = a\noutput_dir = o\nmask_prob = 1.5\n",
                "train = a\noutput_dir = o\nepochs = 2\nepochs = 3\n", "just words\n"]:
        with pytest.raises(ConfigError):
            parse_config_text(bad)


def test_seed_override_is_echoed(tmp_path, english, monkeypatch):
    cfg = write_config(tmp_path, english, epochs=1)
    monkeypatch.setenv("UDKIT_SEED", "7")
    assert main(["train", str(cfg)]) == 0
    assert (tmp_path / "out" / "metrics.tsv").read_text().startswith("# seed\t7\n")


def test_atomic_write_leaves_nothing_on_failure(tmp_path):
    target = tmp_path / "x.conllu"
    target.write_text("old")

    class Boom:
        def __str__(self):
            raise RuntimeError("boom")

    with pytest.raises(TypeError):
        atomic_write_text(target, Boom())
    assert target.read_text() == "old"
    assert [p.name for p in tmp_path.iterdir()] == ["x.conllu"]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "udkit", "lemma-script", "encode", "dogs", "dog"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and proc.stdout.strip() == "p:|s:d"
