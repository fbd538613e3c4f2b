from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from udkit.conllu import Sentence, Token, parse_document, read_conllu
from udkit.metrics import (
    FUNCTIONAL_RELATIONS,
    AlignmentError,
    EvalReport,
    Score,
    evaluate,
    format_report,
    machine_lines,
)


def sent(rows):
    """rows: (form, lemma, upos, feats, head, deprel)"""
    return Sentence(
        tuple(Token(i + 1, f, lemma=l, upos=u, ufeats=x, head=h, deprel=r) for i, (f, l, u, x, h, r) in enumerate(rows))
    )


def counts(report: EvalReport):
    return {m: (getattr(report, m).correct, getattr(report, m).total) for m in ("upos", "ufeats", "lemmas", "uas", "las", "clas")}


GOLD_A = sent([
    ("The", "the", "DET", "Definite=Def", 2, "det"),
    ("cat", "cat", "NOUN", "Number=Sing", 3, "nsubj"),
    ("sat", "sit", "VERB", "Tense=Past", 0, "root"),
    (".", ".", "PUNCT", "_", 3, "punct"),
])

FIXTURES = {
    # 3 heads right (The, cat, sat), 2 of them with the right relation
    "heads_and_labels": (
        [GOLD_A],
        [sent([
            ("The", "the", "DET", "Definite=Def", 2, "det"),
            ("cat", "cat", "NOUN", "Number=Sing", 3, "obj"),
            ("sat", "sit", "VERB", "Tense=Past", 0, "root"),
            (".", ".", "PUNCT", "_", 2, "punct"),
        ])],
        # content words: cat, sat -> cat wrong label, sat right
        {"upos": (4, 4), "ufeats": (4, 4), "lemmas": (4, 4), "uas": (3, 4), "las": (2, 4), "clas": (1, 2)},
    ),
    # only function words are wrong, so CLAS stays perfect
    "function_words_only": (
        [GOLD_A],
        [sent([
            ("The", "the", "DET", "Definite=Def", 3, "det"),
            ("cat", "cat", "NOUN", "Number=Sing", 3, "nsubj"),
            ("sat", "sit", "VERB", "Tense=Past", 0, "root"),
            (".", ".", "PUNCT", "_", 2, "punct"),
        ])],
        {"upos": (4, 4), "ufeats": (4, 4), "lemmas": (4, 4), "uas": (2, 4), "las": (2, 4), "clas": (2, 2)},
    ),
    # tagging errors do not touch attachment scores
    "tags_lemmas_feats": (
        [GOLD_A],
        [sent([
            ("The", "the", "PRON", "Definite=Def", 2, "det"),
            ("cat", "cats", "NOUN", "Number=Plur", 3, "nsubj"),
            ("sat", "sat", "AUX", "Tense=Past", 0, "root"),
            (".", ".", "PUNCT", "_", 3, "punct"),
        ])],
        {"upos": (2, 4), "ufeats": (3, 4), "lemmas": (2, 4), "uas": (4, 4), "las": (4, 4), "clas": (2, 2)},
    ),
    # subtypes: full-string comparison by default; functional test on main type
    "subtypes": (
        [sent([
            ("his", "he", "PRON", "_", 2, "nmod:poss"),
            ("dog", "dog", "NOUN", "_", 3, "nsubj"),
            ("barked", "bark", "VERB", "_", 0, "root"),
            ("at", "at", "ADP", "_", 5, "case:x"),
            ("me", "I", "PRON", "_", 3, "obl"),
        ])],
        [sent([
            ("his", "he", "PRON", "_", 2, "nmod"),
            ("dog", "dog", "NOUN", "_", 3, "nsubj"),
            ("barked", "bark", "VERB", "_", 0, "root"),
            ("at", "at", "ADP", "_", 5, "case"),
            ("me", "I", "PRON", "_", 3, "obl:tmod"),
        ])],
        # content: his, dog, barked, me (case:x is functional)
        {"upos": (5, 5), "ufeats": (5, 5), "lemmas": (5, 5), "uas": (5, 5), "las": (2, 5), "clas": (2, 4)},
    ),
    # two sentences; second has every head wrong
    "two_sentences": (
        [GOLD_A, sent([("Go", "go", "VERB", "_", 0, "root"), ("!", "!", "PUNCT", "_", 1, "punct")])],
        [GOLD_A, sent([("Go", "go", "VERB", "_", 2, "root"), ("!", "!", "PUNCT", "_", 0, "punct")])],
        {"upos": (6, 6), "ufeats": (6, 6), "lemmas": (6, 6), "uas": (4, 6), "las": (4, 6), "clas": (2, 3)},
    ),
    # a sentence of function words only: CLAS undefined
    "no_content_words": (
        [sent([("of", "of", "ADP", "_", 0, "case"), (".", ".", "PUNCT", "_", 1, "punct")])],
        [sent([("of", "of", "ADP", "_", 0, "case"), (".", ".", "PUNCT", "_", 1, "punct")])],
        {"upos": (2, 2), "ufeats": (2, 2), "lemmas": (2, 2), "uas": (2, 2), "las": (2, 2), "clas": (0, 0)},
    ),
}


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_hand_computed_fixtures(name):
    gold, system, expected = FIXTURES[name]
    report = evaluate(gold, system)
    assert counts(report) == expected
    for m, (c, t) in expected.items():
        value = getattr(report, m).value
        assert value == (None if t == 0 else c / t)


def test_strip_subtypes_flag():
    gold, system, _ = FIXTURES["subtypes"]
    report = evaluate(gold, system, strip_subtypes=True)
    assert (report.las.correct, report.clas.correct) == (5, 4)


def test_spec_fraction_values():
    report = evaluate(*FIXTURES["heads_and_labels"][:2])
    assert report.uas.value == 0.75 and report.las.value == 0.5
    report = evaluate(*FIXTURES["function_words_only"][:2])
    assert report.clas.value == 1.0 and report.las.value < 1.0


def test_mwt_and_empty_nodes_not_counted():
    text = (
        "1-2\tdel\t_\t_\t_\t_\t_\t_\t_\t_\n"
        "1\tde\tde\tADP\t_\t_\t2\tcase\t_\t_\n"
        "2\tel\tel\tDET\t_\t_\t0\troot\t_\t_\n"
        "2.1\tx\tx\tX\t_\t_\t_\t_\t0:root\t_\n\n"
    )
    report = evaluate(parse_document(text), parse_document(text))
    assert report.uas.total == 2


def test_alignment_errors_name_the_sentence():
    with pytest.raises(AlignmentError, match="sentences"):
        evaluate([GOLD_A], [])
    short = sent([("The", "the", "DET", "_", 0, "root")])
    with pytest.raises(AlignmentError, match="sentence 1"):
        evaluate([GOLD_A, GOLD_A], [GOLD_A, short])
    other = GOLD_A.with_tokens([t if t.id != 2 else Token(2, "dog", head=3) for t in GOLD_A.tokens])
    with pytest.raises(AlignmentError, match="sentence 0, word 2"):
        evaluate([GOLD_A], [other])


def test_identity_on_corpus(corpus_files):
    for path in corpus_files:
        doc = read_conllu(path)
        values = evaluate(doc, doc).values()
        assert all(v == 1.0 for v in values.values()), path.name


def test_clas_total_is_gold_content_count(corpus_files):
    for path in corpus_files:
        doc = read_conllu(path)
        content = sum(t.deprel.split(":")[0] not in FUNCTIONAL_RELATIONS for s in doc for t in s.tokens)
        assert evaluate(doc, doc).clas.total == content


@given(st.data())
def test_las_never_exceeds_uas_and_head_corruption_is_monotone(data):
    n = data.draw(st.integers(2, 8))
    heads = [0] + [data.draw(st.integers(1, i)) for i in range(1, n)]
    rels = data.draw(st.lists(st.sampled_from(["nsubj", "obj", "det", "punct", "amod"]), min_size=n, max_size=n))
    gold = sent([(f"w{i}", "x", "X", "_", h, r) for i, (h, r) in enumerate(zip(heads, rels))])
    sys_rels = data.draw(st.lists(st.sampled_from(["nsubj", "obj", "det", "punct", "amod"]), min_size=n, max_size=n))
    system = sent([(f"w{i}", "x", "X", "_", h, r) for i, (h, r) in enumerate(zip(heads, sys_rels))])
    prev = evaluate([gold], [system]).uas.value
    order = data.draw(st.permutations(range(n)))
    for k in order:
        toks = list(system.tokens)
        t = toks[k]
        toks[k] = Token(t.id, t.form, t.lemma, t.upos, t.xpos, t.ufeats, (t.head + 1) % (n + 1), t.deprel)
        system = system.with_tokens(toks)
        report = evaluate([gold], [system])
        assert report.uas.value <= prev
        assert report.las.value <= report.uas.value
        prev = report.uas.value


def test_format_report():
    perfect = evaluate([GOLD_A], [GOLD_A])
    lines = format_report(perfect).splitlines()
    assert lines[0].split() == ["UPOS", "Feats", "Lem", "UAS", "LAS", "CLAS"]
    assert lines[1].split() == ["100.00"] * 6
    assert len(lines[0]) == len(lines[1])
    report = EvalReport(uas=Score(3, 4), clas=Score(0, 0))
    cells = format_report(report).splitlines()[1].split()
    assert cells[3] == "75.00"
    assert cells[5] == "-" and cells[0] == "-"


def test_machine_lines():
    report = EvalReport(upos=Score(1, 3), las=Score(0, 0))
    lines = dict(l.split("\t") for l in machine_lines(report))
    assert Fraction(lines["upos"]).limit_denominator(10) == Fraction(1, 3)
    assert lines["las"] == "-"
