"""CoNLL-U reading, writing, validation and treebank concatenation.

Only syntactic words take part in prediction and evaluation. Multiword
token ranges, empty nodes and comments are carried along verbatim so that
a parse/serialize round trip is lossless.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional

UNSET = "_"


class ConlluError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Token:
    id: int
    form: str
    lemma: Optional[str] = None
    upos: Optional[str] = None
    xpos: str = UNSET
    ufeats: str = UNSET
    head: Optional[int] = None
    deprel: Optional[str] = None
    deps: str = UNSET
    misc: str = UNSET

    def to_line(self) -> str:
        return "\t".join(
            [
                str(self.id),
                self.form,
                _opt(self.lemma),
                _opt(self.upos),
                self.xpos,
                self.ufeats,
                UNSET if self.head is None else str(self.head),
                _opt(self.deprel),
                self.deps,
                self.misc,
            ]
        )


@dataclass(frozen=True)
class MultiwordToken:
    start: int
    end: int
    form: str
    line: str


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]
    mwt_ranges: tuple[MultiwordToken, ...] = ()
    empty_nodes: tuple[str, ...] = ()
    comments: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def forms(self) -> list[str]:
        return [t.form for t in self.tokens]

    def with_tokens(self, tokens: Iterable[Token]) -> "Sentence":
        return Sentence(tuple(tokens), self.mwt_ranges, self.empty_nodes, self.comments)


@dataclass
class Dataset:
    sentences: list[tuple[Sentence, str]] = field(default_factory=list)
    counts: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.sentences)

    def treebank_ids(self) -> list[str]:
        return [tb for _, tb in self.sentences]


def _opt(value: Optional[str]) -> str:
    return UNSET if value is None else value


def _parse_token(cols: list[str], lineno: int) -> Token:
    form = cols[1]
    lemma = cols[2]
    # a "_" lemma is a real value only when the form itself is "_"
    if lemma == UNSET and form != UNSET:
        lemma = None
    head: Optional[int]
    if cols[6] == UNSET:
        head = None
    else:
        try:
            head = int(cols[6])
        except ValueError:
            raise ConlluError(f"HEAD is not an integer: {cols[6]!r}", lineno) from None
    return Token(
        id=int(cols[0]),
        form=form,
        lemma=lemma,
        upos=None if cols[3] == UNSET else cols[3],
        xpos=cols[4],
        ufeats=cols[5],
        head=head,
        deprel=None if cols[7] == UNSET else cols[7],
        deps=cols[8],
        misc=cols[9],
    )


def _finish(block: list[tuple[int, str]]) -> Sentence:
    comments: list[str] = []
    tokens: list[Token] = []
    token_lines: list[int] = []
    mwts: list[MultiwordToken] = []
    mwt_lines: list[int] = []
    empties: list[str] = []
    for lineno, line in block:
        if line.startswith("#"):
            comments.append(line)
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ConlluError(f"expected 10 tab-separated columns, found {len(cols)}", lineno)
        wid = cols[0]
        if "-" in wid:
            try:
                start, end = (int(x) for x in wid.split("-"))
            except ValueError:
                raise ConlluError(f"bad multiword range {wid!r}", lineno) from None
            if start != len(tokens) + 1 or end < start:
                raise ConlluError(f"multiword range {wid} out of place", lineno)
            mwts.append(MultiwordToken(start, end, cols[1], line))
            mwt_lines.append(lineno)
        elif "." in wid:
            empties.append(line)
        else:
            if not wid.isdigit() or int(wid) != len(tokens) + 1:
                raise ConlluError(f"word id {wid!r} is not {len(tokens) + 1}", lineno)
            tokens.append(_parse_token(cols, lineno))
            token_lines.append(lineno)
    n = len(tokens)
    for lineno, tok in zip(token_lines, tokens):
        if tok.head is not None and not 0 <= tok.head <= n:
            raise ConlluError(f"HEAD {tok.head} outside [0, {n}]", lineno)
    for lineno, m in zip(mwt_lines, mwts):
        if m.end > n:
            raise ConlluError(f"multiword range {m.start}-{m.end} past sentence end", lineno)
    return Sentence(tuple(tokens), tuple(mwts), tuple(empties), tuple(comments))


def parse_document(text: str) -> list[Sentence]:
    """Parse CoNLL-U text. LF and CRLF line endings are both accepted."""
    sentences = []
    block: list[tuple[int, str]] = []
    # str.splitlines would also break on U+2028 and friends inside forms
    for lineno, line in enumerate(text.split("\n"), start=1):
        line = line.rstrip("\r")
        if line.strip() == "":
            if block:
                sentences.append(_finish(block))
                block = []
        else:
            block.append((lineno, line))
    if block:
        sentences.append(_finish(block))
    return sentences


def read_conllu(path) -> list[Sentence]:
    with open(path, encoding="utf-8", newline="") as f:
        return parse_document(f.read())


def serialize_sentence(sentence: Sentence) -> str:
    lines = list(sentence.comments)
    mwt_at = {m.start: m for m in sentence.mwt_ranges}
    empties_after: dict[int, list[str]] = {}
    for line in sentence.empty_nodes:
        empties_after.setdefault(int(line.split("\t", 1)[0].split(".")[0]), []).append(line)
    lines.extend(empties_after.get(0, []))
    for tok in sentence.tokens:
        if tok.id in mwt_at:
            lines.append(mwt_at[tok.id].line)
        lines.append(tok.to_line())
        lines.extend(empties_after.get(tok.id, []))
    return "\n".join(lines) + "\n"


def serialize_document(sentences: Iterable[Sentence]) -> str:
    return "".join(serialize_sentence(s) + "\n" for s in sentences)


def write_conllu(path, sentences: Iterable[Sentence]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(serialize_document(sentences))


def validate_sentence(s: Sentence) -> list[str]:
    """Return a list of human-readable invariant violations (empty if valid)."""
    violations = []
    n = len(s.tokens)
    for i, tok in enumerate(s.tokens, start=1):
        if tok.id != i:
            violations.append(f"token {i} has id {tok.id}")
    heads = [t.head for t in s.tokens]
    for tok in s.tokens:
        if tok.head is None:
            continue
        if not 0 <= tok.head <= n:
            violations.append(f"token {tok.id}: head {tok.head} out of range")
        elif tok.head == tok.id:
            violations.append(f"token {tok.id}: head points to itself")
    if n and all(h is not None for h in heads):
        roots = [t.id for t in s.tokens if t.head == 0]
        if len(roots) == 0:
            violations.append("no root")
        elif len(roots) > 1:
            violations.append(f"multiple roots: {roots}")
        if _has_cycle(heads):
            violations.append("head graph contains a cycle")
    return violations


def _has_cycle(heads: list) -> bool:
    n = len(heads)
    for start in range(1, n + 1):
        seen = set()
        node = start
        while node not in (0, None):
            if node in seen or not 1 <= node <= n:
                return node in seen
            seen.add(node)
            node = heads[node - 1]
    return False


def concat_treebanks(treebanks: Iterable[tuple[str, list[Sentence]]]) -> Dataset:
    data = Dataset()
    for tb_id, sentences in treebanks:
        if tb_id in data.counts:
            raise ValueError(f"duplicate treebank id {tb_id!r}")
        data.counts[tb_id] = len(sentences)
        data.sentences.extend((s, tb_id) for s in sentences)
    return data


def vocab_counts(dataset: Dataset) -> dict[str, int]:
    from udkit.lemma_script import compute_lemma_script, encode_tag

    forms, upos, feats, scripts, deprels = set(), set(), set(), set(), set()
    for sentence, _ in dataset.sentences:
        for tok in sentence.tokens:
            forms.add(tok.form)
            feats.add(tok.ufeats)
            if tok.upos is not None:
                upos.add(tok.upos)
            if tok.deprel is not None:
                deprels.add(tok.deprel)
            if tok.lemma is not None:
                scripts.add(encode_tag(compute_lemma_script(tok.form, tok.lemma)))
    return {
        "forms": len(forms),
        "upos": len(upos),
        "ufeats": len(feats),
        "lemma_scripts": len(scripts),
        "deprels": len(deprels),
    }


def column_counter(sentences: Iterable[Sentence], column: str) -> Counter:
    return Counter(getattr(t, column) for s in sentences for t in s.tokens)
