"""Word-level evaluation under gold segmentation: UPOS, UFeats, Lemmas,
UAS, LAS and CLAS."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from udkit.conllu import Sentence

FUNCTIONAL_RELATIONS = frozenset({"aux", "case", "cc", "clf", "cop", "det", "mark", "punct"})
METRICS = ("upos", "ufeats", "lemmas", "uas", "las", "clas")
TABLE_COLUMNS = (("UPOS", "upos"), ("Feats", "ufeats"), ("Lem", "lemmas"), ("UAS", "uas"), ("LAS", "las"), ("CLAS", "clas"))


class AlignmentError(ValueError):
    pass


@dataclass
class Score:
    correct: int = 0
    total: int = 0

    @property
    def value(self) -> Optional[float]:
        """correct/total, or None when nothing was counted."""
        return self.correct / self.total if self.total else None

    def add(self, hit: bool) -> None:
        self.total += 1
        self.correct += int(hit)


@dataclass
class EvalReport:
    upos: Score = field(default_factory=Score)
    ufeats: Score = field(default_factory=Score)
    lemmas: Score = field(default_factory=Score)
    uas: Score = field(default_factory=Score)
    las: Score = field(default_factory=Score)
    clas: Score = field(default_factory=Score)

    def values(self) -> dict[str, Optional[float]]:
        return {m: getattr(self, m).value for m in METRICS}


def main_relation(deprel: Optional[str]) -> Optional[str]:
    return None if deprel is None else deprel.split(":", 1)[0]


def evaluate(gold: Sequence[Sentence], system: Sequence[Sentence], strip_subtypes: bool = False) -> EvalReport:
    """Compare word-aligned documents. Multiword ranges and empty nodes are
    not words and are ignored. Deprels compare as full strings unless
    ``strip_subtypes`` is set."""
    if len(gold) != len(system):
        raise AlignmentError(f"gold has {len(gold)} sentences, system has {len(system)}")
    rel = main_relation if strip_subtypes else (lambda r: r)
    report = EvalReport()
    for i, (g, s) in enumerate(zip(gold, system)):
        if len(g.tokens) != len(s.tokens):
            raise AlignmentError(
                f"sentence {i}: gold has {len(g.tokens)} words, system has {len(s.tokens)}"
            )
        for gt, st in zip(g.tokens, s.tokens):
            if gt.form != st.form:
                raise AlignmentError(f"sentence {i}, word {gt.id}: form {gt.form!r} vs {st.form!r}")
            report.upos.add(gt.upos == st.upos)
            report.ufeats.add(gt.ufeats == st.ufeats)
            report.lemmas.add(gt.lemma == st.lemma)
            head_ok = gt.head == st.head
            labeled = head_ok and rel(gt.deprel) == rel(st.deprel)
            report.uas.add(head_ok)
            report.las.add(labeled)
            if main_relation(gt.deprel) not in FUNCTIONAL_RELATIONS:
                report.clas.add(labeled)
    return report


def percent(value: Optional[float]) -> str:
    return "-" if value is None else f"{100.0 * value:.2f}"


def format_report(report: EvalReport) -> str:
    """Fixed-width table: header row, then one row of two-decimal percentages."""
    width = 8
    header = "".join(name.rjust(width) for name, _ in TABLE_COLUMNS)
    row = "".join(percent(getattr(report, key).value).rjust(width) for _, key in TABLE_COLUMNS)
    return header + "\n" + row


def machine_lines(report: EvalReport) -> list[str]:
    """``metric<TAB>value`` lines; value is a fraction or ``-``."""
    out = []
    for m in METRICS:
        v = getattr(report, m).value
        out.append(f"{m}\t{'-' if v is None else repr(v)}")
    return out
