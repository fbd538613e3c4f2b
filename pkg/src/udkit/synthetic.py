"""Tiny synthetic treebanks for learnability experiments.

Two grammars with disjoint alphabets: a head-initial SVO grammar in Latin
letters and a head-final SOV grammar in Cyrillic letters. Both have
lexically determined attachment ambiguity (prepositions or postpositions
that attach to the verb or to the preceding noun), inflected nouns with
feature bundles and lemma changes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from udkit.conllu import Sentence, Token

LATIN = "abcdefghijklmnoprstuvwz"
CYRILLIC = "абвгдежзиклмнопрстуфхцш"


@dataclass
class Lexicon:
    nouns: list[str]
    verbs: list[str]
    adjs: list[str]
    dets: list[str]
    verb_adps: list[str]
    noun_adps: list[str]
    plural: str


def _words(rng: np.random.Generator, alphabet: str, count: int, taken: set) -> list[str]:
    out = []
    while len(out) < count:
        w = "".join(rng.choice(list(alphabet), size=int(rng.integers(3, 7))))
        if w not in taken:
            taken.add(w)
            out.append(w)
    return out


def make_lexicon(alphabet: str, seed: int, plural: str) -> Lexicon:
    rng = np.random.default_rng(seed)
    taken: set = set()
    return Lexicon(
        nouns=_words(rng, alphabet, 30, taken),
        verbs=_words(rng, alphabet, 12, taken),
        adjs=_words(rng, alphabet, 10, taken),
        dets=_words(rng, alphabet, 3, taken),
        verb_adps=_words(rng, alphabet, 3, taken),
        noun_adps=_words(rng, alphabet, 3, taken),
        plural=plural,
    )


@dataclass
class _Word:
    form: str
    lemma: str
    upos: str
    feats: str
    head: int  # index into the sentence list, -1 = root
    deprel: str


def _noun_phrase(rng, lex: Lexicon, words: list, head_final: bool, deprel: str) -> int:
    """Append a noun phrase; return the index of its noun."""
    noun = str(rng.choice(lex.nouns))
    plural = rng.random() < 0.4
    form = noun + lex.plural if plural else noun
    feats = "Number=Plur" if plural else "Number=Sing"
    n_adj = int(rng.integers(0, 3))
    det = str(rng.choice(lex.dets)) if rng.random() < 0.7 else None
    adjs = [str(rng.choice(lex.adjs)) for _ in range(n_adj)]
    start = len(words)
    if head_final:
        # adj* noun det
        noun_idx = start + n_adj
        for a in adjs:
            words.append(_Word(a, a, "ADJ", "_", noun_idx, "amod"))
        words.append(_Word(form, noun, "NOUN", feats, -2, deprel))
        if det:
            words.append(_Word(det, det, "DET", "_", noun_idx, "det"))
    else:
        # det adj* noun
        noun_idx = start + (1 if det else 0) + n_adj
        if det:
            words.append(_Word(det, det, "DET", "_", noun_idx, "det"))
        for a in adjs:
            words.append(_Word(a, a, "ADJ", "_", noun_idx, "amod"))
        words.append(_Word(form, noun, "NOUN", feats, -2, deprel))
    return noun_idx


def _sentence(rng, lex: Lexicon, head_final: bool) -> Sentence:
    words: list[_Word] = []
    verb = str(rng.choice(lex.verbs))
    transitive = rng.random() < 0.7
    with_pp = rng.random() < 0.6
    if head_final:
        subj = _noun_phrase(rng, lex, words, True, "nsubj")
        obj = _noun_phrase(rng, lex, words, True, "obj") if transitive else None
        pp_noun = pp_adp = None
        if with_pp:
            pp_noun = _noun_phrase(rng, lex, words, True, "obl")
            verbal = rng.random() < 0.5
            pp_adp = str(rng.choice(lex.verb_adps if verbal else lex.noun_adps))
            words.append(_Word(pp_adp, pp_adp, "ADP", "_", pp_noun, "case"))
        v = len(words)
        words.append(_Word(verb, verb, "VERB", "Tense=Pres", -1, "root"))
    else:
        subj = _noun_phrase(rng, lex, words, False, "nsubj")
        v = len(words)
        words.append(_Word(verb, verb, "VERB", "Tense=Pres", -1, "root"))
        obj = _noun_phrase(rng, lex, words, False, "obj") if transitive else None
        pp_noun = None
        if with_pp:
            verbal = rng.random() < 0.5
            adp = str(rng.choice(lex.verb_adps if verbal else lex.noun_adps))
            adp_idx = len(words)
            words.append(_Word(adp, adp, "ADP", "_", -3, "case"))
            pp_noun = _noun_phrase(rng, lex, words, False, "obl")
            words[adp_idx].head = pp_noun
    words[subj].head = v
    if obj is not None:
        words[obj].head = v
    if pp_noun is not None:
        # the adposition decides: verbal ones attach to the verb, nominal
        # ones to the nearest preceding noun (the object if any, else subject)
        adp = next(w for w in words if w.upos == "ADP")
        if adp.form in lex.verb_adps:
            words[pp_noun].head, words[pp_noun].deprel = v, "obl"
        else:
            target = obj if obj is not None else subj
            words[pp_noun].head, words[pp_noun].deprel = target, "nmod"
    tokens = [
        Token(
            id=i + 1,
            form=w.form,
            lemma=w.lemma,
            upos=w.upos,
            xpos="_",
            ufeats=w.feats,
            head=w.head + 1,
            deprel=w.deprel,
            deps="_",
            misc="_",
        )
        for i, w in enumerate(words)
    ]
    return Sentence(tuple(tokens))


def generate(grammar: str, count: int, seed: int) -> list[Sentence]:
    """``grammar`` is ``"svo"`` (Latin, head-initial) or ``"sov"`` (Cyrillic, head-final)."""
    if grammar == "svo":
        lex, head_final = make_lexicon(LATIN, 101, "s"), False
    elif grammar == "sov":
        lex, head_final = make_lexicon(CYRILLIC, 202, "ы"), True
    else:
        raise ValueError(f"unknown grammar {grammar!r}")
    rng = np.random.default_rng(seed)
    return [_sentence(rng, lex, head_final) for _ in range(count)]
