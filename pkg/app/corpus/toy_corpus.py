from __future__ import annotations

from typing import List, Optional, Tuple

import numpy as np

from app.core.schemas import Sample, SrlStructure

# corpus sintético de notícias: usado pelos testes de integração e pelo comando "toy-corpus"
TOY_SEED = 2019

_SUBJECTS = ("senate", "council", "company", "union", "mayor", "court", "board", "agency")
_VERBS = (
    ("proposed", "proposes"),
    ("approved", "approves"),
    ("rejected", "rejects"),
    ("announced", "announces"),
    ("closed", "closes"),
    ("opened", "opens"),
)
_OBJECTS = ("bill", "plan", "budget", "school", "contract", "deal", "law", "road")
_DAYS = ("monday", "tuesday", "wednesday", "thursday", "friday")

_TEAMS = ("rovers", "united", "city", "wanderers", "athletic")
_PLAYERS = ("striker", "keeper", "captain", "winger", "coach")
_SPORT_VERBS = ("scored", "saved", "missed", "celebrated", "praised")
_SPORT_OBJECTS = ("goal", "penalty", "header", "win", "crowd")

_Sentence = Tuple[List[str], List[dict]]


def _event(subj: str, verb: str, obj: str, day: str) -> _Sentence:
    toks = ["the", subj, verb, "the", obj, "on", day, "."]
    return toks, [{"pred": (2, 3), "a0": (0, 2), "a1": (3, 5), "a2": (5, 7)}]


def _pronoun_followup(day: str) -> _Sentence:
    toks = ["they", "expect", "a", "vote", "on", day, "."]
    return toks, [{"pred": (1, 2), "a0": (0, 1), "a1": (2, 4)}]


def _filler(subj: str) -> _Sentence:
    toks = ["officials", "said", "the", subj, "was", "busy", "."]
    return toks, [{"pred": (1, 2), "a0": (0, 1), "a1": (2, 6)}]


def _assemble(sample_id: str, sentences: List[_Sentence], summary: List[str]) -> Sample:
    article: List[str] = []
    bounds = []
    srl = []
    for toks, structs in sentences:
        start = len(article)
        article.extend(toks)
        bounds.append((start, len(article)))
        for st in structs:
            srl.append(SrlStructure(**{k: (v[0] + start, v[1] + start) for k, v in st.items()}))
    return Sample(id=sample_id, article=article, summary=summary, sentence_bounds=bounds, srl=srl)


def toy_corpus(n: int = 50, seed: Optional[int] = None) -> List[Sample]:
    """
    Artigos de 4 ou 5 frases: dois eventos resumidos, uma frase iniciada por pronome, uma frase com "said"
    e às vezes um terceiro evento fora do resumo.
    """
    rng = np.random.default_rng(TOY_SEED if seed is None else seed)
    out: List[Sample] = []
    for i in range(n):
        s1, s2, s3 = rng.choice(len(_SUBJECTS), size=3, replace=False)
        v1, v2, v3 = (int(x) for x in rng.integers(len(_VERBS), size=3))
        o1, o2, o3 = (int(x) for x in rng.integers(len(_OBJECTS), size=3))
        d1, d2 = (int(x) for x in rng.integers(len(_DAYS), size=2))
        subj1, subj2, subj3 = _SUBJECTS[s1], _SUBJECTS[s2], _SUBJECTS[s3]

        sentences = [
            _event(subj1, _VERBS[v1][0], _OBJECTS[o1], _DAYS[d1]),
            _pronoun_followup(_DAYS[d2]),
            _event(subj2, _VERBS[v2][0], _OBJECTS[o2], _DAYS[d2]),
            _filler(subj3),
        ]
        if rng.random() < 0.5:
            sentences.append(_event(subj3, _VERBS[v3][0], _OBJECTS[o3], _DAYS[d1]))
        summary = [
            subj1, _VERBS[v1][1], _OBJECTS[o1], "and",
            subj2, _VERBS[v2][1], _OBJECTS[o2], ".",
        ]
        out.append(_assemble(f"toy-{i:03d}", sentences, summary))
    return out


def toy_distractors(n: int = 20, seed: Optional[int] = None) -> List[Sample]:
    """Corpus esportivo (fora do domínio) para o pool de distratores."""
    rng = np.random.default_rng((TOY_SEED if seed is None else seed) + 1)
    out: List[Sample] = []
    for i in range(n):
        sentences: List[_Sentence] = []
        for _ in range(2):
            team = _TEAMS[int(rng.integers(len(_TEAMS)))]
            player = _PLAYERS[int(rng.integers(len(_PLAYERS)))]
            verb = _SPORT_VERBS[int(rng.integers(len(_SPORT_VERBS)))]
            obj = _SPORT_OBJECTS[int(rng.integers(len(_SPORT_OBJECTS)))]
            toks = [team, player, verb, "the", obj, "late", "."]
            sentences.append((toks, [{"pred": (2, 3), "a0": (0, 2), "a1": (3, 5)}]))
        summary = list(sentences[0][0])
        out.append(_assemble(f"sports-{i:03d}", sentences, summary))
    return out
