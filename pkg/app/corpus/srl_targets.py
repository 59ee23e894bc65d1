from __future__ import annotations

import logging
from typing import AbstractSet, List, Optional, Sequence, Tuple

from app.core.lexicon import load_stopwords
from app.core.schemas import (
    ARG0_TAG,
    ARG1_TAG,
    ARG2_TAG,
    PRED_TAG,
    SEP_TAG,
    SPECIAL_TOKENS,
    LinearizedSemantics,
    Sample,
    SemanticFrame,
    SrlStructure,
    Span,
)
from app.core.stemmer import Stemmer, stem

logger = logging.getLogger(__name__)

MAX_TARGETS = 5
_ARG_FIELDS = (("arg0", ARG0_TAG), ("arg1", ARG1_TAG), ("arg2", ARG2_TAG))
_TAG_TO_FIELD = {tag: name for name, tag in _ARG_FIELDS}
# especiais que encerram a leitura de uma saída do modelo
_STOP_TOKENS = frozenset(SPECIAL_TOKENS) - {PRED_TAG, ARG0_TAG, ARG1_TAG, ARG2_TAG, SEP_TAG, "<unk>"}


def _span_tokens(article: Sequence[str], span: Optional[Span]) -> List[str]:
    if span is None:
        return []
    return list(article[span[0]:span[1]])


def _head(article: Sequence[str], span: Optional[Span]) -> Optional[str]:
    # palavra-núcleo = última palavra do argumento
    toks = _span_tokens(article, span)
    return toks[-1] if toks else None


def _stemmed_set(tokens: Sequence[str], stemmer: Stemmer) -> set:
    return {stemmer(t) for t in tokens}


def _is_stopword(token: str, stopwords: AbstractSet[str], stemmer: Stemmer) -> bool:
    # forma flexionada ("gets") também conta quando o stem está na lista
    return token in stopwords or stemmer(token) in stopwords


# -------------------------------
# casamento estrito / suave
# -------------------------------
def strict_match(
    struct: SrlStructure,
    article: Sequence[str],
    summary: Sequence[str],
    stopwords: Optional[AbstractSet[str]] = None,
    stemmer: Stemmer = stem,
) -> bool:
    stopwords = load_stopwords() if stopwords is None else stopwords
    summ = _stemmed_set(summary, stemmer)

    pred = _head(article, struct.predicate)
    if pred is None or _is_stopword(pred, stopwords, stemmer) or stemmer(pred) not in summ:
        return False
    a0 = _head(article, struct.arg0)
    if a0 is not None and a0 not in stopwords:
        return stemmer(a0) in summ
    a1 = _head(article, struct.arg1)
    if a1 is not None and a1 not in stopwords:
        return stemmer(a1) in summ
    return False


def overlap_count(
    struct: SrlStructure,
    article: Sequence[str],
    summary: Sequence[str],
    stopwords: AbstractSet[str],
    stemmer: Stemmer = stem,
) -> int:
    """Nº de palavras únicas (stem, sem stop words) de predicado+ARG0+ARG1 presentes no resumo."""
    summ = _stemmed_set(summary, stemmer)
    words = set()
    for span in (struct.predicate, struct.arg0, struct.arg1):
        for tok in _span_tokens(article, span):
            if tok not in stopwords:
                words.add(stemmer(tok))
    return len(words & summ)


def soft_match_rank(
    structs: Sequence[SrlStructure],
    article: Sequence[str],
    summary: Sequence[str],
    stopwords: Optional[AbstractSet[str]] = None,
    stemmer: Stemmer = stem,
    limit: int = MAX_TARGETS,
) -> List[SrlStructure]:
    stopwords = load_stopwords() if stopwords is None else stopwords
    scored: List[Tuple[int, int, int, SrlStructure]] = []
    for idx, st in enumerate(structs):
        count = overlap_count(st, article, summary, stopwords, stemmer)
        if count >= 2:
            scored.append((-count, st.predicate[0], idx, st))
    scored.sort(key=lambda x: x[:3])
    return [st for *_, st in scored[:limit]]


def select_targets(
    sample: Sample,
    stopwords: Optional[AbstractSet[str]] = None,
    stemmer: Stemmer = stem,
    strict_order: str = "article",
) -> List[SrlStructure]:
    """Até 5 estruturas: casamento estrito (ordem do artigo); sem nenhum, cai no casamento suave."""
    stopwords = load_stopwords() if stopwords is None else stopwords
    strict = [
        (st.predicate[0], idx, st)
        for idx, st in enumerate(sample.srl)
        if strict_match(st, sample.article, sample.summary, stopwords, stemmer)
    ]
    if strict_order == "overlap":
        strict.sort(
            key=lambda x: (-overlap_count(x[2], sample.article, sample.summary, stopwords, stemmer), x[0], x[1])
        )
    else:
        strict.sort(key=lambda x: (x[0], x[1]))
    if strict:
        return [st for *_, st in strict[:MAX_TARGETS]]
    return soft_match_rank(sample.srl, sample.article, sample.summary, stopwords, stemmer)


def restrict_to_input(structs: Sequence[SrlStructure], max_input_len: int) -> List[SrlStructure]:
    """Só estruturas inteiramente dentro da entrada truncada."""
    return [st for st in structs if st.max_end() <= max_input_len]


# -------------------------------
# linearização
# -------------------------------
def to_frames(structs: Sequence[SrlStructure], article: Sequence[str]) -> List[SemanticFrame]:
    frames: List[SemanticFrame] = []
    for st in structs:
        kwargs = {"predicate": tuple(_span_tokens(article, st.predicate))}
        for name, _ in _ARG_FIELDS:
            span = getattr(st, name)
            if span is not None:
                kwargs[name] = tuple(_span_tokens(article, span))
        frames.append(SemanticFrame(**kwargs))
    return frames


def linearize(frames: Sequence[SemanticFrame]) -> LinearizedSemantics:
    """<PRED> pred <ARG0> ... <ARG1> ... <ARG2> ...  com <SEP> entre estruturas."""
    out: List[str] = []
    for k, fr in enumerate(frames):
        if not fr.predicate:
            raise ValueError("linearize: estrutura com predicado vazio")
        if k:
            out.append(SEP_TAG)
        out.append(PRED_TAG)
        out.extend(fr.predicate)
        for name, tag in _ARG_FIELDS:
            toks = getattr(fr, name)
            if toks:
                out.append(tag)
                out.extend(toks)
    return LinearizedSemantics(tokens=out)


def delinearize(tokens: Sequence[str]) -> Tuple[List[SemanticFrame], int]:
    """
    Inverso de linearize; tolerante com saída do modelo.
    - fragmentos sem <PRED> inicial, predicados vazios, tags repetidas: descartados e contados como aviso
    - especiais de fim (</s>, <SUM>, <pad>, <s>) encerram a leitura
    """
    frames: List[SemanticFrame] = []
    warnings = 0

    cur: Optional[dict] = None
    field_name: Optional[str] = None
    orphan = False

    def close() -> None:
        nonlocal cur, warnings
        if cur is None:
            return
        if not cur["predicate"]:
            warnings += 1
        else:
            args = {}
            for name, _ in _ARG_FIELDS:
                toks = cur.get(name)
                if toks is None:
                    continue
                if not toks:
                    warnings += 1
                    continue
                args[name] = tuple(toks)
            frames.append(SemanticFrame(predicate=tuple(cur["predicate"]), **args))
        cur = None

    for tok in tokens:
        if tok in _STOP_TOKENS:
            break
        if tok == PRED_TAG:
            close()
            if orphan:
                warnings += 1
                orphan = False
            cur = {"predicate": []}
            field_name = "predicate"
            continue
        if tok == SEP_TAG:
            close()
            field_name = None
            continue
        if cur is None:
            orphan = True
            continue
        if tok in _TAG_TO_FIELD:
            name = _TAG_TO_FIELD[tok]
            if name in cur:
                warnings += 1
                field_name = None
            else:
                cur[name] = []
                field_name = name
            continue
        if field_name is not None:
            cur[field_name].append(tok)
    close()
    if orphan:
        warnings += 1
    if warnings:
        logger.debug("delinearize: %d fragmento(s) malformado(s) ignorado(s)", warnings)
    return frames, warnings
