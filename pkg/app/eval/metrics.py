from __future__ import annotations

import csv
import logging
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

from app.core.lexicon import load_stopwords
from app.core.schemas import MetricRow, SemanticFrame, SemanticUsage, SrlStats
from app.core.stemmer import stem
from app.core.suffix_tree import SuffixTree

logger = logging.getLogger(__name__)

Fragment = Tuple[Tuple[Hashable, ...], int]
Scores = Tuple[float, float, float]

METRIC_COLUMNS = ("seed", "sample_id", "rouge1", "rouge2", "rougeL", "density", "redundancy")


# -------------------------------
# extratividade
# -------------------------------
def extractive_fragments(article: Sequence[Hashable], summary: Sequence[Hashable]) -> List[List[Hashable]]:
    """
    Fragmentos extrativos gulosos: em cada posição do resumo, o maior trecho do artigo que casa a partir dali
    (empate: ocorrência mais cedo no artigo). Sem casamento, avança 1.
    """
    frags: List[List[Hashable]] = []
    n, m = len(summary), len(article)
    i = 0
    while i < n:
        best = 0
        for j in range(m):
            k = 0
            while i + k < n and j + k < m and summary[i + k] == article[j + k]:
                k += 1
            if k > best:
                best = k
        if best:
            frags.append(list(summary[i:i + best]))
            i += best
        else:
            i += 1
    return frags


def density(article: Sequence[Hashable], summary: Sequence[Hashable]) -> float:
    if not summary:
        raise ValueError("density: resumo vazio")
    return sum(len(f) ** 2 for f in extractive_fragments(article, summary)) / len(summary)


# -------------------------------
# redundância
# -------------------------------
def _contains(big: Tuple[Hashable, ...], small: Tuple[Hashable, ...]) -> bool:
    if len(small) > len(big):
        return False
    w = len(small)
    return any(big[i:i + w] == small for i in range(len(big) - w + 1))


def repeated_fragments(summary: Sequence[Hashable], min_len: int = 3) -> List[Fragment]:
    """
    Fragmentos repetidos sem sobreposição por inclusão:
    ordena por ocorrências (desc), depois tamanho (desc), depois primeira posição; mantém gulosamente
    quem não contém nem está contido em um já mantido.
    """
    if len(summary) < min_len + 1:
        return []
    cands = SuffixTree(summary).repeated_substrings(min_len=min_len)
    cands.sort(key=lambda c: (-c[1], -len(c[0]), c[2]))
    kept: List[Fragment] = []
    for frag, count, _ in cands:
        if any(_contains(k, frag) or _contains(frag, k) for k, _ in kept):
            continue
        kept.append((frag, count))
    return kept


def redundancy(summary: Sequence[Hashable]) -> float:
    if not summary:
        raise ValueError("redundancy: resumo vazio")
    return sum((count * len(frag)) ** 2 for frag, count in repeated_fragments(summary)) / len(summary)


# -------------------------------
# ROUGE
# -------------------------------
def _prepare(tokens: Sequence[str], use_stem: bool, remove_stopwords: bool) -> List[str]:
    out = list(tokens)
    if remove_stopwords:
        sw = load_stopwords()
        out = [t for t in out if t not in sw]
    if use_stem:
        out = [stem(t) for t in out]
    return out


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def _ngrams(tokens: Sequence[Hashable], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(
    candidate: Sequence[str],
    reference: Sequence[str],
    n: int,
    use_stem: bool = False,
    remove_stopwords: bool = False,
) -> Scores:
    if not reference:
        raise ValueError("rouge_n: referência vazia")
    if n < 1:
        raise ValueError(f"rouge_n: n deve ser >= 1 (recebido {n})")
    cand = _ngrams(_prepare(candidate, use_stem, remove_stopwords), n)
    ref = _ngrams(_prepare(reference, use_stem, remove_stopwords), n)
    overlap = sum((cand & ref).values())
    p = overlap / sum(cand.values()) if cand else 0.0
    r = overlap / sum(ref.values()) if ref else 0.0
    return p, r, _f1(p, r)


def lcs_length(a: Sequence[Hashable], b: Sequence[Hashable]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(
    candidate: Sequence[str],
    reference: Sequence[str],
    use_stem: bool = False,
    remove_stopwords: bool = False,
) -> Scores:
    if not reference:
        raise ValueError("rouge_l: referência vazia")
    cand = _prepare(candidate, use_stem, remove_stopwords)
    ref = _prepare(reference, use_stem, remove_stopwords)
    lcs = lcs_length(cand, ref)
    p = lcs / len(cand) if cand else 0.0
    r = lcs / len(ref) if ref else 0.0
    return p, r, _f1(p, r)


# -------------------------------
# estatísticas de semântica gerada
# -------------------------------
def srl_stats(collection: Iterable[Sequence[SemanticFrame]], warnings: int = 0) -> SrlStats:
    """Média de estruturas por amostra; presença (%) e tamanho médio de ARG0/ARG1/ARG2."""
    samples = 0
    structures = 0
    present = {"arg0": 0, "arg1": 0, "arg2": 0}
    lengths = {"arg0": 0, "arg1": 0, "arg2": 0}
    for frames in collection:
        samples += 1
        for fr in frames:
            structures += 1
            for name, toks in fr.args():
                if toks:
                    present[name] += 1
                    lengths[name] += len(toks)
    stats = SrlStats(samples=samples, warnings=warnings)
    if not samples:
        return stats
    stats.avg_structures = structures / samples
    if structures:
        stats.presence = {k: 100.0 * v / structures for k, v in present.items()}
        stats.mean_length = {k: (lengths[k] / v if v else 0.0) for k, v in present.items()}
    return stats


def semantic_usage(
    records: Iterable[Tuple[Sequence[SemanticFrame], Sequence[str], Sequence[str]]],
) -> SemanticUsage:
    """
    records: (semântica gerada, resumo gerado, resumo de referência).
    - % de predicados gerados presentes na referência
    - % de predicados gerados reaproveitados pelo resumo
    - % de estruturas reaproveitadas de forma estrita (predicado e núcleo de cada argumento no resumo)
    """
    total = in_ref = reused = strict = 0
    for frames, summary, reference in records:
        summ = {stem(t) for t in summary}
        ref = {stem(t) for t in reference}
        for fr in frames:
            total += 1
            head = stem(fr.predicate[-1])
            in_ref += head in ref
            reused += head in summ
            heads = [head] + [stem(toks[-1]) for _, toks in fr.args() if toks]
            strict += all(h in summ for h in heads)
    if not total:
        return SemanticUsage()
    return SemanticUsage(
        predicates=total,
        predicates_in_reference=100.0 * in_ref / total,
        predicates_reused=100.0 * reused / total,
        structures_reused_strict=100.0 * strict / total,
    )


# -------------------------------
# avaliação de corpus
# -------------------------------
def _row(args: Tuple[str, Sequence[str], Sequence[str], Sequence[str], bool, bool]) -> MetricRow:
    sample_id, article, candidate, reference, use_stem, remove_sw = args
    return MetricRow(
        sample_id=sample_id,
        rouge1=rouge_n(candidate, reference, 1, use_stem, remove_sw)[2],
        rouge2=rouge_n(candidate, reference, 2, use_stem, remove_sw)[2],
        rougeL=rouge_l(candidate, reference, use_stem, remove_sw)[2],
        density=density(article, candidate) if candidate else 0.0,
        redundancy=redundancy(candidate) if candidate else 0.0,
    )


def evaluate_corpus(
    items: Sequence[Tuple[str, Sequence[str], Sequence[str], Sequence[str]]],
    use_stem: bool = False,
    remove_stopwords: bool = False,
    workers: int = 1,
) -> Tuple[List[MetricRow], Dict[str, float]]:
    """items: (id, artigo, candidato, referência). Devolve linhas por amostra e médias do corpus."""
    jobs = [(sid, a, c, r, use_stem, remove_stopwords) for sid, a, c, r in items]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_row, jobs))
    else:
        rows = [_row(j) for j in jobs]
    means = {k: 0.0 for k in METRIC_COLUMNS[2:]}
    if rows:
        for k in means:
            means[k] = sum(getattr(r, k) for r in rows) / len(rows)
    empty = sum(1 for _, _, c, _ in items if not c)
    if empty:
        logger.warning("%d candidato(s) vazio(s): density/redundancy registradas como 0", empty)
    return rows, means


def write_metric_csv(path: Path, rows: Sequence[MetricRow], seed: int, means: Optional[Dict[str, float]] = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for r in rows:
            w.writerow([seed, r.sample_id] + [f"{getattr(r, k):.6f}" for k in METRIC_COLUMNS[2:]])
        if means is not None:
            w.writerow([seed, "__mean__"] + [f"{means[k]:.6f}" for k in METRIC_COLUMNS[2:]])
