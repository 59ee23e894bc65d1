from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import AbstractSet, Callable, Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from app.core.lexicon import load_pronouns
from app.core.schemas import AdversarialConfig, DistractorPool, Sample, Span, SrlStructure, SweepRow
from app.eval.metrics import rouge_l

logger = logging.getLogger(__name__)

PRONOUN_WINDOW = 5
SWEEP_COLUMNS = ("seed", "system", "n", "mean_rouge_l", "count")

# sistema = função amostra -> resumo (decodificação do modelo, lead-N, ...)
System = Callable[[Sample], List[str]]


def _starts_with_pronoun(sentence: Sequence[str], pronouns: AbstractSet[str]) -> bool:
    return any(tok.lower() in pronouns for tok in sentence[:PRONOUN_WINDOW])


def insertion_points(sentences: Sequence[Sequence[str]], pronouns: Optional[AbstractSet[str]] = None) -> List[int]:
    """Lacunas 0..len(sentences); exclui a lacuna logo antes de frase com pronome nas 5 primeiras palavras."""
    pronouns = load_pronouns() if pronouns is None else pronouns
    return [
        gap for gap in range(len(sentences) + 1)
        if gap == len(sentences) or not _starts_with_pronoun(sentences[gap], pronouns)
    ]


def _bounds_of(sentences: Sequence[Sequence[str]]) -> List[Span]:
    out: List[Span] = []
    pos = 0
    for sent in sentences:
        out.append((pos, pos + len(sent)))
        pos += len(sent)
    return out


def _shift_structs(structs: Sequence[SrlStructure], offsets: Sequence[int], old_bounds: Sequence[Span]) -> List[SrlStructure]:
    """Desloca spans SRL pelo deslocamento da frase onde cada span começa."""

    def sentence_of(pos: int) -> int:
        for k, (s, e) in enumerate(old_bounds):
            if s <= pos < e:
                return k
        raise ValueError(f"posição {pos} fora das frases do artigo")

    def shift(span: Optional[Span]) -> Optional[Span]:
        if span is None:
            return None
        d = offsets[sentence_of(span[0])]
        return (span[0] + d, span[1] + d)

    return [
        SrlStructure(predicate=shift(st.predicate), arg0=shift(st.arg0), arg1=shift(st.arg1), arg2=shift(st.arg2))
        for st in structs
    ]


def perturb(
    sample: Sample,
    pool: DistractorPool,
    n: int,
    seed,
    pronouns: Optional[AbstractSet[str]] = None,
) -> Sample:
    """
    Insere n frases distintas do pool em lacunas válidas (recalculadas a cada inserção).
    Ordem das frases originais, resumo e demais campos preservados; "inserted" registra os índices novos.
    """
    if not 1 <= n <= 4:
        raise ValueError(f"n deve estar em 1..4 (recebido {n})")
    if len(pool.sentences) < n:
        raise ValueError(f"pool '{pool.source_domain}' tem {len(pool.sentences)} frase(s); são necessárias {n}")
    if not sample.sentence_bounds:
        raise ValueError(f"amostra '{sample.id}' sem sentence_bounds")
    pronouns = load_pronouns() if pronouns is None else pronouns
    rng = np.random.default_rng(seed)

    chosen = rng.choice(len(pool.sentences), size=n, replace=False)
    # lista de (tokens, índice original ou None)
    current = [(list(toks), k) for k, toks in enumerate(sample.sentences())]
    for pick in chosen:
        gaps = insertion_points([toks for toks, _ in current], pronouns)
        if not gaps:
            raise ValueError(f"amostra '{sample.id}' sem lacuna válida para inserção")
        gap = gaps[int(rng.integers(len(gaps)))]
        current.insert(gap, (list(pool.sentences[int(pick)]), None))

    new_bounds = _bounds_of([toks for toks, _ in current])
    old_bounds = sample.sentence_bounds
    offsets = [0] * len(old_bounds)
    inserted: List[int] = []
    for idx, ((_, orig), (start, _)) in enumerate(zip(current, new_bounds)):
        if orig is None:
            inserted.append(idx)
        else:
            offsets[orig] = start - old_bounds[orig][0]

    article = [tok for toks, _ in current for tok in toks]
    update = {
        "article": article,
        "sentence_bounds": new_bounds,
        "srl": _shift_structs(sample.srl, offsets, old_bounds),
        "inserted": inserted,
    }
    if sample.targets is not None:
        update["targets"] = _shift_structs(sample.targets, offsets, old_bounds)
    return Sample.model_validate({**sample.model_dump(), **update})


def strip_inserted(sample: Sample) -> Sample:
    """Remove as frases registradas em "inserted" (auditoria do perturb)."""
    if not sample.inserted:
        return sample
    drop = set(sample.inserted)
    keep = [k for k in range(len(sample.sentence_bounds)) if k not in drop]
    sents = [sample.sentences()[k] for k in keep]
    new_bounds = _bounds_of(sents)
    offsets = [0] * len(sample.sentence_bounds)
    for new_k, old_k in enumerate(keep):
        offsets[old_k] = new_bounds[new_k][0] - sample.sentence_bounds[old_k][0]
    update = {
        "article": [tok for s in sents for tok in s],
        "sentence_bounds": new_bounds,
        "srl": _shift_structs(sample.srl, offsets, sample.sentence_bounds),
        "inserted": None,
    }
    if sample.targets is not None:
        update["targets"] = _shift_structs(sample.targets, offsets, sample.sentence_bounds)
    return Sample.model_validate({**sample.model_dump(), **update})


def build_distractor_pool(corpus: Sequence[Sample], source_domain: str) -> DistractorPool:
    sentences = [s for sample in corpus for s in sample.sentences() if s]
    if not sentences:
        raise ValueError(f"corpus '{source_domain}' não tem frases para o pool de distratores")
    logger.info("pool de distratores '%s': %d frases", source_domain, len(sentences))
    return DistractorPool(sentences=sentences, source_domain=source_domain)


def adversarial_sweep(
    systems: Dict[str, System],
    corpus: Sequence[Sample],
    pool: DistractorPool,
    cfg: AdversarialConfig,
    seed: int,
    show_progress: bool = False,
) -> List[SweepRow]:
    """
    Para cada n em cfg.n_values e cada sistema: ROUGE-L F1 médio contra as referências.
    n=0 usa o corpus original; a amostra i com n inserções usa a semente [seed, n, i].
    """
    rows: List[SweepRow] = []
    for n in cfg.n_values:
        if n == 0:
            perturbed = list(corpus)
        else:
            perturbed = [perturb(s, pool, n, [seed, n, i]) for i, s in enumerate(corpus)]
        for name, system in systems.items():
            scores = [
                rouge_l(system(s), s.summary)[2]
                for s in tqdm(perturbed, desc=f"{name} n={n}", disable=not show_progress)
            ]
            mean = sum(scores) / len(scores) if scores else 0.0
            rows.append(SweepRow(system=name, n=n, mean_rouge_l=mean, count=len(scores)))
            logger.info("sweep %s n=%d: ROUGE-L=%.4f (%d amostras)", name, n, mean, len(scores))

    for name in systems:
        curve = [r.mean_rouge_l for r in rows if r.system == name]
        if any(b > a for a, b in zip(curve, curve[1:])):
            logger.info("sweep %s: curva não é monótona em n (%s)", name, ", ".join(f"{c:.4f}" for c in curve))
    return rows


def write_sweep_csv(path: Path, rows: Sequence[SweepRow], seed: int) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([seed, r.system, r.n, f"{r.mean_rouge_l:.6f}", r.count])
