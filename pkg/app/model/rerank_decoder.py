from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import AbstractSet, Any, Callable, Iterable, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from app.core.edit_distance import token_edit_distance
from app.core.lexicon import load_stopwords
from app.core.schemas import (
    EOS,
    PRED_TAG,
    SPECIAL_TOKENS,
    SUM_TAG,
    BeamConfig,
    LinearizedSemantics,
    RerankEvent,
    RerankReport,
)
from app.core.stemmer import Stemmer, stem
from app.core.suffix_tree import longest_repeating_substring
from app.corpus.srl_targets import delinearize
from app.model.neural_core import PROB_FLOOR
from app.model.summarizer import replace_unknowns

logger = logging.getLogger(__name__)

_SPECIALS = frozenset(SPECIAL_TOKENS)
# log-prob dos tokens de parada antes do comprimento mínimo
_STOP_FLOOR = math.log(PROB_FLOOR)


class StepModel(Protocol):
    id_to_token: Sequence[str]
    vocab_size: int
    eos_id: int
    has_semantics: bool
    semantic_start_id: int
    summary_start_id: int

    def start_semantic(self) -> Any: ...

    def start_summary(self, semantic_ids: Sequence[int]) -> Any: ...

    def step(self, state: Any, token: int) -> Tuple[np.ndarray, Any, np.ndarray]: ...


@dataclass
class Hypothesis:
    tokens: List[int]
    logp: float
    state: Any
    next_input: int
    attention: List[np.ndarray] = field(default_factory=list)
    phase: str = "summary"  # "semantic" | "summary"; o estado LSTM vem em DecodeState


ScoreFn = Callable[[Hypothesis], float]
MaskFn = Callable[[Hypothesis, np.ndarray], np.ndarray]


# -------------------------------
# pontuações
# -------------------------------
def repetition_penalty_r(tokens: Sequence[str], epsilon: float = 1e-6) -> float:
    """r = log(1 - #LRS·|LRS| / #tokens), argumento com piso epsilon; 0 sem repetição."""
    if not tokens:
        return 0.0
    frag, count = longest_repeating_substring(tokens)
    if not count:
        return 0.0
    return math.log(max(1.0 - count * len(frag) / len(tokens), epsilon))


def _semantic_tokens(semantics) -> List[str]:
    return list(semantics.tokens) if isinstance(semantics, LinearizedSemantics) else list(semantics)


def semantic_coverage_s(
    tokens: Sequence[str],
    semantics,
    stopwords: Optional[AbstractSet[str]] = None,
    stemmer: Stemmer = stem,
    gated: bool = True,
) -> float:
    """
    Fração das palavras da semântica gerada reaproveitadas pela hipótese.
    - numerador: tokens de argumento (stem, sem stop words) presentes na hipótese, só de estruturas
      cujo predicado aparece na hipótese (sem o portão quando gated=False)
    - denominador: tokens únicos (stem, sem stop words, sem tags) da semântica
    """
    stopwords = load_stopwords() if stopwords is None else stopwords
    sem = _semantic_tokens(semantics)
    denom = {stemmer(t) for t in sem if t not in _SPECIALS and t not in stopwords}
    if not denom:
        return 0.0
    hyp = {stemmer(t) for t in tokens}
    frames, _ = delinearize(sem)
    covered = set()
    for fr in frames:
        if gated and stemmer(fr.predicate[-1]) not in hyp:
            continue
        for _, toks in fr.args():
            for t in toks or ():
                if t in stopwords:
                    continue
                st = stemmer(t)
                if st in hyp:
                    covered.add(st)
    return len(covered & denom) / len(denom)


def unigram_novelty(tokens: Sequence[str], stopwords: Optional[AbstractSet[str]] = None) -> float:
    stopwords = load_stopwords() if stopwords is None else stopwords
    content = [t for t in tokens if t not in stopwords]
    if not content:
        return 1.0
    return len(set(content)) / len(content)


def rerank_score(
    tokens: Sequence[str],
    logp: float,
    semantics,
    cfg: BeamConfig,
    stopwords: Optional[AbstractSet[str]] = None,
    stemmer: Stemmer = stem,
) -> float:
    r = repetition_penalty_r(tokens, cfg.lrs_clamp_epsilon)
    s = semantic_coverage_s(tokens, semantics, stopwords, stemmer, gated=not cfg.ungated_coverage)
    return logp + cfg.alpha * r + cfg.beta * s


def weak_score(tokens: Sequence[str], logp: float, cfg: BeamConfig, stopwords: Optional[AbstractSet[str]] = None) -> float:
    return logp + cfg.alpha_prime * unigram_novelty(tokens, stopwords)


# -------------------------------
# beam step
# -------------------------------
def beam_step(
    beams: Sequence[Hypothesis],
    model: StepModel,
    B: int,
    K: int,
    N: int,
    score_fn: ScoreFn,
    mask_fn: Optional[MaskFn] = None,
) -> Tuple[List[Hypothesis], List[float]]:
    """
    - pool: as K melhores extensões (log-prob do passo) de cada beam
    - seleção por verossimilhança: N melhores do pool por score_fn
    - seleção por dissimilaridade: completa até B escolhendo quem maximiza max Lev até os já escolhidos
    Empates seguem a ordem do pool.
    """
    if not 1 <= len(beams) <= B:
        raise ValueError(f"beam_step: {len(beams)} beams para B={B}")
    pool: List[Hypothesis] = []
    for hyp in beams:
        log_probs, new_state, row = model.step(hyp.state, hyp.next_input)
        lp = np.array(log_probs, dtype=np.float64)
        if mask_fn is not None:
            lp = mask_fn(hyp, lp)
        order = np.argsort(-lp, kind="stable")[:K]
        for tok in order:
            if not np.isfinite(lp[tok]):
                continue
            tok = int(tok)
            pool.append(
                Hypothesis(hyp.tokens + [tok], hyp.logp + float(lp[tok]), new_state, tok, hyp.attention + [row], hyp.phase)
            )
    if not pool:
        return [], []

    scores = [score_fn(h) for h in pool]
    ranked = sorted(range(len(pool)), key=lambda i: -scores[i])
    chosen = ranked[:N]
    rest = sorted(ranked[N:])
    if rest and len(chosen) < B:
        far = [max(token_edit_distance(pool[r].tokens, pool[c].tokens) for c in chosen) for r in rest]
        while rest and len(chosen) < B:
            k = int(np.argmax(far))
            pick = rest.pop(k)
            far.pop(k)
            chosen.append(pick)
            far = [max(d, token_edit_distance(pool[r].tokens, pool[pick].tokens)) for d, r in zip(far, rest)]
    return [pool[i] for i in chosen], [scores[i] for i in chosen]


def _beam_search(
    model: StepModel,
    start_state: Any,
    start_token: int,
    B: int,
    K: int,
    N: int,
    max_len: int,
    min_len: int,
    stop_ids: AbstractSet[int],
    score_at: Callable[[int], ScoreFn],
    mask_fn: Optional[MaskFn] = None,
    on_step: Optional[Callable[[int, List[Hypothesis], List[float]], None]] = None,
    phase: str = "summary",
) -> List[Hypothesis]:
    """Hipóteses terminadas (token de parada ou max_len), na ordem em que terminaram."""
    stops = np.array(sorted(stop_ids), dtype=np.int64)

    def masked(hyp: Hypothesis, lp: np.ndarray) -> np.ndarray:
        if mask_fn is not None:
            lp = mask_fn(hyp, lp)
        if len(hyp.tokens) < min_len:
            lp = lp.copy()
            lp[stops] = _STOP_FLOOR
        return lp

    live = [Hypothesis([], 0.0, start_state, start_token, phase=phase)]
    finished: List[Hypothesis] = []
    for t in range(1, max_len + 1):
        chosen, scores = beam_step(live, model, B, K, N, score_at(t), masked)
        if on_step is not None:
            on_step(t, chosen, scores)
        live = []
        for h in chosen:
            if h.tokens[-1] in stop_ids and len(h.tokens) <= min_len:
                # parada no piso antes do mínimo: descartada
                continue
            if h.tokens[-1] in stop_ids or len(h.tokens) >= max_len:
                finished.append(h)
            else:
                live.append(h)
        if not live:
            break
    return finished


# -------------------------------
# fases de decodificação
# -------------------------------
def _content(model: StepModel, ids: Sequence[int]) -> List[str]:
    return [model.id_to_token[i] for i in ids if i != model.eos_id]


def decode_semantics(model: StepModel, cfg: BeamConfig) -> Tuple[LinearizedSemantics, List[int]]:
    """
    Beam clássico (K=|V|, N=B) da fase semântica até <SUM> ou </s>.
    Logo após <PRED>, tokens cujo stem já foi predicado na hipótese ficam mascarados.
    """
    id_to_token = list(model.id_to_token)
    stems = [stem(t.lower()) for t in id_to_token]
    stop_ids = {model.eos_id}
    if SUM_TAG in id_to_token:
        stop_ids.add(id_to_token.index(SUM_TAG))

    def dedup(hyp: Hypothesis, lp: np.ndarray) -> np.ndarray:
        toks = hyp.tokens
        if not toks or id_to_token[toks[-1]] != PRED_TAG:
            return lp
        seen = {stems[toks[k + 1]] for k in range(len(toks) - 1) if id_to_token[toks[k]] == PRED_TAG}
        if not seen:
            return lp
        lp = lp.copy()
        lp[np.array([s in seen for s in stems])] = -np.inf
        return lp

    finished = _beam_search(
        model,
        model.start_semantic(),
        model.semantic_start_id,
        cfg.B,
        model.vocab_size,
        cfg.B,
        cfg.semantic_max_len,
        cfg.semantic_min_len,
        stop_ids,
        lambda t: (lambda h: h.logp),
        dedup,
        phase="semantic",
    )
    if not finished:
        return LinearizedSemantics(tokens=[]), []
    best = max(finished, key=lambda h: h.logp)
    ids = list(best.tokens)
    if ids and ids[-1] in stop_ids:
        ids = ids[:-1]
    return LinearizedSemantics(tokens=[id_to_token[i] for i in ids]), ids


def decode_summary(
    model: StepModel,
    cfg: BeamConfig,
    article_tokens: Optional[Sequence[str]] = None,
    gold_semantic_ids: Optional[Sequence[int]] = None,
    stopwords: Optional[AbstractSet[str]] = None,
    sample_id: str = "",
) -> Tuple[LinearizedSemantics, List[str], RerankReport]:
    """
    Semântica (gerada ou ouro) e depois o resumo: em t ≡ 0 (mod R) a seleção usa rerank_score, nos demais
    passos weak_score. Saída = hipótese terminada com maior rerank_score; <unk> trocado pela atenção.
    """
    stopwords = load_stopwords() if stopwords is None else stopwords
    report = RerankReport(sample_id=sample_id)
    semantics = LinearizedSemantics(tokens=[])
    sem_ids: List[int] = []
    if model.has_semantics:
        if gold_semantic_ids is not None:
            sem_ids = list(gold_semantic_ids)
            semantics = LinearizedSemantics(tokens=[model.id_to_token[i] for i in sem_ids])
        else:
            semantics, sem_ids = decode_semantics(model, cfg)
    start = model.start_summary(sem_ids)

    def strong(h: Hypothesis) -> float:
        return rerank_score(_content(model, h.tokens), h.logp, semantics, cfg, stopwords)

    def weak(h: Hypothesis) -> float:
        return weak_score(_content(model, h.tokens), h.logp, cfg, stopwords)

    def score_at(t: int) -> ScoreFn:
        return strong if t % cfg.R == 0 else weak

    def on_step(t: int, chosen: List[Hypothesis], scores: List[float]) -> None:
        if t % cfg.R == 0:
            report.events.append(RerankEvent(step=t, scores=scores, order=[list(h.tokens) for h in chosen]))

    finished = _beam_search(
        model, start, model.summary_start_id, cfg.B, cfg.K, cfg.N,
        cfg.max_len, cfg.min_len, {model.eos_id}, score_at, None, on_step,
    )
    if not finished:
        logger.warning("decode_summary '%s': nenhuma hipótese terminada", sample_id)
        return semantics, [], report
    final_scores = [strong(h) for h in finished]
    k = int(np.argmax(final_scores))
    best = finished[k]
    report.events.append(
        RerankEvent(step=len(best.tokens), scores=final_scores, order=[list(h.tokens) for h in finished], kind="final")
    )
    out_ids = [i for i in best.tokens if i != model.eos_id]
    rows = [r for i, r in zip(best.tokens, best.attention) if i != model.eos_id]
    summary = [model.id_to_token[i] for i in out_ids]
    if article_tokens is not None:
        summary = replace_unknowns(summary, rows, article_tokens)
    return semantics, summary, report


def write_rerank_reports(path: Path, reports: Iterable[RerankReport], seed: int) -> None:
    """JSON Lines: um evento de reranking por linha."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for rep in reports:
            for ev in rep.events:
                record = {"seed": seed, "sample_id": rep.sample_id, **ev.model_dump()}
                fh.write(json.dumps(record, sort_keys=True) + "\n")
