import itertools
import json
import math

import numpy as np
import pytest

from app.core.schemas import (
    ARG0_TAG,
    ARG1_TAG,
    EOS,
    PRED_TAG,
    SEP_TAG,
    SOS,
    SPECIAL_TOKENS,
    SUM_TAG,
    BeamConfig,
    LinearizedSemantics,
)
from app.model.neural_core import log_softmax
from app.model.rerank_decoder import (
    Hypothesis,
    beam_step,
    decode_semantics,
    decode_summary,
    rerank_score,
    repetition_penalty_r,
    semantic_coverage_s,
    unigram_novelty,
    weak_score,
    write_rerank_reports,
)
from app.model.summarizer import Summarizer, SummarizerDecoder

STOP = frozenset({"the", "a", "of", "on", "is"})


# -------- pontuações --------
def test_penalidade_de_repeticao():
    assert repetition_penalty_r(list("abcd")) == 0.0
    assert repetition_penalty_r(list("abcdabce")) == pytest.approx(math.log(0.25))
    assert repetition_penalty_r(list("abcabc")) == pytest.approx(math.log(1e-6))
    assert repetition_penalty_r([]) == 0.0


SEMANTICS = LinearizedSemantics(
    tokens=[PRED_TAG, "close", ARG0_TAG, "the", "archdiocese", ARG1_TAG, "east", "harlem", "church"]
)


def test_cobertura_semantica():
    hyp = ["the", "archdiocese", "is", "closing", "the", "east", "harlem", "church"]
    assert semantic_coverage_s(hyp, SEMANTICS, STOP) == pytest.approx(0.8)
    no_pred = ["the", "archdiocese", "east", "harlem", "church"]
    assert semantic_coverage_s(no_pred, SEMANTICS, STOP) == 0.0
    assert semantic_coverage_s(no_pred, SEMANTICS, STOP, gated=False) == pytest.approx(0.8)
    assert semantic_coverage_s(hyp, LinearizedSemantics(tokens=[]), STOP) == 0.0


def test_novidade_de_unigramas():
    assert unigram_novelty(["senate", "proposes", "bill"], STOP) == 1.0
    assert unigram_novelty(["senate", "senate", "proposes", "bill"], STOP) == pytest.approx(0.75)
    assert unigram_novelty(["the", "a", "the"], STOP) == 1.0


def test_rerank_score_exemplo():
    sem = LinearizedSemantics(tokens=[PRED_TAG, "close", ARG0_TAG, "archdiocese", ARG1_TAG, "church", "x", "y"])
    hyp = ["archdiocese", "closing", "church", "x", "archdiocese", "closing", "church", "y"]
    cfg = BeamConfig(alpha=0.4, beta=0.1)
    assert repetition_penalty_r(hyp) == pytest.approx(math.log(0.25))
    assert semantic_coverage_s(hyp, sem, STOP) == pytest.approx(0.8)
    assert rerank_score(hyp, -2.0, sem, cfg, STOP) == pytest.approx(-2.474518, abs=1e-6)


def test_reducoes_das_pontuacoes():
    hyp = list("abcdabce")
    cfg = BeamConfig(alpha=0.0, beta=0.0, alpha_prime=0.0)
    assert rerank_score(hyp, -3.5, SEMANTICS, cfg, STOP) == -3.5
    assert weak_score(hyp, -3.5, cfg, STOP) == -3.5
    cfg = BeamConfig(alpha_prime=0.1)
    assert weak_score(["senate", "senate", "proposes", "bill"], -1.0, cfg, STOP) == pytest.approx(-0.925)


# -------- modelos de passo de brinquedo --------
class TableModel:
    """log-probs fixas por prefixo (pseudoaleatórias e determinísticas)."""

    def __init__(self, vocab_size=4, seed=0):
        self.id_to_token = [f"w{i}" for i in range(vocab_size - 1)] + [EOS]
        self.vocab_size = vocab_size
        self.eos_id = vocab_size - 1
        self.has_semantics = False
        self.semantic_start_id = 0
        self.summary_start_id = 0
        self.seed = seed

    def start_semantic(self):
        return ()

    def start_summary(self, semantic_ids):
        return ()

    def logp_after(self, prefix):
        logits = np.random.default_rng([self.seed, len(prefix), *prefix]).normal(size=self.vocab_size)
        return log_softmax(logits)

    def step(self, state, token):
        new = state + (token,)
        return self.logp_after(new), new, np.full(2, 0.5)


def _all_finished(model, max_len):
    start = (model.summary_start_id,)
    out = []
    for length in range(1, max_len + 1):
        for seq in itertools.product(range(model.vocab_size), repeat=length):
            if model.eos_id in seq[:-1]:
                continue
            if seq[-1] != model.eos_id and length < max_len:
                continue
            lp = sum(model.logp_after(start + seq[:k])[seq[k]] for k in range(length))
            out.append((lp, list(seq)))
    return out


def _classic_beam(model, B, max_len):
    start = (model.summary_start_id,)
    live = [((), 0.0)]
    finished = []
    for _ in range(max_len):
        pool = []
        for toks, lp in live:
            step_lp = model.logp_after(start + toks)
            for tok in np.argsort(-step_lp, kind="stable"):
                pool.append((toks + (int(tok),), lp + float(step_lp[tok])))
        pool.sort(key=lambda c: -c[1])
        live = []
        for toks, lp in pool[:B]:
            if toks[-1] == model.eos_id or len(toks) == max_len:
                finished.append((toks, lp))
            else:
                live.append((toks, lp))
        if not live:
            break
    best = max(finished, key=lambda c: c[1])[0]
    return [model.id_to_token[i] for i in best if i != model.eos_id]


def _classic_cfg(B, V, max_len):
    return BeamConfig(B=B, K=V, N=B, R=1, alpha=0.0, beta=0.0, alpha_prime=0.0, max_len=max_len, min_len=0)


def test_beam_exaustivo_em_tres_passos():
    model = TableModel(4, 0)
    _, summary, _ = decode_summary(model, _classic_cfg(64, 4, 3), stopwords=STOP)
    lp, best = max(_all_finished(model, 3), key=lambda c: c[0])
    assert summary == [model.id_to_token[i] for i in best if i != model.eos_id]


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(50))
def test_beam_exaustivo_em_quatro_passos(seed):
    model = TableModel(6, seed)
    # B = 6^4 cobre todas as sequências de até 4 tokens
    _, summary, _ = decode_summary(model, _classic_cfg(6 ** 4, 6, 4), stopwords=STOP)
    lp, best = max(_all_finished(model, 4), key=lambda c: c[0])
    assert summary == [model.id_to_token[i] for i in best if i != model.eos_id]


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(50))
def test_reducao_ao_beam_classico(seed):
    model = TableModel(6, seed)
    _, summary, _ = decode_summary(model, _classic_cfg(3, 6, 4), stopwords=STOP)
    assert summary == _classic_beam(model, 3, 4)


@pytest.mark.parametrize("seed,B", [(0, 1), (3, 2), (4, 3), (5, 2)])
def test_reducao_ao_beam_classico_rapido(seed, B):
    model = TableModel(5, seed)
    _, summary, _ = decode_summary(model, _classic_cfg(B, 5, 5), stopwords=STOP)
    assert summary == _classic_beam(model, B, 5)


class FixedModel(TableModel):
    def logp_after(self, prefix):
        return log_softmax(np.array([2.0, 1.0, 0.0, -1.0]))


def test_selecao_por_dissimilaridade():
    model = FixedModel(4)
    beams = [Hypothesis([0, 0], 0.0, (), 0), Hypothesis([1, 2], -5.0, (), 2)]

    chosen, _ = beam_step(beams, model, B=2, K=2, N=1, score_fn=lambda h: h.logp)
    assert [h.tokens for h in chosen] == [[0, 0, 0], [1, 2, 1]]

    chosen, _ = beam_step(beams, model, B=3, K=2, N=1, score_fn=lambda h: h.logp)
    assert [h.tokens for h in chosen] == [[0, 0, 0], [1, 2, 1], [0, 0, 1]]

    chosen, scores = beam_step(beams, model, B=3, K=2, N=3, score_fn=lambda h: h.logp)
    assert [h.tokens for h in chosen] == [[0, 0, 0], [0, 0, 1], [1, 2, 0]]
    assert scores == sorted(scores, reverse=True)


def test_beam_step_guarda_estado_e_atencao():
    model = TableModel(4, 0)
    chosen, _ = beam_step([Hypothesis([], 0.0, (), 0)], model, B=2, K=2, N=2, score_fn=lambda h: h.logp)
    for h in chosen:
        assert h.state == (0,)
        assert h.next_input == h.tokens[-1]
        assert len(h.attention) == 1


def test_min_len_impede_parada_precoce():
    model = TableModel(4, 1)
    cfg = _classic_cfg(2, 4, 6).model_copy(update={"min_len": 4})
    _, summary, _ = decode_summary(model, cfg, stopwords=STOP)
    assert len(summary) >= 4


class EosLovingModel(TableModel):
    """Dois tokens (w0, </s>) e </s> quase certo em todo passo."""

    def __init__(self):
        super().__init__(vocab_size=2)

    def logp_after(self, prefix):
        return log_softmax(np.array([0.0, 5.0]))


def test_eos_antes_do_minimo_vai_ao_piso():
    model = EosLovingModel()
    cfg = _classic_cfg(2, 2, 3).model_copy(update={"min_len": 2})
    _, summary, report = decode_summary(model, cfg, stopwords=STOP)
    first = report.events[0]
    assert first.step == 1 and first.order == [[0], [1]]
    assert first.scores[1] == pytest.approx(math.log(1e-12))
    # paradas no piso não terminam hipótese
    final = report.events[-1]
    assert final.kind == "final"
    assert all(len(tokens) > 2 for tokens in final.order)
    assert summary == ["w0", "w0"]


def test_hipotese_herda_a_fase():
    model = TableModel(4, 0)
    chosen, _ = beam_step([Hypothesis([], 0.0, (), 0, phase="semantic")], model, B=2, K=2, N=2,
                          score_fn=lambda h: h.logp)
    assert [h.phase for h in chosen] == ["semantic", "semantic"]
    assert Hypothesis([], 0.0, (), 0).phase == "summary"


def test_relatorio_de_reranking(tmp_path):
    model = TableModel(5, 2)
    cfg = BeamConfig(B=3, K=2, N=1, R=2, max_len=6, min_len=0)
    _, _, report = decode_summary(model, cfg, stopwords=STOP, sample_id="s1")
    assert report.sample_id == "s1"
    assert report.events[-1].kind == "final"
    assert all(ev.step % 2 == 0 for ev in report.events[:-1])

    cfg = cfg.model_copy(update={"R": 100})
    _, _, report = decode_summary(model, cfg, stopwords=STOP)
    assert [ev.kind for ev in report.events] == ["final"]

    path = tmp_path / "rerank.jsonl"
    write_rerank_reports(path, [report], seed=3)
    record = json.loads(path.read_text(encoding="utf-8").splitlines()[0])
    assert record["seed"] == 3 and record["kind"] == "final"


# -------- semântica gerada e reaproveitada --------
_WORDS = ["close", "closes", "closed", "open", "church"]


class RiggedSemanticModel:
    """Prefere sempre repetir o predicado "close"; depois do 2º predicado fecha com <SUM>."""

    def __init__(self):
        self.id_to_token = list(SPECIAL_TOKENS) + _WORDS
        self.vocab_size = len(self.id_to_token)
        self.ids = {t: i for i, t in enumerate(self.id_to_token)}
        self.eos_id = self.ids[EOS]
        self.has_semantics = True
        self.semantic_start_id = self.ids[SOS]
        self.summary_start_id = self.ids[SUM_TAG]
        self.summary_preference = None

    def start_semantic(self):
        return ("sem",)

    def start_summary(self, semantic_ids):
        return ("sum",)

    def _logits(self, prefix):
        logits = np.zeros(self.vocab_size)
        last = self.id_to_token[prefix[-1]]
        if prefix[0] == "sum":
            if last == SUM_TAG:
                for tok, v in (self.summary_preference or {}).items():
                    logits[self.ids[tok]] = v
            else:
                logits[self.eos_id] = 10.0
            return logits
        n_pred = sum(1 for i in prefix[1:] if self.id_to_token[i] == PRED_TAG)
        if last in (SOS, SEP_TAG):
            logits[self.ids[PRED_TAG]] = 10.0
        elif last == PRED_TAG:
            for v, tok in zip((10.0, 9.0, 8.0, 7.0), _WORDS):
                logits[self.ids[tok]] = v
        elif n_pred < 2:
            logits[self.ids[SEP_TAG]] = 10.0
        else:
            logits[self.ids[SUM_TAG]] = 10.0
        return logits

    def step(self, state, token):
        new = state + (token,)
        return log_softmax(self._logits(new)), new, np.ones(1)


def test_predicado_repetido_e_mascarado():
    model = RiggedSemanticModel()
    cfg = BeamConfig(B=2, K=2, N=1, semantic_max_len=10, semantic_min_len=0)
    semantics, ids = decode_semantics(model, cfg)
    assert semantics.tokens == [PRED_TAG, "close", SEP_TAG, PRED_TAG, "open"]
    assert ids == [model.ids[t] for t in semantics.tokens]


def test_semantica_truncada_em_max_len():
    model = RiggedSemanticModel()
    cfg = BeamConfig(B=2, K=2, N=1, semantic_max_len=3, semantic_min_len=0)
    semantics, _ = decode_semantics(model, cfg)
    assert semantics.tokens == [PRED_TAG, "close", SEP_TAG]


def test_saida_maximiza_cobertura_com_empate():
    model = RiggedSemanticModel()
    model.summary_preference = {"open": 5.0, "church": 5.0}
    gold = [model.ids[t] for t in (PRED_TAG, "church", ARG0_TAG, "church")]
    cfg = BeamConfig(B=2, K=2, N=2, R=100, alpha=0.4, beta=0.5, alpha_prime=0.0, max_len=3, min_len=0)
    semantics, summary, _ = decode_summary(model, cfg, gold_semantic_ids=gold, stopwords=STOP)
    assert semantics.tokens == [PRED_TAG, "church", ARG0_TAG, "church"]
    assert summary == ["church"]


# -------- modelo real de ponta a ponta --------
def test_decodifica_com_summarizer(tiny_cfg, toy_samples, toy_vocab):
    from app.corpus.corpus_io import ids_of

    model = Summarizer(tiny_cfg, len(toy_vocab), seed=0)
    article = toy_samples[0].article
    cfg = BeamConfig(B=3, K=2, N=2, R=3, max_len=8, min_len=2, semantic_max_len=8, semantic_min_len=0)
    out = []
    for _ in range(2):
        dec = SummarizerDecoder(model, toy_vocab, ids_of(article, toy_vocab))
        semantics, summary, report = decode_summary(dec, cfg, article_tokens=article, sample_id="toy-000")
        out.append((semantics.tokens, summary, [ev.model_dump() for ev in report.events]))
        assert 2 <= len(summary) <= 8
        assert EOS not in summary
        assert len(semantics.tokens) <= 8
    assert out[0] == out[1]
