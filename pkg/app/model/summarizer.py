from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from app.core.errors import SkipSample
from app.core.schemas import (
    EOS_ID,
    SOS_ID,
    SUM_ID,
    UNK,
    Sample,
    StageSpec,
    SummarizerConfig,
)
from app.corpus.corpus_io import Vocabulary, ids_of
from app.corpus.srl_targets import linearize, restrict_to_input, select_targets, to_frames
from app.model.attention import AttentionCache, BoundAttention, attention_parameter_shapes
from app.model.neural_core import (
    LstmCache,
    LstmState,
    ParameterStore,
    bilstm_backward,
    bilstm_encode,
    load_checkpoint,
    log_softmax,
    lstm_backward,
    lstm_forward,
    nll,
    nll_grad_logits,
    save_checkpoint,
    softmax,
)

logger = logging.getLogger(__name__)


# -------------------------------
# exemplos de treino
# -------------------------------
@dataclass
class Example:
    id: str
    article_ids: List[int]
    semantic_ids: List[int]
    summary_ids: List[int]


def prepare_example(
    sample: Sample,
    vocab: Vocabulary,
    stage: StageSpec,
    strict_order: str = "article",
) -> Example:
    """
    Trunca artigo/resumo nos limites do estágio e lineariza as estruturas-alvo que cabem na entrada truncada.
    Resumo vazio após truncamento -> SkipSample.
    """
    article = sample.article[: stage.max_input_len]
    summary = sample.summary[: stage.max_output_len]
    if not article or not summary:
        raise SkipSample(sample.id)
    structs = sample.targets if sample.targets is not None else select_targets(sample, strict_order=strict_order)
    structs = restrict_to_input(structs, stage.max_input_len)
    semantic = linearize(to_frames(structs, sample.article)).tokens[: stage.max_output_len]
    return Example(
        id=sample.id,
        article_ids=ids_of(article, vocab),
        semantic_ids=ids_of(semantic, vocab),
        summary_ids=ids_of(summary, vocab),
    )


def combined_loss(semantic_nll: float, summary_nll: float, alpha: float) -> float:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha deve estar em [0, 1] (recebido {alpha})")
    return alpha * summary_nll + (1.0 - alpha) * semantic_nll


def replace_unknowns(
    tokens: Sequence[str], attention_rows: Sequence[np.ndarray], input_tokens: Sequence[str]
) -> List[str]:
    """Cada <unk> vira o token de entrada com maior atenção no passo (empate: posição mais cedo)."""
    out: List[str] = []
    for k, tok in enumerate(tokens):
        if tok != UNK or k >= len(attention_rows) or not len(input_tokens):
            out.append(tok)
            continue
        row = np.asarray(attention_rows[k])[: len(input_tokens)]
        out.append(input_tokens[int(np.argmax(row))])
    return out


# -------------------------------
# modelo
# -------------------------------
class _PhaseNames(NamedTuple):
    dec: str
    attn: str
    out: str
    dual: bool


@dataclass
class _Step:
    x: int
    target: int
    lstm: LstmCache
    attn: AttentionCache
    dual: Optional[AttentionCache]
    feat: np.ndarray
    probs: np.ndarray


@dataclass
class _PhaseCache:
    names: _PhaseNames
    steps: List[_Step] = field(default_factory=list)
    states: List[np.ndarray] = field(default_factory=list)
    nll: float = 0.0


@dataclass
class DecoderTrace:
    semantic_states: List[np.ndarray] = field(default_factory=list)
    summary_states: List[np.ndarray] = field(default_factory=list)
    input_attention: List[np.ndarray] = field(default_factory=list)
    dual_attention: List[np.ndarray] = field(default_factory=list)
    # False quando a atenção dual recebeu contexto zero (sem estados semânticos)
    dual_available: bool = False
    correct: int = 0
    total: int = 0


@dataclass
class ForwardCache:
    enc: object
    binds: Dict[str, BoundAttention]
    dual: Optional[BoundAttention]
    semantic: Optional[_PhaseCache]
    summary: _PhaseCache


class Summarizer:
    """
    Codificador BiLSTM + decodificador(es) LSTM com atenção sobre a entrada.
    - shared: um decodificador gera semântica, <SUM> e o resumo, continuando do último estado semântico
    - separate: decodificadores semântico e de resumo com parâmetros próprios
    - baseline: seq2seq com atenção, sem fase semântica
    """

    def __init__(
        self,
        cfg: SummarizerConfig,
        vocab_size: int,
        store: Optional[ParameterStore] = None,
        seed: int = 0,
        learning_rate: float = 0.15,
        initial_accumulator: float = 0.1,
    ):
        self.cfg = cfg
        self.vocab_size = vocab_size
        self.hidden_dim = cfg.hidden_dim
        self.decoder_dim = cfg.decoder_dim
        self.dual_enabled = cfg.dual_attention and cfg.has_semantics
        if store is None:
            store = ParameterStore(learning_rate, initial_accumulator)
            self._init_parameters(store, np.random.default_rng(seed))
        else:
            missing = [n for n in self.parameter_shapes() if n not in store]
            if missing:
                raise ValueError(f"parâmetros ausentes no store: {', '.join(missing)}")
        self.store = store

    # ---------- parâmetros ----------
    def phase_names(self) -> Tuple[Optional[_PhaseNames], _PhaseNames]:
        mode = self.cfg.decoder_mode
        if mode == "baseline":
            return None, _PhaseNames("dec", "attn", "out", False)
        if mode == "shared":
            return (
                _PhaseNames("dec", "attn", "out", False),
                _PhaseNames("dec", "attn", "out_dual" if self.dual_enabled else "out", self.dual_enabled),
            )
        return (
            _PhaseNames("dec_sem", "attn_sem", "out_sem", False),
            _PhaseNames("dec_sum", "attn_sum", "out_dual" if self.dual_enabled else "out_sum", self.dual_enabled),
        )

    def parameter_shapes(self) -> Dict[str, Tuple[int, ...]]:
        cfg = self.cfg
        V, e, hd, D = self.vocab_size, cfg.embed_dim, self.hidden_dim, self.decoder_dim
        inner = cfg.attention_dim if cfg.heads == 1 else cfg.head_size
        shapes: Dict[str, Tuple[int, ...]] = {
            "embedding": (V, e),
            "enc_fwd.W": (4 * hd, e + hd),
            "enc_fwd.b": (4 * hd,),
            "enc_bwd.W": (4 * hd, e + hd),
            "enc_bwd.b": (4 * hd,),
        }
        for names in self.phase_names():
            if names is None:
                continue
            shapes[f"{names.dec}.W"] = (4 * D, e + D)
            shapes[f"{names.dec}.b"] = (4 * D,)
            shapes.update(attention_parameter_shapes(names.attn, cfg.heads, inner, D, 2 * hd))
            width = D + 2 * hd + (D if names.dual else 0)
            shapes[f"{names.out}.W"] = (V, width)
            shapes[f"{names.out}.b"] = (V,)
        if self.dual_enabled:
            shapes.update(attention_parameter_shapes("dual", 1, cfg.attention_dim, D, D))
        return shapes

    def _init_parameters(self, store: ParameterStore, rng: np.random.Generator) -> None:
        for name, shape in self.parameter_shapes().items():
            store.add_uniform(name, shape, rng, self.cfg.init_scale)

    # ---------- forward ----------
    def _bound(self, binds: Dict[str, BoundAttention], prefix: str, H: np.ndarray) -> BoundAttention:
        if prefix not in binds:
            binds[prefix] = BoundAttention(self.store, prefix, self.cfg.heads, H)
        return binds[prefix]

    def _run_phase(
        self,
        names: _PhaseNames,
        attn: BoundAttention,
        dual: Optional[BoundAttention],
        inputs: Sequence[int],
        targets: Sequence[int],
        state: LstmState,
        trace: DecoderTrace,
    ) -> Tuple[_PhaseCache, LstmState]:
        store = self.store
        E = store["embedding"]
        W, b = store[f"{names.dec}.W"], store[f"{names.dec}.b"]
        W_out, b_out = store[f"{names.out}.W"], store[f"{names.out}.b"]
        pc = _PhaseCache(names)
        total = 0.0
        for x, y in zip(inputs, targets):
            state, lc = lstm_forward(E[x], state, W, b)
            c_inp, row, ac = attn.forward(state.h)
            trace.input_attention.append(row)
            parts = [state.h, c_inp]
            dc = None
            if names.dual:
                if dual is None:
                    parts.append(np.zeros(self.decoder_dim))
                else:
                    c_sem, brow, dc = dual.forward(state.h)
                    parts.append(c_sem)
                    trace.dual_attention.append(brow)
            feat = np.concatenate(parts)
            probs = softmax(W_out @ feat + b_out)
            total += nll(probs, y)
            trace.correct += int(np.argmax(probs) == y)
            trace.total += 1
            pc.steps.append(_Step(x, y, lc, ac, dc, feat, probs))
            pc.states.append(state.h)
        pc.nll = total / len(pc.steps)
        return pc, state

    def forward_teacher_forced(self, ex: Example) -> Tuple[float, float, DecoderTrace, ForwardCache]:
        """
        Fase semântica: entradas [<s>, y^s...] e alvos [y^s..., <SUM>].
        Fase de resumo: entradas [<SUM>, y^a...] (baseline: [<s>, y^a...]) e alvos [y^a..., </s>].
        Alvos semânticos vazios pulam a fase semântica (semantic_nll = 0).
        """
        if not ex.summary_ids:
            raise SkipSample(ex.id)
        sem_names, sum_names = self.phase_names()
        H, s0, enc = bilstm_encode(ex.article_ids, self.store, self.hidden_dim)
        binds: Dict[str, BoundAttention] = {}
        trace = DecoderTrace()

        sem_pc: Optional[_PhaseCache] = None
        state = s0
        dual: Optional[BoundAttention] = None
        if sem_names is not None and ex.semantic_ids:
            sem_pc, sem_final = self._run_phase(
                sem_names,
                self._bound(binds, sem_names.attn, H),
                None,
                [SOS_ID] + list(ex.semantic_ids),
                list(ex.semantic_ids) + [SUM_ID],
                s0,
                trace,
            )
            trace.semantic_states = list(sem_pc.states)
            if self.cfg.decoder_mode == "shared":
                state = sem_final
            if self.dual_enabled:
                dual = BoundAttention(self.store, "dual", 1, np.stack(sem_pc.states))
                trace.dual_available = True

        start = SOS_ID if sem_names is None else SUM_ID
        sum_pc, _ = self._run_phase(
            sum_names,
            self._bound(binds, sum_names.attn, H),
            dual,
            [start] + list(ex.summary_ids),
            list(ex.summary_ids) + [EOS_ID],
            state,
            trace,
        )
        trace.summary_states = list(sum_pc.states)
        sem_nll = sem_pc.nll if sem_pc is not None else 0.0
        return sem_nll, sum_pc.nll, trace, ForwardCache(enc, binds, dual, sem_pc, sum_pc)

    # ---------- backward ----------
    def _phase_backward(
        self,
        pc: _PhaseCache,
        attn: BoundAttention,
        dual: Optional[BoundAttention],
        scale: float,
        d_end: LstmState,
        d_states: Optional[np.ndarray],
    ) -> LstmState:
        store = self.store
        names = pc.names
        D, two_h = self.decoder_dim, 2 * self.hidden_dim
        W, W_out = store[f"{names.dec}.W"], store[f"{names.out}.W"]
        dW, db = np.zeros_like(W), np.zeros(W.shape[0])
        dW_out, db_out = np.zeros_like(W_out), np.zeros(W_out.shape[0])
        dX = np.zeros((len(pc.steps), store["embedding"].shape[1]))

        dh_next, dc_next = d_end.h.copy(), d_end.c.copy()
        for t in reversed(range(len(pc.steps))):
            st = pc.steps[t]
            dlog = nll_grad_logits(st.probs, st.target) * scale
            dW_out += np.outer(dlog, st.feat)
            db_out += dlog
            dfeat = W_out.T @ dlog
            ds = dfeat[:D] + attn.backward(dfeat[D:D + two_h], st.attn)
            if st.dual is not None and dual is not None:
                ds += dual.backward(dfeat[D + two_h:], st.dual)
            if d_states is not None:
                ds += d_states[t]
            dx, dh_next, dc_next, dWs, dbs = lstm_backward(ds + dh_next, dc_next, st.lstm, W)
            dW += dWs
            db += dbs
            dX[t] = dx

        store.accumulate(f"{names.dec}.W", dW)
        store.accumulate(f"{names.dec}.b", db)
        store.accumulate(f"{names.out}.W", dW_out)
        store.accumulate(f"{names.out}.b", db_out)
        store.accumulate_rows("embedding", [st.x for st in pc.steps], dX)
        return LstmState(dh_next, dc_next)

    def backward(self, cache: ForwardCache, d_semantic: float, d_summary: float) -> None:
        """Acumula no store o gradiente de d_semantic·semantic_nll + d_summary·summary_nll."""
        D = self.decoder_dim
        zero = LstmState.zeros(D)
        sum_pc = cache.summary
        d_init = self._phase_backward(
            sum_pc, cache.binds[sum_pc.names.attn], cache.dual, d_summary / len(sum_pc.steps), zero, None
        )
        d_s0 = d_init
        if cache.semantic is not None:
            sem_pc = cache.semantic
            dS = cache.dual.finish() if cache.dual is not None else None
            shared = self.cfg.decoder_mode == "shared"
            d_sem_init = self._phase_backward(
                sem_pc,
                cache.binds[sem_pc.names.attn],
                None,
                d_semantic / len(sem_pc.steps),
                d_init if shared else zero,
                dS,
            )
            d_s0 = d_sem_init if shared else LstmState(d_sem_init.h + d_init.h, d_sem_init.c + d_init.c)
        dH = sum(b.finish() for b in cache.binds.values())
        bilstm_backward(dH, d_s0, cache.enc, self.store, self.hidden_dim)

    def loss_and_grad(self, ex: Example, alpha: float) -> Tuple[float, float, float, DecoderTrace]:
        sem, summ, trace, cache = self.forward_teacher_forced(ex)
        self.backward(cache, 1.0 - alpha, alpha)
        return combined_loss(sem, summ, alpha), sem, summ, trace

    def parameter_count(self) -> int:
        return self.store.size()


def teacher_forced_accuracy(examples: Sequence[Example], model: Summarizer) -> float:
    """Fração de tokens-alvo (semântica e resumo) que são o argmax sob teacher forcing."""
    correct = total = 0
    for ex in examples:
        try:
            _, _, trace, _ = model.forward_teacher_forced(ex)
        except SkipSample:
            continue
        correct += trace.correct
        total += trace.total
    return correct / total if total else 0.0


def warm_start(store: ParameterStore, baseline_store: ParameterStore, mode: str) -> List[str]:
    """
    Copia codificador, decodificador, atenção e saída de um baseline convergido.
    - separate: decodificador do baseline vai para o decodificador de resumo
    - saída dual recebe o baseline nas primeiras colunas; o resto fica aleatório
    """
    suffix = {"shared": "", "separate": "_sum"}.get(mode)
    if suffix is None:
        raise ValueError(f"warm_start: modo '{mode}' não recebe pesos de baseline")
    copied: List[str] = []
    for name in baseline_store.names():
        src = baseline_store[name]
        head, _, rest = name.partition(".")
        if head in ("dec", "attn"):
            targets = [f"{head}{suffix}.{rest}"]
        elif head == "out":
            targets = [f"out{suffix}.{rest}", f"out_dual.{rest}"]
        else:
            targets = [name]
        for tgt in targets:
            if tgt not in store:
                continue
            dst = store.values[tgt]
            if dst.shape == src.shape:
                dst[...] = src
            elif dst.ndim == 2 and dst.shape[0] == src.shape[0] and dst.shape[1] > src.shape[1]:
                dst[:, : src.shape[1]] = src
            else:
                logger.warning("warm_start: formas incompatíveis %s %s <- %s %s", tgt, dst.shape, name, src.shape)
                continue
            copied.append(tgt)
    logger.info("warm_start: %d tensores copiados do baseline", len(copied))
    return copied


# -------------------------------
# checkpoint do modelo
# -------------------------------
def save_summarizer(path: Path, model: Summarizer, seed: int) -> None:
    header = {"summarizer": model.cfg.model_dump(mode="json"), "vocab_size": model.vocab_size}
    save_checkpoint(path, model.store, seed, header)


def load_summarizer(path: Path) -> Tuple[Summarizer, int]:
    store, header = load_checkpoint(path)
    cfg = header.get("config", {})
    if "summarizer" not in cfg or "vocab_size" not in cfg:
        raise ValueError(f"{path}: checkpoint sem configuração do modelo")
    model = Summarizer(SummarizerConfig.model_validate(cfg["summarizer"]), int(cfg["vocab_size"]), store=store)
    return model, int(header["seed"])


# -------------------------------
# adaptador para decodificação
# -------------------------------
class DecodeState(NamedTuple):
    phase: str
    lstm: LstmState


class SummarizerDecoder:
    """
    Modelo de passo a passo para o beam search, ligado a um artigo.
    step(state, token) -> (log-probabilidades, novo estado, linha de atenção sobre a entrada)
    """

    def __init__(self, model: Summarizer, vocab: Vocabulary, article_ids: Sequence[int]):
        self.model = model
        self.id_to_token = vocab.id_to_token
        self.vocab_size = len(vocab)
        self.eos_id = EOS_ID
        self.has_semantics = model.cfg.has_semantics
        self.semantic_start_id = SOS_ID
        self.summary_start_id = SUM_ID if self.has_semantics else SOS_ID
        self._H, self._s0, _ = bilstm_encode(list(article_ids), model.store, model.hidden_dim)
        self._binds: Dict[str, BoundAttention] = {}
        self._dual: Optional[BoundAttention] = None
        self._names = dict(zip(("semantic", "summary"), model.phase_names()))

    def start_semantic(self) -> DecodeState:
        return DecodeState("semantic", self._s0)

    def start_summary(self, semantic_ids: Sequence[int]) -> DecodeState:
        """Reexecuta a fase semântica sobre os tokens escolhidos; shared continua do último estado."""
        self._dual = None
        names = self._names["semantic"]
        if names is None or not semantic_ids:
            return DecodeState("summary", self._s0)
        state = DecodeState("semantic", self._s0)
        states = []
        for tok in [SOS_ID] + list(semantic_ids):
            state = self._advance(state, tok)
            states.append(state.lstm.h)
        if self.model.dual_enabled:
            self._dual = BoundAttention(self.model.store, "dual", 1, np.stack(states))
        if self.model.cfg.decoder_mode == "shared":
            return DecodeState("summary", state.lstm)
        return DecodeState("summary", self._s0)

    def _advance(self, state: DecodeState, token: int) -> DecodeState:
        names = self._names[state.phase]
        store = self.model.store
        new, _ = lstm_forward(store["embedding"][token], state.lstm, store[f"{names.dec}.W"], store[f"{names.dec}.b"])
        return DecodeState(state.phase, new)

    def step(self, state: DecodeState, token: int) -> Tuple[np.ndarray, DecodeState, np.ndarray]:
        names = self._names[state.phase]
        store = self.model.store
        new = self._advance(state, token)
        attn = self._binds.get(names.attn)
        if attn is None:
            attn = self._binds[names.attn] = BoundAttention(store, names.attn, self.model.cfg.heads, self._H)
        c_inp, row, _ = attn.forward(new.lstm.h)
        parts = [new.lstm.h, c_inp]
        if names.dual:
            parts.append(self._dual.forward(new.lstm.h)[0] if self._dual is not None else np.zeros(self.model.decoder_dim))
        logits = store[f"{names.out}.W"] @ np.concatenate(parts) + store[f"{names.out}.b"]
        return log_softmax(logits), new, row
