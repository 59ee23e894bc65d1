from __future__ import annotations

import logging
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

logger = logging.getLogger(__name__)

# --------------------
# TOKENS ESPECIAIS
# --------------------
PAD = "<pad>"
UNK = "<unk>"
SOS = "<s>"
EOS = "</s>"
PRED_TAG = "<PRED>"
ARG0_TAG = "<ARG0>"
ARG1_TAG = "<ARG1>"
ARG2_TAG = "<ARG2>"
SEP_TAG = "<SEP>"
SUM_TAG = "<SUM>"

# ordem fixa: a linha N do arquivo de vocabulário é o id N
SPECIAL_TOKENS: Tuple[str, ...] = (PAD, UNK, SOS, EOS, PRED_TAG, ARG0_TAG, ARG1_TAG, ARG2_TAG, SEP_TAG, SUM_TAG)
PAD_ID, UNK_ID, SOS_ID, EOS_ID, PRED_ID, ARG0_ID, ARG1_ID, ARG2_ID, SEP_ID, SUM_ID = range(len(SPECIAL_TOKENS))

ARG_TAGS: Tuple[str, ...] = (ARG0_TAG, ARG1_TAG, ARG2_TAG)

Span = Tuple[int, int]


def _check_span(span: Optional[Span], name: str) -> Optional[Span]:
    if span is None:
        return None
    s, e = span
    if s < 0 or e <= s:
        raise ValueError(f"span {name} inválido: {list(span)} (esperado 0 <= início < fim)")
    return (int(s), int(e))


# --------------------
# CORPUS
# --------------------
class SrlStructure(BaseModel):
    """Predicado + ARG0/ARG1/ARG2 como spans [início, fim) sobre os tokens do artigo."""

    model_config = ConfigDict(populate_by_name=True, frozen=True)

    predicate: Span = Field(alias="pred")
    arg0: Optional[Span] = Field(default=None, alias="a0")
    arg1: Optional[Span] = Field(default=None, alias="a1")
    arg2: Optional[Span] = Field(default=None, alias="a2")

    @model_validator(mode="after")
    def _spans_ok(self) -> "SrlStructure":
        _check_span(self.predicate, "pred")
        for name in ("arg0", "arg1", "arg2"):
            _check_span(getattr(self, name), name)
        return self

    def spans(self) -> List[Span]:
        return [s for s in (self.predicate, self.arg0, self.arg1, self.arg2) if s is not None]

    def max_end(self) -> int:
        return max(e for _, e in self.spans())


class Sample(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    id: str
    article: List[str]
    summary: List[str]
    sentence_bounds: List[Span] = Field(default_factory=list, alias="sentences")
    srl: List[SrlStructure] = Field(default_factory=list)

    # preenchido pelo comando "targets"
    targets: Optional[List[SrlStructure]] = None
    # índices (em sentence_bounds) das frases inseridas pelo modo adversarial
    inserted: Optional[List[int]] = None

    @model_validator(mode="after")
    def _bounds_partition_article(self) -> "Sample":
        n = len(self.article)
        expected = 0
        for s, e in self.sentence_bounds:
            if s != expected or e <= s:
                raise ValueError(
                    f"sentences não particionam o artigo em ordem: span {[s, e]} (esperado início {expected})"
                )
            expected = e
        if self.sentence_bounds and expected != n:
            raise ValueError(f"sentences cobrem {expected} tokens, artigo tem {n}")
        for st in list(self.srl) + list(self.targets or []):
            if st.max_end() > n:
                raise ValueError(f"span SRL {st.model_dump(by_alias=True)} fora do artigo ({n} tokens)")
        return self

    def sentences(self) -> List[List[str]]:
        return [self.article[s:e] for s, e in self.sentence_bounds]

    def to_record(self) -> dict:
        return self.model_dump(by_alias=True, exclude_none=True, mode="json")


class SemanticFrame(BaseModel):
    """Estrutura SRL no nível de tokens (o que a linearização carrega)."""

    model_config = ConfigDict(frozen=True)

    predicate: Tuple[str, ...]
    arg0: Optional[Tuple[str, ...]] = None
    arg1: Optional[Tuple[str, ...]] = None
    arg2: Optional[Tuple[str, ...]] = None

    def args(self) -> List[Tuple[str, Optional[Tuple[str, ...]]]]:
        return [("arg0", self.arg0), ("arg1", self.arg1), ("arg2", self.arg2)]


class LinearizedSemantics(BaseModel):
    tokens: List[str] = Field(default_factory=list)


class FilterResult(BaseModel):
    accepted: bool
    reason: Optional[str] = None
    sample: Optional[Sample] = None


class PreprocessReport(BaseModel):
    total: int = 0
    accepted: int = 0
    rejected: Dict[str, int] = Field(default_factory=dict)
    warnings: List[str] = Field(default_factory=list)


# --------------------
# CONFIGURAÇÃO
# --------------------
class PreprocessConfig(BaseModel):
    min_article_words: int = 100
    min_summary_words: int = 20
    template_suffix_words: List[str] = Field(
        default_factory=lambda: ["(s)", "(m)", "photo", "graph", "chart", "map", "table", "drawing"]
    )
    rejection_prefix_words: List[str] = Field(
        default_factory=lambda: [
            "article", "column", "op-ed", "essay", "editorial", "letter",
            "profile", "interview", "excerpts", "news", "analysis", "review",
        ]
    )
    lowercase_all: bool = True
    number_token: str = "0"

    @field_validator("min_article_words", "min_summary_words")
    @classmethod
    def _positive(cls, v: int) -> int:
        if v <= 0:
            raise ValueError("limiares de tamanho devem ser > 0")
        return v


class StageSpec(BaseModel):
    max_input_len: int
    max_output_len: int
    # None: usa SummarizerConfig.alpha
    alpha: Optional[float] = None

    @field_validator("max_input_len", "max_output_len")
    @classmethod
    def _positive(cls, v: int) -> int:
        if v <= 0:
            raise ValueError("comprimentos de estágio devem ser > 0")
        return v

    @field_validator("alpha")
    @classmethod
    def _alpha_range(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and not 0.0 <= v <= 1.0:
            raise ValueError("alpha deve estar em [0, 1]")
        return v


class SummarizerConfig(BaseModel):
    decoder_mode: Literal["shared", "separate", "baseline"] = "shared"
    heads: int = 1
    head_size: int = 64
    dual_attention: bool = True
    embed_dim: int = 128
    hidden_dim: int = 256
    # dimensão da atenção de cabeça única; com várias cabeças vale heads * head_size
    attention_dim: int = 256
    alpha: float = 0.5
    min_output_tokens: int = 35
    init_scale: float = 0.1
    stage_schedule: List[StageSpec] = Field(
        default_factory=lambda: [
            StageSpec(max_input_len=50, max_output_len=50),
            StageSpec(max_input_len=200, max_output_len=50),
            StageSpec(max_input_len=400, max_output_len=100),
        ]
    )

    @field_validator("alpha")
    @classmethod
    def _alpha_range(cls, v: float) -> float:
        if not 0.0 <= v <= 1.0:
            raise ValueError("alpha deve estar em [0, 1]")
        return v

    @model_validator(mode="after")
    def _dims_ok(self) -> "SummarizerConfig":
        if self.heads < 1:
            raise ValueError("heads deve ser >= 1")
        if min(self.embed_dim, self.hidden_dim, self.attention_dim, self.head_size) <= 0:
            raise ValueError("dimensões devem ser > 0")
        if self.heads > 1 and self.heads * self.head_size != self.attention_dim:
            raise ValueError(
                f"heads*head_size ({self.heads}*{self.head_size}) difere de attention_dim ({self.attention_dim})"
            )
        if not self.stage_schedule:
            raise ValueError("stage_schedule vazio")
        return self

    @property
    def decoder_dim(self) -> int:
        return 2 * self.hidden_dim

    @property
    def has_semantics(self) -> bool:
        return self.decoder_mode != "baseline"


class TrainingConfig(BaseModel):
    batch_size: int = 16
    patience: int = 3
    max_epochs_per_stage: int = 20
    learning_rate: float = 0.15
    initial_accumulator: float = 0.1
    stop_at_accuracy: Optional[float] = None
    strict_order: Literal["article", "overlap"] = "article"

    @model_validator(mode="after")
    def _ok(self) -> "TrainingConfig":
        if self.batch_size < 1 or self.patience < 1 or self.max_epochs_per_stage < 1:
            raise ValueError("batch_size, patience e max_epochs_per_stage devem ser >= 1")
        if self.learning_rate <= 0 or self.initial_accumulator <= 0:
            raise ValueError("learning_rate e initial_accumulator devem ser > 0")
        return self


class BeamConfig(BaseModel):
    B: int = 12
    K: int = 6
    N: int = 6
    R: int = 10
    alpha: float = 0.4
    beta: float = 0.1
    alpha_prime: float = 0.1
    max_len: int = 100
    min_len: int = 35
    semantic_max_len: int = 100
    semantic_min_len: int = 35
    lrs_clamp_epsilon: float = 1e-6
    # fórmula de s sem a condição do predicado (variante do apêndice)
    ungated_coverage: bool = False
    semantic_source: Literal["generated", "gold"] = "generated"

    @model_validator(mode="after")
    def _ok(self) -> "BeamConfig":
        if self.B < 1 or self.K < 1 or self.R < 1:
            raise ValueError("B, K e R devem ser >= 1")
        if not 1 <= self.N <= self.B:
            raise ValueError(f"N deve estar em [1, B]; recebido N={self.N}, B={self.B}")
        if self.max_len < 1 or self.semantic_max_len < 1:
            raise ValueError("max_len deve ser >= 1")
        if self.min_len < 0 or self.semantic_min_len < 0:
            raise ValueError("min_len deve ser >= 0")
        if not 0 < self.lrs_clamp_epsilon < 1:
            raise ValueError("lrs_clamp_epsilon deve estar em (0, 1)")
        if self.K >= self.B or self.N == self.B:
            logger.warning("BeamConfig B=%s K=%s N=%s reduz para beam search clássico", self.B, self.K, self.N)
        return self


class AdversarialConfig(BaseModel):
    n_values: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4])
    lead_n: int = 2
    source_domain: str = "sports"

    @field_validator("n_values")
    @classmethod
    def _range(cls, v: List[int]) -> List[int]:
        if any(n < 0 or n > 4 for n in v):
            raise ValueError("n_values deve estar em 0..4")
        return v


class EvaluationConfig(BaseModel):
    rouge_stem: bool = False
    rouge_remove_stopwords: bool = False
    lead_n: int = 2


class RunConfig(BaseModel):
    profile: str = "toy"
    seed: int = 13
    vocab_size: int = 200
    workers: int = 1
    preprocess: PreprocessConfig = Field(default_factory=PreprocessConfig)
    summarizer: SummarizerConfig = Field(default_factory=SummarizerConfig)
    training: TrainingConfig = Field(default_factory=TrainingConfig)
    beam: BeamConfig = Field(default_factory=BeamConfig)
    adversarial: AdversarialConfig = Field(default_factory=AdversarialConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)

    @field_validator("vocab_size")
    @classmethod
    def _vocab(cls, v: int) -> int:
        if v <= len(SPECIAL_TOKENS):
            raise ValueError(f"vocab_size deve ser > {len(SPECIAL_TOKENS)}")
        return v


# --------------------
# RELATÓRIOS
# --------------------
class TrainingRow(BaseModel):
    epoch: int
    stage: int
    train_loss: float
    validation_loss: float
    accuracy: float = 0.0


class TrainingReport(BaseModel):
    seed: int
    rows: List[TrainingRow] = Field(default_factory=list)
    skipped_samples: int = 0
    updates: int = 0
    final_accuracy: float = 0.0
    warnings: List[str] = Field(default_factory=list)


class GradCheckReport(BaseModel):
    max_error: float
    per_parameter: Dict[str, float] = Field(default_factory=dict)
    checked_entries: int = 0
    frozen: List[str] = Field(default_factory=list)


class RerankEvent(BaseModel):
    step: int
    scores: List[float]
    order: List[List[int]]
    kind: Literal["rerank", "final"] = "rerank"


class RerankReport(BaseModel):
    sample_id: str = ""
    events: List[RerankEvent] = Field(default_factory=list)


class SrlStats(BaseModel):
    samples: int = 0
    avg_structures: float = 0.0
    # presença em % e comprimento médio em tokens, por argumento
    presence: Dict[str, float] = Field(default_factory=lambda: {"arg0": 0.0, "arg1": 0.0, "arg2": 0.0})
    mean_length: Dict[str, float] = Field(default_factory=lambda: {"arg0": 0.0, "arg1": 0.0, "arg2": 0.0})
    warnings: int = 0


class SemanticUsage(BaseModel):
    predicates: int = 0
    predicates_in_reference: float = 0.0
    predicates_reused: float = 0.0
    structures_reused_strict: float = 0.0


class MetricRow(BaseModel):
    sample_id: str
    rouge1: float
    rouge2: float
    rougeL: float
    density: float
    redundancy: float


class SweepRow(BaseModel):
    system: str
    n: int
    mean_rouge_l: float
    count: int


# --------------------
# ADVERSARIAL
# --------------------
class DistractorPool(BaseModel):
    sentences: List[List[str]] = Field(default_factory=list)
    source_domain: str = "out-of-domain"

    @field_validator("sentences")
    @classmethod
    def _non_empty(cls, v: List[List[str]]) -> List[List[str]]:
        for i, sent in enumerate(v):
            if not sent:
                raise ValueError(f"frase distratora {i} vazia")
        return v
