from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Sequence, Tuple

from pydantic import ValidationError

from app.core.errors import CorpusFormatError
from app.core.sanitizer import find_rejection_prefix, normalize_tokens, strip_template_suffix
from app.core.schemas import (
    SPECIAL_TOKENS,
    UNK_ID,
    FilterResult,
    PreprocessConfig,
    PreprocessReport,
    Sample,
)

logger = logging.getLogger(__name__)


# -------------------------------
# vocabulário
# -------------------------------
@dataclass
class Vocabulary:
    id_to_token: List[str]
    token_to_id: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if tuple(self.id_to_token[: len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
            raise ValueError("vocabulário deve começar pelos 10 tokens especiais na ordem fixa")
        self.token_to_id = {tok: i for i, tok in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValueError("vocabulário com tokens duplicados")

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id


def build_vocabulary(corpus: Sequence[Sample], size: int) -> Vocabulary:
    """Especiais + os (size - 10) tokens mais frequentes em artigos e resumos; empate pela 1ª ocorrência."""
    if size <= len(SPECIAL_TOKENS):
        raise ValueError(f"tamanho de vocabulário {size} não comporta tokens além dos {len(SPECIAL_TOKENS)} especiais")
    if not corpus:
        raise ValueError("build_vocabulary: corpus vazio")
    counts: Counter = Counter()
    first_seen: Dict[str, int] = {}
    for sample in corpus:
        for tok in list(sample.article) + list(sample.summary):
            counts[tok] += 1
            if tok not in first_seen:
                first_seen[tok] = len(first_seen)
    specials = set(SPECIAL_TOKENS)
    ranked = sorted((t for t in counts if t not in specials), key=lambda t: (-counts[t], first_seen[t]))
    words = ranked[: size - len(SPECIAL_TOKENS)]
    logger.info("vocabulário: %d tokens distintos no corpus, %d mantidos", len(counts), len(words))
    return Vocabulary(list(SPECIAL_TOKENS) + words)


def ids_of(tokens: Iterable[str], vocab: Vocabulary) -> List[int]:
    return [vocab.token_to_id.get(tok, UNK_ID) for tok in tokens]


def tokens_of(ids: Iterable[int], vocab: Vocabulary) -> List[str]:
    out: List[str] = []
    n = len(vocab)
    for i in ids:
        if not 0 <= int(i) < n:
            raise ValueError(f"id {i} fora do vocabulário (tamanho {n})")
        out.append(vocab.id_to_token[int(i)])
    return out


def save_vocabulary(path: Path, vocab: Vocabulary) -> None:
    Path(path).write_text("\n".join(vocab.id_to_token) + "\n", encoding="utf-8")


def load_vocabulary(path: Path) -> Vocabulary:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    try:
        return Vocabulary([ln for ln in lines if ln != ""])
    except ValueError as exc:
        raise CorpusFormatError(str(exc), path=Path(path)) from exc


# -------------------------------
# normalização / filtro
# -------------------------------
def normalize_sample(raw: Sample, cfg: PreprocessConfig) -> Sample:
    article = normalize_tokens(raw.article, cfg) if raw.article else []
    summary = normalize_tokens(raw.summary, cfg) if raw.summary else []
    return raw.model_copy(update={"article": article, "summary": summary})


def filter_sample(raw: Sample, cfg: PreprocessConfig) -> FilterResult:
    """
    Regras do pré-processamento:
    - resumo vazio, artigo curto, resumo curto -> rejeita
    - palavra de template entre os 5 primeiros tokens do resumo -> rejeita ("prefix:<palavra>")
    - palavras de template no fim do resumo são removidas
    """
    if not raw.summary:
        return FilterResult(accepted=False, reason="summary_empty")
    summary = strip_template_suffix(raw.summary, cfg.template_suffix_words)
    if not summary:
        return FilterResult(accepted=False, reason="summary_empty")
    if len(raw.article) < cfg.min_article_words:
        return FilterResult(accepted=False, reason="article_too_short")
    if len(summary) < cfg.min_summary_words:
        return FilterResult(accepted=False, reason="summary_too_short")
    prefix = find_rejection_prefix(summary, cfg.rejection_prefix_words)
    if prefix is not None:
        return FilterResult(accepted=False, reason=f"prefix:{prefix}")
    return FilterResult(accepted=True, sample=raw.model_copy(update={"summary": summary}))


def preprocess_corpus(raw: Iterable[Sample], cfg: PreprocessConfig) -> Tuple[List[Sample], PreprocessReport]:
    report = PreprocessReport()
    kept: List[Sample] = []
    for sample in raw:
        report.total += 1
        res = filter_sample(normalize_sample(sample, cfg), cfg)
        if res.accepted and res.sample is not None:
            kept.append(res.sample)
            continue
        reason = res.reason or "unknown"
        report.rejected[reason] = report.rejected.get(reason, 0) + 1
    report.accepted = len(kept)
    if report.total and not kept:
        report.warnings.append("nenhuma amostra sobreviveu ao filtro; revise min_article_words/min_summary_words")
    logger.info("pré-processamento: %d/%d amostras aceitas; rejeições=%s", report.accepted, report.total, report.rejected)
    return kept, report


def split_corpus(samples: Sequence[Sample], fractions: Tuple[float, float, float] = (0.9, 0.05, 0.05)):
    """Divide na ordem dada (sem embaralhar): treino, validação, teste."""
    if abs(sum(fractions) - 1.0) > 1e-9 or any(f < 0 for f in fractions):
        raise ValueError(f"frações inválidas: {fractions}")
    n = len(samples)
    n_train = int(round(n * fractions[0]))
    n_val = int(round(n * fractions[1]))
    return list(samples[:n_train]), list(samples[n_train:n_train + n_val]), list(samples[n_train + n_val:])


# -------------------------------
# arquivos JSON Lines
# -------------------------------
def iter_corpus(path: Path) -> Iterator[Sample]:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"JSON inválido ({exc.msg})", path=path, line_number=line_number) from exc
            if not isinstance(record, dict):
                raise CorpusFormatError("registro não é um objeto JSON", path=path, line_number=line_number)
            try:
                yield Sample.model_validate(record)
            except ValidationError as exc:
                first = exc.errors()[0] if exc.errors() else {}
                where = ".".join(str(p) for p in first.get("loc", ()))
                msg = first.get("msg", str(exc))
                raise CorpusFormatError(f"campo '{where}': {msg}" if where else msg, path=path, line_number=line_number) from exc


def read_corpus(path: Path) -> List[Sample]:
    return list(iter_corpus(path))


def write_corpus(path: Path, samples: Iterable[Sample]) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for sample in samples:
            fh.write(json.dumps(sample.to_record(), ensure_ascii=False, sort_keys=True) + "\n")
            n += 1
    return n
