from __future__ import annotations

import re
from typing import Iterable, List, Optional, Sequence

from app.core.schemas import PreprocessConfig

# sinal opcional, dígitos com vírgulas de milhar e no máximo um ponto decimal: "1993", "-7", "3.5", "1,000.25", ".5"
_NUMBER_RE = re.compile(r"[+-]?(?:\d[\d,]*(?:\.\d*)?|\.\d+)")


def is_number_token(token: str) -> bool:
    return bool(token) and _NUMBER_RE.fullmatch(token) is not None


def normalize_tokens(tokens: Sequence[str], cfg: PreprocessConfig) -> List[str]:
    """Troca números por cfg.number_token e (opcionalmente) passa tudo para minúsculas. Mantém o tamanho."""
    if not tokens:
        raise ValueError("normalize_tokens: sequência de tokens vazia")
    out: List[str] = []
    for tok in tokens:
        if is_number_token(tok):
            out.append(cfg.number_token)
        elif cfg.lowercase_all:
            out.append(tok.lower())
        else:
            out.append(tok)
    return out


def strip_template_suffix(summary: Sequence[str], template_words: Iterable[str]) -> List[str]:
    words = set(template_words)
    out = list(summary)
    while out and out[-1] in words:
        out.pop()
    return out


def find_rejection_prefix(summary: Sequence[str], prefix_words: Iterable[str], window: int = 5) -> Optional[str]:
    words = set(prefix_words)
    for tok in summary[:window]:
        if tok in words:
            return tok
    return None
