from __future__ import annotations

from functools import lru_cache
from typing import Callable

Stemmer = Callable[[str], str]

# (sufixo, substituição), testados do mais longo para o mais curto
_RULES = (
    ("ing", ""),
    ("ies", "i"),
    ("es", ""),
    ("ed", ""),
    ("s", ""),
    ("e", ""),
)
# "s" final não é removido depois destas letras (bus, class, analysis, propos, clos)
_S_GUARD = frozenset("suioa")


def _strip_once(token: str) -> str:
    for suffix, repl in _RULES:
        if not token.endswith(suffix):
            continue
        if suffix == "s" and len(token) >= 2 and token[-2] in _S_GUARD:
            continue
        stem = token[: len(token) - len(suffix)] + repl
        if not stem:
            return token
        return stem
    return token


@lru_cache(maxsize=65536)
def stem(token: str) -> str:
    """
    Stemmer leve por tabela de sufixos.
    - aplica a regra mais longa que casar até nenhuma regra disparar (ponto fixo)
    - nunca devolve token vazio
    """
    cur = token
    while True:
        nxt = _strip_once(cur)
        if nxt == cur:
            return cur
        cur = nxt
