from __future__ import annotations

from pathlib import Path
from typing import Optional


class ConfigError(ValueError):
    """Perfil ou bloco de configuração inválido."""


class CorpusFormatError(ValueError):
    """Linha malformada em um arquivo de corpus (JSON Lines)."""

    def __init__(self, message: str, path: Optional[Path] = None, line_number: Optional[int] = None):
        self.path = path
        self.line_number = line_number
        where = ""
        if path is not None:
            where = f"{path}"
        if line_number is not None:
            where = f"{where}:{line_number}" if where else f"linha {line_number}"
        super().__init__(f"{where}: {message}" if where else message)


class NonFiniteLossError(RuntimeError):
    def __init__(self, loss: float, stage: int, epoch: int, sample_id: str):
        self.loss = loss
        self.stage = stage
        self.epoch = epoch
        self.sample_id = sample_id
        super().__init__(
            f"loss não finita ({loss}) no estágio {stage}, época {epoch}, amostra '{sample_id}'"
        )


class SkipSample(Exception):
    """Amostra sem resumo após truncamento: o treino pula e contabiliza."""
