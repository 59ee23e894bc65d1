from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from pydantic import ValidationError

from app.core.errors import ConfigError
from app.core.schemas import RunConfig

logger = logging.getLogger(__name__)

ROOT = Path(__file__).resolve().parents[2]
DEFAULT_CONFIG_PATH = ROOT / "db" / "experiment_config.json"


def load_config_file(path: Optional[Path] = None) -> dict:
    path = Path(path) if path else DEFAULT_CONFIG_PATH
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"arquivo de configuração não encontrado: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: JSON inválido ({exc.msg})") from exc


def _deep_merge(base: Dict[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    out = dict(base)
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, Mapping) and isinstance(out.get(key), Mapping):
            out[key] = _deep_merge(dict(out[key]), value)
        else:
            out[key] = value
    return out


def _derive_head_size(merged: Dict[str, Any], overrides: Mapping[str, Any]) -> None:
    # --heads sem --head-size: divide attention_dim entre as cabeças
    ov = overrides.get("summarizer") or {}
    heads = ov.get("heads")
    if not heads or heads <= 1 or ov.get("head_size") is not None:
        return
    summ = merged.setdefault("summarizer", {})
    attention_dim = int(summ.get("attention_dim", 256))
    if attention_dim % heads:
        raise ConfigError(f"attention_dim={attention_dim} não é divisível por heads={heads}")
    summ["head_size"] = attention_dim // heads


def load_experiment_config(
    path: Optional[Path] = None,
    profile: str = "toy",
    overrides: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """
    Lê db/experiment_config.json[profile] e aplica overrides (flags vencem o arquivo).
    - overrides: dicionário aninhado no formato de RunConfig; valores None são ignorados
    """
    config_all = load_config_file(path)
    profile_norm = (profile or "").lower().strip()
    doc = config_all.get(profile_norm)
    if doc is None:
        raise ConfigError(
            f"Perfil '{profile}' não cadastrado em {path or DEFAULT_CONFIG_PATH} "
            f"(disponíveis: {', '.join(sorted(config_all))})"
        )
    merged = _deep_merge({"profile": profile_norm, **doc}, overrides or {})
    _derive_head_size(merged, overrides or {})
    try:
        cfg = RunConfig.model_validate(merged)
    except ValidationError as exc:
        raise ConfigError(f"configuração inválida no perfil '{profile_norm}': {exc}") from exc
    logger.debug("configuração carregada: perfil=%s seed=%s", cfg.profile, cfg.seed)
    return cfg
