from __future__ import annotations

from functools import lru_cache
from pathlib import Path
from typing import FrozenSet, Optional

DB_DIR = Path(__file__).resolve().parents[2] / "db"
STOPWORDS_PATH = DB_DIR / "stopwords_en.txt"
PRONOUNS_PATH = DB_DIR / "pronouns_en.txt"


def read_word_list(path: Path) -> FrozenSet[str]:
    words = set()
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        s = raw.strip()
        if not s or s.startswith("# "):
            continue
        words.add(s.lower())
    return frozenset(words)


@lru_cache(maxsize=8)
def load_stopwords(path: Optional[Path] = None) -> FrozenSet[str]:
    return read_word_list(path or STOPWORDS_PATH)


@lru_cache(maxsize=8)
def load_pronouns(path: Optional[Path] = None) -> FrozenSet[str]:
    return read_word_list(path or PRONOUNS_PATH)
