import os
from pathlib import Path
import sys

ROOT = Path(__file__).resolve().parents[1]
root_str = str(ROOT)
if root_str not in sys.path:
    sys.path.insert(0, root_str)

import pytest  # noqa: E402
from hypothesis import HealthCheck, settings  # noqa: E402

from app.core.schemas import SummarizerConfig  # noqa: E402
from app.corpus.corpus_io import build_vocabulary  # noqa: E402
from app.corpus.toy_corpus import toy_corpus  # noqa: E402

settings.register_profile("default", max_examples=60, derandomize=True, deadline=None)
settings.register_profile(
    "ci", max_examples=300, derandomize=True, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def toy_samples():
    return toy_corpus()


@pytest.fixture(scope="session")
def toy_vocab(toy_samples):
    return build_vocabulary(toy_samples, 120)


@pytest.fixture
def tiny_cfg():
    return SummarizerConfig(
        decoder_mode="shared",
        heads=1,
        head_size=4,
        dual_attention=True,
        embed_dim=6,
        hidden_dim=5,
        attention_dim=7,
        min_output_tokens=1,
    )
