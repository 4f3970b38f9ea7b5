import math

import pytest
import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import hypothesis
import numpy as np

from numen.config import get_settings
from numen.schemas.encoder import EncoderConfig
from numen.schemas.ingest import SynthSpec
from numen.services.synthetic import generate_synthetic

hypothesis.settings.register_profile("default", max_examples=200, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=20, deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    """Each test sees the NUMEN_* environment it sets, not a cached one."""
    for key in list(os.environ):
        if key.startswith("NUMEN_"):
            monkeypatch.delenv(key, raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def default_config() -> EncoderConfig:
    return EncoderConfig(dimension=32768)


@pytest.fixture
def small_config() -> EncoderConfig:
    return EncoderConfig(dimension=4096)


def _bitwise_crc32(data: bytes, poly: int) -> int:
    crc = 0xFFFFFFFF
    for byte in data:
        crc ^= byte
        for _ in range(8):
            crc = (crc >> 1) ^ (poly if crc & 1 else 0)
    return crc ^ 0xFFFFFFFF


@pytest.fixture
def crc_oracle():
    """Independent bit-at-a-time CRC32; variant is 'crc32-ieee' or 'crc32c'."""

    polys = {"crc32-ieee": 0xEDB88320, "crc32c": 0x82F63B78}

    def oracle(data: bytes, variant: str = "crc32-ieee") -> int:
        return _bitwise_crc32(data, polys[variant])

    return oracle


@pytest.fixture
def naive_ranking():
    """Per-document scorer over (doc_id, vector) pairs, sorted by (-score, doc_id).

    Each float32 product is exact in float64 and ``math.fsum`` rounds the sum once.
    """

    def rank(entries, query):
        query_values = query.tolist()
        support = [i for i, x in enumerate(query_values) if x != 0.0]
        q = [query_values[i] for i in support]
        scored = []
        for doc_id, vector in entries:
            values = vector.tolist()
            total = math.fsum(values[i] * b for i, b in zip(support, q))
            scored.append((doc_id, total))
        scored.sort(key=lambda pair: (-pair[1], pair[0]))
        return scored

    return rank


@pytest.fixture
def recall_oracle():
    def oracle(ranked, relevant, k):
        hits = 0
        for doc_id in relevant:
            if doc_id in ranked[:k]:
                hits += 1
        return hits / len(relevant)

    return oracle


@pytest.fixture(scope="session")
def desk_dataset():
    """5,000 documents / 200 queries, fixed seed."""
    return generate_synthetic(SynthSpec(num_people=5000, num_queries=200, seed=7))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
