"""NUMEN 编码器：字符 n-gram -> CRC32 特征哈希 -> 加权累加 -> log 饱和 -> L2 归一化。

编码是 (text, config) 的纯函数，可在任意数量的 worker 中并发调用。
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence

import numpy as np
from joblib import Parallel, delayed

from numen.schemas.encoder import EncoderConfig, EncodeStats, Ngram
from numen.utils.hashing import crc32
from numen.utils.text_processing import normalize_and_tokenize


logger = logging.getLogger(__name__)

VECTOR_DTYPE = np.float32


class DimensionMismatchError(ValueError):
    """两个向量（或向量与索引）的维度不一致。"""


class NgramWeightError(ValueError):
    """n-gram 长度低于权重表最小键，说明配置与抽取不匹配。"""


@dataclass(frozen=True)
class NgramFeatures:
    """与维度无关的 n-gram 画像：每次出现一个 (crc, weight)。"""

    crcs: np.ndarray
    weights: np.ndarray

    @property
    def count(self) -> int:
        return int(self.crcs.shape[0])


def extract_ngrams(word: str, config: EncoderConfig) -> List[Ngram]:
    """对 ``^word$`` 按 n 升序、从左到右抽取全部 n-gram，保留重复。"""

    if not word:
        raise ValueError("extract_ngrams requires a non-empty word")
    padded = f"^{word}$"
    grams: List[Ngram] = []
    for n in config.ngram_sizes:
        for j in range(len(padded) - n + 1):
            grams.append(Ngram(padded[j : j + n], n))
    return grams


def hash_ngram(g: Ngram, config: EncoderConfig) -> int:
    return crc32(g.bytes, config.hash_variant) % config.dimension


def ngram_weight(g: Ngram, config: EncoderConfig) -> float:
    weight = config.weight_for_length(len(g.text))
    if weight is None:
        raise NgramWeightError(
            f"n-gram {g.text!r} has length {len(g.text)}, below the smallest "
            f"weight key {min(config.weight_table)}"
        )
    return weight


def featurize(text: str, config: EncoderConfig) -> NgramFeatures:
    crcs: List[int] = []
    weights: List[float] = []
    variant = config.hash_variant
    for word in normalize_and_tokenize(text):
        for g in extract_ngrams(word, config):
            crcs.append(crc32(g.bytes, variant))
            weights.append(ngram_weight(g, config))
    return NgramFeatures(
        crcs=np.asarray(crcs, dtype=np.uint64),
        weights=np.asarray(weights, dtype=np.float64),
    )


def encode_features(features: NgramFeatures, dimension: int) -> np.ndarray:
    """mod d 累加（float64）、log1p 饱和、L2 归一化，最后降为 float32。

    没有 n-gram（或权重全为 0）时返回全零向量，不做除法。
    """

    if dimension < 1:
        raise ValueError(f"dimension must be >= 1, got {dimension}")
    if features.count == 0:
        return np.zeros(dimension, dtype=VECTOR_DTYPE)
    indices = (features.crcs % np.uint64(dimension)).astype(np.intp)
    v = np.bincount(indices, weights=features.weights, minlength=dimension)
    np.log1p(v, out=v)
    # fsum: the norm depends only on the multiset of components, not their positions
    nonzero = v[v != 0.0]
    norm = math.sqrt(math.fsum(nonzero * nonzero))
    if norm > 0.0:
        v /= norm
    return v.astype(VECTOR_DTYPE)


def encode(text: str, config: EncoderConfig) -> np.ndarray:
    return encode_features(featurize(text, config), config.dimension)


def encode_stats(text: str, config: EncoderConfig) -> EncodeStats:
    grams = [g for word in normalize_and_tokenize(text) for g in extract_ngrams(word, config)]
    distinct = {g.text: hash_ngram(g, config) for g in grams}
    per_index: dict[int, int] = {}
    for index in distinct.values():
        per_index[index] = per_index.get(index, 0) + 1
    collided = sum(count for count in per_index.values() if count > 1)
    vector = encode(text, config)
    return EncodeStats(
        ngram_count=len(grams),
        distinct_ngrams=len(distinct),
        nonzero_components=int(np.count_nonzero(vector)),
        collided_ngrams=collided,
    )


def exact_dot(products: np.ndarray) -> float:
    """float32 分量的乘积在 float64 中是精确的；fsum 给出正确舍入的和，与求和顺序无关。"""

    return math.fsum(products[products != 0.0])


def cosine_score(q: np.ndarray, d: np.ndarray) -> float:
    """点积；对单位向量即余弦相似度。与 ``VectorIndex.top_k`` 返回的分数逐位一致。"""

    if q.shape != d.shape:
        raise DimensionMismatchError(f"vector shapes differ: {q.shape} vs {d.shape}")
    q64 = np.asarray(q, dtype=VECTOR_DTYPE).astype(np.float64)
    d64 = np.asarray(d, dtype=VECTOR_DTYPE).astype(np.float64)
    return exact_dot(q64 * d64)


def _encode_chunk(texts: Sequence[str], config: EncoderConfig) -> np.ndarray:
    out = np.empty((len(texts), config.dimension), dtype=VECTOR_DTYPE)
    for row, text in enumerate(texts):
        out[row] = encode(text, config)
    return out


def encode_batch(texts: Iterable[str], config: EncoderConfig, n_jobs: int = 1) -> np.ndarray:
    """批量编码，返回 (n, d) float32 矩阵；行顺序与输入一致，与 worker 数无关。"""

    texts = list(texts)
    if n_jobs <= 1 or len(texts) < 2 * n_jobs:
        return _encode_chunk(texts, config)
    chunk_size = max(1, -(-len(texts) // (n_jobs * 4)))
    chunks = [texts[i : i + chunk_size] for i in range(0, len(texts), chunk_size)]
    logger.debug("encoding %d texts in %d chunks on %d workers", len(texts), len(chunks), n_jobs)
    parts = Parallel(n_jobs=n_jobs)(delayed(_encode_chunk)(chunk, config) for chunk in chunks)
    return np.concatenate(parts, axis=0)


class NumenEncoder:
    """封装一个固定配置的编码器，供索引、检索与评测复用。"""

    def __init__(self, config: EncoderConfig, n_jobs: int = 1) -> None:
        self.config = config
        self.n_jobs = n_jobs

    @property
    def dimension(self) -> int:
        return self.config.dimension

    def encode(self, text: str) -> np.ndarray:
        return encode(text, self.config)

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.config.dimension), dtype=VECTOR_DTYPE)
        return encode_batch(texts, self.config, n_jobs=self.n_jobs)

    def stats(self, text: str) -> EncodeStats:
        return encode_stats(text, self.config)
