"""Okapi BM25 稀疏基线（倒排索引实现）。

分词与编码器完全一致（normalize_and_tokenize）。IDF 使用 +0.5 平滑并在 0 处截断，
同分按 doc_id 升序。
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from numen.utils.text_processing import normalize_and_tokenize


class BM25Index:
    """对已分词语料建立倒排表：term -> [(文档下标, 词频)]。"""

    def __init__(
        self,
        corpus: Iterable[Tuple[str, Sequence[str]]],
        k1: float = 0.9,
        b: float = 0.75,
    ) -> None:
        self.k1, self.b = k1, b
        self.doc_ids: List[str] = []
        self.doc_lens: List[int] = []
        self.postings: Dict[str, List[Tuple[int, int]]] = {}

        for doc_id, tokens in corpus:
            position = len(self.doc_ids)
            self.doc_ids.append(doc_id)
            self.doc_lens.append(len(tokens))
            for term, tf in Counter(tokens).items():
                self.postings.setdefault(term, []).append((position, tf))

        if not self.doc_ids:
            raise ValueError("BM25 corpus must not be empty")
        if len(set(self.doc_ids)) != len(self.doc_ids):
            raise ValueError("BM25 corpus contains duplicate doc ids")

        self.n = len(self.doc_ids)
        self.avgdl = sum(self.doc_lens) / self.n
        self._lens = np.asarray(self.doc_lens, dtype=np.float64)
        order = sorted(range(self.n), key=self.doc_ids.__getitem__)
        self._id_rank = np.empty(self.n, dtype=np.int64)
        self._id_rank[order] = np.arange(self.n, dtype=np.int64)

    @classmethod
    def from_texts(
        cls, documents: Iterable[Tuple[str, str]], k1: float = 0.9, b: float = 0.75
    ) -> "BM25Index":
        return cls(((doc_id, normalize_and_tokenize(text)) for doc_id, text in documents), k1, b)

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return max(0.0, math.log((self.n - df + 0.5) / (df + 0.5)))

    def score(self, query_tokens: Sequence[str]) -> Tuple[np.ndarray, np.ndarray]:
        """返回 (每篇文档的分数, 是否命中至少一个查询词)。"""

        scores = np.zeros(self.n, dtype=np.float64)
        matched = np.zeros(self.n, dtype=bool)
        if self.avgdl > 0:
            norm = self.k1 * (1.0 - self.b + self.b * self._lens / self.avgdl)
        else:
            norm = np.full(self.n, self.k1 * (1.0 - self.b))
        # sorted terms: float sums independent of query word order
        for term, qtf in sorted(Counter(query_tokens).items()):
            postings = self.postings.get(term)
            if not postings:
                continue
            idf = self.idf(term)
            positions = np.fromiter((p for p, _ in postings), dtype=np.int64, count=len(postings))
            tfs = np.fromiter((tf for _, tf in postings), dtype=np.float64, count=len(postings))
            matched[positions] = True
            scores[positions] += qtf * idf * tfs * (self.k1 + 1.0) / (tfs + norm[positions])
        return scores, matched

    def rank(self, query_tokens: Sequence[str], k: Optional[int] = None) -> List[str]:
        """命中至少一个查询词的文档，按分数降序、doc_id 升序排列。"""

        if not query_tokens:
            return []
        scores, matched = self.score(query_tokens)
        candidates = np.flatnonzero(matched)
        order = np.lexsort((self._id_rank[candidates], -scores[candidates]))
        ranked = candidates[order]
        if k is not None:
            ranked = ranked[:k]
        return [self.doc_ids[i] for i in ranked]

    def search(self, text: str, k: Optional[int] = None) -> List[str]:
        return self.rank(normalize_and_tokenize(text), k)


def bm25_rank(
    corpus: Iterable[Tuple[str, Sequence[str]]],
    query: Sequence[str],
    k1: float = 0.9,
    b: float = 0.75,
) -> List[str]:
    return BM25Index(corpus, k1=k1, b=b).rank(query)
