"""评测：Recall@k、BM25 基线、哈希冲突概率与维度扫描。"""

from __future__ import annotations

import logging
import math
import time
from collections import Counter
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed

from numen.schemas.encoder import EncoderConfig, Ngram
from numen.schemas.evaluation import CollisionReport, Qrels, RecallReport, SweepRow, SystemRow
from numen.schemas.ingest import DocumentRecord, QueryRecord
from numen.schemas.retrieval import SearchResult
from numen.services.bm25 import BM25Index
from numen.services.encoder import (
    NgramFeatures,
    encode_features,
    extract_ngrams,
    featurize,
    hash_ngram,
)
from numen.services.index import VectorIndex, build_index
from numen.utils.storage import write_csv
from numen.utils.text_processing import normalize_and_tokenize


logger = logging.getLogger(__name__)

SWEEP_CSV_HEADER = ("dimension", "k", "recall")


class EvaluationError(ValueError):
    """评测前置条件不满足（如查询不在 qrels 中）。"""


class SweepError(ValueError):
    """维度扫描中某个维度失败。"""

    def __init__(self, dimension: int, cause: BaseException) -> None:
        super().__init__(f"dimension {dimension}: {cause}")
        self.dimension = dimension


def _normalize_ks(k: Union[int, Sequence[int]]) -> List[int]:
    ks = [k] if isinstance(k, int) else sorted(set(k))
    if not ks or any(value < 1 for value in ks):
        raise ValueError(f"k values must be positive integers, got {ks}")
    return ks


def recall_at_k(
    results: Mapping[str, Sequence[str]],
    qrels: Qrels,
    k: Union[int, Sequence[int]],
    config_fingerprint: Optional[Dict[str, object]] = None,
) -> RecallReport:
    """每个查询：top-k 中相关文档数 / 相关文档总数；汇总为查询间的算术平均（macro）。"""

    ks = _normalize_ks(k)
    if len(qrels) == 0:
        raise EvaluationError("qrels contain no query with a relevant document")
    missing = sorted(q for q in results if q not in qrels and q not in qrels.unjudged)
    if missing:
        raise EvaluationError(f"queries missing from qrels: {', '.join(missing)}")

    excluded = [q for q in results if q in qrels.unjudged]
    for query_id in excluded:
        logger.warning("query %s has no relevant documents; excluded from recall", query_id)

    per_query: Dict[str, Dict[int, float]] = {}
    for query_id, ranked in results.items():
        if query_id in qrels.unjudged:
            continue
        relevant = qrels.relevant(query_id)
        per_query[query_id] = {
            cutoff: len(relevant.intersection(ranked[:cutoff])) / len(relevant) for cutoff in ks
        }
    if not per_query:
        raise EvaluationError("no evaluable queries in results")

    aggregate = {
        cutoff: math.fsum(values[cutoff] for values in per_query.values()) / len(per_query)
        for cutoff in ks
    }
    return RecallReport(
        per_query=per_query,
        aggregate=aggregate,
        k_values=ks,
        config_fingerprint=config_fingerprint,
        excluded=excluded,
    )


def collision_probability(n_grams: int, dimension: int) -> float:
    """生日悖论近似：1 - exp(-n^2 / 2d)。"""

    if n_grams < 1 or dimension < 1:
        raise ValueError(f"n_grams and dimension must be >= 1, got {n_grams}, {dimension}")
    return -math.expm1(-(n_grams * n_grams) / (2.0 * dimension))


def measure_empirical_collisions(texts: Sequence[str], config: EncoderConfig) -> CollisionReport:
    """按文本统计不同 n-gram（集合语义）两两落入同一下标的情况。"""

    if not texts:
        raise ValueError("measure_empirical_collisions needs at least one text")
    texts_with_collision = 0
    pair_fractions: List[float] = []
    distinct_counts: List[int] = []
    colliding_total = 0
    pairs_total = 0
    for text in texts:
        distinct = {
            g.text for word in normalize_and_tokenize(text) for g in extract_ngrams(word, config)
        }
        buckets = Counter(hash_ngram(Ngram(g, len(g)), config) for g in distinct)
        colliding = sum(c * (c - 1) // 2 for c in buckets.values())
        pairs = len(distinct) * (len(distinct) - 1) // 2
        distinct_counts.append(len(distinct))
        colliding_total += colliding
        pairs_total += pairs
        texts_with_collision += colliding > 0
        pair_fractions.append(colliding / pairs if pairs else 0.0)
    return CollisionReport(
        dimension=config.dimension,
        num_texts=len(texts),
        mean_distinct_ngrams=float(np.mean(distinct_counts)),
        text_collision_rate=texts_with_collision / len(texts),
        pair_collision_fraction=float(np.mean(pair_fractions)),
        colliding_pairs=colliding_total,
        total_pairs=pairs_total,
    )


def run_queries(
    index: VectorIndex, queries: Sequence[QueryRecord], k: int, n_jobs: int = 1
) -> Dict[str, List[SearchResult]]:
    """对一批查询做精确 top-k，返回 query_id -> 结果（保持查询顺序）。"""

    if not queries:
        return {}
    vectors = np.stack([index.encode_query(q.text) for q in queries])
    ranked = index.search_many(vectors, k, n_jobs=n_jobs)
    return {q.query_id: results for q, results in zip(queries, ranked)}


def ranked_ids(results: Mapping[str, Sequence[SearchResult]]) -> Dict[str, List[str]]:
    return {qid: [r.doc_id for r in hits] for qid, hits in results.items()}


def _chunked(items: Sequence, n_jobs: int) -> List[Sequence]:
    size = max(1, -(-len(items) // (n_jobs * 4)))
    return [items[i : i + size] for i in range(0, len(items), size)]


def _featurize_chunk(texts: Sequence[str], config: EncoderConfig) -> List[NgramFeatures]:
    return [featurize(text, config) for text in texts]


def _featurize_all(
    texts: Sequence[str], config: EncoderConfig, n_jobs: int
) -> List[NgramFeatures]:
    if n_jobs <= 1 or len(texts) < 2 * n_jobs:
        return _featurize_chunk(texts, config)
    parts = Parallel(n_jobs=n_jobs)(
        delayed(_featurize_chunk)(chunk, config) for chunk in _chunked(texts, n_jobs)
    )
    return [features for part in parts for features in part]


def _encode_feature_chunk(features: Sequence[NgramFeatures], dimension: int) -> np.ndarray:
    out = np.zeros((len(features), dimension), dtype=np.float32)
    for row, f in enumerate(features):
        out[row] = encode_features(f, dimension)
    return out


def _encode_all(features: Sequence[NgramFeatures], dimension: int, n_jobs: int) -> np.ndarray:
    if n_jobs <= 1 or len(features) < 2 * n_jobs:
        return _encode_feature_chunk(features, dimension)
    parts = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_encode_feature_chunk)(chunk, dimension) for chunk in _chunked(features, n_jobs)
    )
    return np.concatenate(parts, axis=0)


def _evaluate_dimension(
    dimension: int,
    base: EncoderConfig,
    doc_ids: Sequence[str],
    doc_features: Sequence[NgramFeatures],
    query_ids: Sequence[str],
    query_features: Sequence[NgramFeatures],
    qrels: Qrels,
    ks: Sequence[int],
    n_jobs: int = 1,
) -> List[SweepRow]:
    try:
        config = base.with_dimension(dimension)
        index = VectorIndex(config, doc_ids, _encode_all(doc_features, dimension, n_jobs))
        depth = max(ks)
        hits = index.search_many(_encode_all(query_features, dimension, n_jobs), depth, n_jobs)
        results = {qid: [hit.doc_id for hit in ranked] for qid, ranked in zip(query_ids, hits)}
        report = recall_at_k(results, qrels, ks, config.fingerprint())
    except Exception as exc:
        raise SweepError(dimension, exc) from exc
    logger.info(
        "d=%d: %s",
        dimension,
        ", ".join(f"Recall@{k}={report.aggregate[k]:.4f}" for k in ks),
    )
    return [SweepRow(dimension=dimension, k=k, recall=report.aggregate[k]) for k in ks]


def dimension_sweep(
    corpus: Iterable[DocumentRecord],
    queries: Iterable[QueryRecord],
    qrels: Qrels,
    dims: Sequence[int],
    k_values: Sequence[int],
    config: Optional[EncoderConfig] = None,
    parallel: bool = False,
    n_jobs: int = 1,
) -> List[SweepRow]:
    """对每个维度建索引并评测，按维度升序输出 (d, k, recall) 行。

    文本只做一次 n-gram 抽取与 CRC 计算，各维度复用同一份特征。``n_jobs`` 限制
    特征抽取、编码与打分的 worker 数；``parallel=True`` 时改为各维度并发、维度内串行。
    """

    if not dims:
        raise ValueError("dims must not be empty")
    ks = _normalize_ks(list(k_values))
    base = config or EncoderConfig()
    corpus = list(corpus)
    queries = list(queries)
    doc_ids = [doc.doc_id for doc in corpus]
    doc_features = _featurize_all([doc.encoded_text for doc in corpus], base, n_jobs)
    query_ids = [q.query_id for q in queries]
    query_features = _featurize_all([q.text for q in queries], base, n_jobs)
    ordered = sorted(set(dims))

    args = (base, doc_ids, doc_features, query_ids, query_features, qrels, ks)
    if parallel and n_jobs > 1 and len(ordered) > 1:
        chunks = Parallel(n_jobs=n_jobs)(delayed(_evaluate_dimension)(d, *args) for d in ordered)
    else:
        chunks = [_evaluate_dimension(d, *args, n_jobs=n_jobs) for d in ordered]
    return [row for chunk in chunks for row in chunk]


def evaluate_bm25(
    corpus: Iterable[DocumentRecord],
    queries: Sequence[QueryRecord],
    qrels: Qrels,
    k_values: Sequence[int],
    k1: float = 0.9,
    b: float = 0.75,
) -> Tuple[RecallReport, Dict[str, List[str]], SystemRow]:
    """在同一评测框架下跑 BM25 基线，返回报告、排序结果与吞吐。"""

    ks = _normalize_ks(list(k_values))
    corpus = list(corpus)
    started = time.perf_counter()
    bm25 = BM25Index.from_texts(((d.doc_id, d.encoded_text) for d in corpus), k1=k1, b=b)
    index_seconds = time.perf_counter() - started

    started = time.perf_counter()
    results = {q.query_id: bm25.search(q.text, max(ks)) for q in queries}
    query_seconds = time.perf_counter() - started

    report = recall_at_k(results, qrels, ks)
    row = SystemRow(
        system="BM25",
        recall=report.aggregate,
        index_docs_per_sec=_rate(len(corpus), index_seconds),
        query_qps=_rate(len(queries), query_seconds),
    )
    return report, results, row


def evaluate_dense(
    corpus: Iterable[DocumentRecord],
    queries: Sequence[QueryRecord],
    qrels: Qrels,
    k_values: Sequence[int],
    config: EncoderConfig,
    n_jobs: int = 1,
) -> Tuple[RecallReport, SystemRow]:
    ks = _normalize_ks(list(k_values))
    corpus = list(corpus)
    started = time.perf_counter()
    index = build_index(corpus, config, n_jobs=n_jobs)
    index_seconds = time.perf_counter() - started

    started = time.perf_counter()
    results = run_queries(index, queries, max(ks), n_jobs=n_jobs)
    query_seconds = time.perf_counter() - started

    report = recall_at_k(ranked_ids(results), qrels, ks, config.fingerprint())
    row = SystemRow(
        system=f"NUMEN ({config.dimension})",
        dimension=config.dimension,
        recall=report.aggregate,
        index_docs_per_sec=_rate(len(corpus), index_seconds),
        query_qps=_rate(len(queries), query_seconds),
    )
    return report, row


def _rate(count: int, seconds: float) -> float:
    return count / seconds if seconds > 0 else float("inf")


def write_sweep_csv(rows: Iterable[SweepRow], path: Path) -> None:
    write_csv(path, SWEEP_CSV_HEADER, ((r.dimension, r.k, f"{r.recall:.6f}") for r in rows))


def recall_rows(report: RecallReport, dimension: int) -> List[SweepRow]:
    return [SweepRow(dimension=dimension, k=k, recall=report.aggregate[k]) for k in report.k_values]


def format_sweep_table(rows: Sequence[SweepRow]) -> str:
    """一维度一行、一 k 一列的百分比表。"""

    ks = sorted({r.k for r in rows})
    dims = sorted({r.dimension for r in rows})
    cell = {(r.dimension, r.k): r.recall for r in rows}
    header = ["Dimension"] + [f"Recall@{k} (%)" for k in ks]
    body = [
        [f"{d:,}"] + [f"{cell[(d, k)] * 100:.2f}" if (d, k) in cell else "-" for k in ks]
        for d in dims
    ]
    return _render_table(header, body)


def format_report_table(report: RecallReport, label: str) -> str:
    header = ["Run"] + [f"Recall@{k} (%)" for k in report.k_values]
    body = [[label] + [f"{report.aggregate[k] * 100:.2f}" for k in report.k_values]]
    return _render_table(header, body)


def format_system_table(rows: Sequence[SystemRow]) -> str:
    ks = sorted({k for r in rows for k in r.recall})
    header = ["System"] + [f"Recall@{k} (%)" for k in ks] + ["Index (docs/s)", "Query (q/s)"]
    body = [
        [r.system]
        + [f"{r.recall[k] * 100:.2f}" if k in r.recall else "-" for k in ks]
        + [f"{r.index_docs_per_sec:,.0f}", f"{r.query_qps:,.1f}"]
        for r in rows
    ]
    return _render_table(header, body)


def _render_table(header: Sequence[str], body: Sequence[Sequence[str]]) -> str:
    widths = [max(len(row[i]) for row in [header, *body]) for i in range(len(header))]
    lines = ["  ".join(cell.rjust(widths[i]) for i, cell in enumerate(header))]
    lines.append("  ".join("-" * w for w in widths))
    for row in body:
        lines.append("  ".join(cell.rjust(widths[i]) for i, cell in enumerate(row)))
    return "\n".join(lines)
