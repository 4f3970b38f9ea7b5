"""BEIR/LIMIT 格式数据集的读写：corpus.jsonl、queries.jsonl、qrels.tsv。"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Mapping, Sequence, Tuple

from pydantic import ValidationError

from numen.schemas.evaluation import Qrels
from numen.schemas.ingest import DocumentRecord, QueryRecord
from numen.schemas.retrieval import SearchResult
from numen.utils.storage import ensure_parent


logger = logging.getLogger(__name__)

QRELS_HEADER = ("query-id", "corpus-id", "score")
CORPUS_FILENAME = "corpus.jsonl"
QUERIES_FILENAME = "queries.jsonl"
QRELS_FILENAME = "qrels.tsv"


class DatasetFormatError(ValueError):
    """数据文件格式错误，携带文件路径与 1-based 行号。"""

    def __init__(self, path: Path, line: int, reason: str) -> None:
        super().__init__(f"{path}:{line}: {reason}")
        self.path = Path(path)
        self.line = line
        self.reason = reason


def _iter_json_objects(path: Path) -> Iterator[Tuple[int, Dict[str, Any]]]:
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(path, line_no, f"invalid JSON ({exc.msg})") from exc
            if not isinstance(payload, dict):
                raise DatasetFormatError(path, line_no, "expected a JSON object")
            yield line_no, payload


def _require_str(payload: Dict[str, Any], field: str, path: Path, line_no: int) -> str:
    """取出字符串字段。整数（部分 BEIR 导出的数字 ``_id``）转换为十进制字符串；布尔值拒绝。"""

    value = payload.get(field)
    if value is None:
        raise DatasetFormatError(path, line_no, f"missing field {field!r}")
    if isinstance(value, bool) or not isinstance(value, (str, int)):
        raise DatasetFormatError(
            path, line_no, f"field {field!r} must be a string or an integer"
        )
    return str(value)


def load_corpus(path: Path) -> Iterator[DocumentRecord]:
    """按文件顺序流式读取文档；格式错误与重复 _id 在出错行中止。"""

    path = Path(path)
    seen: set[str] = set()
    for line_no, payload in _iter_json_objects(path):
        doc_id = _require_str(payload, "_id", path, line_no)
        text = _require_str(payload, "text", path, line_no)
        title = payload.get("title")
        if title is not None and not isinstance(title, str):
            raise DatasetFormatError(path, line_no, "field 'title' must be a string")
        if doc_id in seen:
            raise DatasetFormatError(path, line_no, f"duplicate _id {doc_id!r}")
        seen.add(doc_id)
        try:
            yield DocumentRecord(doc_id=doc_id, title=title or None, text=text)
        except ValidationError as exc:
            raise DatasetFormatError(path, line_no, f"invalid record: {exc}") from exc


def load_queries(path: Path) -> Iterator[QueryRecord]:
    path = Path(path)
    seen: set[str] = set()
    for line_no, payload in _iter_json_objects(path):
        query_id = _require_str(payload, "_id", path, line_no)
        text = _require_str(payload, "text", path, line_no)
        if query_id in seen:
            raise DatasetFormatError(path, line_no, f"duplicate _id {query_id!r}")
        seen.add(query_id)
        try:
            yield QueryRecord(query_id=query_id, text=text)
        except ValidationError as exc:
            raise DatasetFormatError(path, line_no, f"invalid record: {exc}") from exc


def load_qrels(path: Path) -> Qrels:
    """读取 TSV 相关性判断（可选表头）。

    重复的 (query, doc) 保留最后一个等级并告警；没有任何等级 >= 1 的查询被剔除并告警。
    """

    path = Path(path)
    judgments: Dict[str, Dict[str, int]] = {}
    with path.open("r", encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            columns = line.split("\t")
            if line_no == 1 and tuple(c.strip() for c in columns) == QRELS_HEADER:
                continue
            if len(columns) != 3:
                raise DatasetFormatError(
                    path, line_no, f"expected 3 tab-separated columns, found {len(columns)}"
                )
            query_id, doc_id, grade_text = (c.strip() for c in columns)
            try:
                grade = int(grade_text)
            except ValueError as exc:
                raise DatasetFormatError(
                    path, line_no, f"relevance must be an integer, got {grade_text!r}"
                ) from exc
            if grade < 0:
                raise DatasetFormatError(path, line_no, f"relevance must be >= 0, got {grade}")
            docs = judgments.setdefault(query_id, {})
            if doc_id in docs:
                logger.warning(
                    "%s:%d: repeated judgment for (%s, %s); keeping grade %d over %d",
                    path, line_no, query_id, doc_id, grade, docs[doc_id],
                )
            docs[doc_id] = grade

    unjudged = {qid for qid, docs in judgments.items() if not any(g >= 1 for g in docs.values())}
    for query_id in sorted(unjudged):
        logger.warning("%s: query %s has no relevant documents; dropped", path, query_id)
        del judgments[query_id]
    return Qrels(judgments=judgments, unjudged=unjudged)


def write_corpus(records: Iterable[DocumentRecord], path: Path) -> None:
    path = ensure_parent(Path(path))
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        for record in records:
            payload: Dict[str, Any] = {"_id": record.doc_id}
            if record.title is not None:
                payload["title"] = record.title
            payload["text"] = record.text
            handle.write(json.dumps(payload, ensure_ascii=False) + "\n")


def write_queries(records: Iterable[QueryRecord], path: Path) -> None:
    path = ensure_parent(Path(path))
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        for record in records:
            payload = {"_id": record.query_id, "text": record.text}
            handle.write(json.dumps(payload, ensure_ascii=False) + "\n")


def write_qrels(qrels: Qrels, path: Path) -> None:
    path = ensure_parent(Path(path))
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.write("\t".join(QRELS_HEADER) + "\n")
        for query_id, docs in qrels.judgments.items():
            for doc_id, grade in docs.items():
                handle.write(f"{query_id}\t{doc_id}\t{grade}\n")


def load_dataset(directory: Path) -> Tuple[List[DocumentRecord], List[QueryRecord], Qrels]:
    """读取目录下的三件套；qrels 也接受 BEIR 的 ``qrels/test.tsv`` 位置。"""

    directory = Path(directory)
    qrels_path = directory / QRELS_FILENAME
    if not qrels_path.exists() and (directory / "qrels" / "test.tsv").exists():
        qrels_path = directory / "qrels" / "test.tsv"
    corpus = list(load_corpus(directory / CORPUS_FILENAME))
    queries = list(load_queries(directory / QUERIES_FILENAME))
    return corpus, queries, load_qrels(qrels_path)


def format_run_lines(results: Mapping[str, Sequence[SearchResult]]) -> Iterator[str]:
    """TREC 风格运行结果（无 "Q0" 列）：query_id, doc_id, rank, score。"""

    for query_id, hits in results.items():
        for hit in hits:
            yield f"{query_id}\t{hit.doc_id}\t{hit.rank}\t{hit.score:.6f}\n"


def write_run(results: Mapping[str, Sequence[SearchResult]], path: Path) -> None:
    path = ensure_parent(Path(path))
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.writelines(format_run_lines(results))


def load_run(path: Path) -> Dict[str, List[SearchResult]]:
    path = Path(path)
    results: Dict[str, List[SearchResult]] = {}
    with path.open("r", encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            columns = line.split("\t")
            if len(columns) != 4:
                raise DatasetFormatError(
                    path, line_no, f"expected 4 tab-separated columns, found {len(columns)}"
                )
            query_id, doc_id, rank, score = columns
            try:
                hit = SearchResult(doc_id=doc_id, rank=int(rank), score=float(score))
            except ValueError as exc:
                raise DatasetFormatError(path, line_no, f"invalid rank or score: {exc}") from exc
            results.setdefault(query_id, []).append(hit)
    for hits in results.values():
        hits.sort(key=lambda h: h.rank)
    return results
