"""稠密向量索引：构建、二进制持久化与精确（暴力）top-k 内积检索。

文件格式（全部小端）::

    magic "NUMN" | version u32 | dimension u32 | count u64 | hash variant u8
    n-gram 数 u16 | 每个 n-gram 长度 u32
    权重数 u16 | 每项 (长度 u32, 权重 f64)
    count × (id 字节长度 u16 | id UTF-8 | dimension × f32)
    CRC32-IEEE(以上全部字节) u32
"""

from __future__ import annotations

import logging
import os
import struct
import time
import zlib
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator, List, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from pydantic import ValidationError

from numen.models.enums import HashVariant
from numen.schemas.encoder import EncoderConfig
from numen.schemas.ingest import DocumentRecord
from numen.schemas.retrieval import SearchResult
from numen.services.encoder import (
    VECTOR_DTYPE,
    DimensionMismatchError,
    encode,
    encode_batch,
    exact_dot,
)
from numen.utils.storage import ensure_parent


logger = logging.getLogger(__name__)

MAGIC = b"NUMN"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sIIQB")
_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")
_WEIGHT = struct.Struct("<Id")
_EPS = float(np.finfo(np.float64).eps)

DocumentInput = Union[DocumentRecord, Tuple[str, str]]


class DuplicateDocumentError(ValueError):
    """构建索引时出现重复的 doc_id。"""


class IndexFormatError(ValueError):
    """索引文件未通过校验；``check`` 为 magic / version / truncated / checksum / header / entry 之一。"""

    def __init__(self, check: str, detail: str) -> None:
        super().__init__(f"{check} check failed: {detail}")
        self.check = check


class ConfigMismatchError(ValueError):
    """查询所用配置与索引记录的配置不一致。"""


def estimate_footprint(count: int, dimension: int) -> int:
    """稠密 float32 存储的字节数（不含 id）。"""

    return count * dimension * np.dtype(VECTOR_DTYPE).itemsize


class VectorIndex:
    """有序的 (doc_id, 向量) 集合。构建完成后只读，可被任意多个读者并发查询。"""

    def __init__(self, config: EncoderConfig, doc_ids: Sequence[str], vectors: np.ndarray) -> None:
        vectors = np.ascontiguousarray(vectors, dtype=VECTOR_DTYPE)
        if vectors.ndim != 2 or vectors.shape[1] != config.dimension:
            raise DimensionMismatchError(
                f"index vectors have shape {vectors.shape}, expected (n, {config.dimension})"
            )
        if vectors.shape[0] != len(doc_ids):
            raise ValueError(f"{len(doc_ids)} doc ids for {vectors.shape[0]} vectors")
        seen: set[str] = set()
        for doc_id in doc_ids:
            if doc_id in seen:
                raise DuplicateDocumentError(f"duplicate doc_id: {doc_id!r}")
            seen.add(doc_id)

        self.config = config
        self.doc_ids: List[str] = list(doc_ids)
        self.vectors = vectors
        self.vectors.setflags(write=False)

        # tie rule: ascending doc_id, independent of insertion order
        order = sorted(range(len(self.doc_ids)), key=self.doc_ids.__getitem__)
        self._id_rank = np.empty(len(order), dtype=np.int64)
        self._id_rank[order] = np.arange(len(order), dtype=np.int64)

    @property
    def dimension(self) -> int:
        return self.config.dimension

    @property
    def count(self) -> int:
        return len(self.doc_ids)

    def __len__(self) -> int:
        return self.count

    def entries(self) -> Iterator[Tuple[str, np.ndarray]]:
        for doc_id, vector in zip(self.doc_ids, self.vectors):
            yield doc_id, vector

    def footprint_bytes(self) -> int:
        return estimate_footprint(self.count, self.dimension)

    def check_config(self, config: EncoderConfig) -> None:
        if config.key() != self.config.key():
            raise ConfigMismatchError(
                f"query config {config.fingerprint()} does not match index config "
                f"{self.config.fingerprint()}"
            )

    def encode_query(self, text: str) -> np.ndarray:
        return encode(text, self.config)

    def top_k(self, query_vec: np.ndarray, k: int) -> List[SearchResult]:
        """精确 top-k：分数降序，分数相同按 doc_id 升序。"""

        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        query = np.asarray(query_vec, dtype=VECTOR_DTYPE)
        if query.ndim != 1 or query.shape[0] != self.dimension:
            raise DimensionMismatchError(
                f"query has dimension {query.shape[-1] if query.ndim else 0}, "
                f"index has {self.dimension}"
            )
        n = self.count
        if n == 0:
            return []
        take = min(k, n)
        support = np.flatnonzero(query)
        # float32 x float32 products are exact in float64
        products = self.vectors[:, support].astype(np.float64) * query[support].astype(np.float64)
        approx = products.sum(axis=1)
        if take < n:
            # pairwise summation error stays below this bound
            slack = (support.size + 1) * _EPS * np.abs(products).sum(axis=1)
            floor = np.partition(approx - slack, n - take)[n - take]
            candidates = np.flatnonzero(approx + slack >= floor)
        else:
            candidates = np.arange(n)
        scores = np.fromiter(
            (exact_dot(products[i]) for i in candidates), dtype=np.float64, count=candidates.size
        )
        order = np.lexsort((self._id_rank[candidates], -scores))[:take]
        return [
            SearchResult(doc_id=self.doc_ids[candidates[j]], score=float(scores[j]), rank=rank)
            for rank, j in enumerate(order, start=1)
        ]

    def search(self, text: str, k: int) -> List[SearchResult]:
        return self.top_k(self.encode_query(text), k)

    def search_many(
        self, query_vectors: np.ndarray, k: int, n_jobs: int = 1
    ) -> List[List[SearchResult]]:
        """批量查询；输出顺序与输入一致，与 worker 数无关。"""

        if n_jobs <= 1 or len(query_vectors) < 2:
            return [self.top_k(q, k) for q in query_vectors]
        return Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(self.top_k)(q, k) for q in query_vectors
        )


def _split_document(item: DocumentInput) -> Tuple[str, str]:
    if isinstance(item, DocumentRecord):
        return item.doc_id, item.encoded_text
    doc_id, text = item
    return doc_id, text


def build_index(
    documents: Iterable[DocumentInput], config: EncoderConfig, n_jobs: int = 1
) -> VectorIndex:
    """按输入顺序编码全部文档。重复 doc_id 会在编码前报错。"""

    started = time.perf_counter()
    doc_ids: List[str] = []
    texts: List[str] = []
    seen: set[str] = set()
    for item in documents:
        doc_id, text = _split_document(item)
        if doc_id in seen:
            raise DuplicateDocumentError(f"duplicate doc_id: {doc_id!r}")
        seen.add(doc_id)
        doc_ids.append(doc_id)
        texts.append(text)

    if texts:
        vectors = encode_batch(texts, config, n_jobs=n_jobs)
    else:
        vectors = np.zeros((0, config.dimension), dtype=VECTOR_DTYPE)
    index = VectorIndex(config, doc_ids, vectors)
    elapsed = time.perf_counter() - started
    logger.info(
        "indexed %d documents at d=%d in %.2fs", index.count, config.dimension, elapsed
    )
    return index


class _ChecksumWriter:
    def __init__(self, handle: BinaryIO) -> None:
        self.handle = handle
        self.crc = 0

    def write(self, data: bytes) -> None:
        self.crc = zlib.crc32(data, self.crc)
        self.handle.write(data)


class _ChecksumReader:
    def __init__(self, handle: BinaryIO, size: int) -> None:
        self.handle = handle
        self.crc = 0
        self.remaining = size

    def read_exact(self, size: int, what: str) -> bytes:
        data = self.handle.read(size)
        if len(data) != size:
            raise IndexFormatError("truncated", f"file ends inside {what}")
        self.crc = zlib.crc32(data, self.crc)
        self.remaining -= size
        return data


def save_index(index: VectorIndex, path: Path) -> int:
    """写出索引文件，返回字节数。"""

    path = ensure_parent(Path(path))
    config = index.config
    raw_ids = [doc_id.encode("utf-8") for doc_id in index.doc_ids]
    for doc_id, raw_id in zip(index.doc_ids, raw_ids):
        if len(raw_id) > 0xFFFF:
            raise ValueError(f"doc_id longer than 65535 bytes: {doc_id[:40]!r}...")

    partial = path.with_name(path.name + ".partial")
    try:
        with partial.open("wb") as handle:
            out = _ChecksumWriter(handle)
            out.write(
                _HEADER.pack(
                    MAGIC, FORMAT_VERSION, config.dimension, index.count, config.hash_variant.code
                )
            )
            out.write(_U16.pack(len(config.ngram_sizes)))
            for n in config.ngram_sizes:
                out.write(_U32.pack(n))
            out.write(_U16.pack(len(config.weight_table)))
            for length, weight in config.weight_table.items():
                out.write(_WEIGHT.pack(length, weight))
            for raw_id, (_, vector) in zip(raw_ids, index.entries()):
                out.write(_U16.pack(len(raw_id)))
                out.write(raw_id)
                out.write(vector.astype("<f4", copy=False).tobytes())
            handle.write(_U32.pack(out.crc))
            size = handle.tell()
        os.replace(partial, path)
    except BaseException:
        partial.unlink(missing_ok=True)
        raise
    logger.info("saved index with %d entries to %s (%d bytes)", index.count, path, size)
    return size


def load_index(path: Path) -> VectorIndex:
    """读取并校验索引文件（magic、version、长度、CRC32）。"""

    path = Path(path)
    file_size = path.stat().st_size
    with path.open("rb") as handle:
        reader = _ChecksumReader(handle, file_size - _U32.size)
        magic, version, dimension, count, variant_code = _HEADER.unpack(
            reader.read_exact(_HEADER.size, "header")
        )
        if magic != MAGIC:
            raise IndexFormatError("magic", f"expected {MAGIC!r}, found {magic!r}")
        if version != FORMAT_VERSION:
            raise IndexFormatError("version", f"unsupported format version {version}")

        (size_count,) = _U16.unpack(reader.read_exact(_U16.size, "n-gram size list"))
        ngram_sizes = tuple(
            _U32.unpack(reader.read_exact(_U32.size, "n-gram size list"))[0]
            for _ in range(size_count)
        )
        (weight_count,) = _U16.unpack(reader.read_exact(_U16.size, "weight table"))
        weight_table = dict(
            _WEIGHT.unpack(reader.read_exact(_WEIGHT.size, "weight table"))
            for _ in range(weight_count)
        )
        try:
            config = EncoderConfig(
                dimension=dimension,
                ngram_sizes=ngram_sizes,
                weight_table=weight_table,
                hash_variant=HashVariant.from_code(variant_code),
            )
        except (ValidationError, ValueError) as exc:
            raise IndexFormatError("header", f"invalid encoder config: {exc}") from exc

        row_bytes = dimension * np.dtype(VECTOR_DTYPE).itemsize
        if count * (_U16.size + row_bytes) > reader.remaining:
            raise IndexFormatError(
                "truncated", f"{count} entries of dimension {dimension} do not fit in the file"
            )

        doc_ids: List[str] = []
        vectors = np.empty((count, dimension), dtype=VECTOR_DTYPE)
        for row in range(count):
            (id_len,) = _U16.unpack(reader.read_exact(_U16.size, f"entry {row}"))
            raw_id = reader.read_exact(id_len, f"entry {row}")
            try:
                doc_ids.append(raw_id.decode("utf-8"))
            except UnicodeDecodeError as exc:
                raise IndexFormatError("entry", f"entry {row} id is not UTF-8") from exc
            vectors[row] = np.frombuffer(
                reader.read_exact(row_bytes, f"entry {row}"), dtype="<f4"
            )

        trailer = handle.read(_U32.size)
        if len(trailer) != _U32.size:
            raise IndexFormatError("truncated", "missing trailing checksum")
        if handle.read(1):
            raise IndexFormatError("truncated", "unexpected bytes after checksum")
        (stored,) = _U32.unpack(trailer)
        if stored != reader.crc:
            raise IndexFormatError(
                "checksum", f"stored {stored:#010x}, computed {reader.crc:#010x}"
            )

    logger.info("loaded index with %d entries at d=%d from %s", count, dimension, path)
    return VectorIndex(config, doc_ids, vectors)


def top_k(index: VectorIndex, query_vec: np.ndarray, k: int) -> List[SearchResult]:
    return index.top_k(query_vec, k)
