"""LIMIT 风格的合成数据集生成器。

每个人一篇文档（"<name> likes <attr_1>, <attr_2>, ..."），每条查询询问一组属性
（"who likes <attrs>"），持有全部被问属性的人即为相关文档。结果只由 SynthSpec 决定。
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, List, Set, Tuple

import numpy as np

from numen.schemas.evaluation import Qrels
from numen.schemas.ingest import DocumentRecord, QueryRecord, SynthSpec
from numen.services.ingest import (
    CORPUS_FILENAME,
    QRELS_FILENAME,
    QUERIES_FILENAME,
    write_corpus,
    write_qrels,
    write_queries,
)
from numen.utils.storage import ensure_directory


logger = logging.getLogger(__name__)

MAX_QUERY_RETRIES = 1000
_MAX_WORD_ATTEMPTS = 1000

_CONSONANTS = "bcdfghjklmnprstvwz"
_VOWELS = "aeiou"
_RESERVED = {"who", "likes"}


class InfeasibleSpecError(ValueError):
    """在有限次重试内无法生成至少有一个相关文档的查询。"""


def _make_word(rng: np.random.Generator, min_len: int, max_len: int) -> str:
    length = int(rng.integers(min_len, max_len + 1))
    start_with_vowel = bool(rng.integers(0, 2))
    letters = []
    for i in range(length):
        pool = _VOWELS if (i % 2 == 0) == start_with_vowel else _CONSONANTS
        letters.append(pool[int(rng.integers(0, len(pool)))])
    return "".join(letters)


def _unique_words(
    rng: np.random.Generator, count: int, min_len: int, max_len: int, taken: Set[str]
) -> List[str]:
    words: List[str] = []
    for _ in range(count):
        for _attempt in range(_MAX_WORD_ATTEMPTS):
            word = _make_word(rng, min_len, max_len)
            if word not in taken:
                break
        else:
            raise InfeasibleSpecError(
                f"could not draw {count} distinct words of length {min_len}-{max_len}"
            )
        taken.add(word)
        words.append(word)
    return words


def _doc_id(index: int, total: int) -> str:
    return f"d{index:0{len(str(max(total - 1, 0)))}d}"


def _query_id(index: int, total: int) -> str:
    return f"q{index:0{len(str(max(total - 1, 0)))}d}"


def generate_synthetic(spec: SynthSpec) -> Tuple[List[DocumentRecord], List[QueryRecord], Qrels]:
    if spec.attributes_per_query > spec.attributes_per_person:
        raise InfeasibleSpecError(
            f"attributes_per_query ({spec.attributes_per_query}) exceeds "
            f"attributes_per_person ({spec.attributes_per_person}); no person can match"
        )

    rng = np.random.default_rng(spec.seed)
    taken: Set[str] = set(_RESERVED)
    names = _unique_words(rng, spec.num_people, 4, 8, taken)
    attributes = _unique_words(rng, spec.num_attributes, 5, 9, taken)

    holders: Dict[int, Set[int]] = {a: set() for a in range(spec.num_attributes)}
    corpus: List[DocumentRecord] = []
    for person, name in enumerate(names):
        owned = rng.choice(spec.num_attributes, size=spec.attributes_per_person, replace=False)
        for attr in owned:
            holders[int(attr)].add(person)
        statement = ", ".join(attributes[int(a)] for a in owned)
        corpus.append(
            DocumentRecord(
                doc_id=_doc_id(person, spec.num_people),
                text=f"{name.capitalize()} likes {statement}.",
            )
        )

    queries: List[QueryRecord] = []
    judgments: Dict[str, Dict[str, int]] = {}
    for q in range(spec.num_queries):
        for attempt in range(MAX_QUERY_RETRIES):
            asked = sorted(
                int(a)
                for a in rng.choice(
                    spec.num_attributes, size=spec.attributes_per_query, replace=False
                )
            )
            relevant = set.intersection(*(holders[a] for a in asked))
            if relevant:
                break
            logger.debug("query %d attempt %d has no holder; redrawing", q, attempt)
        else:
            raise InfeasibleSpecError(
                f"query {q}: no attribute subset with a holder after {MAX_QUERY_RETRIES} draws"
            )
        query_id = _query_id(q, spec.num_queries)
        queries.append(
            QueryRecord(
                query_id=query_id,
                text=f"who likes {', '.join(attributes[a] for a in asked)}?",
            )
        )
        judgments[query_id] = {
            _doc_id(person, spec.num_people): 1 for person in sorted(relevant)
        }

    return corpus, queries, Qrels(judgments=judgments)


def write_synthetic(spec: SynthSpec, out_dir: Path) -> Dict[str, Path]:
    """生成并写出 corpus.jsonl / queries.jsonl / qrels.tsv。"""

    corpus, queries, qrels = generate_synthetic(spec)
    out_dir = Path(out_dir)
    ensure_directory(out_dir)
    paths = {
        "corpus": out_dir / CORPUS_FILENAME,
        "queries": out_dir / QUERIES_FILENAME,
        "qrels": out_dir / QRELS_FILENAME,
    }
    write_corpus(corpus, paths["corpus"])
    write_queries(queries, paths["queries"])
    write_qrels(qrels, paths["qrels"])
    logger.info(
        "wrote %d documents and %d queries to %s", len(corpus), len(queries), out_dir
    )
    return paths
