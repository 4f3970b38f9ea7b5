"""评测相关的模型：相关性判断、Recall 报告、维度扫描行与冲突统计。"""

from __future__ import annotations

from typing import Any, Dict, List, Optional, Set

from pydantic import BaseModel, Field


class Qrels(BaseModel):
    """query_id -> {doc_id: 相关等级}。等级 >= 1 视为相关。

    ``unjudged`` 记录加载时因没有任何相关文档而被剔除的查询。
    """

    judgments: Dict[str, Dict[str, int]] = Field(default_factory=dict)
    unjudged: Set[str] = Field(default_factory=set)

    def __contains__(self, query_id: object) -> bool:
        return query_id in self.judgments

    def __len__(self) -> int:
        return len(self.judgments)

    @property
    def query_ids(self) -> List[str]:
        return list(self.judgments)

    def relevant(self, query_id: str) -> Set[str]:
        return {doc_id for doc_id, grade in self.judgments.get(query_id, {}).items() if grade >= 1}


class RecallReport(BaseModel):
    per_query: Dict[str, Dict[int, float]] = Field(default_factory=dict)
    aggregate: Dict[int, float] = Field(default_factory=dict)
    k_values: List[int] = Field(default_factory=list)
    config_fingerprint: Optional[Dict[str, Any]] = None
    excluded: List[str] = Field(default_factory=list, description="Queries skipped as unjudged")


class SweepRow(BaseModel):
    dimension: int
    k: int
    recall: float


class CollisionReport(BaseModel):
    """实测哈希冲突统计。

    ``text_collision_rate``：至少有一对不同 n-gram 落在同一下标的文本比例，
    与生日悖论近似公式直接可比；``pair_collision_fraction``：每条文本中冲突对
    占全部 n-gram 对的比例的平均值。
    """

    dimension: int
    num_texts: int
    mean_distinct_ngrams: float
    text_collision_rate: float
    pair_collision_fraction: float
    colliding_pairs: int
    total_pairs: int

    @property
    def rate(self) -> float:
        return self.text_collision_rate


class SystemRow(BaseModel):
    """系统对比表中的一行（BM25 或某个维度的 NUMEN）。"""

    system: str
    dimension: Optional[int] = None
    recall: Dict[int, float] = Field(default_factory=dict)
    index_docs_per_sec: float = 0.0
    query_qps: float = 0.0
