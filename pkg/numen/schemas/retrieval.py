"""检索结果相关的模型。"""

from __future__ import annotations

from pydantic import BaseModel, Field


class SearchResult(BaseModel):
    doc_id: str
    score: float
    rank: int = Field(ge=1)

    model_config = {"frozen": True}
