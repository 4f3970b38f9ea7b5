"""语料、查询与合成数据集规格的模型。"""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field, model_validator


class DocumentRecord(BaseModel):
    doc_id: str = Field(min_length=1)
    title: Optional[str] = None
    text: str

    @property
    def encoded_text(self) -> str:
        """标题（若有）与正文以单个空格拼接后参与编码。"""
        if self.title:
            return f"{self.title} {self.text}"
        return self.text


class QueryRecord(BaseModel):
    query_id: str = Field(min_length=1)
    text: str


class SynthSpec(BaseModel):
    """LIMIT 风格合成数据集的规格；生成结果是它（含 seed）的纯函数。"""

    num_people: int = Field(default=5000, ge=1)
    num_attributes: int = Field(default=200, ge=1)
    attributes_per_person: int = Field(default=10, ge=1)
    attributes_per_query: int = Field(default=2, ge=1)
    num_queries: int = Field(default=200, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def _check_feasible_shape(self) -> "SynthSpec":
        if self.attributes_per_person > self.num_attributes:
            raise ValueError(
                f"attributes_per_person ({self.attributes_per_person}) exceeds "
                f"num_attributes ({self.num_attributes})"
            )
        return self
