"""编码器配置与 n-gram 类型。"""

from __future__ import annotations

import math
from typing import TYPE_CHECKING, Any, Dict, NamedTuple, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from numen.models.enums import HashVariant

if TYPE_CHECKING:
    from numen.config import Settings


DEFAULT_NGRAM_SIZES: Tuple[int, ...] = (3, 4, 5)
DEFAULT_WEIGHT_TABLE: Dict[int, float] = {3: 1.0, 4: 5.0, 5: 10.0}


class Ngram(NamedTuple):
    """一个带边界符的 n-gram（``^`` / ``$`` 计入长度）。"""

    text: str
    length_class: int

    @property
    def bytes(self) -> bytes:
        return self.text.encode("utf-8")


class EncoderConfig(BaseModel):
    """完全决定编码函数的配置，构造后不可变。"""

    dimension: int = Field(default=32768, ge=1)
    ngram_sizes: Tuple[int, ...] = DEFAULT_NGRAM_SIZES
    weight_table: Dict[int, float] = Field(default_factory=lambda: dict(DEFAULT_WEIGHT_TABLE))
    hash_variant: HashVariant = HashVariant.CRC32_IEEE

    model_config = ConfigDict(frozen=True)

    @field_validator("ngram_sizes")
    @classmethod
    def _check_sizes(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        if not value:
            raise ValueError("ngram_sizes must not be empty")
        if any(n < 1 for n in value):
            raise ValueError(f"ngram sizes must be >= 1, got {list(value)}")
        return tuple(sorted(set(value)))

    @field_validator("weight_table")
    @classmethod
    def _check_weights(cls, value: Dict[int, float]) -> Dict[int, float]:
        if not value:
            raise ValueError("weight_table must not be empty")
        for length, weight in value.items():
            if length < 1:
                raise ValueError(f"weight key must be >= 1, got {length}")
            if not math.isfinite(weight) or weight < 0:
                raise ValueError(f"weight for length {length} must be finite and >= 0")
        if not any(weight > 0 for weight in value.values()):
            raise ValueError("at least one weight must be > 0")
        return {length: float(value[length]) for length in sorted(value)}

    @model_validator(mode="after")
    def _check_alignment(self) -> "EncoderConfig":
        smallest_key = min(self.weight_table)
        below = [n for n in self.ngram_sizes if n < smallest_key]
        if below:
            raise ValueError(
                f"ngram sizes {below} have no weight (smallest weight key is {smallest_key})"
            )
        return self

    def __hash__(self) -> int:
        return hash(self.key())

    def key(self) -> Tuple[Any, ...]:
        return (
            self.dimension,
            self.ngram_sizes,
            tuple(self.weight_table.items()),
            self.hash_variant.value,
        )

    def weight_for_length(self, length: int) -> Optional[float]:
        """最大的不超过 ``length`` 的键对应的权重；低于最小键时返回 None。"""

        chosen: Optional[float] = None
        for key, weight in self.weight_table.items():
            if key > length:
                break
            chosen = weight
        return chosen

    def with_dimension(self, dimension: int) -> "EncoderConfig":
        return EncoderConfig.model_validate({**self.model_dump(), "dimension": dimension})

    def fingerprint(self) -> Dict[str, Any]:
        """可 JSON 序列化的配置指纹，用于报告与运行清单。"""

        return {
            "dimension": self.dimension,
            "ngram_sizes": list(self.ngram_sizes),
            "weight_table": {str(k): v for k, v in self.weight_table.items()},
            "hash_variant": self.hash_variant.value,
        }

    @classmethod
    def from_parts(
        cls,
        dimension: int,
        ngram_sizes: Tuple[int, ...],
        weights: Tuple[float, ...],
        hash_variant: HashVariant | str = HashVariant.CRC32_IEEE,
    ) -> "EncoderConfig":
        """由 CLI 风格的平行列表（``--ngrams 3,4,5 --weights 1,5,10``）构造。"""

        if len(ngram_sizes) != len(weights):
            raise ValueError(
                f"{len(ngram_sizes)} n-gram sizes but {len(weights)} weights; lists must align"
            )
        return cls(
            dimension=dimension,
            ngram_sizes=tuple(ngram_sizes),
            weight_table=dict(zip(ngram_sizes, weights)),
            hash_variant=HashVariant(hash_variant),
        )

    @classmethod
    def from_settings(cls, settings: "Settings") -> "EncoderConfig":
        return cls.from_parts(
            settings.dimension, settings.ngram_sizes, settings.weights, settings.hash_variant
        )


class EncodeStats(BaseModel):
    """单条文本的编码统计（``encode --stats``）。"""

    ngram_count: int
    distinct_ngrams: int
    nonzero_components: int
    collided_ngrams: int = Field(
        description="Distinct n-grams sharing an index with another distinct n-gram"
    )
