"""运行清单：复现一次 CLI 运行所需的全部信息。"""

from __future__ import annotations

from datetime import datetime
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class InputFile(BaseModel):
    path: str
    sha256: str
    size_bytes: int


class Timings(BaseModel):
    elapsed_seconds: float
    index_docs_per_sec: Optional[float] = None
    query_qps: Optional[float] = None
    query_ms_mean: Optional[float] = None


class PlatformInfo(BaseModel):
    python: str
    system: str
    machine: str
    processor: str
    cpu_count: Optional[int] = None


class RunManifest(BaseModel):
    command: str
    tool_version: str
    created_at: datetime
    config: Dict[str, Any] = Field(default_factory=dict, description="All resolved flags")
    encoder: Optional[Dict[str, Any]] = None
    inputs: List[InputFile] = Field(default_factory=list)
    outputs: List[str] = Field(default_factory=list)
    timings: Timings
    platform: PlatformInfo
    extra: Dict[str, Any] = Field(default_factory=dict)
