"""运行清单的构建与写出。"""

from __future__ import annotations

import os
import platform
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, Optional

from numen import __version__
from numen.schemas.encoder import EncoderConfig
from numen.schemas.manifest import InputFile, PlatformInfo, RunManifest, Timings
from numen.utils.hashing import sha256_file
from numen.utils.storage import write_model_json


MANIFEST_SUFFIX = ".manifest.json"


def describe_inputs(paths: Iterable[Optional[Path]]) -> list[InputFile]:
    inputs: list[InputFile] = []
    for path in paths:
        if path is None:
            continue
        path = Path(path)
        inputs.append(
            InputFile(path=str(path), sha256=sha256_file(path), size_bytes=path.stat().st_size)
        )
    return inputs


def platform_info() -> PlatformInfo:
    return PlatformInfo(
        python=platform.python_version(),
        system=platform.system(),
        machine=platform.machine(),
        processor=platform.processor() or platform.machine(),
        cpu_count=os.cpu_count(),
    )


def build_manifest(
    command: str,
    config: Dict[str, Any],
    inputs: Iterable[Optional[Path]],
    outputs: Iterable[Path],
    timings: Timings,
    encoder: Optional[EncoderConfig] = None,
    extra: Optional[Dict[str, Any]] = None,
) -> RunManifest:
    return RunManifest(
        command=command,
        tool_version=__version__,
        created_at=datetime.now(timezone.utc),
        config=config,
        encoder=encoder.fingerprint() if encoder is not None else None,
        inputs=describe_inputs(inputs),
        outputs=[str(p) for p in outputs],
        timings=timings,
        platform=platform_info(),
        extra=extra or {},
    )


def manifest_path_for(output: Path) -> Path:
    """``out.idx`` -> ``out.idx.manifest.json``；目录输出写 ``<dir>/manifest.json``。"""

    output = Path(output)
    if output.is_dir():
        return output / "manifest.json"
    return output.with_name(output.name + MANIFEST_SUFFIX)


def write_manifest(manifest: RunManifest, output: Path) -> Path:
    path = manifest_path_for(output)
    write_model_json(manifest, path)
    return path
