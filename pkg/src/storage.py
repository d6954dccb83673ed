"""
Atomic file output and JSONL helpers.

Every writer goes through a temporary file in the target directory that is
renamed into place, so readers never see a half-written file.
"""
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, TextIO, Union
import json
import os
import tempfile

import structlog

logger = structlog.get_logger(__name__)

PathLike = Union[str, Path]


@contextmanager
def atomic_writer(path: PathLike) -> Iterator[TextIO]:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", suffix=".tmp", dir=str(target.parent))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            yield handle
        os.replace(tmp_name, target)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    logger.debug("file_written", path=str(target))


def write_text(path: PathLike, text: str) -> None:
    with atomic_writer(path) as handle:
        handle.write(text)


def write_jsonl(path: PathLike, rows: Iterable[Dict[str, Any]]) -> int:
    count = 0
    with atomic_writer(path) as handle:
        for row in rows:
            handle.write(json.dumps(row, ensure_ascii=False, separators=(",", ":")))
            handle.write("\n")
            count += 1
    return count


def write_lines(path: PathLike, lines: Iterable[str]) -> int:
    count = 0
    with atomic_writer(path) as handle:
        for line in lines:
            handle.write(line)
            handle.write("\n")
            count += 1
    return count


def read_jsonl(path: PathLike) -> List[Dict[str, Any]]:
    rows = []
    with open(path, "r", encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}:{number}: invalid JSON ({e.msg})") from e
    return rows


def write_json(path: PathLike, data: Dict[str, Any]) -> None:
    write_text(path, json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True) + "\n")
