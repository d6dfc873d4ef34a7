"""File related helper functions.

JSON-lines streams are the daemon's only structured output: traces,
stats, peer tables and dissections all go through ``dumps_line``.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import IO, Any, Iterable, Optional


def dumps_line(record: Any) -> str:
    """Serialize one record as a compact, key-ordered JSON line (no newline)."""
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def save_jsonl(records: Iterable[Any], filepath: str | Path) -> None:
    with open(filepath, "w", encoding="utf-8") as f:
        for record in records:
            f.write(dumps_line(record) + "\n")


class JsonLinesWriter:
    """Append JSON-lines records to a text stream.

    Args:
        stream: Open text stream (a file or ``sys.stdout``).
        flush_every: Flush after this many records.
    """

    def __init__(self, stream: IO[str], flush_every: int = 1) -> None:
        self.stream = stream
        self.flush_every = max(1, flush_every)
        self.count = 0

    @classmethod
    def open(cls, filepath: Optional[str | Path], flush_every: int = 1) -> "JsonLinesWriter":
        """Open a writer on ``filepath``, or on stdout when it is None or ``-``."""
        if filepath is None or str(filepath) == "-":
            return cls(sys.stdout, flush_every)
        return cls(open(filepath, "w", encoding="utf-8"), flush_every)

    def write(self, record: Any) -> None:
        self.stream.write(dumps_line(record) + "\n")
        self.count += 1
        if self.count % self.flush_every == 0:
            self.stream.flush()

    def close(self) -> None:
        self.stream.flush()
        if self.stream is not sys.stdout:
            self.stream.close()
