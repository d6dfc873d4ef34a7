from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class LinkFrame:
    """A raw 802.11 frame (no radiotap) stamped with the time it crossed the link."""

    timestamp: int
    data: bytes

    def __post_init__(self) -> None:
        if not self.data:
            raise ValueError("link frames carry at least one byte")
        if not isinstance(self.data, bytes):
            object.__setattr__(self, "data", bytes(self.data))
