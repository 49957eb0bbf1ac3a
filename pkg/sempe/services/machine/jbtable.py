from dataclasses import dataclass
from enum import Enum
from typing import List, Optional


class Outcome(str, Enum):
    T = "T"
    NT = "NT"


@dataclass
class JbEntry:
    next_pc: int
    outcome: Outcome
    valid: bool = False
    jb: bool = False


class JbTableError(RuntimeError):
    pass


class JbTable:
    """LIFO jump-back table; one entry per open secure region."""

    def __init__(self, capacity: int = 30):
        if capacity < 1:
            raise ValueError("jbTable capacity must be positive")
        self.capacity = capacity
        self._entries: List[JbEntry] = []

    @property
    def depth(self) -> int:
        return len(self._entries)

    @property
    def full(self) -> bool:
        return len(self._entries) >= self.capacity

    def top(self) -> Optional[JbEntry]:
        return self._entries[-1] if self._entries else None

    def push(self, entry: JbEntry) -> None:
        if self.full:
            raise JbTableError(f"jbTable full ({self.capacity} entries)")
        self._entries.append(entry)

    def pop(self) -> JbEntry:
        if not self._entries:
            raise JbTableError("pop from empty jbTable")
        return self._entries.pop()
