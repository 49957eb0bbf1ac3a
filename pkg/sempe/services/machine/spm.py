from dataclasses import dataclass, field
from typing import Dict, List, Sequence


@dataclass
class Snapshot:
    regs_pre: List[int]
    regs_nt: List[int]
    # bit i set when register i was written on that path
    modified_nt: int = 0
    modified_t: int = 0

    def changed(self) -> int:
        return self.modified_nt | self.modified_t


def register_indices(mask: int) -> List[int]:
    indices: List[int] = []
    index = 0
    while mask:
        if mask & 1:
            indices.append(index)
        mask >>= 1
        index += 1
    return indices


@dataclass
class Spm:
    """Scratchpad holding one register snapshot per nesting level.

    Slot k spans words [k*(2R+2), (k+1)*(2R+2)): regs_pre at 0..R-1,
    regs_nt at R..2R-1, then the NT and T bit-vectors.
    """

    register_count: int
    slots: int = 30
    bytes_read: int = 0
    bytes_written: int = 0
    _snapshots: Dict[int, Snapshot] = field(default_factory=dict, repr=False)

    @property
    def words_per_slot(self) -> int:
        return 2 * self.register_count + 2

    @property
    def bitvector_bytes(self) -> int:
        return 2 * ((self.register_count + 7) // 8)

    def slot_base(self, level: int) -> int:
        return level * self.words_per_slot

    def pre_address(self, level: int, register: int) -> int:
        return self.slot_base(level) + register

    def nt_address(self, level: int, register: int) -> int:
        return self.slot_base(level) + self.register_count + register

    def vector_address(self, level: int) -> int:
        return self.slot_base(level) + 2 * self.register_count

    def open_slot(self, level: int, registers: Sequence[int]) -> Snapshot:
        if not 0 <= level < self.slots:
            raise IndexError(f"spm slot {level} out of range")
        snapshot = Snapshot(regs_pre=list(registers), regs_nt=[0] * self.register_count)
        self._snapshots[level] = snapshot
        self.bytes_written += 8 * self.register_count
        return snapshot

    def slot(self, level: int) -> Snapshot:
        return self._snapshots[level]

    def close_slot(self, level: int) -> Snapshot:
        return self._snapshots.pop(level)
