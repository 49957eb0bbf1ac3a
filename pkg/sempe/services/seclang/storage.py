import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from sempe.services.isa.arith import wrap64
from sempe.services.seclang.ast import Ast, For, If, Stmt, VarDecl, While

logger = logging.getLogger(__name__)

# r0..r5 hold expression temporaries; the last register is constant zero.
TEMP_COUNT = 6


@dataclass(frozen=True)
class Location:
    register: Optional[int] = None
    address: Optional[int] = None

    @property
    def in_register(self) -> bool:
        return self.register is not None


class Storage:
    """Memory layout and register assignment for one compiled program."""

    def __init__(self, ast: Ast, register_count: int = 16, privatize_all: bool = False):
        if register_count < TEMP_COUNT + 2:
            raise ValueError(f"register_count must be at least {TEMP_COUNT + 2}")
        self.ast = ast
        self.register_count = register_count
        self.zero = register_count - 1
        self.privatize_all = privatize_all
        self.locations: Dict[str, Location] = {}
        self.image: List[int] = []
        self.size = 0

        for name in ast.globals:
            info = ast.symbols[name]
            address = self._reserve(info.padded)
            self.locations[name] = Location(address=address)
            for offset, value in enumerate(info.init):
                self.image[address + offset] = wrap64(value)

        pool = [] if privatize_all else list(range(TEMP_COUNT, self.zero))
        self._assign(ast.body, pool)
        spilled = sum(1 for name, loc in self.locations.items() if not loc.in_register and not ast.symbols[name].is_global)
        if spilled:
            logger.debug("storage: %d locals live in memory", spilled)

    def _reserve(self, words: int) -> int:
        address = self.size
        self.size += words
        self.image.extend([0] * words)
        return address

    def _local(self, name: str, pool: List[int]) -> None:
        info = self.ast.symbols[name]
        if not info.is_array and pool:
            self.locations[name] = Location(register=pool.pop(0))
        else:
            self.locations[name] = Location(address=self._reserve(info.padded))

    def _assign(self, body: List[Stmt], pool: List[int]) -> None:
        for stmt in body:
            if isinstance(stmt, VarDecl):
                self._local(stmt.name, pool)
            elif isinstance(stmt, If):
                self._assign(stmt.then, list(pool))
                self._assign(stmt.other, list(pool))
            elif isinstance(stmt, While):
                self._assign(stmt.body, list(pool))
            elif isinstance(stmt, For):
                inner = list(pool)
                self._local(stmt.bound, inner)
                self._local(stmt.var, inner)
                self._assign(stmt.body, inner)

    def location(self, name: str) -> Location:
        if name not in self.locations:
            # declarations added after layout (for example by a rewrite pass)
            self._local(name, [])
        return self.locations[name]

    def allocate(self, hint: str, words: int = 1) -> int:
        address = self._reserve(words)
        logger.debug("storage: %s gets %d words at %d", hint, words, address)
        return address

    def words(self, name: str) -> int:
        return self.ast.symbols[name].padded

    def symbols(self) -> Dict[str, Tuple[int, int]]:
        table: Dict[str, Tuple[int, int]] = {}
        for name in self.ast.globals:
            info = self.ast.symbols[name]
            table[name] = (self.locations[name].address, info.size if info.is_array else 1)
        return table

    def memory_image(self) -> Tuple[int, ...]:
        return tuple(self.image)
