from collections import OrderedDict
from dataclasses import dataclass
from typing import List, Optional

from sempe.config import Settings

WORD_BYTES = 8


@dataclass(frozen=True)
class CacheConfig:
    size: int = 32 * 1024
    ways: int = 2
    line: int = 64
    hit_latency: int = 1
    miss_penalty: int = 20


@dataclass(frozen=True)
class TimingModel:
    base_cpi: int = 1
    drain_penalty: int = 14
    spm_bandwidth: int = 64
    cache: Optional[CacheConfig] = None

    @classmethod
    def from_settings(cls, settings: Settings) -> "TimingModel":
        cache = None
        if settings.cache_enabled:
            cache = CacheConfig(
                size=settings.cache_size,
                ways=settings.cache_ways,
                line=settings.cache_line,
                hit_latency=settings.cache_hit_latency,
                miss_penalty=settings.cache_miss_penalty,
            )
        return cls(
            base_cpi=settings.base_cpi,
            drain_penalty=settings.drain_penalty,
            spm_bandwidth=settings.spm_bandwidth,
            cache=cache,
        )

    def spm_transfer(self, byte_count: int) -> int:
        return -(-byte_count // self.spm_bandwidth)


class CacheModel:
    """Set-associative LRU data cache over word addresses."""

    def __init__(self, config: CacheConfig):
        if config.line <= 0 or config.ways <= 0 or config.size < config.line * config.ways:
            raise ValueError("cache geometry must hold at least one set")
        self.config = config
        self.set_count = config.size // (config.line * config.ways)
        self._sets: List["OrderedDict[int, None]"] = [OrderedDict() for _ in range(self.set_count)]
        self.hits = 0
        self.misses = 0

    def access(self, word_address: int) -> int:
        """Touch the line holding word_address; returns the extra cycles charged."""
        line = (word_address * WORD_BYTES) // self.config.line
        ways = self._sets[line % self.set_count]
        if line in ways:
            ways.move_to_end(line)
            self.hits += 1
            return self.config.hit_latency - 1
        self.misses += 1
        ways[line] = None
        if len(ways) > self.config.ways:
            ways.popitem(last=False)
        return self.config.hit_latency - 1 + self.config.miss_penalty
