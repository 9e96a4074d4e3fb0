"""
Cache-miss fault distributions derived from memory-access traces.

Main memory is the vulnerable component and caches are robust, so injections
are planned at cache-miss times. A single set-associative, write-allocate LRU
cache is simulated; the trace record index is the cycle time.

Trace format: one record per line ``<I|R|W> <hex-address> <size>``, ``#`` comments.
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Tuple, Union

from distribution_core import FaultDistribution, build_distribution

logger = logging.getLogger(__name__)

MAX_ACCESS_SIZE = 64
DEFAULT_SWEEP_SIZES = (2048, 4096, 8192, 16384, 32768, 65536)


class CacheConfigError(ValueError):
    """Raised for impossible cache geometries."""


class TraceFormatError(ValueError):
    """Raised for malformed trace records."""


class EmptyTraceError(ValueError):
    """Raised when no access of the requested kind exists."""


class AccessKind(Enum):
    INSTRUCTION = "I"
    READ = "R"
    WRITE = "W"


class TraceFilter(Enum):
    INSTRUCTION = "instruction"
    DATA = "data"

    def accepts(self, kind: AccessKind) -> bool:
        if self is TraceFilter.INSTRUCTION:
            return kind is AccessKind.INSTRUCTION
        return kind is not AccessKind.INSTRUCTION


@dataclass(frozen=True)
class AccessTrace:
    records: Tuple[Tuple[AccessKind, int, int], ...]

    def __post_init__(self):
        if not self.records:
            raise TraceFormatError("Trace holds no records")
        for position, (kind, address, size) in enumerate(self.records):
            if not (1 <= size <= MAX_ACCESS_SIZE):
                raise TraceFormatError(f"Record {position}: size {size} outside [1, {MAX_ACCESS_SIZE}]")
            if not (0 <= address < 1 << 64):
                raise TraceFormatError(f"Record {position}: address {address:#x} is not 64-bit unsigned")

    def __len__(self) -> int:
        return len(self.records)


def _is_power_of_two(value: int) -> bool:
    return value > 0 and value & (value - 1) == 0


@dataclass(frozen=True)
class CacheConfig:
    total_size: int = 8192
    associativity: int = 4
    line_size: int = 64
    weight_per_miss: int = 1
    filter: TraceFilter = TraceFilter.DATA
    policy: str = "lru"

    def __post_init__(self):
        if not _is_power_of_two(self.total_size):
            raise CacheConfigError(f"total_size must be a power of two, got {self.total_size}")
        if not _is_power_of_two(self.line_size):
            raise CacheConfigError(f"line_size must be a power of two, got {self.line_size}")
        if self.associativity < 1:
            raise CacheConfigError(f"associativity must be positive, got {self.associativity}")
        if self.total_size < self.associativity * self.line_size:
            raise CacheConfigError(
                f"total_size {self.total_size} is smaller than one set "
                f"({self.associativity} x {self.line_size} bytes)"
            )
        if self.total_size % (self.associativity * self.line_size):
            raise CacheConfigError("total_size must be divisible by associativity x line_size")
        if self.weight_per_miss < 1:
            raise CacheConfigError(f"weight_per_miss must be positive, got {self.weight_per_miss}")
        if self.policy != "lru":
            raise CacheConfigError(f"Only the LRU policy is supported, got {self.policy!r}")

    @property
    def num_sets(self) -> int:
        return self.total_size // (self.associativity * self.line_size)

    @classmethod
    def from_config(cls, config, **overrides) -> "CacheConfig":
        values = {
            'total_size': config.get('cachesim.total_size'),
            'associativity': config.get('cachesim.associativity'),
            'line_size': config.get('cachesim.line_size'),
            'weight_per_miss': config.get('cachesim.weight_per_miss'),
            'filter': config.get('cachesim.filter'),
        }
        values.update(overrides)
        values = {k: v for k, v in values.items() if v is not None}
        if isinstance(values.get('filter'), str):
            values['filter'] = TraceFilter(values['filter'])
        return cls(**values)


class CacheSimulator:
    """Set-associative LRU cache with write-allocate."""

    def __init__(self, cfg: CacheConfig):
        self.cfg = cfg
        self.offset_bits = cfg.line_size.bit_length() - 1
        self.sets: List[OrderedDict] = [OrderedDict() for _ in range(cfg.num_sets)]
        self.accesses = 0
        self.hits = 0
        self.misses = 0

    def touch_line(self, line: int) -> bool:
        """Access one line; returns True on a hit."""
        ways = self.sets[line % self.cfg.num_sets]
        tag = line // self.cfg.num_sets
        if tag in ways:
            ways.move_to_end(tag)
            self.hits += 1
            return True
        if len(ways) >= self.cfg.associativity:
            ways.popitem(last=False)
        ways[tag] = True
        self.misses += 1
        return False

    def access(self, address: int, size: int) -> bool:
        """Access every line a record touches; returns True if any of them missed."""
        self.accesses += 1
        first = address >> self.offset_bits
        last = (address + size - 1) >> self.offset_bits
        missed = False
        for line in range(first, last + 1):
            if not self.touch_line(line):
                missed = True
        return missed

    def get_statistics(self) -> Dict[str, int]:
        """Access, hit and miss counters since construction."""
        return {'accesses': self.accesses, 'hits': self.hits, 'misses': self.misses}


def parse_trace(text: str, source: str = "<text>") -> AccessTrace:
    records = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 3:
            raise TraceFormatError(f"{source}:{line_no}: expected '<I|R|W> <hex-address> <size>', got {raw!r}")
        try:
            kind = AccessKind(fields[0].upper())
            address = int(fields[1], 16)
            size = int(fields[2])
        except ValueError:
            raise TraceFormatError(f"{source}:{line_no}: malformed record {raw!r}")
        records.append((kind, address, size))
    return AccessTrace(tuple(records))


def read_trace(path: Union[str, Path]) -> AccessTrace:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Trace file not found: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        trace = parse_trace(f.read(), source=str(path))
    logger.info(f"Loaded trace {path.name}: {len(trace)} records")
    return trace


def _filtered_positions(trace: AccessTrace, trace_filter: TraceFilter) -> Iterable[Tuple[int, int, int]]:
    for position, (kind, address, size) in enumerate(trace.records):
        if trace_filter.accepts(kind):
            yield position, address, size


def simulate(trace: AccessTrace, cfg: CacheConfig) -> FaultDistribution:
    """Distribution of cache-miss times over [0, len(trace))."""
    simulator = CacheSimulator(cfg)
    pairs = []
    for position, address, size in _filtered_positions(trace, cfg.filter):
        if simulator.access(address, size):
            pairs.append((position, cfg.weight_per_miss))

    if simulator.accesses == 0:
        raise EmptyTraceError("no accesses of requested kind")

    stats = simulator.get_statistics()
    logger.info(f"Simulated {cfg.total_size}B/{cfg.associativity}-way/{cfg.line_size}B "
                f"{cfg.filter.value} cache: {stats['misses']} line misses in {stats['accesses']} accesses")
    return build_distribution(pairs, 0, len(trace))


def uncached_distribution(trace: AccessTrace, trace_filter: TraceFilter = TraceFilter.DATA,
                          weight: int = 1) -> FaultDistribution:
    """Every filtered access is an injection point (no cache at all)."""
    pairs = [(position, weight) for position, _, _ in _filtered_positions(trace, trace_filter)]
    if not pairs:
        raise EmptyTraceError("no accesses of requested kind")
    return build_distribution(pairs, 0, len(trace))


def sweep_cache_sizes(trace: AccessTrace, sizes: Iterable[int] = DEFAULT_SWEEP_SIZES,
                      base: CacheConfig = CacheConfig()) -> Dict[int, FaultDistribution]:
    """One distribution per cache size, all other geometry taken from ``base``."""
    return {size: simulate(trace, replace(base, total_size=size)) for size in sizes}
