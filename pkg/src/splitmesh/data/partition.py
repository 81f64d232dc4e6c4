"""Split ratios and largest-remainder apportionment of samples and batches."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..errors import BatchTooSmall, ParseError, TooFewSamples
from ..rng import PARTITION, SplitMix64, derive_seed


@dataclass(frozen=True)
class SplitRatio:
    parts: tuple[int, ...]

    def __post_init__(self):
        if not self.parts or any(p < 1 for p in self.parts):
            raise ParseError(f"split ratio parts must be positive integers, got {self.parts}")

    @property
    def weights(self) -> list[float]:
        total = sum(self.parts)
        return [p / total for p in self.parts]

    def __str__(self) -> str:
        return ":".join(map(str, self.parts))


def parse_ratio(text: str) -> SplitRatio:
    if not isinstance(text, str) or not text.strip():
        raise ParseError("empty split ratio")
    parts = []
    for piece in text.strip().split(":"):
        piece = piece.strip()
        if not piece.isdigit():
            raise ParseError(f"bad split ratio part {piece!r} in {text!r}")
        parts.append(int(piece))
    if any(p == 0 for p in parts):
        raise ParseError(f"split ratio parts must be >= 1: {text!r}")
    return SplitRatio(tuple(parts))


def largest_remainder(total: int, weights: Sequence[int]) -> list[int]:
    """Integer apportionment of ``total`` proportional to integer ``weights``.

    Floors first, then one extra unit each to the largest fractional parts;
    equal fractions go to the lower index. Exact integer arithmetic.
    """
    denom = sum(weights)
    if denom <= 0:
        raise ValueError("weights must sum to a positive value")
    counts = [total * w // denom for w in weights]
    rems = [total * w % denom for w in weights]
    leftover = total - sum(counts)
    order = sorted(range(len(weights)), key=lambda i: (-rems[i], i))
    for i in order[:leftover]:
        counts[i] += 1
    return counts


@dataclass(frozen=True)
class PartitionAssignment:
    shards: tuple[tuple[int, ...], ...]

    @property
    def counts(self) -> list[int]:
        return [len(s) for s in self.shards]


def partition(n: int, ratio: SplitRatio, seed: int) -> PartitionAssignment:
    """Shuffle ``range(n)`` and cut it into contiguous runs sized by largest remainder."""
    if n < len(ratio.parts):
        raise TooFewSamples(f"{n} samples cannot cover {len(ratio.parts)} clients")
    counts = largest_remainder(n, ratio.parts)
    if any(c == 0 for c in counts):
        raise TooFewSamples(f"{n} samples leave an empty shard under ratio {ratio}: {counts}")
    order = SplitMix64(derive_seed(seed, PARTITION)).permutation(n)
    shards, start = [], 0
    for c in counts:
        shards.append(tuple(order[start:start + c]))
        start += c
    return PartitionAssignment(tuple(shards))


def batch_allocation(batch_size: int, remaining: Sequence[int]) -> list[int]:
    """Rows each client contributes to the next round.

    Proportional to ``remaining`` shard rows by largest remainder, every
    non-exhausted client gets at least one row, and nobody is asked for more
    than it has. When everything left fits in one batch, it all goes.
    """
    active = [i for i, r in enumerate(remaining) if r > 0]
    if not active:
        return [0] * len(remaining)
    if batch_size < len(active):
        raise BatchTooSmall(f"batch of {batch_size} cannot give {len(active)} clients a row each")
    if sum(remaining) <= batch_size:
        return list(remaining)
    alloc = largest_remainder(batch_size, remaining)
    # top up starved clients from the largest allocation (lowest index on ties)
    for i in active:
        if alloc[i] == 0:
            donor = max(range(len(alloc)), key=lambda j: (alloc[j], -j))
            alloc[donor] -= 1
            alloc[i] = 1
    return alloc


def round_schedule(batch_size: int, shard_sizes: Sequence[int]) -> list[list[int]]:
    """Per-round allocations for one epoch over shards of the given sizes."""
    remaining = list(shard_sizes)
    rounds = []
    while any(remaining):
        alloc = batch_allocation(batch_size, remaining)
        rounds.append(alloc)
        remaining = [r - a for r, a in zip(remaining, alloc)]
    return rounds
