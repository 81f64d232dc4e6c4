from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..data.partition import round_schedule
from ..protocol.messages import Phase


@dataclass(frozen=True)
class Step:
    round_id: int
    epoch: int
    phase: Phase
    rows: tuple[int, ...]  # per-client rows; evaluation steps carry zeros

    def active(self) -> list[int]:
        if self.phase is Phase.EVAL:
            return list(range(len(self.rows)))
        return [i for i, r in enumerate(self.rows) if r > 0]


def plan_steps(batch_size: int, shard_sizes: Sequence[int], epochs: int) -> list[Step]:
    """Every exchange of a run in order: each epoch's training rounds, then one
    evaluation round. Round ids start at 1 and increase across epochs."""
    rounds = round_schedule(batch_size, shard_sizes) if epochs else []
    steps, rid = [], 0
    zeros = (0,) * len(shard_sizes)
    for epoch in range(1, epochs + 1):
        for alloc in rounds:
            rid += 1
            steps.append(Step(rid, epoch, Phase.TRAIN, tuple(alloc)))
        rid += 1
        steps.append(Step(rid, epoch, Phase.EVAL, zeros))
    return steps
