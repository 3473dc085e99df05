"""Per-iteration objective/timing records shared by all optimization loops."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

LOOPS = ("BCD", "FP-HBF", "FP-RIS", "MM")


@dataclass(frozen=True)
class TraceRecord:
    loop: str
    outer: int
    iteration: int
    objective: float
    wall_ms: float


@dataclass
class SolutionTrace:
    records: list[TraceRecord] = field(default_factory=list)
    _t0: float = field(default_factory=time.perf_counter, repr=False)
    outer: int = 0

    def add(self, loop: str, iteration: int, objective: float) -> None:
        if loop not in LOOPS:
            raise ValueError(f"unknown loop id {loop!r}")
        ms = (time.perf_counter() - self._t0) * 1e3
        self.records.append(TraceRecord(loop, self.outer, iteration, float(objective), ms))

    def extend(self, other: "SolutionTrace") -> None:
        self.records.extend(other.records)

    def values(self, loop: str, outer: int | None = None) -> list[float]:
        return [r.objective for r in self.records
                if r.loop == loop and (outer is None or r.outer == outer)]

    def segments(self, loop: str) -> list[list[float]]:
        outs = sorted({r.outer for r in self.records if r.loop == loop})
        return [self.values(loop, o) for o in outs]

    def count(self, loop: str) -> int:
        return sum(1 for r in self.records if r.loop == loop)

    def is_monotone(self, loop: str, slack: float = 1e-7, per_segment: bool = False) -> bool:
        seqs = self.segments(loop) if per_segment else [self.values(loop)]
        for seq in seqs:
            for a, b in zip(seq, seq[1:]):
                if b < a - slack:
                    return False
        return True

    def write_csv(self, path, timing: bool = False) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            head = ["loop", "outer", "iteration", "objective_bits"] + (["wall_ms"] if timing else [])
            w.writerow(head)
            for r in self.records:
                row = [r.loop, r.outer, r.iteration, repr(r.objective)]
                if timing:
                    row.append(f"{r.wall_ms:.3f}")
                w.writerow(row)
