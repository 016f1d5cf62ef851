"""Operation counters used to check runtime shape without wall-clock timing."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class EvalCounter:
    """Mutable tally of elementary operations.

    Pass one to the hashing or distance routines to have them record what they
    did. Counters are never shared implicitly, so concurrent callers each use
    their own.
    """

    hash_evals: int = 0
    multiply_adds: int = 0
    distance_evals: int = 0
    lookups: int = 0

    def reset(self) -> None:
        self.hash_evals = 0
        self.multiply_adds = 0
        self.distance_evals = 0
        self.lookups = 0
