"""Scripted instructor: an ordered list of answers, consumed by content match."""

from __future__ import annotations

from .lang.nodes import PriorityAnswer, RelevanceAnswer


class InstructorScript:
    def __init__(self, entries=()):
        self.entries = list(entries)
        self._consumed = [False] * len(self.entries)

    def pending(self) -> list:
        return [e for e, used in zip(self.entries, self._consumed) if not used]

    def consume(self, entry) -> None:
        for i, (e, used) in enumerate(zip(self.entries, self._consumed)):
            if not used and e == entry:
                self._consumed[i] = True
                return
        raise ValueError(f"no pending entry matches {entry!r}")

    def answer_priority(self, first: str, second: str):
        """Answer to `priority A vs B?`, matched unordered; None when absent."""
        pair = {first, second}
        for e in self.pending():
            if isinstance(e, PriorityAnswer) and {e.first, e.second} == pair:
                self.consume(e)
                return e.winner
        return None

    def take_relevance(self) -> list:
        """Consume and return all relevance instructions, in script order."""
        out = [e for e in self.pending() if isinstance(e, RelevanceAnswer)]
        for e in out:
            self.consume(e)
        return out
