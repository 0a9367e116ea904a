"""Partial symbolic instances: the states of the symbolic search.

A PSI bundles the current constraint type, sparse counters of stored-tuple
types per artifact relation, the activity status of child tasks, and the
product automaton state.  Counters may hold the omega value (float inf),
which absorbs increments and decrements.
"""

from __future__ import annotations

from dataclasses import dataclass

from .isotypes import IsoType

OMEGA = float("inf")

# counter keys are (artifact relation name, tuple type)
CounterKey = tuple


def counter_sort_key(item):
    (rel, tau), _ = item
    return (rel, tau.classes, tuple(sorted(tau.neqs)))


def freeze_counters(d: dict) -> tuple:
    """Sparse canonical form: positive entries only, deterministic order."""
    return tuple(sorted(((k, v) for k, v in d.items() if v > 0),
                        key=counter_sort_key))


@dataclass(frozen=True)
class PSI:
    tau: IsoType
    counters: tuple = ()  # sorted ((rel, IsoType), count) entries, count > 0
    rbar: tuple = ()      # (child name, None | input type passed at opening)
    q: int = -1           # automaton state; -1 outside product searches
    terminal: bool = False  # reached through the task's own closing service

    def counter_dict(self) -> dict:
        return dict(self.counters)

    def bucket(self) -> tuple:
        """Coverage is only defined within one bucket."""
        return (self.rbar, self.q, self.terminal)

    def has_omega(self) -> bool:
        return any(v == OMEGA for _, v in self.counters)

    def total_count(self) -> float:
        return sum(v for _, v in self.counters)

    def pos_keys(self) -> list:
        return [k for k, _ in self.counters]

    def with_counters(self, d: dict) -> "PSI":
        return PSI(self.tau, freeze_counters(d), self.rbar, self.q, self.terminal)


def rbar_inactive(children: tuple) -> tuple:
    return tuple((name, None) for name in sorted(children))


def rbar_set(rbar: tuple, child: str, value) -> tuple:
    return tuple((n, value if n == child else v) for n, v in rbar)


def rbar_get(rbar: tuple, child: str):
    for n, v in rbar:
        if n == child:
            return v
    raise KeyError(child)
