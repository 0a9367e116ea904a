"""Quantifier-free conditions over a database schema.

Conditions are boolean combinations of comparison atoms between terms
(variable navigation chains or constants) and relational membership atoms.
They are kept as immutable ASTs; negation normal form is computed on demand
and negation only ever reaches atoms.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Union

EQ = "="
NEQ = "!="


@dataclass(frozen=True)
class Var:
    """A navigation chain rooted at a variable: name(.attr)*.

    An empty path denotes the variable itself.  Non-empty paths navigate
    foreign keys, ending at an arbitrary attribute.
    """

    name: str
    path: tuple[str, ...] = ()

    def __str__(self) -> str:
        return ".".join((self.name,) + self.path)


@dataclass(frozen=True)
class Const:
    """A string constant, or null when value is None."""

    value: str | None

    def __str__(self) -> str:
        return "null" if self.value is None else '"%s"' % self.value


NULL = Const(None)

Term = Union[Var, Const]


@dataclass(frozen=True)
class TrueCond:
    def __str__(self) -> str:
        return "true"


@dataclass(frozen=True)
class FalseCond:
    def __str__(self) -> str:
        return "false"


@dataclass(frozen=True)
class Cmp:
    lhs: Term
    op: str  # EQ or NEQ
    rhs: Term

    def __str__(self) -> str:
        return f"{self.lhs} {self.op} {self.rhs}"


@dataclass(frozen=True)
class Rel:
    """Relational atom R(id, a1, ..., an); positive=False is its negation."""

    name: str
    args: tuple[Term, ...]
    positive: bool = True

    def __str__(self) -> str:
        body = "%s(%s)" % (self.name, ", ".join(map(str, self.args)))
        return body if self.positive else "not " + body


@dataclass(frozen=True)
class Not:
    sub: "Condition"

    def __str__(self) -> str:
        return f"not ({self.sub})"


@dataclass(frozen=True)
class And:
    parts: tuple["Condition", ...]

    def __str__(self) -> str:
        return " and ".join(f"({p})" for p in self.parts)


@dataclass(frozen=True)
class Or:
    parts: tuple["Condition", ...]

    def __str__(self) -> str:
        return " or ".join(f"({p})" for p in self.parts)


Condition = Union[TrueCond, FalseCond, Cmp, Rel, Not, And, Or]

TRUE = TrueCond()
FALSE = FalseCond()


def conj(*parts: Condition) -> Condition:
    parts = tuple(p for p in parts if not isinstance(p, TrueCond))
    if any(isinstance(p, FalseCond) for p in parts):
        return FALSE
    if not parts:
        return TRUE
    if len(parts) == 1:
        return parts[0]
    return And(parts)


def disj(*parts: Condition) -> Condition:
    parts = tuple(p for p in parts if not isinstance(p, FalseCond))
    if any(isinstance(p, TrueCond) for p in parts):
        return TRUE
    if not parts:
        return FALSE
    if len(parts) == 1:
        return parts[0]
    return Or(parts)


def implies(a: Condition, b: Condition) -> Condition:
    return disj(Not(a), b)


def negate(c: Condition) -> Condition:
    """Logical negation, immediately pushed into normal form."""
    return to_nnf(Not(c))


@lru_cache(maxsize=None)
def to_nnf(c: Condition) -> Condition:
    """Push negations down to atoms; eliminates Not nodes entirely.

    not (x = y) becomes x != y and vice versa; not R(..) flips the atom's
    polarity; De Morgan over and/or; double negations cancel.
    """
    if isinstance(c, (TrueCond, FalseCond, Cmp, Rel)):
        return c
    if isinstance(c, And):
        return conj(*(to_nnf(p) for p in c.parts))
    if isinstance(c, Or):
        return disj(*(to_nnf(p) for p in c.parts))
    if isinstance(c, Not):
        s = c.sub
        if isinstance(s, TrueCond):
            return FALSE
        if isinstance(s, FalseCond):
            return TRUE
        if isinstance(s, Cmp):
            return Cmp(s.lhs, NEQ if s.op == EQ else EQ, s.rhs)
        if isinstance(s, Rel):
            return Rel(s.name, s.args, not s.positive)
        if isinstance(s, Not):
            return to_nnf(s.sub)
        if isinstance(s, And):
            return disj(*(to_nnf(Not(p)) for p in s.parts))
        if isinstance(s, Or):
            return conj(*(to_nnf(Not(p)) for p in s.parts))
    raise TypeError(f"not a condition: {c!r}")


def is_nnf(c: Condition) -> bool:
    if isinstance(c, (TrueCond, FalseCond, Cmp, Rel)):
        return True
    if isinstance(c, (And, Or)):
        return all(is_nnf(p) for p in c.parts)
    return False


def atoms(c: Condition) -> Iterator[Condition]:
    """All Cmp/Rel atoms of c (in NNF polarity if c is in NNF)."""
    if isinstance(c, (Cmp, Rel)):
        yield c
    elif isinstance(c, (And, Or)):
        for p in c.parts:
            yield from atoms(p)
    elif isinstance(c, Not):
        yield from atoms(to_nnf(c))


def terms(c: Condition) -> Iterator[Term]:
    for a in atoms(c):
        if isinstance(a, Cmp):
            yield a.lhs
            yield a.rhs
        else:
            yield from a.args


def free_vars(c: Condition) -> set[str]:
    return {t.name for t in terms(c) if isinstance(t, Var)}


def constants(c: Condition) -> set[str | None]:
    """Constant values mentioned in c (None stands for null)."""
    return {t.value for t in terms(c) if isinstance(t, Const)}
