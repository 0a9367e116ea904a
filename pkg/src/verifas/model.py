"""Hierarchical artifact-system specifications and their validation.

A specification is a database schema with acyclic foreign keys, a rooted
tree of tasks (each with typed variables, artifact relations and services),
and a global pre-condition over the root task's variables.

Validation never raises on bad specs: violations are data, returned as a
report with a human-readable locus per finding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from .conditions import (
    Cmp,
    Condition,
    Const,
    FalseCond,
    Rel,
    TrueCond,
    Var,
    atoms,
    free_vars,
    constants as cond_constants,
)

# Variable / attribute types: ("val",) or ("id", relation_name)
VAL = ("val",)


def id_type(relation: str) -> tuple:
    return ("id", relation)


@dataclass(frozen=True)
class Attr:
    """Database relation attribute; ref names the referenced relation for
    foreign keys and is None for value attributes."""

    name: str
    ref: str | None = None


@dataclass(frozen=True)
class Relation:
    name: str
    attrs: tuple[Attr, ...]  # declared order, ID excluded

    def attr(self, name: str) -> Attr | None:
        for a in self.attrs:
            if a.name == name:
                return a
        return None


@dataclass(frozen=True)
class DatabaseSchema:
    relations: tuple[Relation, ...]

    def relation(self, name: str) -> Relation | None:
        for r in self.relations:
            if r.name == name:
                return r
        return None


@dataclass(frozen=True)
class Variable:
    name: str
    ref: str | None = None  # None: value variable; else typed R.ID

    @property
    def type(self) -> tuple:
        return VAL if self.ref is None else id_type(self.ref)


@dataclass(frozen=True)
class ArtifactRelation:
    """Updatable per-task relation; attribute types are positional."""

    name: str
    attrs: tuple[Variable, ...]


@dataclass(frozen=True)
class InternalService:
    name: str
    pre: Condition
    post: Condition
    propagated: tuple[str, ...] = ()
    # update: at most one insertion or retrieval of a tuple of variables
    insert: tuple[str, tuple[str, ...]] | None = None  # (relation, vars)
    retrieve: tuple[str, tuple[str, ...]] | None = None


@dataclass(frozen=True)
class Task:
    name: str
    parent: str | None
    variables: tuple[Variable, ...]
    relations: tuple[ArtifactRelation, ...] = ()
    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()
    # opening pre-condition is over the parent's variables; closing over own
    opening_pre: Condition = TrueCond()
    closing_pre: Condition = FalseCond()
    services: tuple[InternalService, ...] = ()

    def var(self, name: str) -> Variable | None:
        for v in self.variables:
            if v.name == name:
                return v
        return None

    def relation(self, name: str) -> ArtifactRelation | None:
        for r in self.relations:
            if r.name == name:
                return r
        return None

    def service(self, name: str) -> InternalService | None:
        for s in self.services:
            if s.name == name:
                return s
        return None


@dataclass(frozen=True)
class HASSpec:
    db: DatabaseSchema
    tasks: tuple[Task, ...]
    global_pre: Condition = TrueCond()

    def task(self, name: str) -> Task | None:
        for t in self.tasks:
            if t.name == name:
                return t
        return None

    @property
    def root(self) -> Task:
        for t in self.tasks:
            if t.parent is None:
                return t
        raise ValueError("spec has no root task")

    def children(self, task: str) -> tuple[Task, ...]:
        return tuple(t for t in self.tasks if t.parent == task)

    def constants(self) -> set[str]:
        """All string constants appearing in any condition of the spec."""
        out: set[str] = set()
        for c in self._all_conditions():
            out |= {v for v in cond_constants(c) if v is not None}
        return out

    def _all_conditions(self) -> Iterator[Condition]:
        yield self.global_pre
        for t in self.tasks:
            yield t.opening_pre
            yield t.closing_pre
            for s in t.services:
                yield s.pre
                yield s.post


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, locus: str, message: str) -> None:
        self.violations.append(f"{locus}: {message}")


def validate_schema(db: DatabaseSchema) -> ValidationReport:
    """Check relation well-formedness and foreign-key acyclicity."""
    report = ValidationReport()
    seen = set()
    for rel in db.relations:
        if rel.name in seen:
            report.add(rel.name, "duplicate relation name")
        seen.add(rel.name)
        names = set()
        for a in rel.attrs:
            if a.name == "ID" or a.name in names:
                report.add(f"{rel.name}.{a.name}", "duplicate attribute name")
            names.add(a.name)
            if a.ref is not None and db.relation(a.ref) is None:
                report.add(f"{rel.name}.{a.name}",
                           f"dangling reference to unknown relation {a.ref}")

    # FK cycle detection with a witness path
    color: dict[str, int] = {}  # 0 unvisited, 1 on stack, 2 done
    stack: list[str] = []

    def visit(name: str) -> None:
        color[name] = 1
        stack.append(name)
        rel = db.relation(name)
        if rel is not None:
            for a in rel.attrs:
                if a.ref is None or db.relation(a.ref) is None:
                    continue
                c = color.get(a.ref, 0)
                if c == 1:
                    path = stack[stack.index(a.ref):] + [a.ref]
                    report.add("schema", "FK cycle " + "->".join(path))
                elif c == 0:
                    visit(a.ref)
        stack.pop()
        color[name] = 2

    for rel in db.relations:
        if color.get(rel.name, 0) == 0:
            visit(rel.name)
    return report


def chain_type(db: DatabaseSchema, start: tuple, path: tuple[str, ...]) -> tuple | None:
    """Type of a navigation chain, or None if the chain is ill-formed.

    start is the root's type; every intermediate path element must be a
    foreign key, the last may be any attribute of the relation reached.
    """
    cur = start
    for i, step in enumerate(path):
        if cur == VAL or cur[0] != "id":
            return None
        rel = db.relation(cur[1])
        if rel is None:
            return None
        attr = rel.attr(step)
        if attr is None:
            return None
        cur = VAL if attr.ref is None else id_type(attr.ref)
        if i < len(path) - 1 and cur == VAL:
            return None
    return cur


def _term_type(db: DatabaseSchema, env: dict[str, Variable], t) -> tuple | None:
    if isinstance(t, Const):
        return ("null",) if t.value is None else VAL
    v = env.get(t.name)
    if v is None:
        return None
    return chain_type(db, v.type, t.path)


def _check_condition(db: DatabaseSchema, env: dict[str, Variable],
                     cond: Condition, locus: str, report: ValidationReport) -> None:
    for a in atoms(cond):
        if isinstance(a, Cmp):
            for side in (a.lhs, a.rhs):
                if _term_type(db, env, side) is None:
                    report.add(locus, f"cannot type term {side} in {a}")
        elif isinstance(a, Rel):
            rel = db.relation(a.name)
            if rel is None:
                report.add(locus, f"unknown relation {a.name}")
                continue
            if len(a.args) != len(rel.attrs) + 1:
                report.add(locus, f"{a.name} expects {len(rel.attrs) + 1} arguments")
                continue
            head_t = _term_type(db, env, a.args[0])
            if head_t is None or head_t not in (id_type(a.name), ("null",)):
                report.add(locus, f"first argument of {a.name} must have type {a.name}.ID")
            for arg, attr in zip(a.args[1:], rel.attrs):
                t = _term_type(db, env, arg)
                want = VAL if attr.ref is None else id_type(attr.ref)
                if t is None:
                    report.add(locus, f"cannot type term {arg} in {a}")
                elif t != want and t != ("null",):
                    report.add(locus, f"argument {arg} of {a.name}.{attr.name} has wrong type")


def _is_subsequence(sub: tuple[str, ...], seq: tuple[str, ...]) -> bool:
    it = iter(seq)
    return all(name in it for name in sub)


def validate_spec(spec: HASSpec) -> ValidationReport:
    """Full structural validation; assumes validate_schema already passed."""
    report = ValidationReport()
    roots = [t for t in spec.tasks if t.parent is None]
    if len(roots) != 1:
        report.add("hierarchy", f"expected exactly one root task, found {len(roots)}")
        return report
    root = roots[0]

    # tree shape: every parent resolves, no cycles
    names = [t.name for t in spec.tasks]
    if len(set(names)) != len(names):
        report.add("hierarchy", "duplicate task names")
        return report
    for t in spec.tasks:
        if t.parent is not None and spec.task(t.parent) is None:
            report.add(t.name, f"unknown parent task {t.parent}")
            return report
    for t in spec.tasks:
        seen = {t.name}
        cur = t.parent
        while cur is not None:
            if cur in seen:
                report.add(t.name, "task hierarchy contains a cycle")
                return report
            seen.add(cur)
            cur = spec.task(cur).parent

    all_vars: set[str] = set()
    rel_names: set[str] = set()
    for t in spec.tasks:
        var_order = tuple(v.name for v in t.variables)
        for v in t.variables:
            if v.ref is not None and spec.db.relation(v.ref) is None:
                report.add(f"{t.name}.{v.name}", f"unknown relation {v.ref}")
        if len(set(var_order)) != len(var_order):
            report.add(t.name, "duplicate variable names")
        all_vars |= {f"{t.name}.{n}" for n in var_order}
        for io, which in ((t.inputs, "IN"), (t.outputs, "OUT")):
            if not _is_subsequence(io, var_order):
                report.add(t.name, f"{which} list is not a subsequence of the task variables")
        for r in t.relations:
            if r.name in rel_names:
                report.add(f"{t.name}.{r.name}", "artifact relation name reused across tasks")
            rel_names.add(r.name)
            for a in r.attrs:
                if a.ref is not None and spec.db.relation(a.ref) is None:
                    report.add(f"{t.name}.{r.name}.{a.name}", f"unknown relation {a.ref}")

    # root conventions
    if not isinstance(root.opening_pre, TrueCond):
        report.add(root.name, "root opening pre-condition must be true")
    if not isinstance(root.closing_pre, FalseCond):
        report.add(root.name, "root closing pre-condition must be false")
    if root.inputs or root.outputs:
        report.add(root.name, "root task cannot have input or output variables")

    for t in spec.tasks:
        env = {v.name: v for v in t.variables}
        parent = spec.task(t.parent) if t.parent else None
        if parent is not None:
            penv = {v.name: v for v in parent.variables}
            _check_condition(spec.db, penv, t.opening_pre, f"{t.name}.OPEN", report)
            _check_condition(spec.db, env, t.closing_pre, f"{t.name}.CLOSE", report)
            # input/output maps resolve by name into the parent, same types
            for io, which in ((t.inputs, "input"), (t.outputs, "output")):
                for n in io:
                    child_v = t.var(n)
                    parent_v = parent.var(n)
                    if parent_v is None:
                        report.add(f"{t.name}.{n}", f"{which} variable has no parent counterpart")
                    elif child_v is not None and parent_v.type != child_v.type:
                        report.add(f"{t.name}.{n}", f"{which} variable type differs from parent's")
            bad = set(t.outputs) & set(parent.inputs)
            if bad:
                report.add(t.name, "returned variables overlap parent input variables: "
                           + ", ".join(sorted(bad)))

        for s in t.services:
            locus = f"{t.name}.{s.name}"
            _check_condition(spec.db, env, s.pre, locus + ".PRE", report)
            _check_condition(spec.db, env, s.post, locus + ".POST", report)
            prop = set(s.propagated)
            missing = set(t.inputs) - prop
            if missing:
                report.add(locus, "propagated variables must include inputs: "
                           + ", ".join(sorted(missing)))
            if not prop <= set(v.name for v in t.variables):
                report.add(locus, "propagated variables must be task variables")
            update = s.insert or s.retrieve
            if s.insert and s.retrieve:
                report.add(locus, "service may have at most one update")
            if update is not None:
                if prop != set(t.inputs):
                    report.add(locus, "services with an update propagate exactly the inputs")
                rel_name, tup = update
                rel = t.relation(rel_name)
                if rel is None:
                    report.add(locus, f"unknown artifact relation {rel_name}")
                elif len(tup) != len(rel.attrs):
                    report.add(locus, f"update tuple arity differs from {rel_name}")
                else:
                    for z, attr in zip(tup, rel.attrs):
                        v = t.var(z)
                        if v is None:
                            report.add(locus, f"update variable {z} is not a task variable")
                        elif v.type != attr.type:
                            report.add(locus, f"update variable {z} type differs from "
                                       f"{rel_name}.{attr.name}")

    renv = {v.name: v for v in root.variables}
    _check_condition(spec.db, renv, spec.global_pre, "INIT", report)
    return report


def observable_services(spec: HASSpec, task: Task) -> list[str]:
    """Service names observable in local runs of task: its internal services,
    its own opening/closing, and the opening/closing of direct children."""
    out = [s.name for s in task.services]
    out += [f"open:{task.name}", f"close:{task.name}"]
    for c in spec.children(task.name):
        out += [f"open:{c.name}", f"close:{c.name}"]
    return out
