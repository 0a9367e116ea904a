"""Cyclomatic complexity of workflow specifications.

Projecting all services observable in a task onto a single non-id variable
yields a finite control-flow graph whose nodes are the constants compared
with that variable (plus an "anything else" node); every service
contributes an edge wherever its projected pre-condition admits the source
and its projected effect admits the target.  The specification's complexity
is the maximum of |E| - |V| + 2 over all such projections.
"""

from __future__ import annotations

from dataclasses import dataclass

from .conditions import And, Cmp, Condition, Const, FalseCond, Or, Rel, TrueCond, Var
from .model import HASSpec, Task

TOP = ("other",)  # any value not named by a compared constant


@dataclass
class ControlFlowGraph:
    task: str
    var: str
    nodes: list
    edges: list  # (service, u, v) labeled transitions

    @property
    def complexity(self) -> int:
        return len(self.edges) - len(self.nodes) + 2


def _compared_constants(conds, var: str) -> set:
    out = set()
    for cond in conds:
        stack = [cond]
        while stack:
            c = stack.pop()
            if isinstance(c, (And, Or)):
                stack.extend(c.parts)
            elif isinstance(c, Cmp):
                sides = ((c.lhs, c.rhs), (c.rhs, c.lhs))
                for a, b in sides:
                    if isinstance(a, Var) and a.name == var and not a.path \
                            and isinstance(b, Const):
                        out.add(b.value)
    return out


def _admits(cond: Condition, var: str, node) -> bool:
    """Three-valued evaluation with every atom not purely about var unknown;
    a node is admitted unless the condition is definitely false there."""

    def ev(c):
        if isinstance(c, TrueCond):
            return True
        if isinstance(c, FalseCond):
            return False
        if isinstance(c, And):
            vals = [ev(p) for p in c.parts]
            if any(v is False for v in vals):
                return False
            return True if all(v is True for v in vals) else None
        if isinstance(c, Or):
            vals = [ev(p) for p in c.parts]
            if any(v is True for v in vals):
                return True
            return False if all(v is False for v in vals) else None
        if isinstance(c, Cmp):
            for a, b in ((c.lhs, c.rhs), (c.rhs, c.lhs)):
                if isinstance(a, Var) and a.name == var and not a.path \
                        and isinstance(b, Const):
                    if node == TOP:
                        # an unnamed value differs from every named constant
                        return c.op != "="
                    eq = (node == b.value)
                    return eq if c.op == "=" else not eq
            return None
        if isinstance(c, Rel):
            return None
        raise TypeError(c)

    return ev(cond) is not False


def control_flow_projection(spec: HASSpec, task: Task, var: str) -> ControlFlowGraph:
    """Transition graph of one non-id variable under all services observable
    in the task (internal services, its own opening/closing, and the
    opening/closing of its children)."""
    children = spec.children(task.name)
    conds = [s.pre for s in task.services] + [s.post for s in task.services]
    conds.append(task.closing_pre)
    for c in children:
        conds.append(c.opening_pre)
    if task.parent is None:
        conds.append(spec.global_pre)
    consts = _compared_constants(conds, var)
    # constants a child's closing condition compares with the mapped output
    for c in children:
        if var in c.outputs:
            consts |= _compared_constants([c.closing_pre], var)
    nodes = sorted(consts, key=lambda v: (v is None, v)) + [TOP]

    edges = []

    def add_edges(service, pre_admits, post_admits, changes):
        for u in nodes:
            if not pre_admits(u):
                continue
            if not changes:
                if post_admits(u):
                    edges.append((service, u, u))
            else:
                for v in nodes:
                    if post_admits(v):
                        edges.append((service, u, v))

    for s in task.services:
        propagated = var in s.propagated
        add_edges(s.name,
                  lambda u, c=s.pre: _admits(c, var, u),
                  lambda v, c=s.post: _admits(c, var, v),
                  changes=not propagated)

    for c in children:
        add_edges(f"open:{c.name}",
                  lambda u, cond=c.opening_pre: _admits(cond, var, u),
                  lambda v: True, changes=False)
        if var in c.outputs:
            add_edges(f"close:{c.name}", lambda u: True,
                      lambda v, cond=c.closing_pre: _admits(cond, var, v),
                      changes=True)
        else:
            add_edges(f"close:{c.name}", lambda u: True, lambda v: True,
                      changes=False)

    if task.parent is None:
        add_edges(f"open:{task.name}", lambda u: True,
                  lambda v: _admits(spec.global_pre, var, v), changes=True)
        # root closing never fires (its pre-condition is false)
    else:
        if var in task.inputs:
            add_edges(f"open:{task.name}", lambda u: True, lambda v: True,
                      changes=True)
        else:
            null_node = None if any(n is None for n in consts) else TOP
            add_edges(f"open:{task.name}", lambda u: True,
                      lambda v: v == null_node, changes=True)
        add_edges(f"close:{task.name}",
                  lambda u: _admits(task.closing_pre, var, u),
                  lambda v: True, changes=False)

    return ControlFlowGraph(task.name, var, nodes, edges)


def cyclomatic_complexity(spec: HASSpec) -> int:
    """Maximum projected control-flow complexity over all tasks and non-id
    variables; 1 for specifications without any non-id variable."""
    best = None
    for task in spec.tasks:
        for v in task.variables:
            if v.ref is not None:
                continue
            best = max(best or 0, control_flow_projection(spec, task, v.name).complexity)
    return 1 if best is None else best
