"""Concrete-semantics oracle: explicit-state execution of tiny specs.

Used to cross-check the symbolic engine: bounded breadth-first exploration
of actual valuations and stored multisets, full-type abstraction of
concrete states, and an explicit-state accepting-cycle check on the product
with the property automaton.  Kept deliberately independent of the
symbolic search code paths.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass


def _tuple_key(tup):
    return tuple((v is None, v or "") for v in tup)

from verifas.conditions import EQ, NEQ
from verifas.state import PSI, freeze_counters
from oracles import eval_condition


@dataclass(frozen=True)
class CState:
    values: tuple          # (var name, value) sorted
    stored: tuple          # (relation, sorted tuple of value-tuples)

    def valuation(self) -> dict:
        return dict(self.values)


def initial_cstates(spec, domain, extra_env=()):
    """All valuations of the root task satisfying the global pre-condition."""
    root = spec.root
    names = [v.name for v in root.variables]
    out = []
    for combo in itertools.product(domain, repeat=len(names)):
        val = dict(zip(names, combo))
        val.update(extra_env)
        if eval_condition({}, val, spec.global_pre):
            out.append(CState(tuple(sorted(zip(names, combo))),
                              tuple((r.name, ()) for r in root.relations)))
    return out


def concrete_successors(spec, state: CState, domain, extra_env=(),
                        store_cap: int = 8):
    """(service name, next state) pairs under the concrete semantics."""
    root = spec.root
    names = [v.name for v in root.variables]
    val = state.valuation()
    env = dict(extra_env)
    out = []
    for svc in root.services:
        ctx_val = {**val, **env}
        if not eval_condition({}, ctx_val, svc.pre):
            continue
        prop = set(svc.propagated)
        free = [n for n in names if n not in prop]
        upd = svc.insert or svc.retrieve
        for combo in itertools.product(domain, repeat=len(free)):
            nxt = dict(val)
            nxt.update(zip(free, combo))
            if svc.retrieve is not None:
                rel_name, tup_vars = svc.retrieve
                stored = dict(state.stored)
                for tup in set(stored[rel_name]):
                    cand = dict(nxt)
                    cand.update(zip(tup_vars, tup))
                    if not eval_condition({}, {**cand, **env}, svc.post):
                        continue
                    remaining = list(stored[rel_name])
                    remaining.remove(tup)
                    new_stored = tuple(
                        (r, tuple(sorted(remaining, key=_tuple_key)) if r == rel_name else s)
                        for r, s in state.stored)
                    out.append((svc.name, CState(
                        tuple(sorted(cand.items())), new_stored)))
                continue
            if not eval_condition({}, {**nxt, **env}, svc.post):
                continue
            if svc.insert is not None:
                rel_name, tup_vars = svc.insert
                tup = tuple(val[z] for z in tup_vars)  # current values
                stored = dict(state.stored)
                if len(stored[rel_name]) >= store_cap:
                    continue
                new_stored = tuple(
                    (r, tuple(sorted(list(s) + [tup], key=_tuple_key)) if r == rel_name else s)
                    for r, s in state.stored)
                out.append((svc.name, CState(tuple(sorted(nxt.items())), new_stored)))
            else:
                out.append((svc.name, CState(tuple(sorted(nxt.items())), state.stored)))
    return out


def bounded_reach(spec, domain, depth=12, store_cap=8, extra_env=(), limit=200000):
    """Concrete states reachable within the given depth and storage bound."""
    frontier = initial_cstates(spec, domain, extra_env)
    seen = set(frontier)
    for _ in range(depth):
        nxt = []
        for s in frontier:
            for _, t in concrete_successors(spec, s, domain, extra_env, store_cap):
                if t not in seen:
                    seen.add(t)
                    nxt.append(t)
                    if len(seen) > limit:
                        raise RuntimeError("state explosion in concrete oracle")
        frontier = nxt
        if not frontier:
            break
    return seen


def _constant_items(u):
    """Every constant expression of the universe with its own value; all
    universally-true constant (in)equalities then fall out of the pairing."""
    return [(e.eid, e.root[1]) for e in u.exprs if e.root[0] == "const"]


def abstract_state(u, spec, state: CState, global_env=()) -> PSI:
    """Full-type abstraction of a concrete state over the task universe."""
    val = dict(state.valuation())
    val.update(global_env)
    consts = _constant_items(u)
    items = [(u.expr_id(("var", n)), v) for n, v in val.items()
             if u.has_expr(("var", n), ())]
    items += consts
    edges = []
    for (e1, v1), (e2, v2) in itertools.combinations(items, 2):
        edges.append((e1, e2, EQ if v1 == v2 else NEQ))
    tau = u.empty_type.extend(edges)
    assert tau is not None
    counters: dict = {}
    root = spec.root
    for rel_name, tuples in state.stored:
        rel = root.relation(rel_name)
        for tup in tuples:
            t_items = [(u.expr_id(("attr", rel_name, a.name)), v)
                       for a, v in zip(rel.attrs, tup)]
            t_items += consts
            t_edges = [(a, b, EQ if x == y else NEQ)
                       for (a, x), (b, y) in itertools.combinations(t_items, 2)]
            t_tau = u.empty_type.extend(t_edges)
            assert t_tau is not None
            key = (rel_name, t_tau)
            counters[key] = counters.get(key, 0) + 1
    return PSI(tau, freeze_counters(counters), rbar=(), q=-1)


def accepting_cycle_exists(spec, automaton, prop_map, domain, global_env,
                           store_cap=0, limit=100000):
    """Explicit-state product check: is an accepting cycle reachable?

    Letters follow the run semantics: the letter at a step pairs the applied
    service with the conditions evaluated on the post-state.  Only the root
    task is supported (no children), so finite-word acceptance is vacuous.
    """

    def letter(service, cstate):
        val = {**cstate.valuation(), **dict(global_env)}
        props = {("svc", service)}
        for key, cond in prop_map.items():
            if eval_condition({}, val, cond):
                props.add(("prop", key))
        return frozenset(props)

    # product nodes: (concrete state, automaton state after its letter)
    start_nodes = set()
    for c0 in initial_cstates(spec, domain, global_env):
        lt = letter(f"open:{spec.root.name}", c0)
        for q in automaton.step({automaton.initial}, lt):
            start_nodes.add((c0, q))

    edges: dict = {}
    seen = set(start_nodes)
    todo = list(start_nodes)
    while todo:
        node = todo.pop()
        c, q = node
        outs = []
        for svc, c2 in concrete_successors(spec, c, domain, global_env, store_cap):
            lt = letter(svc, c2)
            for q2 in automaton.step({q}, lt):
                nxt = (c2, q2)
                outs.append(nxt)
                if nxt not in seen:
                    seen.add(nxt)
                    todo.append(nxt)
                    if len(seen) > limit:
                        raise RuntimeError("product explosion in concrete oracle")
        edges[node] = outs

    # accepting node inside a cycle, reachable from the start set
    index, low, on, stack, sccs = {}, {}, set(), [], []
    counter = [0]
    for v in list(edges):
        if v in index:
            continue
        work = [(v, iter(edges.get(v, ())))]
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on.add(v)
        while work:
            node, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter[0]
                    counter[0] += 1
                    stack.append(w)
                    on.add(w)
                    work.append((w, iter(edges.get(w, ()))))
                    advanced = True
                    break
                if w in on:
                    low[node] = min(low[node], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    x = stack.pop()
                    on.discard(x)
                    comp.append(x)
                    if x == node:
                        break
                sccs.append(comp)
    for comp in sccs:
        comp_set = set(comp)
        nontrivial = any(w in comp_set for v in comp for w in edges.get(v, ()))
        if nontrivial and any(q in automaton.accepting for _, q in comp):
            return True
    return False
