"""Symbolic semantics: successor computation over partial symbolic instances.

A step applies one service: the pre-condition extends the current type
conjunct by conjunct, propagation projects onto the kept variables, the
post-condition extends again, and updates adjust the stored-tuple counters.
Opening a child task extends by its (parent-scoped) opening condition and
activates it; closing deactivates it and merges an achievable return type
over the returned variables.  Child behavior is summarized by memoized
sub-searches keyed on the input type passed at opening.

For the task under verification every step is additionally paired with the
compatible moves of the property automaton: asserted conditions extend the
post-state via eval, the service literals must match the applied service.
"""

from __future__ import annotations

from dataclasses import dataclass

from .conditions import EQ, Condition, TRUE, conj as cond_and, to_nnf, Not
from .isotypes import (
    ExpressionUniverse, IsoType, build_universe, close_and_check, conjuncts,
    eval_extensions, project, rename_tuple,
)
from .ltl import BuchiAutomaton, ltl_to_buchi
from .model import HASSpec, Task, observable_services
from .parser import LTLFOProperty, property_constants
from .state import PSI, freeze_counters, rbar_get, rbar_inactive, rbar_set


@dataclass(frozen=True)
class Step:
    """Edge label: applied service plus the choice indices that make the
    transition replayable through the successor function."""

    service: str  # observable name: internal service, open:T or close:T
    detail: tuple = ()

    def __str__(self) -> str:
        return self.service


class TaskContext:
    """Compiled per-task successor machinery."""

    def __init__(self, engine: "Engine", task: Task, with_property: bool):
        self.engine = engine
        self.spec = engine.spec
        self.task = task
        self.with_property = with_property
        prop = engine.prop if with_property else None
        self.u: ExpressionUniverse = build_universe(
            engine.spec, task,
            globals_=prop.globals_ if prop else (),
            extra_constants=engine.extra_constants)
        self.children = tuple(t.name for t in engine.spec.children(task.name))
        self.var_names = frozenset(v.name for v in task.variables)
        self.filter_edges: frozenset = frozenset()  # set by static analysis
        self._canon_cache: dict = {}

        # child plumbing: name-identity input/output variable maps
        self.child_info = {}
        for c in engine.spec.children(task.name):
            self.child_info[c.name] = {
                "task": c,
                "opening": c.opening_pre,
                "f_in": {("var", n): (("var", n),) for n in c.inputs},
                "f_out": {("var", n): (("var", n),) for n in c.outputs},
                "returned": frozenset(c.outputs),
            }

        # update plumbing per internal service
        self.update_info = {}
        for s in task.services:
            upd = s.insert or s.retrieve
            if upd is None:
                continue
            rel_name, tup = upd
            rel = task.relation(rel_name)
            ins_map: dict = {}
            for z, attr in zip(tup, rel.attrs):
                ins_map.setdefault(("var", z), []).append(("attr", rel_name, attr.name))
            ret_map = {("attr", rel_name, attr.name): (("var", z),)
                       for z, attr in zip(tup, rel.attrs)}
            self.update_info[s.name] = {
                "rel": rel_name,
                "vars": frozenset(tup),
                "to_rel": {k: tuple(v) for k, v in ins_map.items()},
                "to_vars": ret_map,
            }

        # product moves per automaton state
        self.moves = None
        if with_property:
            aut = engine.automaton
            neg_cache: dict[str, Condition] = {}
            self.moves = []
            for q in range(aut.n_states):
                outs = []
                for pos, neg, dest in aut.transitions[q]:
                    req = None
                    conds = []
                    forb = set()
                    for lit in pos:
                        if lit[0] == "svc":
                            req = lit[1]
                        else:
                            conds.append(engine.prop.prop_map[lit[1]])
                    for lit in neg:
                        if lit[0] == "svc":
                            forb.add(lit[1])
                        else:
                            k = lit[1]
                            if k not in neg_cache:
                                neg_cache[k] = to_nnf(Not(engine.prop.prop_map[k]))
                            conds.append(neg_cache[k])
                    combined = to_nnf(cond_and(*conds)) if conds else TRUE
                    outs.append((req, frozenset(forb), combined, dest))
                self.moves.append(outs)

    # -- static-analysis filtering ------------------------------------------

    def canon(self, tau: IsoType) -> IsoType:
        """Drop non-violating edges (when enabled) and re-close."""
        if not self.filter_edges or tau.is_empty():
            return tau
        got = self._canon_cache.get(id(tau))
        if got is not None:
            return got
        kept = [e for e in tau.edges if self.u.edge_id(*e) not in self.filter_edges]
        out = close_and_check(self.u, kept)
        assert out is not None
        self._canon_cache[id(tau)] = out
        return out

    def null_eid(self) -> int:
        return self.u.null_id

    def var_eid(self, name: str) -> int:
        return self.u.expr_id(("var", name))

    # -- initial states -------------------------------------------------------

    def initial_raw(self) -> list[tuple[Step, PSI]]:
        """Pre-automaton initial PSIs paired with the opening step label."""
        if self.task.parent is None:
            base = self.u.empty_type
            outs = []
            for i, tau in enumerate(eval_extensions(self.u, base, self.spec.global_pre)):
                psi = PSI(self.canon(tau), (), rbar_inactive(self.children), -1)
                outs.append((Step(f"open:{self.task.name}", (i,)), psi))
            return outs
        raise ValueError("non-root initial states come from opening types")

    def initial_from_opening(self, input_tau: IsoType) -> list[tuple[Step, PSI]]:
        extra = [(self.var_eid(n), self.u.null_id, EQ)
                 for n in self.var_names - set(self.task.inputs)]
        tau = input_tau.extend(extra)
        if tau is None:
            return []
        psi = PSI(self.canon(tau), (), rbar_inactive(self.children), -1)
        return [(Step(f"open:{self.task.name}", (0,)), psi)]


class Engine:
    """Shared machinery for one verification run: contexts, the negated
    property automaton, child sub-search memo tables and budgets."""

    def __init__(self, spec: HASSpec, opts, prop: LTLFOProperty | None = None):
        self.spec = spec
        self.opts = opts
        self.prop = prop
        self.extra_constants = property_constants(prop) if prop else set()
        self.automaton: BuchiAutomaton | None = None
        if prop is not None:
            task = spec.task(prop.task)
            svc_props = frozenset(
                ("svc", s) for s in observable_services(spec, task))
            self.automaton = ltl_to_buchi(prop.skeleton, svc_props)
        self._contexts: dict[tuple[str, bool], TaskContext] = {}
        self._opening_keys: dict[str, set] = {}
        self._opening_list: dict[str, list[IsoType]] = {}
        self._returns_memo: dict[tuple, tuple] = {}
        self._succ_cache: dict[tuple, list] = {}
        self.budget = None  # set by the search driver

    def context(self, task_name: str, with_property: bool = False) -> TaskContext:
        key = (task_name, with_property)
        if key not in self._contexts:
            self._contexts[key] = TaskContext(self, self.spec.task(task_name),
                                              with_property)
        return self._contexts[key]

    # -- child sub-searches ----------------------------------------------------

    def record_opening(self, child: str, input_tau: IsoType) -> None:
        keys = self._opening_keys.setdefault(child, set())
        if input_tau not in keys:
            keys.add(input_tau)
            self._opening_list.setdefault(child, []).append(input_tau)

    def opening_types(self, child: str) -> list[IsoType]:
        return list(self._opening_list.get(child, []))

    def child_returns(self, child: str, input_tau: IsoType,
                      parent_ctx: TaskContext) -> tuple:
        """Achievable return types of a child activation, expressed over the
        parent's universe, memoized per (child, opening input type)."""
        memo_key = (child, input_tau)
        cached = self._returns_memo.get(memo_key)
        if cached is not None:
            return cached
        ctx = self.context(child)
        info = parent_ctx.child_info[child]
        if self.opts.closing == "all":
            # unconstrained return over the returned variables
            result = (parent_ctx.u.empty_type,)
            self._returns_memo[memo_key] = result
            return result
        from .search import km_search  # deferred to keep the layering simple
        initials = ctx.initial_from_opening(input_tau)
        tree = km_search(self, ctx, initials)
        outs = []
        out_heads = frozenset(ctx.task.outputs)
        for node in tree.nodes:
            if not node.psi.terminal:
                continue
            ret = project(ctx.u, node.psi.tau, out_heads)
            moved = rename_tuple(ctx.u, ret, parent_ctx.u, info["f_out"])
            if moved is not None and moved not in outs:
                outs.append(moved)
        outs.sort(key=lambda t: (t.classes, tuple(sorted(t.neqs))))
        result = tuple(outs)
        self._returns_memo[memo_key] = result
        return result

    # -- successor function ------------------------------------------------------

    def successors(self, ctx: TaskContext, psi: PSI) -> list[tuple[Step, PSI]]:
        key = (id(ctx), psi)
        cached = self._succ_cache.get(key)
        if cached is not None:
            return cached
        out = self._successors_uncached(ctx, psi)
        self._succ_cache[key] = out
        return out

    def _successors_uncached(self, ctx: TaskContext, psi: PSI) -> list[tuple[Step, PSI]]:
        raw = self._raw_successors(ctx, psi)
        if not ctx.with_property:
            return raw
        out = []
        for step, nxt in raw:
            for ti, (req, forb, cond, dest) in enumerate(ctx.moves[psi.q]):
                if req is not None and req != step.service:
                    continue
                if step.service in forb:
                    continue
                for ei, tau in enumerate(eval_extensions(ctx.u, nxt.tau, cond)):
                    out.append((Step(step.service, step.detail + (ti, ei)),
                                PSI(ctx.canon(tau), nxt.counters, nxt.rbar,
                                    dest, nxt.terminal)))
        return out

    def initial_product(self, ctx: TaskContext,
                        raw_initials: list[tuple[Step, PSI]]) -> list[tuple[Step, PSI]]:
        """Pair pre-automaton initial states with the automaton moves on the
        opening letter of the local run."""
        if not ctx.with_property:
            return raw_initials
        out = []
        q0 = self.automaton.initial
        for step, psi in raw_initials:
            for ti, (req, forb, cond, dest) in enumerate(ctx.moves[q0]):
                if req is not None and req != step.service:
                    continue
                if step.service in forb:
                    continue
                for ei, tau in enumerate(eval_extensions(ctx.u, psi.tau, cond)):
                    out.append((Step(step.service, step.detail + (ti, ei)),
                                PSI(ctx.canon(tau), psi.counters, psi.rbar, dest)))
        return out

    def _raw_successors(self, ctx: TaskContext, psi: PSI) -> list[tuple[Step, PSI]]:
        if psi.terminal:
            return []
        out: list[tuple[Step, PSI]] = []
        u = ctx.u
        task = ctx.task
        all_inactive = all(v is None for _, v in psi.rbar)

        if all_inactive:
            for svc in task.services:
                out.extend(self._internal_steps(ctx, psi, svc))

        for child in ctx.children:
            info = ctx.child_info[child]
            state = rbar_get(psi.rbar, child)
            if state is None:
                for i, theta in enumerate(conjuncts(u, info["opening"])):
                    tau = psi.tau.extend(theta)
                    if tau is None:
                        continue
                    tau = ctx.canon(tau)
                    key = self._open_child(ctx, child, tau)
                    out.append((Step(f"open:{child}", (i,)),
                                PSI(tau, psi.counters,
                                    rbar_set(psi.rbar, child, key), psi.q)))
            else:
                returns = self.child_returns(child, state, ctx)
                keep = ctx.var_names - info["returned"]
                base = project(u, psi.tau, keep)
                for i, ret in enumerate(returns):
                    tau = base.extend(ret.edges)
                    if tau is None:
                        continue
                    out.append((Step(f"close:{child}", (i,)),
                                PSI(ctx.canon(tau), psi.counters,
                                    rbar_set(psi.rbar, child, None), psi.q)))

        if all_inactive and task.parent is not None:
            for i, theta in enumerate(conjuncts(u, task.closing_pre)):
                tau = psi.tau.extend(theta)
                if tau is None:
                    continue
                out.append((Step(f"close:{task.name}", (i,)),
                            PSI(ctx.canon(tau), psi.counters, psi.rbar, psi.q,
                                terminal=True)))
        return out

    def _open_child(self, ctx: TaskContext, child: str, parent_tau: IsoType) -> IsoType:
        child_ctx = self.context(child)
        if self.opts.closing == "all":
            return child_ctx.u.empty_type
        info = ctx.child_info[child]
        passed = project(ctx.u, parent_tau, frozenset(k[1] for k in info["f_in"]))
        moved = rename_tuple(ctx.u, passed, child_ctx.u, info["f_in"])
        assert moved is not None
        moved = child_ctx.canon(moved)
        self.record_opening(child, moved)
        return moved

    def _internal_steps(self, ctx: TaskContext, psi: PSI, svc) -> list:
        u = ctx.u
        out = []
        upd = ctx.update_info.get(svc.name)
        literal_snapshot = getattr(self.opts, "insert_snapshot", "pre") == "literal"
        for i1, theta1 in enumerate(conjuncts(u, svc.pre)):
            tau0 = psi.tau.extend(theta1)
            if tau0 is None:
                continue
            insert_type = None
            if svc.insert is not None:
                src = psi.tau if literal_snapshot else tau0
                snap = project(u, src, upd["vars"])
                insert_type = rename_tuple(u, snap, u, upd["to_rel"])
                if insert_type is None:
                    continue
                insert_type = ctx.canon(insert_type)
            base = project(u, tau0, frozenset(svc.propagated))
            for i2, theta2 in enumerate(conjuncts(u, svc.post)):
                tau1 = base.extend(theta2)
                if tau1 is None:
                    continue
                if svc.insert is None and svc.retrieve is None:
                    out.append((Step(svc.name, (i1, i2)),
                                PSI(ctx.canon(tau1), psi.counters, psi.rbar, psi.q)))
                elif svc.insert is not None:
                    counters = psi.counter_dict()
                    k = (upd["rel"], insert_type)
                    counters[k] = counters.get(k, 0) + 1
                    out.append((Step(svc.name, (i1, i2)),
                                PSI(ctx.canon(tau1), freeze_counters(counters),
                                    psi.rbar, psi.q)))
                else:
                    rel = upd["rel"]
                    for ki, (key, count) in enumerate(psi.counters):
                        if key[0] != rel:
                            continue
                        restored = rename_tuple(u, key[1], u, upd["to_vars"])
                        if restored is None:
                            continue
                        tau2 = tau1.extend(restored.edges)
                        if tau2 is None:
                            continue
                        counters = psi.counter_dict()
                        counters[key] = count - 1  # omega - 1 stays omega
                        out.append((Step(svc.name, (i1, i2, ki)),
                                    PSI(ctx.canon(tau2), freeze_counters(counters),
                                        psi.rbar, psi.q)))
        return out
