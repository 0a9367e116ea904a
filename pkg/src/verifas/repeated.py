"""Repeated reachability, verdicts and counterexample extraction.

A property is violated by a finite local run reaching a finite-word
accepting automaton state at the task's closing, or by an infinite run
visiting accepting states forever.  The infinite case is decided on the
coverability set: states with an omega counter are repeatedly reachable by
construction; the remaining maximal states are re-explored in a second
phase under the strict-slack coverage order without acceleration, and
accepting states lying on a cycle of that graph are repeatedly reachable.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

from .cover import preceq_cover, preceq_plus
from .ltl import negate_property
from .model import HASSpec
from .parser import LTLFOProperty
from .search import (
    Budget, BudgetExceeded, KMTree, SearchOptions, SearchStats, km_search,
)
from .semantics import Engine, Step, TaskContext
from .state import OMEGA, PSI
from .isotypes import rename_tuple


@dataclass
class WitnessStep:
    service: str
    psi: PSI


@dataclass
class Witness:
    """Finite prefix of steps, optionally with a repeating suffix: the steps
    from lasso_start onward return to the state preceding them with
    componentwise no-smaller counters."""

    steps: list[WitnessStep]
    lasso_start: int | None = None


@dataclass
class Verdict:
    result: str  # "satisfied" | "violated" | "timeout"
    stats: SearchStats
    counterexample: Witness | None = None
    detail: str = ""


def maximal_psis(cover_set: list[PSI], flow_reversed: bool = False):
    """Split the coverability set into the omega-carrying states (repeatedly
    reachable by construction) and the coverage-maximal omega-free states.

    Plain componentwise dominance within (bucket, type) groups is decided
    first; it is cheap and implies the generalized order, which is only
    consulted for the surviving candidates.
    """
    omega_set = [p for p in cover_set if p.has_omega()]
    finite = [p for p in cover_set if not p.has_omega()]
    groups: dict = {}
    for p in cover_set:
        groups.setdefault((p.bucket(), id(p.tau)), []).append(p)

    def leq_dominated(p: PSI) -> bool:
        cd = p.counter_dict()
        for q in groups.get((p.bucket(), id(p.tau)), ()):
            if q is p:
                continue
            qd = q.counter_dict()
            if all(v <= qd.get(k, 0) for k, v in cd.items()) and (
                    qd != cd or q.has_omega()):
                return True
        return False

    candidates = [p for p in finite if not leq_dominated(p)]
    by_bucket: dict = {}
    for p in cover_set:
        by_bucket.setdefault(p.bucket(), []).append(p)
    imax = []
    for p in candidates:
        dominated = False
        for q in by_bucket.get(p.bucket(), ()):
            if q is p or q == p:
                continue
            if preceq_cover(p, q, flow_reversed):
                dominated = True
                break
        if not dominated:
            imax.append(p)
    return omega_set, imax


def phase_two_search(engine: Engine, ctx: TaskContext, imax: list[PSI],
                     phase1: KMTree, stats: SearchStats) -> KMTree:
    """Exploration seeded from the maximal states under strict-slack
    pruning, without acceleration; the resulting graph is closed under the
    recorded transitions and supports cycle detection."""
    opts = engine.opts
    scope = opts.phase2_prune_scope
    prune_against = []
    if scope == "omega":
        prune_against = [n.psi for n in phase1.nodes if n.psi.has_omega()]
    elif scope == "tree":
        prune_against = [n.psi for n in phase1.nodes]
    seeds = {p for p in imax}

    def extra_prune(psi: PSI) -> bool:
        for other in prune_against:
            if psi.bucket() == other.bucket() and preceq_plus(
                    psi, other, opts.flow_reversed):
                return True
        return False

    p2opts = replace(opts, pruning=True)
    cover = lambda a, b: preceq_plus(a, b, opts.flow_reversed)
    initials = [(Step("seed", ()), p) for p in imax]
    return km_search(engine, ctx, initials, opts=p2opts, stats=stats,
                     accelerate=False, cover=cover,
                     extra_prune=extra_prune if scope != "none" else None,
                     record_all_edges=True)


def _graph_edges(tree: KMTree) -> dict[int, list[tuple[Step, int]]]:
    edges: dict[int, list[tuple[Step, int]]] = {i: [] for i in range(len(tree.nodes))}
    for nid, node in enumerate(tree.nodes):
        if node.parent is not None:
            edges[node.parent].append((node.step, nid))
    for src, step, dst in tree.extra_edges:
        edges[src].append((step, dst))
    return edges


def _sccs(edges: dict[int, list]) -> list[list[int]]:
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on: set[int] = set()
    stack: list[int] = []
    out: list[list[int]] = []
    counter = [0]

    for start in edges:
        if start in index:
            continue
        work = [(start, iter(edges[start]))]
        index[start] = low[start] = counter[0]
        counter[0] += 1
        stack.append(start)
        on.add(start)
        while work:
            v, it = work[-1]
            advanced = False
            for _, wnode in it:
                if wnode not in index:
                    index[wnode] = low[wnode] = counter[0]
                    counter[0] += 1
                    stack.append(wnode)
                    on.add(wnode)
                    work.append((wnode, iter(edges[wnode])))
                    advanced = True
                    break
                if wnode in on:
                    low[v] = min(low[v], index[wnode])
            if advanced:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    x = stack.pop()
                    on.discard(x)
                    comp.append(x)
                    if x == v:
                        break
                out.append(comp)
    return out


def repeated_reachable(tree: KMTree, accepting) -> list[int]:
    """Node ids of the phase-two graph in a cycle (an SCC with an internal
    edge) whose state satisfies the accepting predicate."""
    edges = _graph_edges(tree)
    out = []
    for comp in _sccs(edges):
        comp_set = set(comp)
        internal = any(dst in comp_set for v in comp for _, dst in edges[v])
        if not internal:
            continue
        for v in comp:
            if accepting(tree.nodes[v].psi):
                out.append(v)
    return out


def find_cycle(tree: KMTree, start: int) -> list[tuple[Step, int]]:
    """Shortest cycle through start in the recorded transition graph."""
    edges = _graph_edges(tree)
    parent: dict[int, tuple[int, Step]] = {}
    queue = [start]
    seen = {start}
    first = True
    while queue:
        nxt: list[int] = []
        for v in queue:
            for step, dst in edges[v]:
                if dst == start:
                    path = [(step, dst)]
                    cur = v
                    while cur != start:
                        pv, pstep = parent[cur]
                        path.append((pstep, cur))
                        cur = pv
                    path.reverse()
                    return path
                if dst not in seen:
                    seen.add(dst)
                    parent[dst] = (v, step)
                    nxt.append(dst)
        queue = nxt
        first = False
    raise ValueError("start node is not on a cycle")


# -- witness extraction -------------------------------------------------------


class _ReplayError(Exception):
    pass


def _successor_by_label(engine: Engine, ctx: TaskContext, psi: PSI, step: Step) -> PSI:
    for s, nxt in engine.successors(ctx, psi):
        if s == step:
            return nxt
    raise _ReplayError(f"no successor for {step} from {psi}")


def _initial_by_label(engine: Engine, ctx: TaskContext, initials, step: Step) -> PSI:
    for s, psi in initials:
        if s == step:
            return psi
    raise _ReplayError(f"no initial state for {step}")


def materialize_path(engine: Engine, ctx: TaskContext, tree: KMTree,
                     initials, target: int) -> list[WitnessStep]:
    """Concrete replay of the tree path to target.

    Accelerated edges are repaired by pumping: when a later step needs a
    counter that only the accelerated (omega) state provides, the covering
    loop that triggered the acceleration is replayed enough times first.
    """
    path = tree.path_from_root(target)
    pos_of = {nid: i for i, nid in enumerate(path)}
    laps: dict[int, int] = {}  # node id of accelerated edge -> extra laps

    for _ in range(64):
        try:
            return _attempt_replay(engine, ctx, tree, initials, path, laps)
        except _PumpNeeded as pump:
            # find the latest accelerated edge before the failure point that
            # grew the missing counter key
            fixed = False
            for nid in reversed(path[:pump.position + 1]):
                info = tree.accel_info.get(nid)
                if info and pump.key in info[2]:
                    laps[nid] = laps.get(nid, 0) + max(1, pump.amount)
                    fixed = True
                    break
            if not fixed:
                raise _ReplayError(f"cannot pump counter {pump.key}")
    raise _ReplayError("pump budget exhausted")


class _PumpNeeded(Exception):
    def __init__(self, position: int, key, amount: int):
        super().__init__(f"need counter {key} at step {position}")
        self.position = position
        self.key = key
        self.amount = amount


def _attempt_replay(engine, ctx, tree, initials, path, laps) -> list[WitnessStep]:
    root_step = tree.nodes[path[0]].step
    cur = _initial_by_label(engine, ctx, initials, root_step)
    steps = [WitnessStep(root_step.service, cur)]
    for i, nid in enumerate(path[1:], start=1):
        node = tree.nodes[nid]
        if nid in laps:
            anc_id, _, _ = tree.accel_info[nid]
            segment = path[path.index(anc_id) + 1:i + 1]
            for _ in range(laps[nid]):
                for seg_nid in segment:
                    seg_step = tree.nodes[seg_nid].step
                    cur = _step_or_pump(engine, ctx, cur, seg_step, i)
                    steps.append(WitnessStep(seg_step.service, cur))
        cur = _step_or_pump(engine, ctx, cur, node.step, i)
        steps.append(WitnessStep(node.step.service, cur))
    return steps


def _step_or_pump(engine, ctx, psi, step, position):
    try:
        return _successor_by_label(engine, ctx, psi, step)
    except _ReplayError:
        key = step.detail[2] if len(step.detail) > 2 else None
        if isinstance(key, tuple) and len(key) == 2:
            raise _PumpNeeded(position, key, 1)
        raise


def extract_counterexample(engine: Engine, ctx: TaskContext, tree: KMTree,
                           initials, kind: str, target: int,
                           phase2: KMTree | None = None,
                           seed_node: int | None = None) -> Witness:
    """Build and re-validate a violating trace.

    kind "finite": plain prefix.  kind "omega": prefix to the acceleration
    anchor plus the self-covering loop as the repeating suffix.  kind "scc":
    phase-one prefix to the seed, phase-two path to the cycle, the cycle as
    the repeating suffix.
    """
    if kind == "finite":
        steps = materialize_path(engine, ctx, tree, initials, target)
        return Witness(steps, None)

    if kind == "omega":
        anc_id, raw, _grew = tree.accel_info[target]
        prefix = materialize_path(engine, ctx, tree, initials, anc_id)
        cur = prefix[-1].psi
        loop_path = tree.path_from_root(target)
        loop_path = loop_path[loop_path.index(anc_id) + 1:]
        steps = list(prefix)
        lasso_start = len(steps)
        for nid in loop_path:
            step = tree.nodes[nid].step
            cur = _successor_by_label(engine, ctx, cur, step)
            steps.append(WitnessStep(step.service, cur))
        return Witness(steps, lasso_start)

    assert kind == "scc" and phase2 is not None and seed_node is not None
    seed_psi = phase2.nodes[phase2.path_from_root(seed_node)[0]].psi
    p1_target = tree.ids[seed_psi]
    prefix = materialize_path(engine, ctx, tree, initials, p1_target)
    steps = list(prefix)
    cur = prefix[-1].psi
    p2_path = phase2.path_from_root(seed_node)
    for nid in p2_path[1:]:
        step = phase2.nodes[nid].step
        cur = _successor_by_label(engine, ctx, cur, step)
        steps.append(WitnessStep(step.service, cur))
    cycle = find_cycle(phase2, seed_node)
    lasso_start = len(steps)
    for step, nid in cycle:
        cur = _successor_by_label(engine, ctx, cur, step)
        steps.append(WitnessStep(step.service, cur))
    return Witness(steps, lasso_start)


def validate_witness(engine: Engine, ctx: TaskContext, initials,
                     witness: Witness) -> bool:
    """Every step must be a successor of its predecessor, and lasso
    endpoints must agree on the type with no counter loss."""
    if witness.steps[0].psi not in {p for _, p in initials}:
        return False
    cur = witness.steps[0].psi
    for ws in witness.steps[1:]:
        if ws.psi not in {p for _, p in engine.successors(ctx, cur)}:
            return False
        cur = ws.psi
    if witness.lasso_start is not None:
        before = witness.steps[witness.lasso_start - 1].psi
        after = witness.steps[-1].psi
        if before.tau is not after.tau or before.bucket() != after.bucket():
            return False
        ad = after.counter_dict()
        if any(v > ad.get(k, 0) for k, v in before.counters):
            return False
    return True


# -- top-level verification ----------------------------------------------------


def verify(spec: HASSpec, prop: LTLFOProperty,
           opts: SearchOptions | None = None) -> Verdict:
    """Negate, translate, build the product, search, and judge.

    satisfied iff no finite-word-accepting closing configuration is
    reachable and no accepting configuration is repeatedly reachable.
    """
    opts = opts or SearchOptions()
    t0 = time.monotonic()
    stats = SearchStats()
    negated = negate_property(prop)
    engine = Engine(spec, opts, negated)
    engine.budget = Budget(opts)
    if opts.static_filter:
        from .static_analysis import apply_static_filter
        apply_static_filter(engine)
    aut = engine.automaton
    try:
        ctx = engine.context(prop.task, with_property=True)
        if spec.task(prop.task).parent is None:
            initials = engine.initial_product(ctx, ctx.initial_raw())
        else:
            initials = _nonroot_initials(engine, ctx, spec, prop.task, stats)

        def finite_violation(psi: PSI) -> bool:
            return psi.terminal and psi.q in aut.fin_accepting

        def accepting_segment(t: KMTree, nid: int, anchor: int) -> bool:
            if not opts.repeated:
                return False
            path = t.path_from_root(nid)
            segment = path[path.index(anchor):]
            return any((not t.nodes[x].psi.terminal)
                       and t.nodes[x].psi.q in aut.accepting for x in segment)

        tree = km_search(engine, ctx, initials, stats=stats,
                         early_stop=finite_violation,
                         accel_stop=accepting_segment)
        if tree.found is not None:
            found_psi = tree.nodes[tree.found].psi
            if found_psi.terminal and found_psi.q in aut.fin_accepting:
                witness = extract_counterexample(engine, ctx, tree, initials,
                                                 "finite", tree.found)
                stats.wall = time.monotonic() - t0
                return Verdict("violated", stats, witness,
                               "finite run accepted by the negated property")
            witness = extract_counterexample(engine, ctx, tree, initials,
                                             "omega", tree.found)
            stats.wall = time.monotonic() - t0
            return Verdict("violated", stats, witness,
                           "accepting state on a self-covering loop")
        if opts.repeated:
            verdict = _check_repeated(engine, ctx, tree, initials, stats, t0)
            if verdict is not None:
                return verdict
        stats.wall = time.monotonic() - t0
        return Verdict("satisfied", stats)
    except BudgetExceeded as e:
        stats.timed_out = True
        stats.wall = time.monotonic() - t0
        return Verdict("timeout", stats, None, str(e))


def _nonroot_initials(engine: Engine, ctx: TaskContext, spec: HASSpec,
                      task: str, stats: SearchStats):
    """Achievable opening types of a non-root task, collected by running the
    plain root search (its child sub-searches populate the opening tables)."""
    root_ctx = engine.context(spec.root.name)
    km_search(engine, root_ctx, root_ctx.initial_raw(), stats=stats)
    initials = []
    plain_ctx = engine.context(task)
    identity = {("var", v.name): (("var", v.name),)
                for v in spec.task(task).variables}
    for tau in engine.opening_types(task):
        moved = rename_tuple(plain_ctx.u, tau, ctx.u, identity)
        if moved is None:
            continue
        for step, psi in ctx.initial_from_opening(moved):
            initials.extend(engine.initial_product(ctx, [(step, psi)]))
    if engine.opts.closing == "all":
        for step, psi in ctx.initial_from_opening(ctx.u.empty_type):
            initials.extend(engine.initial_product(ctx, [(step, psi)]))
    # dedupe, deterministic
    seen = set()
    out = []
    for step, psi in initials:
        if psi not in seen:
            seen.add(psi)
            out.append((step, psi))
    return out


def _check_repeated(engine: Engine, ctx: TaskContext, tree: KMTree,
                    initials, stats: SearchStats, t0: float) -> Verdict | None:
    aut = engine.automaton
    opts = engine.opts

    def accepting(psi: PSI) -> bool:
        return (not psi.terminal) and psi.q in aut.accepting

    p2t0 = time.monotonic()

    # (i) every configuration on a self-covering accelerated segment repeats
    # forever; an accepting one among them is a violation
    for nid in sorted(tree.accel_info):
        anc_id, _raw, _grew = tree.accel_info[nid]
        path = tree.path_from_root(nid)
        segment = path[path.index(anc_id):]
        if any(accepting(tree.nodes[x].psi) for x in segment):
            witness = extract_counterexample(engine, ctx, tree, initials,
                                             "omega", nid)
            stats.phase2_wall += time.monotonic() - p2t0
            stats.wall = time.monotonic() - t0
            return Verdict("violated", stats, witness,
                           "accepting state on a self-covering loop")

    # (ii) cycles among the maximal omega-free states, re-explored under the
    # strict-slack order
    cover_set = tree.active_psis() if opts.pruning else [n.psi for n in tree.nodes]
    omega_set, imax = maximal_psis(cover_set, opts.flow_reversed)
    del omega_set  # handled by (i): omega only arises from accelerations
    p2stats = SearchStats()
    phase2 = phase_two_search(engine, ctx, imax, tree, p2stats)
    stats.phase2_nodes = p2stats.nodes
    stats.nodes += p2stats.nodes
    stats.pruned += p2stats.pruned
    stats.maxflow_calls += p2stats.maxflow_calls
    # any accepting state on an exact cycle of reachable states is genuinely
    # repeatedly reachable, whether or not it is itself maximal
    hits = repeated_reachable(phase2, accepting)
    if hits:
        target = min(hits)
        witness = extract_counterexample(engine, ctx, tree, initials, "scc",
                                         None, phase2, target)
        stats.phase2_wall += time.monotonic() - p2t0
        stats.wall = time.monotonic() - t0
        return Verdict("violated", stats, witness,
                       "accepting state lies on a reachable cycle")
    stats.phase2_wall += time.monotonic() - p2t0
    return None
