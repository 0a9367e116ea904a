"""Karp-Miller tree search with acceleration and monotone pruning.

The search materializes the reachable symbolic states, accelerating
counters to omega along self-covering paths so the tree stays finite, and
optionally discarding states covered by already-active ones.  The pruning
discipline follows the active-set scheme: pick work from W intersected with
the active set, accelerate over active ancestors only, skip covered
newcomers, and on insertion deactivate every active state the newcomer
covers together with its whole subtree.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import psutil

from . import cover as cover_mod
from .cover import leq_cover, preceq_cover, preceq_plus, slack_sinks
from .indices import ActiveIndex
from .semantics import Step
from .state import OMEGA, PSI, freeze_counters


@dataclass
class SearchOptions:
    pruning: bool = True          # monotone pruning (state pruning, SP)
    ordering: str = "preceq"      # coverage order: "leq" or "preceq"
    static_filter: bool = True    # constraint-graph edge filtering (SA)
    use_indices: bool = True      # trie/inverted-list candidates (DSS)
    repeated: bool = True         # repeated-reachability phase
    closing: str = "achievable"   # "achievable" or "all" return types
    insert_snapshot: str = "pre"  # snapshot after pre-condition, or "literal"
    flow_reversed: bool = False   # debug: reverse tuple-mapping edge gate
    phase2_prune_scope: str = "omega"  # prune vs phase-1: "none"|"omega"|"tree"
    node_cap: int = 1_000_000
    timeout: float | None = 600.0
    mem_cap: int | None = 8 << 30
    seed: int = 0


@dataclass
class SearchStats:
    nodes: int = 0
    pruned: int = 0
    accelerations: int = 0
    maxflow_calls: int = 0
    peak_w: int = 0
    wall: float = 0.0
    phase2_nodes: int = 0
    phase2_wall: float = 0.0
    timed_out: bool = False

    def as_dict(self) -> dict:
        return {
            "nodes": self.nodes,
            "pruned": self.pruned,
            "accelerations": self.accelerations,
            "maxflow_calls": self.maxflow_calls,
            "peak_w": self.peak_w,
            "wall_s": round(self.wall, 6),
            "phase2_nodes": self.phase2_nodes,
            "phase2_wall_s": round(self.phase2_wall, 6),
            "timed_out": self.timed_out,
        }


class BudgetExceeded(Exception):
    pass


class Budget:
    """Wall-clock, node-count and memory guard shared by all phases."""

    def __init__(self, opts: SearchOptions):
        self.deadline = time.monotonic() + opts.timeout if opts.timeout else None
        self.node_cap = opts.node_cap
        self.mem_cap = opts.mem_cap
        self.nodes = 0
        self._mem_check = 0

    def spend_node(self) -> None:
        self.nodes += 1
        if self.node_cap is not None and self.nodes > self.node_cap:
            raise BudgetExceeded("node cap exceeded")
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise BudgetExceeded("timeout")
        self._mem_check += 1
        if self.mem_cap is not None and self._mem_check >= 4096:
            self._mem_check = 0
            if psutil.Process().memory_info().rss > self.mem_cap:
                raise BudgetExceeded("memory cap exceeded")


@dataclass
class Node:
    psi: PSI
    parent: int | None
    step: Step | None
    depth: int
    active: bool = True
    children: list[int] = field(default_factory=list)


class KMTree:
    """Materialized search DAG with active-set bookkeeping."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.ids: dict[PSI, int] = {}
        self.roots: list[int] = []
        self.extra_edges: list[tuple[int, Step, int]] = []
        self.accel_info: dict[int, tuple[int, PSI]] = {}  # node -> (ancestor, raw psi)
        self.found: int | None = None
        self.timed_out = False

    def add(self, psi: PSI, parent: int | None, step: Step | None) -> int:
        nid = len(self.nodes)
        depth = 0 if parent is None else self.nodes[parent].depth + 1
        self.nodes.append(Node(psi, parent, step, depth))
        self.ids[psi] = nid
        if parent is None:
            self.roots.append(nid)
        else:
            self.nodes[parent].children.append(nid)
        return nid

    def ancestors(self, nid: int):
        cur = self.nodes[nid].parent
        while cur is not None:
            yield cur
            cur = self.nodes[cur].parent

    def path_from_root(self, nid: int) -> list[int]:
        out = [nid]
        cur = self.nodes[nid].parent
        while cur is not None:
            out.append(cur)
            cur = self.nodes[cur].parent
        out.reverse()
        return out

    def active_psis(self) -> list[PSI]:
        return [n.psi for n in self.nodes if n.active]

    def coverability_set(self) -> list[PSI]:
        return self.active_psis()


def cover_fn_for(opts: SearchOptions):
    if opts.ordering == "leq":
        return leq_cover
    return lambda a, b: preceq_cover(a, b, opts.flow_reversed)


def _accelerate(engine, tree: KMTree, ancestor_ids, psi: PSI,
                opts: SearchOptions, stats: SearchStats):
    """Set counters to omega where some (active) ancestor covers psi and a
    witness mapping leaves the counter with strict growth/slack.

    Returns (accelerated psi, witness ancestor id, grown keys); the witness
    is the covering ancestor of the first trigger (the self-covering
    segment starts there)."""
    new_counts = None
    witness = None
    all_grew: list = []
    for aid in ancestor_ids:
        anc = tree.nodes[aid].psi
        if anc.bucket() != psi.bucket():
            continue
        if opts.ordering == "leq":
            if anc.tau is not psi.tau:
                continue
            cd = psi.counter_dict()
            ad = anc.counter_dict()
            if any(v > cd.get(k, 0) for k, v in ad.items()):
                continue
            grew = [k for k, v in cd.items() if ad.get(k, 0) < v and v != OMEGA]
        else:
            grew = [k for k in slack_sinks(anc, psi, opts.flow_reversed)
                    if psi.counter_dict().get(k, 0) != OMEGA]
        if grew:
            if new_counts is None:
                new_counts = psi.counter_dict()
                witness = aid
            for k in grew:
                new_counts[k] = OMEGA
            all_grew.extend(k for k in grew if k not in all_grew)
    if new_counts is None:
        return psi, None, ()
    stats.accelerations += 1
    return psi.with_counters(new_counts), witness, tuple(all_grew)


def km_search(engine, ctx, initials, *, opts: SearchOptions | None = None,
              stats: SearchStats | None = None, accelerate: bool = True,
              cover=None, early_stop=None, accel_stop=None, extra_prune=None,
              record_all_edges: bool = False) -> KMTree:
    """Explore from the initial states; returns the materialized tree.

    initials: (step, psi) pairs becoming root nodes.  early_stop(psi) ends
    the search as soon as a matching node is inserted (reachability mode);
    accel_stop(tree, node, anchor) does the same right after an
    acceleration.  extra_prune(psi) discards states covered outside this
    search (used by the second phase against the first phase's tree).
    """
    opts = opts or engine.opts
    stats = stats or SearchStats()
    cover = cover or cover_fn_for(opts)
    if engine.budget is None:
        engine.budget = Budget(opts)
    flows0 = cover_mod.flow_call_count()
    t0 = time.monotonic()
    tree = KMTree()
    act = ActiveIndex(ctx.u, enabled=opts.use_indices)
    w: list[int] = []
    in_w: set[int] = set()

    def insert(psi: PSI, parent: int | None, step: Step | None) -> int | None:
        """Shared insertion logic; returns the node id if a node was added."""
        existing = tree.ids.get(psi)
        if existing is not None:
            if record_all_edges and parent is not None:
                tree.extra_edges.append((parent, step, existing))
            elif existing in in_w and parent is not None:
                tree.extra_edges.append((parent, step, existing))
            return None
        if extra_prune is not None and parent is not None and extra_prune(psi):
            stats.pruned += 1
            return None
        if opts.pruning:
            for cid in act.covering_candidates(psi):
                if cover(psi, act.psis[cid]):
                    stats.pruned += 1
                    return None
        nid = tree.add(psi, parent, step)
        engine.budget.spend_node()
        stats.nodes += 1
        if opts.pruning:
            # a covered active state is deactivated; unless it is an
            # ancestor of the newcomer (whose branch includes this very
            # insertion), its whole subtree goes with it
            tree.nodes[nid].active = False
            anc = set(tree.ancestors(nid))
            for cid in act.covered_candidates(psi):
                if cid == nid or cid not in act:
                    continue
                if cover(act.psis[cid], psi):
                    if cid in anc:
                        node = tree.nodes[cid]
                        if node.active:
                            node.active = False
                            act.remove(cid)
                            stats.pruned += 1
                    else:
                        _deactivate_subtree(tree, act, cid, stats)
            tree.nodes[nid].active = True
            act.add(nid, psi)
        w.append(nid)
        in_w.add(nid)
        stats.peak_w = max(stats.peak_w, len(w))
        return nid

    try:
        for step, psi in initials:
            nid = insert(psi, None, step)
            if nid is not None and early_stop is not None and early_stop(psi):
                tree.found = nid
                raise _EarlyStop
        while w:
            nid = w.pop()
            in_w.discard(nid)
            node = tree.nodes[nid]
            if opts.pruning and not node.active:
                continue
            # snapshot the acceleration base before expanding: an early
            # successor may cover (and deactivate) this very node, but the
            # ancestor path stays a genuine run for the later successors
            anc_ids = [nid] + list(tree.ancestors(nid))
            if opts.pruning:
                anc_ids = [a for a in anc_ids if tree.nodes[a].active]
            for step, succ in engine.successors(ctx, node.psi):
                if accelerate and not succ.terminal:
                    accel_psi, witness, grew = _accelerate(engine, tree, anc_ids,
                                                           succ, opts, stats)
                else:
                    accel_psi, witness, grew = succ, None, ()
                new_id = insert(accel_psi, nid, step)
                if new_id is not None and witness is not None:
                    tree.accel_info[new_id] = (witness, succ, grew)
                    if accel_stop is not None and accel_stop(tree, new_id, witness):
                        tree.found = new_id
                        raise _EarlyStop
                if new_id is not None and early_stop is not None \
                        and early_stop(accel_psi):
                    tree.found = new_id
                    raise _EarlyStop
    except _EarlyStop:
        pass
    except BudgetExceeded:
        tree.timed_out = True
        stats.timed_out = True
        raise
    finally:
        stats.wall += time.monotonic() - t0
        stats.maxflow_calls += cover_mod.flow_call_count() - flows0
    return tree


class _EarlyStop(Exception):
    pass


def _deactivate_subtree(tree: KMTree, act: ActiveIndex, nid: int,
                        stats: SearchStats) -> None:
    stack = [nid]
    while stack:
        cur = stack.pop()
        node = tree.nodes[cur]
        if node.active:
            node.active = False
            act.remove(cur)
            stats.pruned += 1
        stack.extend(node.children)


def extract_coverability_set(tree: KMTree) -> list[PSI]:
    """Active nodes under pruning; every reachable state is covered by some
    member under the ordering used during the search."""
    return tree.coverability_set()
