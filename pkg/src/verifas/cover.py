"""Coverage relations between partial symbolic instances.

The plain order compares equal types componentwise on counters.  The
generalized order maps every stored tuple of the covered state onto a tuple
of the covering state with an implied (less restrictive) type, respecting
multiplicities; existence of such a mapping reduces to a max-flow check on
a tiny bipartite network.  The strict variant additionally demands slack at
some sink and drives the second phase of repeated-reachability.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .isotypes import implies_type
from .state import OMEGA, PSI


@dataclass
class FlowNetwork:
    """Bipartite flow problem: sources with demands, sinks with capacities,
    admissible source->sink edges.  omega capacities saturate at total+1."""

    sources: list  # (key, demand) with finite demands
    sinks: list    # (key, capacity) capacity may be OMEGA
    edges: set     # (source key, sink key)

    def max_flow(self) -> int:
        return max_flow(self)


_flow_calls = [0]


def flow_call_count() -> int:
    return _flow_calls[0]


def max_flow(net: FlowNetwork) -> int:
    """Edmonds-Karp on the two-layer network with super source/sink."""
    _flow_calls[0] += 1
    total = sum(d for _, d in net.sources)
    bound = total + 1
    nodes = ["s", "t"] + [("a", k) for k, _ in net.sources] + [("b", k) for k, _ in net.sinks]
    idx = {n: i for i, n in enumerate(nodes)}
    cap: dict[tuple, int] = {}

    def add(u, v, c):
        cap[(u, v)] = cap.get((u, v), 0) + c
        cap.setdefault((v, u), 0)

    for k, d in net.sources:
        add(idx["s"], idx[("a", k)], int(d))
    for k, c in net.sinks:
        add(idx[("b", k)], idx["t"], bound if c == OMEGA else int(c))
    src_keys = {k for k, _ in net.sources}
    for a, b in net.edges:
        if a in src_keys:  # omega sources are satisfied outside the network
            add(idx[("a", a)], idx[("b", b)], bound)

    adj: dict[int, list[int]] = {}
    for (u, v) in cap:
        adj.setdefault(u, []).append(v)
    s, t = idx["s"], idx["t"]
    flow = 0
    while True:
        parent = {s: s}
        queue = deque([s])
        while queue and t not in parent:
            u = queue.popleft()
            for v in adj.get(u, ()):
                if v not in parent and cap[(u, v)] > 0:
                    parent[v] = u
                    queue.append(v)
        if t not in parent:
            return flow
        # minimum residual capacity along the path
        path = []
        v = t
        while v != s:
            u = parent[v]
            path.append((u, v))
            v = u
        push = min(cap[e] for e in path)
        for u, v in path:
            cap[(u, v)] -= push
            cap[(v, u)] += push
        flow += push


def leq_cover(i1: PSI, i2: PSI) -> bool:
    """Plain coverage: identical type, child status and automaton state,
    componentwise counter dominance."""
    if i1.bucket() != i2.bucket() or i1.tau is not i2.tau:
        return False
    c2 = i2.counter_dict()
    return all(v <= c2.get(k, 0) for k, v in i1.counters)


def _tuple_implies(k1, k2, reversed_edges: bool) -> bool:
    (rel1, t1), (rel2, t2) = k1, k2
    if rel1 != rel2:
        return False
    return implies_type(t2, t1) if reversed_edges else implies_type(t1, t2)


def build_network(i1: PSI, i2: PSI, reversed_edges: bool = False) -> FlowNetwork | None:
    """Network whose saturation decides the generalized coverage of i1 by
    i2; None when an omega source has no omega sink to absorb it."""
    finite_sources = []
    omega_sources = []
    for k, v in i1.counters:
        (omega_sources if v == OMEGA else finite_sources).append((k, v))
    sinks = list(i2.counters)
    sink_keys = {k for k, _ in sinks}
    edges = set()
    for k1, _ in i1.counters:
        for k2 in sink_keys:
            if _tuple_implies(k1, k2, reversed_edges):
                edges.add((k1, k2))
    for k, _ in omega_sources:
        if not any(v == OMEGA and (k, k2) in edges for k2, v in sinks):
            return None
    # omega sources satisfied by omega sinks; the finite problem remains
    return FlowNetwork(finite_sources, sinks, edges)


def preceq_cover(i1: PSI, i2: PSI, reversed_edges: bool = False) -> bool:
    """Generalized coverage i1 <= i2 via constraint implication + flow."""
    if i1.bucket() != i2.bucket():
        return False
    if not implies_type(i1.tau, i2.tau):
        return False
    net = build_network(i1, i2, reversed_edges)
    if net is None:
        return False
    total = sum(d for _, d in net.sources)
    return max_flow(net) == total


def slack_sinks(i1: PSI, i2: PSI, reversed_edges: bool = False) -> list:
    """Sinks of i2 for which some full mapping of i1's tuples leaves spare
    capacity; empty when i1 is not covered by i2 at all."""
    if i1.bucket() != i2.bucket() or not implies_type(i1.tau, i2.tau):
        return []
    net = build_network(i1, i2, reversed_edges)
    if net is None:
        return []
    total = sum(d for _, d in net.sources)
    if max_flow(net) != total:
        return []
    out = []
    for k, c in net.sinks:
        if c == OMEGA:
            out.append(k)  # finite flow never exhausts an omega sink
            continue
        reduced = FlowNetwork(net.sources,
                              [(kk, cc - 1 if kk == k else cc) for kk, cc in net.sinks],
                              net.edges)
        if c >= 1 and max_flow(reduced) == total:
            out.append(k)
    return out


def preceq_plus(i1: PSI, i2: PSI, reversed_edges: bool = False) -> bool:
    """Strict-slack coverage: equality, or coverage with spare capacity at
    some sink."""
    if i1 == i2:
        return True
    return bool(slack_sinks(i1, i2, reversed_edges))
