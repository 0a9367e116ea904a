"""Constraint-graph analysis: edges that can never cause a contradiction.

The constraint graph over-approximates every constraint any reachable type
can acquire: each condition atom contributes its edges, equalities spread
to all parallel chain suffixes, and edges migrate across task boundaries
through insert/retrieve tuples and input/output variable maps until a
fixpoint.  A != edge whose endpoints lie in different =-connected
components, or a = edge lying on no simple =-path between the endpoints of
any != edge or between two distinct constants, can never complete a
contradiction and is dropped from all types during search.

The simple-path test runs on the biconnected decomposition of the =-graph:
an edge lies on a simple a-b path iff its block is on the block path from a
to b in the block-cut tree.
"""

from __future__ import annotations

from collections import defaultdict

from .conditions import EQ, NEQ, Cmp, Rel, atoms
from .isotypes import close_and_check


# -- pure graph analysis -------------------------------------------------------


def _eq_components(eq_edges) -> dict:
    comp: dict = {}

    def find(x):
        while comp.get(x, x) != x:
            comp[x] = comp.get(comp[x], comp[x])
            x = comp[x]
        return x

    for u, v in eq_edges:
        comp.setdefault(u, u)
        comp.setdefault(v, v)
        ru, rv = find(u), find(v)
        if ru != rv:
            comp[ru] = rv
    return {x: find(x) for x in comp}


def _biconnected(eq_edges):
    """Blocks (edge sets) and articulation vertices of the =-subgraph."""
    adj: dict = defaultdict(list)
    for u, v in eq_edges:
        adj[u].append(v)
        adj[v].append(u)
    index: dict = {}
    low: dict = {}
    parent: dict = {}
    blocks: list[set] = []
    cuts: set = set()
    counter = [0]

    for start in adj:
        if start in index:
            continue
        stack = [(start, iter(adj[start]))]
        index[start] = low[start] = counter[0]
        counter[0] += 1
        edge_stack: list[tuple] = []
        root_children = 0
        while stack:
            v, it = stack[-1]
            advanced = False
            for w in it:
                if w not in index:
                    parent[w] = v
                    if v == start:
                        root_children += 1
                    index[w] = low[w] = counter[0]
                    counter[0] += 1
                    edge_stack.append((v, w))
                    stack.append((w, iter(adj[w])))
                    advanced = True
                    break
                if w != parent.get(v) and index[w] < index[v]:
                    edge_stack.append((v, w))
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            stack.pop()
            if stack:
                u = stack[-1][0]
                low[u] = min(low[u], low[v])
                if low[v] >= index[u]:
                    block = set()
                    while edge_stack:
                        e = edge_stack.pop()
                        block.add(e)
                        if e == (u, v):
                            break
                    if block:
                        blocks.append(block)
                    if u != start or root_children > 1:
                        cuts.add(u)
        del stack
    return blocks, cuts


def _norm(u, v):
    return (u, v) if u <= v else (v, u)


def nonviolating_edges(edges, constants=frozenset()) -> set:
    """The edges of a labeled constraint graph that keep every consistent
    subgraph consistent when added.

    Consistency of a subgraph: no =-path connects two distinct constants or
    the two endpoints of one of its != edges.
    """
    eq_edges = {_norm(u, v) for u, v, op in edges if op == EQ and u != v}
    ne_edges = {_norm(u, v) for u, v, op in edges if op == NEQ}
    comp = _eq_components(eq_edges)

    def same_comp(a, b):
        return a in comp and b in comp and comp[a] == comp[b]

    out = set()
    for u, v in ne_edges:
        if not same_comp(u, v):
            out.add((u, v, NEQ))

    # anchors: pairs that must never become =-connected through a path
    anchors = [(u, v) for u, v in ne_edges if same_comp(u, v)]
    consts = sorted(c for c in constants if c in comp)
    for i in range(len(consts)):
        for j in range(i + 1, len(consts)):
            if same_comp(consts[i], consts[j]):
                anchors.append((consts[i], consts[j]))

    blocks, cuts = _biconnected(eq_edges)
    block_of_edge: dict = {}
    blocks_of_vertex: dict = defaultdict(set)
    for bi, block in enumerate(blocks):
        for u, v in block:
            block_of_edge[_norm(u, v)] = bi
            blocks_of_vertex[u].add(bi)
            blocks_of_vertex[v].add(bi)

    # block-cut tree: block nodes and cut-vertex nodes
    tree: dict = defaultdict(set)
    for v in cuts:
        for bi in blocks_of_vertex[v]:
            tree[("v", v)].add(("b", bi))
            tree[("b", bi)].add(("v", v))

    def path_blocks(a, b) -> set:
        """Blocks on the unique block-path between vertices a and b."""
        starts = {("v", a)} if a in cuts else {("b", bi) for bi in blocks_of_vertex[a]}
        goals = {("v", b)} if b in cuts else {("b", bi) for bi in blocks_of_vertex[b]}
        hit = starts & goals
        if hit:
            return {n[1] for n in hit if n[0] == "b"}
        prev: dict = {}
        queue = list(starts)
        seen = set(starts)
        goal = None
        while queue and goal is None:
            nxt = []
            for node in queue:
                for other in tree[node]:
                    if other in seen:
                        continue
                    seen.add(other)
                    prev[other] = node
                    if other in goals:
                        goal = other
                        break
                    nxt.append(other)
                if goal is not None:
                    break
            queue = nxt
        if goal is None:
            return set()
        out = set()
        node = goal
        while True:
            if node[0] == "b":
                out.add(node[1])
            if node not in prev:
                break
            node = prev[node]
        return out

    violating_eq: set = set()
    for a, b in anchors:
        for bi in path_blocks(a, b):
            violating_eq |= {_norm(u, v) for u, v in blocks[bi]}
    for u, v in eq_edges:
        if _norm(u, v) not in violating_eq:
            out.add((u, v, EQ))
    return out


# -- constraint graph construction over task universes ---------------------------


def _suffix_pairs(u, ea: int, eb: int):
    """All (ea.w, eb.w) pairs with both chains present in the universe."""
    out = [(ea, eb)]
    stack = [(ea, eb)]
    while stack:
        x, y = stack.pop()
        cx, cy = u.children[x], u.children[y]
        for attr, child in cx.items():
            if attr in cy:
                pair = (child, cy[attr])
                out.append(pair)
                stack.append(pair)
    return out


def atom_edges(u, cond) -> set:
    """Constraint-graph edges contributed by the atoms of a condition."""
    out = set()
    for a in atoms(cond):
        if isinstance(a, Cmp):
            ea, eb = u.term_id(a.lhs), u.term_id(a.rhs)
            if ea == eb:
                continue
            if a.op == EQ:
                for x, y in _suffix_pairs(u, ea, eb):
                    out.add((x, y, EQ))
            else:
                out.add((ea, eb, NEQ))
        elif isinstance(a, Rel):
            rel = u.db.relation(a.name)
            head = u.term_id(a.args[0])
            cmap = u.children[head]
            if any(attr.name not in cmap for attr in rel.attrs):
                continue
            if a.positive:
                out.add((head, u.null_id, NEQ))
                for arg, attr in zip(a.args[1:], rel.attrs):
                    ea = u.term_id(arg)
                    for x, y in _suffix_pairs(u, cmap[attr.name], ea):
                        out.add((x, y, EQ))
            else:
                for arg, attr in zip(a.args[1:], rel.attrs):
                    out.add((cmap[attr.name], u.term_id(arg), NEQ))
    return out


def _translate_edges(src_u, edges, dst_u, head_map) -> set:
    out = set()
    for a, b, op in edges:
        ia = _image(src_u, a, dst_u, head_map)
        ib = _image(src_u, b, dst_u, head_map)
        if ia is None or ib is None:
            continue
        for x in ia:
            for y in ib:
                if x != y:
                    out.add((x, y, op))
    return out


def _image(src_u, eid, dst_u, head_map):
    e = src_u.exprs[eid]
    if e.root[0] == "const":
        return (dst_u.expr_id(e.root, ()),)
    targets = head_map.get(e.root)
    if targets is None:
        if e.frozen and dst_u.has_expr(e.root, e.path):
            return (dst_u.expr_id(e.root, e.path),)
        return None
    return tuple(dst_u.expr_id(t, e.path) for t in targets
                 if dst_u.has_expr(t, e.path))


def build_constraint_graphs(engine) -> dict:
    """One constraint graph per task context, closed under the cross-task
    and variable/tuple-space edge migrations."""
    spec = engine.spec
    ctxs = {}
    for t in spec.tasks:
        ctxs[(t.name, False)] = engine.context(t.name)
    if engine.prop is not None:
        ctxs[(engine.prop.task, True)] = engine.context(engine.prop.task, True)

    graphs: dict = {key: set() for key in ctxs}
    for key, ctx in ctxs.items():
        u = ctx.u
        task = ctx.task
        for s in task.services:
            graphs[key] |= atom_edges(u, s.pre)
            graphs[key] |= atom_edges(u, s.post)
        graphs[key] |= atom_edges(u, task.closing_pre)
        for c in spec.children(task.name):
            graphs[key] |= atom_edges(u, c.opening_pre)
        if task.parent is None:
            graphs[key] |= atom_edges(u, spec.global_pre)
        if key[1]:
            prop = engine.prop
            from .conditions import Not, to_nnf
            for cond in prop.conditions():
                graphs[key] |= atom_edges(u, to_nnf(cond))
                graphs[key] |= atom_edges(u, to_nnf(Not(cond)))

    changed = True
    while changed:
        changed = False
        for key, ctx in ctxs.items():
            u = ctx.u
            g = graphs[key]
            additions = set()
            # tuple insert/retrieve: mirror variable and attribute spaces
            for info in ctx.update_info.values():
                additions |= _translate_edges(u, g, u, info["to_rel"])
                additions |= _translate_edges(u, g, u, info["to_vars"])
            # child openings: parent constraints flow into child inputs;
            # child constraints over outputs flow back to the parent
            for cname, info in ctx.child_info.items():
                ckey = (cname, False)
                cu = ctxs[ckey].u
                into_child = _translate_edges(u, g, cu, info["f_in"]) - graphs[ckey]
                if into_child:
                    graphs[ckey] |= into_child
                    changed = True
                additions |= _translate_edges(cu, graphs[ckey], u, info["f_out"])
            new = additions - g
            if new:
                g |= new
                changed = True
    return graphs


def apply_static_filter(engine) -> None:
    """Compute the non-violating edges of every context's graph and install
    them as a filter applied to all types produced during search.

    Domain constraints (disjoint id domains, forced nulls) are invisible to
    the pure graph test, so the =-edges of the whole graph are closed once:
    if that closure is inconsistent nothing is filtered; otherwise the
    closure's extra merges become virtual =-edges of the analyzed graph so
    every domain-induced connection participates in the path tests.
    """
    graphs = build_constraint_graphs(engine)
    for key, g in graphs.items():
        ctx = engine.context(*key)
        u = ctx.u
        eq_all = [(a, b, EQ) for a, b, op in g if op == EQ]
        closure = close_and_check(u, eq_all)
        if closure is None:
            ctx.filter_edges = frozenset()
            continue
        comp = _eq_components({_norm(a, b) for a, b, op in g if op == EQ})
        virtual = set()
        for cls in closure.classes:
            reps = {}
            for m in cls:
                reps.setdefault(comp.get(m, m), m)
            anchor_members = sorted(reps.values())
            for other in anchor_members[1:]:
                virtual.add((anchor_members[0], other, EQ))
        consts = frozenset(e.eid for e in u.exprs if e.root[0] == "const")
        flagged = nonviolating_edges(g | virtual, consts)
        edge_ids = set()
        for a, b, op in flagged:
            if (a, b, op) in g or (b, a, op) in g:
                edge_ids.add(u.edge_id(a, b, op))
        ctx.filter_edges = frozenset(edge_ids)
