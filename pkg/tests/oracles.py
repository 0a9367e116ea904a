"""Independent brute-force oracles used across the test suite.

Everything here deliberately re-derives semantics from first principles
(fixpoint iteration, exhaustive enumeration) rather than calling back into
the library's optimized code paths.
"""

from __future__ import annotations

import itertools

from verifas.conditions import (
    EQ, NEQ, And, Cmp, Const, FalseCond, Not, Or, Rel, TrueCond, Var,
)

# ---------------------------------------------------------------------------
# naive closure of labeled edge sets (graph fixpoint, no union-find)
# ---------------------------------------------------------------------------


def naive_close(u, constraints):
    """Fixpoint closure over expanded edges; returns (eq_pairs, neq_pairs)
    frozensets or None when inconsistent.  Mirrors the closure rules:
    transitivity, attribute congruence, != replication, and the domain
    rules (distinct constants, disjoint id/value domains, non-null chains,
    null-forcing)."""
    eq = {(a, b) for a, b, op in constraints if op == EQ and a != b}
    eq |= {(b, a) for a, b in eq}
    ne = {(a, b) for a, b, op in constraints if op == NEQ}
    ne |= {(b, a) for a, b in ne}
    while True:
        new_eq = set()
        new_ne = set()
        for a, b in eq:
            for c, d in eq:
                if b == c and a != d:
                    new_eq.add((a, d))
            ca, cb = u.children[a], u.children[b]
            for attr, child in ca.items():
                if attr in cb and child != cb[attr]:
                    new_eq.add((child, cb[attr]))
        for a, b in ne:
            for c, d in eq:
                if b == c and a != d:
                    new_ne.add((a, d))
        # null forcing: classes whose domain meets to {null} pull in null
        classes = _classes_of(u, eq)
        for cls in classes:
            dom = _meet_all(u, cls)
            if dom == "empty":
                return None
            if dom == "null" and u.null_id not in cls:
                new_eq.add((cls[0], u.null_id))
        if new_eq <= eq and new_ne <= ne:
            break
        eq |= new_eq | {(b, a) for a, b in new_eq}
        ne |= new_ne | {(b, a) for a, b in new_ne}
    for a, b in ne:
        if a == b or (a, b) in eq:
            return None
    classes = _classes_of(u, eq)
    for cls in classes:
        if _meet_all(u, cls) == "empty":
            return None
    eq_pairs = frozenset((min(a, b), max(a, b)) for a, b in eq)
    ne_pairs = frozenset((min(a, b), max(a, b)) for a, b in ne)
    return eq_pairs, ne_pairs


def _classes_of(u, eq):
    nodes = {a for a, _ in eq} | {b for _, b in eq}
    seen, classes = set(), []
    for n in nodes:
        if n in seen:
            continue
        group, todo = [], [n]
        while todo:
            x = todo.pop()
            if x in seen:
                continue
            seen.add(x)
            group.append(x)
            todo += [b for a, b in eq if a == x]
        classes.append(sorted(group))
    return classes


def _meet_all(u, cls):
    """Meet of member base domains: 'empty', 'null', or 'ok'."""
    ids = None
    val = True
    null = True
    consts = set()
    for m in cls:
        d = u.base_dom[m]
        ids = d.ids if ids is None else (ids & d.ids)
        val = val and d.val
        null = null and d.null
        if d.const is not None:
            consts.add(d.const)
    if len(consts) > 1:
        return "empty"
    if consts:
        return "ok" if val else "empty"
    if not ids and not val and not null:
        return "empty"
    if not ids and not val and null:
        return "null"
    return "ok"


def type_edges(tau):
    """Expanded edge view of an IsoType as (eq_pairs, neq_pairs)."""
    eq = frozenset((a, b) for a, b, op in tau.edges if op == EQ)
    ne = frozenset((a, b) for a, b, op in tau.edges if op == NEQ)
    return eq, ne


# ---------------------------------------------------------------------------
# concrete condition evaluation over a tiny database
# ---------------------------------------------------------------------------


def eval_term(db_inst, valuation, term):
    """Value of a term; navigation through a concrete database instance.

    db_inst maps relation name -> {id_value: {attr: value}}.  Returns a
    ("missing",) sentinel when navigating from null (no such tuple).
    """
    if isinstance(term, Const):
        return term.value
    val = valuation[term.name]
    for attr in term.path:
        if val is None:
            return ("missing",)
        row = None
        for rel, rows in db_inst.items():
            if val in rows:
                row = rows[val]
                break
        if row is None or attr not in row:
            return ("missing",)
        val = row[attr]
    return val


def eval_condition(db_inst, valuation, cond) -> bool:
    """Standard concrete semantics; relational atoms with a null argument
    are false (null never occurs in database relations)."""
    if isinstance(cond, TrueCond):
        return True
    if isinstance(cond, FalseCond):
        return False
    if isinstance(cond, Not):
        return not eval_condition(db_inst, valuation, cond.sub)
    if isinstance(cond, And):
        return all(eval_condition(db_inst, valuation, p) for p in cond.parts)
    if isinstance(cond, Or):
        return any(eval_condition(db_inst, valuation, p) for p in cond.parts)
    if isinstance(cond, Cmp):
        a = eval_term(db_inst, valuation, cond.lhs)
        b = eval_term(db_inst, valuation, cond.rhs)
        if a == ("missing",) or b == ("missing",):
            return False if cond.op == EQ else True
        return (a == b) if cond.op == EQ else (a != b)
    if isinstance(cond, Rel):
        head = eval_term(db_inst, valuation, cond.args[0])
        rows = db_inst.get(cond.name, {})
        if head is None or head == ("missing",) or head not in rows:
            result = False
        else:
            result = _rel_match(db_inst, valuation, cond, rows[head])
        return result if cond.positive else not result
    raise TypeError(cond)


def _rel_match(db_inst, valuation, cond, row):
    values = list(row.values())
    for arg, want in zip(cond.args[1:], values):
        got = eval_term(db_inst, valuation, arg)
        if got == ("missing",) or got != want:
            return False
    return True


# ---------------------------------------------------------------------------
# LTL semantics on ultimately periodic and finite words
# ---------------------------------------------------------------------------


def ltl_holds_lasso(formula, prefix, loop):
    """Truth of an LTL skeleton on the infinite word prefix + loop^omega.

    Letters are frozensets of true proposition names.  Operators are the
    tuple forms used by verifas.ltl.  Computed by fixpoint over the lasso
    graph, least for U/F, greatest for R/G.
    """
    word = list(prefix) + list(loop)
    n = len(word)
    succ = [i + 1 for i in range(n)]
    succ[n - 1] = len(prefix)

    def table(f):
        kind = f[0]
        if kind == "true":
            return [True] * n
        if kind == "false":
            return [False] * n
        if kind == "prop":
            return [f[1] in word[i] for i in range(n)]
        if kind == "not":
            sub = table(f[1])
            return [not v for v in sub]
        if kind == "and":
            tabs = [table(p) for p in f[1:]]
            return [all(t[i] for t in tabs) for i in range(n)]
        if kind == "or":
            tabs = [table(p) for p in f[1:]]
            return [any(t[i] for t in tabs) for i in range(n)]
        if kind in ("X", "WX"):  # identical on infinite words
            sub = table(f[1])
            return [sub[succ[i]] for i in range(n)]
        if kind == "F":
            return table(("U", ("true",), f[1]))
        if kind == "G":
            return table(("R", ("false",), f[1]))
        if kind == "U":
            a, b = table(f[1]), table(f[2])
            cur = [False] * n
            for _ in range(n + 1):
                cur = [b[i] or (a[i] and cur[succ[i]]) for i in range(n)]
            return cur
        if kind == "R":
            a, b = table(f[1]), table(f[2])
            cur = [True] * n
            for _ in range(n + 1):
                cur = [b[i] and (a[i] or cur[succ[i]]) for i in range(n)]
            return cur
        raise ValueError(f)

    return table(formula)[0] if n else ValueError("empty word")


def ltl_holds_finite(formula, word):
    """Finite-word LTL semantics with strong next."""
    n = len(word)

    def holds(f, i):
        kind = f[0]
        if kind == "true":
            return True
        if kind == "false":
            return False
        if kind == "prop":
            return f[1] in word[i]
        if kind == "not":
            return not holds(f[1], i)
        if kind == "and":
            return all(holds(p, i) for p in f[1:])
        if kind == "or":
            return any(holds(p, i) for p in f[1:])
        if kind == "X":
            return i + 1 < n and holds(f[1], i + 1)
        if kind == "WX":
            return i + 1 >= n or holds(f[1], i + 1)
        if kind == "F":
            return any(holds(f[1], j) for j in range(i, n))
        if kind == "G":
            return all(holds(f[1], j) for j in range(i, n))
        if kind == "U":
            for j in range(i, n):
                if holds(f[2], j):
                    return True
                if not holds(f[1], j):
                    return False
            return False
        if kind == "R":
            for j in range(i, n):
                if not holds(f[2], j):
                    return False
                if holds(f[1], j):
                    return True
            return True
        raise ValueError(f)

    return holds(formula, 0)


# ---------------------------------------------------------------------------
# exhaustive tuple-mapping oracle for the flow-style coverage relation
# ---------------------------------------------------------------------------


def preceq_by_enumeration(implies, c1, c2):
    """Does a mapping f per the coverage definition exist?

    c1, c2: dicts key -> finite count.  implies(k1, k2) says a tuple of
    type k1 may be mapped onto type k2.  Enumerates all ways to split every
    source count among admissible sinks, respecting sink capacities.
    """
    sources = list(c1)
    sinks = list(c2)

    def rec(si, remaining):
        if si == len(sources):
            return True
        k1 = sources[si]
        need = c1[k1]
        admissible = [k2 for k2 in sinks if implies(k1, k2)]

        def assign(ai, left, rem):
            if left == 0:
                return rec(si + 1, rem)
            if ai == len(admissible):
                return False
            k2 = admissible[ai]
            for amount in range(min(left, rem[k2]), -1, -1):
                rem2 = dict(rem)
                rem2[k2] -= amount
                if assign(ai + 1, left - amount, rem2):
                    return True
            return False

        return assign(0, need, remaining)

    return rec(0, dict(c2))


def maxflow_by_enumeration(caps_src, caps_dst, edges):
    """Max flow by exhaustive integer enumeration (tiny networks only)."""
    best = 0
    srcs = sorted(caps_src)
    total = sum(caps_src.values())
    combos = [range(caps_src[s] + 1) for s in srcs]
    for sent in itertools.product(*combos):
        # try to route sent[i] units from srcs[i]; greedy feasibility check
        # over all distributions via recursive assignment
        if _routable(dict(zip(srcs, sent)), dict(caps_dst), edges):
            best = max(best, sum(sent))
    return best


def _routable(amounts, caps_dst, edges):
    srcs = [s for s, a in amounts.items() if a > 0]
    if not srcs:
        return True
    s = srcs[0]
    outs = [d for (a, d) in edges if a == s and caps_dst.get(d, 0) > 0]

    def assign(oi, left, caps):
        if left == 0:
            rest = dict(amounts)
            rest[s] = 0
            return _routable(rest, caps, edges)
        if oi == len(outs):
            return False
        d = outs[oi]
        for amount in range(min(left, caps[d]), -1, -1):
            caps2 = dict(caps)
            caps2[d] -= amount
            if assign(oi + 1, left - amount, caps2):
                return True
        return False

    return assign(0, amounts[s], dict(caps_dst))
