"""Expressions and partial isomorphism types.

An expression is a constant or a navigation chain rooted at a task variable,
a frozen global variable, or an artifact-relation attribute, following
foreign keys through the database schema.  Acyclic foreign keys bound chain
length, so the expression universe of a task is finite.

A partial isomorphism type is a consistent set of =/!= constraints over the
universe, closed under:
  1. key/foreign-key congruence: e ~ e' forces e.A ~ e'.A whenever both
     chains exist in the universe, and
  2. replication of != edges across ~-classes, with no != inside a class.

Closure additionally tracks the value domain of each class (id domains are
pairwise disjoint, chains of length >= 1 never hold null, distinct constants
differ), so that constraint sets which force an empty domain are rejected
and sets which force null are merged with the null constant's class.
Missing edges mean the connection is unknown.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence

from .conditions import (
    EQ,
    NEQ,
    And,
    Cmp,
    Condition,
    Const,
    FalseCond,
    Or,
    Rel,
    TrueCond,
)
from .model import VAL, DatabaseSchema, HASSpec, Task, Variable, chain_type, id_type

# Root keys identify expression roots across universes.
#   ("const", value) | ("var", name) | ("attr", relation, attribute)
RootKey = tuple

# Cap on materialized disjunctive-normal-form conjuncts per condition.
MAX_CONJUNCTS = 20000


class Domain(NamedTuple):
    """Possible-value abstraction of a ~-class: union of the id domains in
    ids, the value domain if val, and {null} if null; const pins an exact
    string value."""

    ids: frozenset
    val: bool
    null: bool
    const: Optional[str]


def _meet(a: Domain, b: Domain) -> Optional[Domain]:
    if a.const is not None and b.const is not None and a.const != b.const:
        return None
    const = a.const if a.const is not None else b.const
    val = a.val and b.val
    if const is not None:
        if not val:
            return None
        return Domain(frozenset(), True, False, const)
    ids = a.ids & b.ids
    null = a.null and b.null
    if not ids and not val and not null:
        return None
    return Domain(ids, val, null, None)


def _null_only(d: Domain) -> bool:
    return d.null and not d.val and not d.ids


@dataclass(frozen=True)
class Expr:
    eid: int
    root: RootKey
    path: tuple[str, ...]
    type: tuple  # VAL or ("id", R); constants use VAL, null uses ("null",)
    nullable: bool
    frozen: bool  # global property variable: survives every projection

    def __str__(self) -> str:
        if self.root[0] == "const":
            return "null" if self.root[1] is None else '"%s"' % self.root[1]
        head = self.root[1] if self.root[0] == "var" else f"{self.root[1]}.{self.root[2]}"
        return ".".join((head,) + self.path)


class ExpressionUniverse:
    """The finite expression set of one task (plus property constants and
    frozen global variables), with stable dense integer ids."""

    def __init__(self, db: DatabaseSchema):
        self.db = db
        self.exprs: list[Expr] = []
        self._by_key: dict[tuple[RootKey, tuple], int] = {}
        self.children: list[dict[str, int]] = []
        self.base_dom: list[Domain] = []
        self.null_id: int = -1
        self._intern: dict[tuple, "IsoType"] = {}
        self._eval_cache: dict[tuple, tuple] = {}
        self._conj_cache: dict[Condition, tuple] = {}
        self._extend_cache: dict[tuple, "IsoType | None"] = {}
        self._project_cache: dict[tuple, "IsoType"] = {}
        self.empty_type: IsoType = None  # set after construction

    # -- construction ------------------------------------------------------

    def _add(self, root: RootKey, path: tuple[str, ...], typ: tuple,
             nullable: bool, frozen: bool) -> int:
        eid = len(self.exprs)
        self.exprs.append(Expr(eid, root, path, typ, nullable, frozen))
        self._by_key[(root, path)] = eid
        self.children.append({})
        if root[0] == "const":
            if root[1] is None:
                dom = Domain(frozenset(), False, True, None)
            else:
                dom = Domain(frozenset(), True, False, root[1])
        else:
            ids = frozenset() if typ == VAL else frozenset({typ[1]})
            dom = Domain(ids, typ == VAL, nullable, None)
        self.base_dom.append(dom)
        return eid

    def _add_chains(self, eid: int) -> None:
        e = self.exprs[eid]
        if e.type == VAL or e.type[0] != "id":
            return
        rel = self.db.relation(e.type[1])
        if rel is None:
            return
        for attr in rel.attrs:
            typ = VAL if attr.ref is None else id_type(attr.ref)
            child = self._add(e.root, e.path + (attr.name,), typ, False, e.frozen)
            self.children[eid][attr.name] = child
            self._add_chains(child)

    def expr_id(self, root: RootKey, path: tuple[str, ...] = ()) -> int:
        return self._by_key[(root, path)]

    def has_expr(self, root: RootKey, path: tuple[str, ...] = ()) -> bool:
        return (root, path) in self._by_key

    def term_id(self, t) -> int:
        if isinstance(t, Const):
            return self.expr_id(("const", t.value))
        return self.expr_id(("var", t.name), t.path)

    def edge_id(self, i: int, j: int, op: str) -> int:
        if i > j:
            i, j = j, i
        return (j * (j - 1) // 2 + i) * 2 + (0 if op == EQ else 1)

    # -- types -------------------------------------------------------------

    def intern(self, classes: tuple, neqs: frozenset) -> "IsoType":
        key = (classes, neqs)
        t = self._intern.get(key)
        if t is None:
            t = IsoType(self, classes, neqs)
            self._intern[key] = t
        return t


def build_universe(spec: HASSpec, task: Task,
                   globals_: Sequence[Variable] = (),
                   extra_constants: Iterable[str] = ()) -> ExpressionUniverse:
    """Enumerate the expression universe of a task.

    Contains all constants of the spec plus extra_constants (property
    constants), the task's variables and the frozen globals with their
    foreign-key chains, and attribute-rooted chains for every artifact
    relation of the task.  Enumeration order is deterministic.
    """
    u = ExpressionUniverse(spec.db)
    u.null_id = u._add(("const", None), (), ("null",), True, False)
    for c in sorted(set(spec.constants()) | set(extra_constants)):
        u._add(("const", c), (), VAL, False, False)
    for v in task.variables:
        eid = u._add(("var", v.name), (), v.type, True, False)
        u._add_chains(eid)
    for g in globals_:
        eid = u._add(("var", g.name), (), g.type, True, True)
        u._add_chains(eid)
    for rel in task.relations:
        for a in rel.attrs:
            eid = u._add(("attr", rel.name, a.name), (), a.type, True, False)
            u._add_chains(eid)
    u.empty_type = u.intern((), frozenset())
    return u


def expressions_for_task(spec: HASSpec, task: Task,
                         globals_: Sequence[Variable] = (),
                         extra_constants: Iterable[str] = ()) -> ExpressionUniverse:
    return build_universe(spec, task, globals_, extra_constants)


class IsoType:
    """Canonical frozen partial isomorphism type.

    classes lists the non-singleton ~-classes as sorted member tuples,
    ordered by smallest member; neqs holds != constraints as pairs of class
    representatives (the smallest member id, or the expression itself for
    singletons).  Instances are interned per universe, so identity equality
    is object identity.
    """

    __slots__ = ("u", "classes", "neqs", "_rep", "_edges", "_edge_ids", "_hash")

    def __init__(self, u: ExpressionUniverse, classes: tuple, neqs: frozenset):
        self.u = u
        self.classes = classes
        self.neqs = neqs
        self._rep: dict[int, int] | None = None
        self._edges = None
        self._edge_ids = None
        self._hash = hash((classes, neqs))

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        return self is other or (
            isinstance(other, IsoType)
            and self.classes == other.classes
            and self.neqs == other.neqs
        )

    def __repr__(self) -> str:
        parts = []
        for cls in self.classes:
            parts.append(" = ".join(str(self.u.exprs[m]) for m in cls))
        for a, b in sorted(self.neqs):
            parts.append(f"{self.u.exprs[a]} != {self.u.exprs[b]}")
        return "{" + "; ".join(parts) + "}"

    @property
    def rep(self) -> dict[int, int]:
        if self._rep is None:
            self._rep = {m: cls[0] for cls in self.classes for m in cls}
        return self._rep

    def find(self, x: int) -> int:
        return self.rep.get(x, x)

    def members(self, rep: int) -> tuple[int, ...]:
        for cls in self.classes:
            if cls[0] == rep:
                return cls
        return (rep,)

    def same(self, a: int, b: int) -> bool:
        return a == b or self.find(a) == self.find(b)

    def distinct(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        return (min(ra, rb), max(ra, rb)) in self.neqs

    @property
    def edges(self) -> frozenset:
        """Expanded edge set: all implied (i, j, op) pairs with i < j."""
        if self._edges is None:
            out = set()
            for cls in self.classes:
                for i in range(len(cls)):
                    for j in range(i + 1, len(cls)):
                        out.add((cls[i], cls[j], EQ))
            for ra, rb in self.neqs:
                for a in self.members(ra):
                    for b in self.members(rb):
                        lo, hi = (a, b) if a < b else (b, a)
                        out.add((lo, hi, NEQ))
            self._edges = frozenset(out)
        return self._edges

    @property
    def edge_ids(self) -> frozenset:
        if self._edge_ids is None:
            self._edge_ids = frozenset(
                self.u.edge_id(i, j, op) for i, j, op in self.edges)
        return self._edge_ids

    def is_empty(self) -> bool:
        return not self.classes and not self.neqs

    def extend(self, constraints) -> Optional["IsoType"]:
        """Least closed consistent superset with the extra (a, b, op) edges,
        or None if that forces a contradiction.  Results are cached; the
        same few types get extended by the same constraint sets constantly
        during search."""
        constraints = tuple(constraints)
        key = (id(self), constraints)
        cache = self.u._extend_cache
        if key in cache:
            return cache[key]
        b = TypeBuilder(self.u, self)
        out: Optional[IsoType] = None
        for x, y, op in constraints:
            if not b.add(x, y, op):
                break
        else:
            out = b.freeze()
        cache[key] = out
        return out


class TypeBuilder:
    """Mutable congruence-closure engine used to build IsoTypes."""

    def __init__(self, u: ExpressionUniverse, base: IsoType | None = None):
        self.u = u
        self.parent: dict[int, int] = {}
        self.members: dict[int, list[int]] = {}
        self.neq: dict[int, set[int]] = {}
        self.cmap: dict[int, dict[str, int]] = {}
        self.dom: dict[int, Domain] = {}
        self.dead = False
        if base is not None and not base.is_empty():
            for cls in base.classes:
                first = cls[0]
                for m in cls[1:]:
                    if not self.add(first, m, EQ):
                        return
            for a, b in base.neqs:
                if not self.add(a, b, NEQ):
                    return

    def find(self, x: int) -> int:
        p = self.parent
        root = x
        while p.get(root, root) != root:
            root = p[root]
        while p.get(x, x) != x:
            p[x], x = root, p[x]
        return root

    def _members(self, r: int) -> list[int]:
        m = self.members.get(r)
        if m is None:
            m = self.members[r] = [r]
        return m

    def _dom(self, r: int) -> Domain:
        d = self.dom.get(r)
        if d is None:
            d = self.dom[r] = self.u.base_dom[r]
        return d

    def _cmap(self, r: int) -> dict[str, int]:
        c = self.cmap.get(r)
        if c is None:
            c = self.cmap[r] = dict(self.u.children[r])
        return c

    def add(self, a: int, b: int, op: str) -> bool:
        if self.dead:
            return False
        if op == EQ:
            self._union(a, b)
        else:
            ra, rb = self.find(a), self.find(b)
            if ra == rb:
                self.dead = True
            else:
                self.neq.setdefault(ra, set()).add(rb)
                self.neq.setdefault(rb, set()).add(ra)
        return not self.dead

    def _union(self, a: int, b: int) -> None:
        work = [(a, b)]
        while work and not self.dead:
            x, y = work.pop()
            rx, ry = self.find(x), self.find(y)
            if rx == ry:
                continue
            if ry in self.neq.get(rx, ()):
                self.dead = True
                return
            d = _meet(self._dom(rx), self._dom(ry))
            if d is None:
                self.dead = True
                return
            mx, my = self._members(rx), self._members(ry)
            if len(mx) < len(my):
                rx, ry, mx, my = ry, rx, my, mx
            # merge ry into rx
            self.parent[ry] = rx
            mx.extend(my)
            del self.members[ry]
            for nb in self.neq.pop(ry, ()):
                self.neq[nb].discard(ry)
                if nb == rx:
                    self.dead = True
                    return
                self.neq[nb].add(rx)
                self.neq.setdefault(rx, set()).add(nb)
            cx, cy = self._cmap(rx), self._cmap(ry)
            for attr, child in cy.items():
                other = cx.get(attr)
                if other is None:
                    cx[attr] = child
                else:
                    work.append((child, other))
            del self.cmap[ry]
            self.dom[rx] = d
            self.dom.pop(ry, None)
            if _null_only(d) and self.find(self.u.null_id) != rx:
                work.append((rx, self.u.null_id))

    def freeze(self) -> Optional[IsoType]:
        if self.dead:
            return None
        canon: dict[int, int] = {}
        classes = []
        for r, mem in self.members.items():
            if len(mem) > 1:
                mem_sorted = tuple(sorted(mem))
                classes.append(mem_sorted)
                canon[r] = mem_sorted[0]
        classes.sort()
        neqs = set()
        for ra, nbs in self.neq.items():
            ca = canon.get(ra, ra)
            for rb in nbs:
                cb = canon.get(rb, rb)
                neqs.add((min(ca, cb), max(ca, cb)))
        return self.u.intern(tuple(classes), frozenset(neqs))


def close_and_check(u: ExpressionUniverse,
                    constraints: Iterable[tuple]) -> Optional[IsoType]:
    """Close an arbitrary (a, b, op) edge set; None when inconsistent."""
    return u.empty_type.extend(constraints)


# -- condition flattening and DNF conjuncts ---------------------------------

def _flatten_atom(u: ExpressionUniverse, a) -> list[list[tuple]]:
    """Branches of primitive constraints for one NNF atom.

    A positive relational atom contributes one branch: the head is non-null
    and each argument equals the corresponding attribute chain.  A negative
    one contributes one branch per argument asserting a != on that chain.
    """
    if isinstance(a, Cmp):
        return [[(u.term_id(a.lhs), u.term_id(a.rhs), a.op)]]
    assert isinstance(a, Rel)
    rel = u.db.relation(a.name)
    head = u.term_id(a.args[0])
    cmap = u.children[head]
    if any(attr.name not in cmap for attr in rel.attrs):
        # literal-null head: the atom is false, its negation true
        return [] if a.positive else [[]]
    chains = []
    for arg, attr in zip(a.args[1:], rel.attrs):
        chains.append((u.term_id(arg), cmap[attr.name]))
    if a.positive:
        branch = [(head, u.null_id, NEQ)]
        branch += [(arg, chain, EQ) for arg, chain in chains]
        return [branch]
    return [[(arg, chain, NEQ)] for arg, chain in chains]


def conjuncts(u: ExpressionUniverse, cond: Condition) -> tuple[tuple, ...]:
    """DNF conjuncts of the flattened condition, as constraint tuples.

    Each conjunct induces a partial isomorphism type; inconsistent ones are
    kept here (dropped when closed).  Enumeration order is deterministic;
    results are cached per condition.
    """
    cached = u._conj_cache.get(cond)
    if cached is not None:
        return cached

    def walk(c) -> list[tuple]:
        if isinstance(c, TrueCond):
            return [()]
        if isinstance(c, FalseCond):
            return []
        if isinstance(c, (Cmp, Rel)):
            return [tuple(br) for br in _flatten_atom(u, c)]
        if isinstance(c, Or):
            out = []
            for p in c.parts:
                out.extend(walk(p))
                if len(out) > MAX_CONJUNCTS:
                    raise ValueError("condition has too many DNF conjuncts")
            return out
        if isinstance(c, And):
            out = [()]
            for p in c.parts:
                branches = walk(p)
                out = [acc + br for acc in out for br in branches]
                if len(out) > MAX_CONJUNCTS:
                    raise ValueError("condition has too many DNF conjuncts")
            return out
        raise TypeError(f"condition not in NNF: {c!r}")

    result = tuple(walk(cond))
    u._conj_cache[cond] = result
    return result


def dnf_conjuncts(u: ExpressionUniverse, cond: Condition) -> tuple[IsoType, ...]:
    """The consistent conjunct types t(theta) of a condition in NNF."""
    seen = []
    for theta in conjuncts(u, cond):
        t = close_and_check(u, theta)
        if t is not None and t not in seen:
            seen.append(t)
    return tuple(seen)


def satisfies_condition(u: ExpressionUniverse, tau: IsoType, cond: Condition) -> bool:
    """Three-valued satisfaction collapsed to bool: atoms with missing edges
    are false, so tau |= cond means every completion of tau satisfies cond."""
    if isinstance(cond, TrueCond):
        return True
    if isinstance(cond, FalseCond):
        return False
    if isinstance(cond, Cmp):
        a, b = u.term_id(cond.lhs), u.term_id(cond.rhs)
        return tau.same(a, b) if cond.op == EQ else tau.distinct(a, b)
    if isinstance(cond, Rel):
        rel = u.db.relation(cond.name)
        head = u.term_id(cond.args[0])
        cmap = u.children[head]
        if any(attr.name not in cmap for attr in rel.attrs):
            return not cond.positive
        pairs = []
        for arg, attr in zip(cond.args[1:], rel.attrs):
            pairs.append((u.term_id(arg), cmap[attr.name]))
        if cond.positive:
            return all(tau.same(a, c) for a, c in pairs)
        return any(tau.distinct(a, c) for a, c in pairs)
    if isinstance(cond, And):
        return all(satisfies_condition(u, tau, p) for p in cond.parts)
    if isinstance(cond, Or):
        return any(satisfies_condition(u, tau, p) for p in cond.parts)
    raise TypeError(f"condition not in NNF: {cond!r}")


def eval_extensions(u: ExpressionUniverse, tau: IsoType,
                    cond: Condition) -> tuple[IsoType, ...]:
    """All minimal consistent extensions of tau satisfying cond.

    Extensions that are strict supersets of other extensions are dropped;
    the remaining types all satisfy cond and contain tau.
    """
    key = (id(tau), cond)
    cached = u._eval_cache.get(key)
    if cached is not None:
        return cached
    results: list[IsoType] = []
    for theta in conjuncts(u, cond):
        t = tau.extend(theta)
        if t is not None and t not in results:
            results.append(t)
    minimal = tuple(
        t for t in results
        if not any(o is not t and o.edges < t.edges for o in results))
    u._eval_cache[key] = minimal
    return minimal


# -- projection and renaming -------------------------------------------------

def project(u: ExpressionUniverse, tau: IsoType, keep_vars: frozenset,
            keep_attr_rels: frozenset = frozenset()) -> IsoType:
    """Restrict to edges whose endpoints are constants, frozen globals, or
    chains headed by keep_vars (or by attributes of keep_attr_rels); the
    result is re-closed."""
    key = (id(tau), keep_vars, keep_attr_rels)
    cached = u._project_cache.get(key)
    if cached is not None:
        return cached

    def kept(eid: int) -> bool:
        e = u.exprs[eid]
        if e.root[0] == "const" or e.frozen:
            return True
        if e.root[0] == "var":
            return e.root[1] in keep_vars
        return e.root[1] in keep_attr_rels

    constraints = []
    for cls in tau.classes:
        ks = [m for m in cls if kept(m)]
        constraints += [(ks[0], m, EQ) for m in ks[1:]]
    for ra, rb in tau.neqs:
        ka = next((m for m in tau.members(ra) if kept(m)), None)
        kb = next((m for m in tau.members(rb) if kept(m)), None)
        if ka is not None and kb is not None:
            constraints.append((ka, kb, NEQ))
    out = close_and_check(u, constraints)
    assert out is not None, "projection of a consistent type stays consistent"
    u._project_cache[key] = out
    return out


def rename_tuple(src: ExpressionUniverse, tau: IsoType,
                 dst: ExpressionUniverse,
                 head_map: dict) -> Optional[IsoType]:
    """Translate a type between head spaces (and possibly universes).

    head_map sends root keys to tuples of destination root keys; constants
    map to themselves, frozen globals map to themselves when the destination
    universe has them.  Edges with an untranslatable endpoint are dropped
    (project first for exact behavior).  A head with several images also
    yields suffix equalities between the image chains.
    """

    def images(eid: int):
        e = src.exprs[eid]
        if e.root[0] == "const":
            return (dst.expr_id(e.root, ()),)
        targets = head_map.get(e.root)
        if targets is None:
            if e.frozen and dst.has_expr(e.root, e.path):
                return (dst.expr_id(e.root, e.path),)
            return None
        return tuple(dst.expr_id(t, e.path) for t in targets)

    constraints = []
    for a, b, op in tau.edges:
        ia, ib = images(a), images(b)
        if ia is None or ib is None:
            continue
        for x in ia:
            for y in ib:
                if x != y:
                    constraints.append((x, y, op))
    for root, targets in head_map.items():
        if len(targets) > 1:
            for (r, path), eid in src._by_key.items():
                if r == root:
                    first = dst.expr_id(targets[0], path)
                    for t in targets[1:]:
                        constraints.append((first, dst.expr_id(t, path), EQ))
    return close_and_check(dst, constraints)


def implies_type(tau: IsoType, tau2: IsoType) -> bool:
    """tau implies tau2 iff tau2's closure is contained in tau's."""
    if tau is tau2:
        return True
    for cls in tau2.classes:
        r = tau.find(cls[0])
        for m in cls[1:]:
            if tau.find(m) != r:
                return False
    for ra, rb in tau2.neqs:
        if not tau.distinct(ra, rb):
            return False
    return True
