"""Temporal-logic skeletons and their translation to Buchi automata.

Skeletons are nested tuples over condition propositions ("prop", key) and
service propositions ("svc", name):

    ("true",) ("false",) ("prop", k) ("svc", n) ("not", f)
    ("and", f, ...) ("or", f, ...) ("X", f) ("WX", f)
    ("U", a, b) ("R", a, b) ("G", f) ("F", f)

Translation uses the classic tableau construction on obligation sets, so the
finite-word accepting subset falls out of the bookkeeping: a state accepts a
finite word iff its remaining obligations are discharged by the empty
continuation.  Negation on finite words swaps the strong next X with the
weak next WX; on infinite words the two coincide.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .parser import LTLFOProperty


def ltl_nnf(f: tuple) -> tuple:
    kind = f[0]
    if kind in ("true", "false", "prop", "svc"):
        return f
    if kind == "not":
        return _neg(f[1])
    if kind in ("and", "or"):
        return (kind,) + tuple(ltl_nnf(p) for p in f[1:])
    if kind in ("X", "WX", "G", "F"):
        return (kind, ltl_nnf(f[1]))
    if kind in ("U", "R"):
        return (kind, ltl_nnf(f[1]), ltl_nnf(f[2]))
    raise ValueError(f)


def _neg(f: tuple) -> tuple:
    kind = f[0]
    if kind == "true":
        return ("false",)
    if kind == "false":
        return ("true",)
    if kind in ("prop", "svc"):
        return ("not", f)
    if kind == "not":
        return ltl_nnf(f[1])
    if kind == "and":
        return ("or",) + tuple(_neg(p) for p in f[1:])
    if kind == "or":
        return ("and",) + tuple(_neg(p) for p in f[1:])
    if kind == "X":
        return ("WX", _neg(f[1]))
    if kind == "WX":
        return ("X", _neg(f[1]))
    if kind == "G":
        return ("F", _neg(f[1]))
    if kind == "F":
        return ("G", _neg(f[1]))
    if kind == "U":
        return ("R", _neg(f[1]), _neg(f[2]))
    if kind == "R":
        return ("U", _neg(f[1]), _neg(f[2]))
    raise ValueError(f)


def negate_property(prop: LTLFOProperty) -> LTLFOProperty:
    """Negated skeleton in normal form; same propositions, conditions and
    global variables (the search treats the globals existentially)."""
    return LTLFOProperty(prop.task, prop.globals_,
                         ltl_nnf(("not", prop.skeleton)), dict(prop.prop_map))


def _eventualities(f: tuple, acc: list) -> None:
    kind = f[0]
    if kind in ("U", "F") and f not in acc:
        acc.append(f)
    if kind in ("and", "or", "X", "WX", "G", "F"):
        for p in f[1:]:
            _eventualities(p, acc)
    elif kind in ("U", "R"):
        _eventualities(f[1], acc)
        _eventualities(f[2], acc)
    elif kind == "not":
        _eventualities(f[1], acc)


def _empty_sat(f: tuple) -> bool:
    """Is the obligation satisfied by the empty continuation (no further
    letters)?  Literals and strong operators fail; G/R/WX hold vacuously."""
    kind = f[0]
    if kind in ("true", "G", "R", "WX"):
        return True
    if kind in ("false", "prop", "svc", "not", "X", "U", "F"):
        return False
    if kind == "and":
        return all(_empty_sat(p) for p in f[1:])
    if kind == "or":
        return any(_empty_sat(p) for p in f[1:])
    raise ValueError(f)


@dataclass
class BuchiAutomaton:
    """Buchi automaton over letters = sets of true propositions.

    Transition labels are consistent literal sets (pos, neg); accepting
    states must repeat for infinite acceptance, fin_accepting accepts
    finite words read as an ordinary automaton.
    """

    initial: int
    transitions: list[list[tuple[frozenset, frozenset, int]]]
    accepting: frozenset
    fin_accepting: frozenset
    obligations: list = field(default_factory=list, repr=False)

    @property
    def n_states(self) -> int:
        return len(self.transitions)

    @staticmethod
    def label_matches(pos: frozenset, neg: frozenset, letter: frozenset) -> bool:
        return pos <= letter and not (neg & letter)

    def step(self, states: set, letter: frozenset) -> set:
        out = set()
        for q in states:
            for pos, neg, dest in self.transitions[q]:
                if self.label_matches(pos, neg, letter):
                    out.add(dest)
        return out

    def accepts_finite(self, word) -> bool:
        states = {self.initial}
        for letter in word:
            states = self.step(states, frozenset(letter))
            if not states:
                return False
        return bool(states & self.fin_accepting)

    def accepts_lasso(self, prefix, loop) -> bool:
        """Acceptance of the infinite word prefix + loop^omega."""
        loop = [frozenset(l) for l in loop]
        if not loop:
            return False
        start = {self.initial}
        for letter in prefix:
            start = self.step(start, frozenset(letter))
        if not start:
            return False
        # search for a reachable accepting cycle in automaton x loop position
        nodes = {(q, 0) for q in start}
        edges: dict[tuple, set] = {}
        todo = list(nodes)
        while todo:
            q, i = todo.pop()
            nxt = self.step({q}, loop[i])
            j = (i + 1) % len(loop)
            edges[(q, i)] = {(p, j) for p in nxt}
            for node in edges[(q, i)]:
                if node not in nodes:
                    nodes.add(node)
                    todo.append(node)
        index: dict[tuple, int] = {}
        low: dict[tuple, int] = {}
        on: set = set()
        stack: list = []
        counter = [0]
        sccs = []

        def strongconnect(v):
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
                    parent = work[-1][0]
                    low[parent] = min(low[parent], low[node])
                if low[node] == index[node]:
                    comp = []
                    while True:
                        w = stack.pop()
                        on.discard(w)
                        comp.append(w)
                        if w == node:
                            break
                    sccs.append(comp)

        for v in nodes:
            if v not in index:
                strongconnect(v)
        for comp in sccs:
            comp_set = set(comp)
            nontrivial = len(comp) > 1 or any(
                v in edges.get(v, ()) for v in comp)
            if nontrivial and any(q in self.accepting for q, _ in comp):
                # a cycle inside one SCC through an accepting state exists
                internal = any(edges.get(v, set()) & comp_set for v in comp)
                if internal:
                    return True
        return False


def _expand(state: frozenset, eventualities: list) -> list:
    """All resolutions of an obligation set into one step.

    Returns (pos, neg, next_state, postponed) tuples; postponed lists the
    U/F eventualities whose satisfaction was deferred to the next state.
    """
    results = []
    todo0 = sorted(state)

    def rec(todo, pos, neg, nxt, postponed):
        if not todo:
            if pos & neg:
                return
            results.append((frozenset(pos), frozenset(neg),
                            frozenset(nxt), frozenset(postponed)))
            return
        f = todo[0]
        rest = todo[1:]
        kind = f[0]
        if kind == "true":
            rec(rest, pos, neg, nxt, postponed)
        elif kind == "false":
            return
        elif kind in ("prop", "svc"):
            if f in neg:
                return
            rec(rest, pos | {f}, neg, nxt, postponed)
        elif kind == "not":
            lit = f[1]
            if lit in pos:
                return
            rec(rest, pos, neg | {lit}, nxt, postponed)
        elif kind == "and":
            rec(list(f[1:]) + rest, pos, neg, nxt, postponed)
        elif kind == "or":
            for p in f[1:]:
                rec([p] + rest, pos, neg, nxt, postponed)
        elif kind in ("X", "WX"):
            rec(rest, pos, neg, nxt | {f[1]}, postponed)
        elif kind == "U":
            a, b = f[1], f[2]
            rec([b] + rest, pos, neg, nxt, postponed)
            rec([a] + rest, pos, neg, nxt | {f}, postponed | {f})
        elif kind == "F":
            rec([f[1]] + rest, pos, neg, nxt, postponed)
            rec(rest, pos, neg, nxt | {f}, postponed | {f})
        elif kind == "R":
            a, b = f[1], f[2]
            rec([b, a] + rest, pos, neg, nxt, postponed)
            rec([b] + rest, pos, neg, nxt | {f}, postponed)
        elif kind == "G":
            rec([f[1]] + rest, pos, neg, nxt | {f}, postponed)
        else:
            raise ValueError(f)

    rec(todo0, set(), set(), set(), set())
    return results


def ltl_to_buchi(skeleton: tuple, service_props: frozenset = frozenset()) -> BuchiAutomaton:
    """Tableau translation of an LTL skeleton (any form; normalized here).

    service_props lists the ("svc", name) atoms that are mutually exclusive
    per step; transition labels asserting two of them positively can never
    fire and are dropped.
    """
    root = ltl_nnf(skeleton)
    eventualities: list = []
    _eventualities(root, eventualities)
    K = len(eventualities)

    obligation_sets: dict[frozenset, int] = {}
    raw_transitions: list[list] = []

    def state_id(s: frozenset) -> int:
        if s not in obligation_sets:
            obligation_sets[s] = len(raw_transitions)
            raw_transitions.append(None)
        return obligation_sets[s]

    init_raw = state_id(frozenset({root}))
    todo = [frozenset({root})]
    while todo:
        s = todo.pop()
        sid = obligation_sets[s]
        if raw_transitions[sid] is not None:
            continue
        outs = []
        seen = set()
        for pos, neg, nxt, postponed in _expand(s, eventualities):
            if len(pos & service_props) > 1:
                continue
            key = (pos, neg, nxt, postponed)
            if key in seen:
                continue
            seen.add(key)
            outs.append((pos, neg, state_id(nxt), postponed))
            if raw_transitions[obligation_sets[nxt]] is None and nxt not in todo:
                todo.append(nxt)
        raw_transitions[sid] = outs

    # degeneralize: levels 0..K, level K is accepting and restarts at 0
    def advance(i: int, postponed: frozenset) -> int:
        j = i
        while j < K and eventualities[j] not in postponed:
            j += 1
        return j

    by_raw = {v: k for k, v in obligation_sets.items()}
    states: dict[tuple, int] = {}
    transitions: list[list] = []
    accepting = set()
    fin_accepting = set()
    obligations: list = []

    def deg_id(raw: int, level: int) -> int:
        key = (raw, level)
        if key not in states:
            states[key] = len(transitions)
            transitions.append(None)
            obligations.append(by_raw[raw])
            if level == K:
                accepting.add(states[key])
            if all(_empty_sat(f) for f in by_raw[raw]):
                fin_accepting.add(states[key])
        return states[key]

    initial = deg_id(init_raw, 0)
    work = [(init_raw, 0)]
    while work:
        raw, level = work.pop()
        sid = states[(raw, level)]
        if transitions[sid] is not None:
            continue
        outs = []
        base = 0 if level == K else level
        for pos, neg, dest_raw, postponed in raw_transitions[raw]:
            j = advance(base, postponed)
            dest = deg_id(dest_raw, j)
            if transitions[dest] is None and (dest_raw, j) not in work:
                work.append((dest_raw, j))
            outs.append((pos, neg, dest))
        transitions[sid] = sorted(set(outs), key=lambda t: (sorted(t[0]), sorted(t[1]), t[2]))

    return BuchiAutomaton(initial, transitions, frozenset(accepting),
                          frozenset(fin_accepting), obligations)


def finite_accepting_subset(b: BuchiAutomaton) -> frozenset:
    return b.fin_accepting
