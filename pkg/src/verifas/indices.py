"""Candidate filtering for coverage queries over the active set.

Every state is indexed by its edge signature E(I): the edge ids of its type
plus those of every stored-tuple type with a positive counter.  A trie over
sorted signatures answers superset queries, inverted lists answer subset
queries.  Coverage queries additionally use the type-only part of the
signature: a state covered by another always has its whole type contained
in the coverer's type, so querying with type edges keeps the candidate sets
supersets of the exact answers in both directions.

Removal is lazy (tombstones); the structures are rebuilt once more than
half of the indexed entries are dead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .state import PSI


def signature(u, psi: PSI) -> frozenset:
    """E(I): edge ids of the type plus all positive-counter tuple types."""
    out = set(psi.tau.edge_ids)
    for (_, tau_s), _ in psi.counters:
        out |= tau_s.edge_ids
    return frozenset(out)


def tau_signature(u, psi: PSI) -> frozenset:
    return psi.tau.edge_ids


class _TrieNode:
    __slots__ = ("children", "items")

    def __init__(self):
        self.children: dict[int, _TrieNode] = {}
        self.items: list[int] = []


class SignatureTrie:
    """Trie over sorted edge-id sequences supporting superset queries."""

    def __init__(self):
        self.root = _TrieNode()
        self.count = 0

    def add(self, sig: frozenset, item: int) -> None:
        node = self.root
        for e in sorted(sig):
            node = node.children.setdefault(e, _TrieNode())
        node.items.append(item)
        self.count += 1

    def supersets(self, query: frozenset) -> list[int]:
        """Items whose stored signature contains every edge of the query."""
        q = sorted(query)
        out: list[int] = []
        stack = [(self.root, 0)]
        while stack:
            node, i = stack.pop()
            if i == len(q):
                out.extend(node.items)
                for child in node.children.values():
                    stack.append((child, i))
                continue
            need = q[i]
            for e, child in node.children.items():
                if e < need:
                    stack.append((child, i))
                elif e == need:
                    stack.append((child, i + 1))
        return out


class InvertedIndex:
    """Per-edge posting lists supporting subset queries by hit counting."""

    def __init__(self):
        self.postings: dict[int, list[int]] = {}
        self.sizes: dict[int, int] = {}
        self.empty: list[int] = []

    def add(self, sig: frozenset, item: int) -> None:
        self.sizes[item] = len(sig)
        if not sig:
            self.empty.append(item)
            return
        for e in sig:
            self.postings.setdefault(e, []).append(item)

    def subsets(self, query: frozenset) -> list[int]:
        """Items whose stored signature is contained in the query set."""
        hits: dict[int, int] = {}
        for e in query:
            for item in self.postings.get(e, ()):
                hits[item] = hits.get(item, 0) + 1
        out = [item for item, n in hits.items() if n == self.sizes[item]]
        out.extend(self.empty)
        return out


@dataclass
class _Bucket:
    trie: SignatureTrie = field(default_factory=SignatureTrie)
    inv_full: InvertedIndex = field(default_factory=InvertedIndex)
    inv_tau: InvertedIndex = field(default_factory=InvertedIndex)
    members: dict[int, tuple] = field(default_factory=dict)  # id -> (sig, tau_sig)
    dead: int = 0

    def rebuild(self) -> None:
        trie, inv_full, inv_tau = SignatureTrie(), InvertedIndex(), InvertedIndex()
        for item, (sig, tau_sig) in self.members.items():
            trie.add(sig, item)
            inv_full.add(sig, item)
            inv_tau.add(tau_sig, item)
        self.trie, self.inv_full, self.inv_tau = trie, inv_full, inv_tau
        self.dead = 0


class ActiveIndex:
    """Per-bucket signature indices over the active states of a search.

    Coverage queries are partitioned by (child status, automaton state)
    since coverage requires equality there.
    """

    def __init__(self, u, enabled: bool = True):
        self.u = u
        self.enabled = enabled
        self.buckets: dict[tuple, _Bucket] = {}
        self.psis: dict[int, PSI] = {}

    def _bucket(self, psi: PSI) -> _Bucket:
        key = psi.bucket()
        if key not in self.buckets:
            self.buckets[key] = _Bucket()
        return self.buckets[key]

    def add(self, item: int, psi: PSI) -> None:
        if item in self.psis:
            return
        self.psis[item] = psi
        b = self._bucket(psi)
        sig, tau_sig = signature(self.u, psi), tau_signature(self.u, psi)
        b.members[item] = (sig, tau_sig)
        b.trie.add(sig, item)
        b.inv_full.add(sig, item)
        b.inv_tau.add(tau_sig, item)

    def remove(self, item: int) -> None:
        psi = self.psis.pop(item, None)
        if psi is None:
            return
        b = self._bucket(psi)
        b.members.pop(item, None)
        b.dead += 1
        if b.dead > len(b.members):
            b.rebuild()

    def __contains__(self, item: int) -> bool:
        return item in self.psis

    def __len__(self) -> int:
        return len(self.psis)

    def items(self):
        return self.psis.items()

    def _alive(self, b: _Bucket, ids) -> list[int]:
        return [i for i in ids if i in b.members]

    def covering_candidates(self, psi: PSI) -> list[int]:
        """Candidates that may cover psi: their type is contained in psi's,
        so their tau signature is a subset of psi's full signature."""
        key = psi.bucket()
        b = self.buckets.get(key)
        if b is None:
            return []
        if not self.enabled:
            return list(b.members)
        return self._alive(b, b.inv_tau.subsets(signature(self.u, psi)))

    def covered_candidates(self, psi: PSI) -> list[int]:
        """Candidates psi may cover: psi's type edges appear in their full
        signature (superset query with the type-only key)."""
        key = psi.bucket()
        b = self.buckets.get(key)
        if b is None:
            return []
        if not self.enabled:
            return list(b.members)
        return self._alive(b, b.trie.supersets(tau_signature(self.u, psi)))

    def subset_candidates(self, psi: PSI) -> list[int]:
        """All active states whose full signature is contained in E(psi)
        (may return further states; never misses)."""
        key = psi.bucket()
        b = self.buckets.get(key)
        if b is None:
            return []
        if not self.enabled:
            return list(b.members)
        return self._alive(b, b.inv_full.subsets(signature(self.u, psi)))

    def superset_candidates(self, psi: PSI) -> list[int]:
        """All active states whose full signature contains E(psi)."""
        key = psi.bucket()
        b = self.buckets.get(key)
        if b is None:
            return []
        if not self.enabled:
            return list(b.members)
        return self._alive(b, b.trie.supersets(signature(self.u, psi)))
