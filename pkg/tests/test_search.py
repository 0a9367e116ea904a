"""Karp-Miller search: acceleration, pruning soundness, coverability oracle."""

import random

import pytest

from verifas.conditions import And, Cmp, Const, EQ, NEQ, Or, TrueCond, Var, to_nnf
from verifas.cover import leq_cover, preceq_cover
from verifas.model import (
    ArtifactRelation, DatabaseSchema, HASSpec, InternalService, Task, Variable,
    validate_spec,
)
from verifas.search import Budget, SearchOptions, SearchStats, km_search
from verifas.semantics import Engine
from verifas.state import OMEGA

from concrete import abstract_state, bounded_reach


def counter_spec():
    """Two-counter system: one uncond. increment per relation plus a guarded
    retrieve; drives classic omega acceleration."""
    db = DatabaseSchema(())
    red = ArtifactRelation("SA", (Variable("x"),))
    blue = ArtifactRelation("SB", (Variable("y"),))
    task = Task(
        "T", None, (Variable("x"), Variable("y")), (red, blue),
        services=(
            InternalService("incA", TrueCond(), TrueCond(), (), ("SA", ("x",)), None),
            InternalService("incB", TrueCond(), TrueCond(), (), ("SB", ("y",)), None),
            InternalService("decA", TrueCond(), TrueCond(), (), None, ("SA", ("x",))),
        ),
    )
    return HASSpec(db, (task,), TrueCond())


def run_search(spec, opts, early_stop=None):
    engine = Engine(spec, opts)
    engine.budget = Budget(opts)
    ctx = engine.context(spec.root.name)
    stats = SearchStats()
    tree = km_search(engine, ctx, ctx.initial_raw(), stats=stats,
                     early_stop=early_stop)
    return engine, ctx, tree, stats


class TestAcceleration:
    @pytest.mark.parametrize("ordering", ["leq", "preceq"])
    def test_increment_loop_reaches_omega(self, ordering):
        spec = counter_spec()
        opts = SearchOptions(ordering=ordering, timeout=30.0, node_cap=5000,
                             static_filter=False)
        _, _, tree, stats = run_search(spec, opts)
        assert stats.accelerations > 0
        assert any(n.psi.has_omega() for n in tree.nodes)
        assert not tree.timed_out

    def test_acceleration_free_instance_equals_reachable_graph(self):
        # bounded flag machine: value cycles through constants, no counters
        db = DatabaseSchema(())
        cond = lambda n, c: Cmp(Var(n), EQ, Const(c))
        task = Task("T", None, (Variable("v"),), (), services=(
            InternalService("ab", cond("v", "a"), cond("v", "b")),
            InternalService("bc", cond("v", "b"), cond("v", "c")),
            InternalService("ca", cond("v", "c"), cond("v", "a")),
        ))
        spec = HASSpec(db, (task,), cond("v", "a"))
        opts = SearchOptions(pruning=False, static_filter=False, timeout=10.0)
        _, _, tree, stats = run_search(spec, opts)
        assert stats.accelerations == 0
        values = sorted(str(n.psi.tau) for n in tree.nodes)
        assert len(values) == 3  # exactly v=a, v=b, v=c


def random_counter_spec(rng: random.Random):
    """Tiny single-task spec over value variables with one or two artifact
    relations; conditions compare variables and constants only."""
    consts = ["a", "b"]
    n_vars = rng.randint(1, 2)
    variables = tuple(Variable(f"v{i}") for i in range(n_vars))
    rels = []
    for ri in range(rng.randint(1, 2)):
        attrs = (Variable(f"p{ri}0"),)
        rels.append(ArtifactRelation(f"S{ri}", attrs))

    def atom():
        v = rng.choice(variables).name
        roll = rng.random()
        if roll < 0.4:
            return Cmp(Var(v), rng.choice([EQ, NEQ]), Const(rng.choice(consts)))
        if roll < 0.6 and n_vars > 1:
            other = rng.choice([x.name for x in variables if x.name != v])
            return Cmp(Var(v), rng.choice([EQ, NEQ]), Var(other))
        return Cmp(Var(v), rng.choice([EQ, NEQ]), Const(None))

    def condition():
        k = rng.randint(1, 2)
        parts = [atom() for _ in range(k)]
        if len(parts) == 1:
            return parts[0]
        return And(tuple(parts)) if rng.random() < 0.7 else Or(tuple(parts))

    services = []
    for si in range(rng.randint(2, 4)):
        pre = condition() if rng.random() < 0.8 else TrueCond()
        post = condition() if rng.random() < 0.8 else TrueCond()
        insert = retrieve = None
        roll = rng.random()
        if roll < 0.4:
            rel = rng.choice(rels)
            tup = tuple(rng.choice(variables).name for _ in rel.attrs)
            insert = (rel.name, tup)
        elif roll < 0.7:
            rel = rng.choice(rels)
            tup = tuple(rng.choice(variables).name for _ in rel.attrs)
            retrieve = (rel.name, tup)
        services.append(InternalService(f"s{si}", to_nnf(pre), to_nnf(post),
                                        (), insert, retrieve))
    task = Task("T", None, variables, tuple(rels), services=tuple(services))
    spec = HASSpec(DatabaseSchema(()), (task,), TrueCond())
    assert validate_spec(spec).ok
    return spec


class TestCoverabilityOracle:
    @pytest.mark.parametrize("ordering", ["leq", "preceq"])
    def test_concrete_states_covered(self, ordering):
        """Every concretely reachable state within bounds must be covered by
        the extracted coverability set (no misses, many random instances)."""
        rng = random.Random(20240200 + (0 if ordering == "leq" else 1))
        domain = [None, "a", "b", "f1", "f2"]
        instances = 0
        checked_states = 0
        while instances < 110:
            spec = random_counter_spec(rng)
            opts = SearchOptions(ordering=ordering, timeout=20.0,
                                 node_cap=20000, static_filter=False)
            engine, ctx, tree, stats = run_search(spec, opts)
            if tree.timed_out:
                continue
            try:
                states = bounded_reach(spec, domain, depth=8, store_cap=6,
                                       limit=60000)
            except RuntimeError:
                continue  # concrete oracle exploded; instance out of scope
            instances += 1
            cover = tree.active_psis()
            for cs in states:
                psi = abstract_state(ctx.u, spec, cs)
                covered = any(preceq_cover(psi, member) for member in cover)
                assert covered, (spec, cs)
                checked_states += 1
        assert checked_states > 1000

    def test_pruned_covered_by_active(self):
        """Every node of the unpruned tree is covered by an active node of
        the pruned tree (pruning soundness)."""
        rng = random.Random(77)
        done = 0
        while done < 25:
            spec = random_counter_spec(rng)
            opts_off = SearchOptions(pruning=False, ordering="leq",
                                     static_filter=False, timeout=20.0,
                                     node_cap=2000)
            engine, ctx, tree_off, _ = run_search(spec, opts_off)
            if tree_off.timed_out or len(tree_off.nodes) > 1500:
                continue
            opts_on = SearchOptions(pruning=True, ordering="preceq",
                                    static_filter=False, timeout=20.0)
            engine2, ctx2, tree_on, _ = run_search(spec, opts_on)
            active = tree_on.active_psis()
            # transfer unpruned states into the pruned engine's universe is
            # unnecessary: both universes are built identically
            for node in tree_off.nodes:
                psi = node.psi
                mirrored = ctx2.u.intern(psi.tau.classes, psi.tau.neqs)
                from verifas.state import PSI
                twin = PSI(mirrored,
                           tuple(((r, ctx2.u.intern(t.classes, t.neqs)), v)
                                 for (r, t), v in psi.counters),
                           psi.rbar, psi.q, psi.terminal)
                assert any(preceq_cover(twin, a) for a in active), node.psi
            done += 1

    def test_sp_explores_no_more_nodes(self):
        rng = random.Random(123)
        done = 0
        while done < 15:
            spec = random_counter_spec(rng)
            off = SearchOptions(pruning=False, ordering="leq",
                                static_filter=False, timeout=20.0, node_cap=4000)
            _, _, t_off, s_off = run_search(spec, off)
            if t_off.timed_out:
                continue
            on = SearchOptions(pruning=True, ordering="preceq",
                               static_filter=False, timeout=20.0)
            _, _, t_on, s_on = run_search(spec, on)
            assert s_on.nodes <= s_off.nodes
            done += 1


class TestTreeStructure:
    def test_parent_links_acyclic_and_replayable(self):
        spec = counter_spec()
        opts = SearchOptions(timeout=10.0, static_filter=False)
        engine, ctx, tree, _ = run_search(spec, opts)
        for nid, node in enumerate(tree.nodes):
            seen = {nid}
            cur = node.parent
            while cur is not None:
                assert cur not in seen
                seen.add(cur)
                cur = tree.nodes[cur].parent
        # every non-accelerated edge replays through the successor function
        for nid, node in enumerate(tree.nodes):
            if node.parent is None or nid in tree.accel_info:
                continue
            succs = dict(engine.successors(ctx, tree.nodes[node.parent].psi))
            assert node.step in succs and succs[node.step] == node.psi

    def test_active_nodes_reachable_from_roots(self):
        spec = counter_spec()
        opts = SearchOptions(timeout=10.0, static_filter=False)
        _, _, tree, _ = run_search(spec, opts)
        for nid, node in enumerate(tree.nodes):
            path = tree.path_from_root(nid)
            assert path[0] in tree.roots
