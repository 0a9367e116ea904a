"""Random synthetic workflow generator.

Every structural component is drawn from its own sub-stream of a seeded
Mersenne-Twister generator, so output is byte-identical for identical
parameters and seed.  Shapes follow fixed recipes: random recursive trees
for the schema and hierarchy, four value attributes per relation, equally
many variables per type (remainder to value-typed), a tenth of the
variables as inputs and another tenth as outputs, one artifact relation per
task, and five-atom conditions whose binary connective tree prefers
conjunction four to one.  Specifications with an empty reachable state
space are rejected and regenerated.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .conditions import And, Cmp, Condition, Const, EQ, FALSE, NEQ, Or, Rel, TRUE, Var, to_nnf
from .model import (
    ArtifactRelation, Attr, DatabaseSchema, HASSpec, InternalService,
    Relation, Task, Variable, validate_spec, validate_schema,
)

CONSTANT_POOL = tuple(f"c{i}" for i in range(10))

ATOMS_PER_CONDITION = 5
AND_PROBABILITY = 4 / 5
NEGATION_PROBABILITY = 1 / 2
ATTRS_PER_RELATION = 4
INPUT_FRACTION = 10  # one tenth of the variables
UPDATE_PROBABILITY = 1 / 3  # propagate-subset | insert | retrieve


@dataclass(frozen=True)
class GenParams:
    relations: int = 5
    tasks: int = 5
    variables: int = 75
    services: int = 75
    seed: int = 0

    def __post_init__(self):
        if min(self.relations, self.tasks, self.variables, self.services) < 1:
            raise ValueError("all generator parameters must be at least 1")


def _substream(seed: int, label: str) -> random.Random:
    return random.Random(f"{seed}/{label}")


def _random_tree(rng: random.Random, n: int) -> list:
    """parent index per node; node 0 is the root (parent None)."""
    return [None] + [rng.randrange(i) for i in range(1, n)]


def _split(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def generate_condition(rng: random.Random, variables, db: DatabaseSchema,
                       atoms: int = ATOMS_PER_CONDITION) -> Condition:
    """Random condition: fixed number of atoms, each uniformly an equality
    between variables, a comparison with a constant, or a relational atom;
    each negated with probability one half; combined by a random binary
    tree preferring conjunction."""
    by_type: dict = {}
    for v in variables:
        by_type.setdefault(v.ref, []).append(v)
    val_vars = by_type.get(None, [])

    def var_eq():
        x = rng.choice(variables)
        pool = [y for y in by_type[x.ref] if y.name != x.name]
        if not pool:
            return None
        y = rng.choice(pool)
        return Cmp(Var(x.name), EQ, Var(y.name))

    def const_eq():
        if not val_vars:
            return None
        x = rng.choice(val_vars)
        return Cmp(Var(x.name), EQ, Const(rng.choice(CONSTANT_POOL)))

    def rel_atom():
        usable = []
        for rel in db.relations:
            if not by_type.get(rel.name):
                continue
            ok = all((a.ref is None and val_vars) or (a.ref and by_type.get(a.ref))
                     for a in rel.attrs)
            if ok:
                usable.append(rel)
        if not usable:
            return None
        rel = rng.choice(usable)
        args = [Var(rng.choice(by_type[rel.name]).name)]
        for a in rel.attrs:
            pool = val_vars if a.ref is None else by_type[a.ref]
            args.append(Var(rng.choice(pool).name))
        return Rel(rel.name, tuple(args))

    kinds = (var_eq, const_eq, rel_atom)
    leaves = []
    while len(leaves) < atoms:
        kind = int(rng.random() * 3)
        atom = kinds[kind]()
        if atom is None:
            # degenerate variable pool: deterministically fall back to the
            # next feasible atom kind so the stream stays aligned
            for alt in (kinds[(kind + 1) % 3], kinds[(kind + 2) % 3]):
                atom = alt()
                if atom is not None:
                    break
        if atom is None:
            atom = TRUE
        if rng.random() < NEGATION_PROBABILITY:
            if isinstance(atom, Cmp):
                atom = Cmp(atom.lhs, NEQ if atom.op == EQ else EQ, atom.rhs)
            elif isinstance(atom, Rel):
                atom = Rel(atom.name, atom.args, not atom.positive)
        leaves.append(atom)

    def build(items):
        if len(items) == 1:
            return items[0]
        cut = rng.randint(1, len(items) - 1)
        left, right = build(items[:cut]), build(items[cut:])
        if rng.random() < AND_PROBABILITY:
            return And((left, right))
        return Or((left, right))

    return to_nnf(build(leaves))


def _generate_once(p: GenParams, attempt: int) -> HASSpec:
    seed = p.seed * 1000003 + attempt
    rng_schema = _substream(seed, "schema")
    rng_tree = _substream(seed, "hierarchy")
    rng_vars = _substream(seed, "variables")
    rng_io = _substream(seed, "io")
    rng_rel = _substream(seed, "artifact")
    rng_svc = _substream(seed, "services")
    rng_cond = _substream(seed, "conditions")

    # database schema: a random tree of relations, children referencing
    # their parent through one foreign key, four value attributes each
    parents = _random_tree(rng_schema, p.relations)
    relations = []
    for i in range(p.relations):
        attrs = [Attr(f"a{j}") for j in range(1, ATTRS_PER_RELATION + 1)]
        if parents[i] is not None:
            attrs.append(Attr("ref", ref=f"R{parents[i]}"))
        relations.append(Relation(f"R{i}", tuple(attrs)))
    db = DatabaseSchema(tuple(relations))

    task_parents = _random_tree(rng_tree, p.tasks)
    var_counts = _split(p.variables, p.tasks)
    svc_counts = _split(p.services, p.tasks)

    # variables: equal counts per type, remainder value-typed
    types = [None] + [r.name for r in relations]
    task_vars: list[list[Variable]] = []
    for ti in range(p.tasks):
        per_type, extra = divmod(var_counts[ti], len(types))
        vs = []
        for k, ref in enumerate(types):
            count = per_type + (extra if k == 0 else 0)
            for j in range(count):
                vs.append(Variable(f"t{ti}v{len(vs)}", ref))
        rng_vars.shuffle(vs)
        task_vars.append(vs)

    # inputs/outputs: a tenth each, named after compatible parent variables
    inputs: list[tuple] = [()] * p.tasks
    outputs: list[tuple] = [()] * p.tasks
    renamed_vars = [list(vs) for vs in task_vars]
    for ti in range(1, p.tasks):
        parent_vars = renamed_vars[task_parents[ti]]
        n_io = var_counts[ti] // INPUT_FRACTION
        own = renamed_vars[ti]
        taken_parent: set[str] = set()
        chosen_in, chosen_out = [], []
        candidates = list(range(len(own)))
        rng_io.shuffle(candidates)
        for idx in candidates:
            v = own[idx]
            pool = [pv for pv in parent_vars
                    if pv.ref == v.ref and pv.name not in taken_parent]
            if not pool:
                continue
            target = rng_io.choice(pool)
            if len(chosen_in) < n_io:
                chosen_in.append((idx, target))
            elif len(chosen_out) < n_io:
                chosen_out.append((idx, target))
            else:
                break
            taken_parent.add(target.name)
        for idx, target in chosen_in + chosen_out:
            own[idx] = Variable(target.name, own[idx].ref)
        inputs[ti] = tuple(own[idx].name for idx, _ in chosen_in)
        outputs[ti] = tuple(own[idx].name for idx, _ in chosen_out)

    tasks = []
    for ti in range(p.tasks):
        vs = renamed_vars[ti]
        arity = min(ATTRS_PER_RELATION, len(vs))
        tuple_vars = rng_rel.sample(vs, arity)
        art = ArtifactRelation(f"S{ti}", tuple(Variable(v.name, v.ref) for v in tuple_vars))
        fixed_tuple = tuple(v.name for v in tuple_vars)

        services = []
        for si in range(svc_counts[ti]):
            pre = generate_condition(rng_cond, vs, db)
            post = generate_condition(rng_cond, vs, db)
            roll = rng_svc.random()
            insert = retrieve = None
            if roll < UPDATE_PROBABILITY:
                extra = rng_svc.sample(vs, max(0, len(vs) // INPUT_FRACTION))
                prop = tuple(dict.fromkeys(list(inputs[ti]) + [v.name for v in extra]))
            elif roll < 2 * UPDATE_PROBABILITY:
                insert = (art.name, fixed_tuple)
                prop = inputs[ti]
            else:
                retrieve = (art.name, fixed_tuple)
                prop = inputs[ti]
            services.append(InternalService(
                f"t{ti}s{si}", pre, post, prop, insert, retrieve))

        if ti == 0:
            opening, closing = TRUE, FALSE
        else:
            opening = generate_condition(rng_cond, renamed_vars[task_parents[ti]], db)
            closing = generate_condition(rng_cond, vs, db)
        tasks.append(Task(
            name=f"T{ti}",
            parent=None if task_parents[ti] is None else f"T{task_parents[ti]}",
            variables=tuple(vs),
            relations=(art,),
            inputs=inputs[ti],
            outputs=outputs[ti],
            opening_pre=opening,
            closing_pre=closing,
            services=tuple(services),
        ))

    global_pre = generate_condition(rng_cond, renamed_vars[0], db)
    return HASSpec(db, tuple(tasks), global_pre)


def _has_live_states(spec: HASSpec) -> bool:
    """Reject specs whose symbolic state space is empty: no consistent
    initial state or no applicable first step."""
    from .search import SearchOptions, Budget
    from .semantics import Engine
    opts = SearchOptions(static_filter=False, timeout=30.0, node_cap=2000)
    engine = Engine(spec, opts)
    engine.budget = Budget(opts)
    ctx = engine.context(spec.root.name)
    initials = ctx.initial_raw()
    if not initials:
        return False
    return any(engine.successors(ctx, psi) for _, psi in initials)


def generate_workflow(p: GenParams) -> HASSpec:
    """Deterministic synthetic specification for the given parameters."""
    for attempt in range(64):
        spec = _generate_once(p, attempt)
        if not validate_schema(spec.db).ok or not validate_spec(spec).ok:
            continue
        try:
            live = _has_live_states(spec)
        except Exception:
            live = False
        if live:
            return spec
    raise RuntimeError(f"no viable specification after 64 attempts for {p}")


def spec_statistics(spec: HASSpec) -> dict:
    return {
        "relations": len(spec.db.relations),
        "tasks": len(spec.tasks),
        "variables": sum(len(t.variables) for t in spec.tasks),
        "services": sum(len(t.services) for t in spec.tasks),
    }


def condition_subformulas(spec: HASSpec, task_name: str) -> list[Condition]:
    """All sub-formulas of the task's service pre/post conditions, used to
    instantiate property templates."""
    out = []

    def walk(c):
        out.append(c)
        if isinstance(c, (And, Or)):
            for part in c.parts:
                walk(part)

    task = spec.task(task_name)
    for s in task.services:
        walk(s.pre)
        walk(s.post)
    return out
