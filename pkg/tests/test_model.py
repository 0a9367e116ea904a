"""Schema and specification validation."""

import pytest

from verifas.conditions import Cmp, Const, EQ, FalseCond, TrueCond, Var
from verifas.model import (
    ArtifactRelation, Attr, DatabaseSchema, HASSpec, InternalService,
    Relation, Task, Variable, validate_schema, validate_spec,
)
from verifas.parser import parse_spec, parse_spec_with_notes, SpecParseError

FIXTURE = open("fixtures/order_fulfillment.has").read()


class TestSchemaValidation:
    def test_single_foreign_key_ok(self):
        db = DatabaseSchema((
            Relation("CUSTOMERS", (Attr("name"), Attr("record", ref="CREDIT_RECORD"))),
            Relation("CREDIT_RECORD", (Attr("status"),)),
        ))
        assert validate_schema(db).ok

    def test_empty_schema_ok(self):
        assert validate_schema(DatabaseSchema(())).ok

    def test_fk_cycle_reported_with_witness(self):
        db = DatabaseSchema((
            Relation("R1", (Attr("F", ref="R2"),)),
            Relation("R2", (Attr("F", ref="R1"),)),
        ))
        report = validate_schema(db)
        assert not report.ok
        assert any("FK cycle" in v and "R1" in v and "R2" in v
                   for v in report.violations)

    def test_dangling_reference(self):
        db = DatabaseSchema((Relation("R", (Attr("F", ref="GONE"),)),))
        report = validate_schema(db)
        assert any("dangling" in v for v in report.violations)

    def test_duplicate_attribute(self):
        db = DatabaseSchema((Relation("R", (Attr("A"), Attr("A"))),))
        assert not validate_schema(db).ok


def small_ok_spec():
    db = DatabaseSchema((Relation("R", (Attr("A"),)),))
    rel = ArtifactRelation("S", (Variable("x", "R"), Variable("v")))
    child = Task(
        "C", "T", (Variable("y", "R"), Variable("w")), (),
        inputs=("y",), outputs=("w",),
        opening_pre=Cmp(Var("v"), EQ, Const("go")),
        closing_pre=Cmp(Var("w"), EQ, Const("done")),
        services=(InternalService("work", TrueCond(),
                                  Cmp(Var("w"), EQ, Const("done")), ("y",)),),
    )
    task = Task(
        "T", None, (Variable("x", "R"), Variable("v"), Variable("y", "R"),
                    Variable("w")),
        (rel,),
        services=(InternalService("put", TrueCond(), TrueCond(), (),
                                  ("S", ("x", "v")), None),),
    )
    return HASSpec(db, (task, child), TrueCond())


class TestSpecValidation:
    def test_fixture_accepted(self):
        spec = parse_spec(FIXTURE)
        assert validate_spec(spec).ok

    def test_small_spec_ok(self):
        assert validate_spec(small_ok_spec()).ok

    def test_update_with_extra_propagation_rejected(self):
        spec = small_ok_spec()
        task = spec.tasks[0]
        bad = Task(task.name, None, task.variables, task.relations,
                   services=(InternalService("put", TrueCond(), TrueCond(),
                                             ("v",), ("S", ("x", "v")), None),))
        report = validate_spec(HASSpec(spec.db, (bad, spec.tasks[1]), TrueCond()))
        assert any("propagate exactly the inputs" in v for v in report.violations)

    def test_output_overlapping_parent_inputs_rejected(self):
        db = DatabaseSchema(())
        parent = Task("P", "G", (Variable("a"), Variable("b")), (),
                      inputs=("a",), closing_pre=TrueCond())
        grand = Task("G", None, (Variable("a"), Variable("b")))
        child = Task("C", "P", (Variable("a"),), (), outputs=("a",),
                     closing_pre=TrueCond())
        report = validate_spec(HASSpec(db, (grand, parent, child), TrueCond()))
        assert any("overlap parent input" in v for v in report.violations)

    def test_root_conventions_enforced(self):
        db = DatabaseSchema(())
        bad_root = Task("T", None, (Variable("v"),),
                        opening_pre=Cmp(Var("v"), EQ, Const("x")))
        report = validate_spec(HASSpec(db, (bad_root,), TrueCond()))
        assert any("root opening" in v for v in report.violations)

    def test_update_tuple_type_mismatch(self):
        spec = small_ok_spec()
        task = spec.tasks[0]
        bad = Task(task.name, None, task.variables, task.relations,
                   services=(InternalService("put", TrueCond(), TrueCond(), (),
                                             ("S", ("v", "x")), None),))
        report = validate_spec(HASSpec(spec.db, (bad, spec.tasks[1]), TrueCond()))
        assert any("type differs" in v for v in report.violations)

    def test_condition_scope_checked(self):
        db = DatabaseSchema(())
        task = Task("T", None, (Variable("v"),),
                    services=(InternalService(
                        "s", Cmp(Var("nope"), EQ, Const("x")), TrueCond()),))
        report = validate_spec(HASSpec(db, (task,), TrueCond()))
        assert any("cannot type term nope" in v for v in report.violations)


class TestFixtureMutations:
    """Single-rule mutations of the fixture text must each be rejected."""

    @pytest.mark.parametrize("old,new,expect", [
        # update tuple with a type mismatch against the artifact relation
        ("INSERT ORDERS(cust_id, item_id, status, instock)",
         "INSERT ORDERS(item_id, cust_id, status, instock)", "type differs"),
        # propagating more than the inputs alongside an update
        ("POST true\n    RETRIEVE ORDERS(cust_id, item_id, status, instock)",
         "POST true\n    PROPAGATE status\n    RETRIEVE ORDERS(cust_id, item_id, status, instock)",
         "propagate exactly the inputs"),
        # unknown variable in a service condition
        ('PRE cust_id = null and item_id = null',
         'PRE cust_id = null and bogus = null', "cannot type term bogus"),
        # child output keeps its name but no parent counterpart exists
        ("OUT cust_id, item_id, status, instock",
         "OUT cust_id, item_id, status, instock, r", "no parent counterpart"),
        # root with a non-trivial closing condition
        ('OPEN true\n  CLOSE false', 'OPEN true\n  CLOSE status = "Done"',
         "root closing"),
    ])
    def test_mutation_rejected(self, old, new, expect):
        text = FIXTURE.replace(old, new, 1)
        assert text != FIXTURE, "mutation did not apply"
        with pytest.raises(SpecParseError) as err:
            parse_spec(text)
        assert expect in str(err.value)

    def test_existential_rewrite_recorded(self):
        spec, notes = parse_spec_with_notes(FIXTURE)
        assert any("existential variable" in n for n in notes)
        # the rewritten variables joined the task's variable list
        take = spec.task("TakeOrder")
        assert {"n", "a", "r"} <= {v.name for v in take.variables}
