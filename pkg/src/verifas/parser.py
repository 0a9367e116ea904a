"""Parsing and serialization of workflow specifications and properties.

The specification format is line/block structured with reserved uppercase
keywords (SCHEMA, TASK, SERVICE, ...) and a small expression language for
conditions.  Existential quantifiers in conditions are rewritten into fresh
task variables at parse time; the rewrite is recorded in the parse notes.
Dotted navigation terms are kept as first-class chain expressions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .conditions import (
    EQ, NEQ, And, Cmp, Condition, Const, FalseCond, Not, Or, Rel, TrueCond,
    TRUE, FALSE, Var, conj, disj, free_vars, to_nnf, constants as cond_constants,
)
from .model import (
    ArtifactRelation, Attr, DatabaseSchema, HASSpec, InternalService,
    Relation, Task, Variable, chain_type, validate_schema, validate_spec,
)

KEYWORDS = {
    "SCHEMA", "TASK", "CHILD", "OF", "VARS", "IN", "OUT", "SETREL", "OPEN",
    "CLOSE", "SERVICE", "PRE", "POST", "PROPAGATE", "INSERT", "RETRIEVE",
    "INIT", "VAL", "REF", "PROPERTY", "FORALL", "ON",
}
COND_KEYWORDS = {"and", "or", "not", "exists", "true", "false", "null"}

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<sym>->|!=|[=(){},.:])
""", re.VERBOSE)


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    col: int
    end_col: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.col}"


@dataclass(frozen=True)
class Diagnostic:
    message: str
    span: SourceSpan

    def __str__(self) -> str:
        return f"{self.span}: {self.message}"


class SpecParseError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


@dataclass
class Token:
    kind: str  # "name", "string", "sym", "eof"
    text: str
    span: SourceSpan


def tokenize(text: str, filename: str) -> list[Token]:
    tokens: list[Token] = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            span = SourceSpan(filename, line, col, col + 1)
            raise SpecParseError([Diagnostic(f"unexpected character {text[pos]!r}", span)])
        kind = m.lastgroup
        tok = m.group()
        if kind not in ("ws", "comment"):
            span = SourceSpan(filename, line, col, col + len(tok))
            tokens.append(Token(kind, tok, span))
        newlines = tok.count("\n")
        if newlines:
            line += newlines
            col = len(tok) - tok.rfind("\n")
        else:
            col += len(tok)
        pos = m.end()
    eof_span = SourceSpan(filename, line, col, col + 1)
    tokens.append(Token("eof", "", eof_span))
    return tokens


@dataclass
class _RawService:
    name: str
    span: SourceSpan
    pre: Condition
    post: Condition
    propagated: tuple[str, ...]
    insert: tuple[str, tuple[str, ...]] | None
    retrieve: tuple[str, tuple[str, ...]] | None


@dataclass
class _RawTask:
    name: str
    span: SourceSpan
    parent: str | None
    variables: list[Variable]
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    relations: list[tuple[str, tuple[str, ...]]]
    opening: Condition
    closing: Condition
    services: list[_RawService]
    # existential variables discovered in conditions scoped to this task
    extra_vars: list[Variable] = field(default_factory=list)


class _Parser:
    def __init__(self, text: str, filename: str):
        self.tokens = tokenize(text, filename)
        self.i = 0
        self.diags: list[Diagnostic] = []
        self.notes: list[str] = []
        # pending existential rewrites: (scope, Variable)
        self._exists_scope: list[list[Variable]] | None = None

    # -- token helpers ------------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.i + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        t = self.tokens[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def fail(self, message: str, span: SourceSpan | None = None):
        raise SpecParseError(self.diags + [Diagnostic(message, span or self.peek().span)])

    def expect(self, text: str) -> Token:
        t = self.next()
        if t.text != text:
            self.fail(f"expected {text!r}, found {t.text!r}", t.span)
        return t

    def expect_name(self, what: str = "name") -> Token:
        t = self.next()
        if t.kind != "name" or t.text in KEYWORDS or t.text in COND_KEYWORDS:
            self.fail(f"expected {what}, found {t.text!r}", t.span)
        return t

    def at(self, text: str) -> bool:
        return self.peek().text == text

    def namelist(self) -> tuple[str, ...]:
        names = [self.expect_name().text]
        while self.at(","):
            self.next()
            names.append(self.expect_name().text)
        return tuple(names)

    # -- schema -------------------------------------------------------------

    def parse_schema(self) -> DatabaseSchema:
        self.expect("SCHEMA")
        self.expect("{")
        rels = []
        while not self.at("}"):
            name = self.expect_name("relation name").text
            self.expect("(")
            self.expect("ID")
            attrs = []
            while self.at(","):
                self.next()
                aname = self.expect_name("attribute name").text
                self.expect(":")
                if self.at("VAL"):
                    self.next()
                    attrs.append(Attr(aname))
                else:
                    self.expect("REF")
                    attrs.append(Attr(aname, ref=self.expect_name("relation name").text))
            self.expect(")")
            rels.append(Relation(name, tuple(attrs)))
        self.expect("}")
        return DatabaseSchema(tuple(rels))

    # -- conditions ----------------------------------------------------------

    def parse_condition(self, exists_sink: list[Variable], scope_hint: str) -> Condition:
        """Parse a condition; existential declarations become fresh variables
        appended to exists_sink (renamed if needed for uniqueness)."""
        old = self._exists_scope
        self._exists_scope = exists_sink
        self._scope_hint = scope_hint
        try:
            return self._cond_imp()
        finally:
            self._exists_scope = old

    def _cond_imp(self) -> Condition:
        lhs = self._cond_or()
        if self.at("->"):
            self.next()
            rhs = self._cond_imp()
            return disj(Not(lhs), rhs)
        return lhs

    def _cond_or(self) -> Condition:
        parts = [self._cond_and()]
        while self.at("or"):
            self.next()
            parts.append(self._cond_and())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def _cond_and(self) -> Condition:
        parts = [self._cond_unary()]
        while self.at("and"):
            self.next()
            parts.append(self._cond_unary())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def _cond_unary(self) -> Condition:
        t = self.peek()
        if t.text == "not":
            self.next()
            return Not(self._cond_unary())
        if t.text == "(":
            self.next()
            c = self._cond_imp()
            self.expect(")")
            return c
        if t.text == "true":
            self.next()
            return TRUE
        if t.text == "false":
            self.next()
            return FALSE
        if t.text == "exists":
            return self._cond_exists()
        return self._cond_atom()

    def _cond_exists(self) -> Condition:
        span = self.expect("exists").span
        if self._exists_scope is None:
            self.fail("existential quantifier not allowed here", span)
        decls = []
        while True:
            name = self.expect_name("variable name").text
            self.expect(":")
            if self.at("VAL"):
                self.next()
                decls.append(Variable(name))
            else:
                self.expect("REF")
                decls.append(Variable(name, ref=self.expect_name().text))
            if self.at(","):
                self.next()
                continue
            break
        self.expect(".")
        taken = {v.name for v in self._exists_scope}
        renames = {}
        for v in decls:
            fresh = v.name
            k = 2
            while fresh in taken:
                fresh = f"{v.name}_{k}"
                k += 1
            taken.add(fresh)
            if fresh != v.name:
                renames[v.name] = fresh
                self.notes.append(
                    f"{self._scope_hint}: existential variable {v.name} "
                    f"renamed to task variable {fresh}")
            else:
                self.notes.append(
                    f"{self._scope_hint}: existential variable {v.name} "
                    f"rewritten to a task variable")
            self._exists_scope.append(Variable(fresh, v.ref))
        body = self._cond_unary()
        if renames:
            body = _rename_vars(body, renames)
        return body

    def _cond_atom(self) -> Condition:
        t = self.peek()
        if t.kind == "name" and self.peek(1).text == "(":
            rel = self.next().text
            self.expect("(")
            args = [self._term()]
            while self.at(","):
                self.next()
                args.append(self._term())
            self.expect(")")
            return Rel(rel, tuple(args))
        lhs = self._term()
        op_tok = self.next()
        if op_tok.text == "=":
            op = EQ
        elif op_tok.text == "!=":
            op = NEQ
        else:
            self.fail(f"expected comparison operator, found {op_tok.text!r}", op_tok.span)
        rhs = self._term()
        return Cmp(lhs, op, rhs)

    def _term(self):
        t = self.next()
        if t.kind == "string":
            return Const(t.text[1:-1].replace('\\"', '"').replace("\\\\", "\\"))
        if t.text == "null":
            return Const(None)
        if t.kind != "name" or t.text in KEYWORDS or t.text in COND_KEYWORDS:
            self.fail(f"expected term, found {t.text!r}", t.span)
        path = []
        while self.at("."):
            self.next()
            path.append(self.expect_name("attribute name").text)
        return Var(t.text, tuple(path))

    # -- tasks ----------------------------------------------------------------

    def parse_task(self) -> _RawTask:
        span = self.expect("TASK").span
        name = self.expect_name("task name").text
        parent = None
        if self.at("CHILD"):
            self.next()
            self.expect("OF")
            parent = self.expect_name("task name").text
        self.expect("{")
        self.expect("VARS")
        variables: list[Variable] = []
        while self.peek().kind == "name" and self.peek().text not in KEYWORDS \
                and self.peek(1).text == ":":
            vname = self.expect_name("variable name").text
            self.expect(":")
            if self.at("VAL"):
                self.next()
                variables.append(Variable(vname))
            else:
                self.expect("REF")
                variables.append(Variable(vname, ref=self.expect_name().text))
            if self.at(","):
                self.next()
        inputs: tuple[str, ...] = ()
        outputs: tuple[str, ...] = ()
        if self.at("IN"):
            self.next()
            inputs = self.namelist()
        if self.at("OUT"):
            self.next()
            outputs = self.namelist()
        relations = []
        while self.at("SETREL"):
            self.next()
            rname = self.expect_name("artifact relation name").text
            self.expect("(")
            rvars = self.namelist()
            self.expect(")")
            relations.append((rname, rvars))
        raw = _RawTask(name, span, parent, variables, inputs, outputs,
                       relations, TRUE, FALSE, [])
        self.expect("OPEN")
        # scoped over the parent's variables; sink resolved later
        raw.opening_sink: list[Variable] = []
        raw.opening = self.parse_condition(raw.opening_sink, f"{name}.OPEN")
        self.expect("CLOSE")
        raw.closing = self.parse_condition(raw.extra_vars, f"{name}.CLOSE")
        while self.at("SERVICE"):
            raw.services.append(self.parse_service(raw))
        self.expect("}")
        return raw

    def parse_service(self, raw: _RawTask) -> _RawService:
        span = self.expect("SERVICE").span
        name = self.expect_name("service name").text
        self.expect("{")
        self.expect("PRE")
        pre = self.parse_condition(raw.extra_vars, f"{raw.name}.{name}.PRE")
        self.expect("POST")
        post = self.parse_condition(raw.extra_vars, f"{raw.name}.{name}.POST")
        propagated: tuple[str, ...] = ()
        insert = retrieve = None
        if self.at("PROPAGATE"):
            self.next()
            propagated = self.namelist()
        if self.at("INSERT") or self.at("RETRIEVE"):
            which = self.next().text
            rname = self.expect_name().text
            self.expect("(")
            tup = self.namelist()
            self.expect(")")
            if which == "INSERT":
                insert = (rname, tup)
            else:
                retrieve = (rname, tup)
        self.expect("}")
        return _RawService(name, span, pre, post, propagated, insert, retrieve)

    # -- whole specification ---------------------------------------------------

    def parse_spec(self) -> tuple[HASSpec, list[str]]:
        if self.peek().kind == "eof":
            self.fail("missing root task: empty specification")
        db = self.parse_schema()
        raws: list[_RawTask] = []
        while self.at("TASK"):
            raws.append(self.parse_task())
        if not raws:
            self.fail("missing root task")
        roots = [r for r in raws if r.parent is None]
        init_sink: list[Variable] = []
        self.expect("INIT")
        global_pre = self.parse_condition(
            init_sink, roots[0].name + ".INIT" if roots else "INIT")
        if self.peek().kind != "eof":
            self.fail(f"unexpected trailing input {self.peek().text!r}")
        if roots:
            roots[0].extra_vars.extend(init_sink)

        # existentials in opening conditions belong to the parent's scope
        by_name = {r.name: r for r in raws}
        for r in raws:
            sink = getattr(r, "opening_sink", [])
            if not sink:
                continue
            target = by_name.get(r.parent) if r.parent else r
            if target is not None:
                target.extra_vars.extend(sink)

        tasks = []
        for r in raws:
            variables = tuple(r.variables) + tuple(r.extra_vars)
            seen = set()
            for v in variables:
                if v.name in seen:
                    self.fail(f"duplicate variable {v.name} in task {r.name}", r.span)
                seen.add(v.name)
            rels = []
            for rname, rvars in r.relations:
                attrs = []
                for vn in rvars:
                    vv = next((v for v in variables if v.name == vn), None)
                    if vv is None:
                        self.fail(f"SETREL {rname} refers to unknown variable {vn}", r.span)
                    attrs.append(Variable(vn, vv.ref))
                rels.append(ArtifactRelation(rname, tuple(attrs)))
            tasks.append(Task(
                name=r.name, parent=r.parent, variables=variables,
                relations=tuple(rels), inputs=r.inputs, outputs=r.outputs,
                opening_pre=to_nnf(r.opening), closing_pre=to_nnf(r.closing),
                services=tuple(
                    InternalService(s.name, to_nnf(s.pre), to_nnf(s.post),
                                    s.propagated, s.insert, s.retrieve)
                    for s in r.services),
            ))
        spec = HASSpec(db, tuple(tasks), to_nnf(global_pre))

        schema_report = validate_schema(db)
        spec_report = validate_spec(spec)
        problems = schema_report.violations + spec_report.violations
        if problems:
            span_map = {r.name: r.span for r in raws}
            for r in raws:
                for s in r.services:
                    span_map[f"{r.name}.{s.name}"] = s.span
            diags = []
            for p in problems:
                locus = p.split(":", 1)[0]
                span = None
                while locus and span is None:
                    span = span_map.get(locus)
                    locus = locus.rsplit(".", 1)[0] if "." in locus else ""
                diags.append(Diagnostic(p, span or self.tokens[0].span))
            raise SpecParseError(diags)
        return spec, self.notes


def _rename_vars(c: Condition, renames: dict[str, str]) -> Condition:
    def rt(t):
        if isinstance(t, Var) and t.name in renames:
            return Var(renames[t.name], t.path)
        return t

    if isinstance(c, Cmp):
        return Cmp(rt(c.lhs), c.op, rt(c.rhs))
    if isinstance(c, Rel):
        return Rel(c.name, tuple(rt(a) for a in c.args), c.positive)
    if isinstance(c, Not):
        return Not(_rename_vars(c.sub, renames))
    if isinstance(c, And):
        return And(tuple(_rename_vars(p, renames) for p in c.parts))
    if isinstance(c, Or):
        return Or(tuple(_rename_vars(p, renames) for p in c.parts))
    return c


def parse_spec(text: str, filename: str = "<spec>") -> HASSpec:
    spec, _ = parse_spec_with_notes(text, filename)
    return spec


def parse_spec_with_notes(text: str, filename: str = "<spec>") -> tuple[HASSpec, list[str]]:
    return _Parser(text, filename).parse_spec()


# -- properties ---------------------------------------------------------------


@dataclass(frozen=True)
class LTLFOProperty:
    """An LTL skeleton over condition propositions and observable service
    propositions, universally quantified over typed global variables."""

    task: str
    globals_: tuple[Variable, ...]
    skeleton: tuple  # nested tuples: ("G", f), ("U", a, b), ("prop", key), ...
    prop_map: dict[str, Condition]

    def conditions(self):
        return self.prop_map.values()


class _PropertyParser(_Parser):
    def __init__(self, text: str, filename: str, spec: HASSpec):
        super().__init__(text, filename)
        self.spec = spec
        self.props: dict[Condition, str] = {}

    def parse(self) -> LTLFOProperty:
        self.expect("PROPERTY")
        globals_: tuple[str, ...] = ()
        if self.at("FORALL"):
            self.next()
            globals_ = self.namelist()
        self.expect("ON")
        tname = self.expect_name("task name").text
        task = self.spec.task(tname)
        if task is None:
            self.fail(f"unknown task {tname}")
        self.task = task
        self.global_names = set(globals_)
        self.expect(":")
        skeleton = self._ltl_imp()
        if self.peek().kind != "eof":
            self.fail(f"unexpected trailing input {self.peek().text!r}")
        prop_map = {name: cond for cond, name in self.props.items()}
        typed = self._infer_global_types(globals_, prop_map)
        self._check_scopes(prop_map)
        return LTLFOProperty(tname, typed, skeleton, prop_map)

    # precedence: unary > U > and > or > ->
    def _ltl_imp(self):
        lhs = self._ltl_or()
        if self.at("->"):
            self.next()
            return ("or", ("not", lhs), self._ltl_imp())
        return lhs

    def _ltl_or(self):
        parts = [self._ltl_and()]
        while self.at("or"):
            self.next()
            parts.append(self._ltl_and())
        return parts[0] if len(parts) == 1 else ("or",) + tuple(parts)

    def _ltl_and(self):
        parts = [self._ltl_until()]
        while self.at("and"):
            self.next()
            parts.append(self._ltl_until())
        return parts[0] if len(parts) == 1 else ("and",) + tuple(parts)

    def _ltl_until(self):
        lhs = self._ltl_unary()
        if self.at("U"):
            self.next()
            return ("U", lhs, self._ltl_until())
        return lhs

    def _ltl_unary(self):
        t = self.peek()
        if t.text in ("G", "F", "X") and self.peek(1).text not in (":", "=", "!=", "."):
            self.next()
            return (t.text, self._ltl_unary())
        if t.text == "not":
            self.next()
            return ("not", self._ltl_unary())
        if t.text in ("true", "false"):
            self.next()
            return (t.text,)
        if t.text in ("open", "close", "svc") and self.peek(1).text == ":":
            kind = self.next().text
            self.expect(":")
            name = self.expect_name().text
            return ("svc", self._service_prop(kind, name, t.span))
        if t.text == "(":
            # try a condition first, fall back to a parenthesized subformula
            mark = self.i
            try:
                self.next()
                cond = self.parse_condition([], "property")
                self.expect(")")
                return self._cond_prop(cond)
            except SpecParseError:
                self.i = mark
            self.expect("(")
            inner = self._ltl_imp()
            self.expect(")")
            return inner
        self.fail(f"expected temporal formula, found {t.text!r}", t.span)

    def _service_prop(self, kind: str, name: str, span: SourceSpan) -> str:
        task = self.task
        if kind == "svc":
            if task.service(name) is None:
                self.fail(f"unknown service {name} in task {task.name}", span)
            return name
        target = self.spec.task(name)
        ok = target is not None and (
            name == task.name or (target.parent == task.name))
        if not ok:
            self.fail(f"{kind}:{name} is not observable in task {task.name}", span)
        return f"{kind}:{name}"

    def _cond_prop(self, cond: Condition) -> tuple:
        cond = to_nnf(cond)
        if isinstance(cond, TrueCond):
            return ("true",)
        if isinstance(cond, FalseCond):
            return ("false",)
        if cond not in self.props:
            self.props[cond] = f"p{len(self.props)}"
        return ("prop", self.props[cond])

    def _infer_global_types(self, names: tuple[str, ...],
                            prop_map: dict[str, Condition]) -> tuple[Variable, ...]:
        env = {v.name: v for v in self.task.variables}
        types: dict[str, str | None] = {}
        resolved: dict[str, bool] = {n: False for n in names}

        def term_type(t):
            if isinstance(t, Const):
                return None
            if t.name in env:
                return chain_type(self.spec.db, env[t.name].type, t.path)
            if t.name in resolved and resolved[t.name] and not t.path:
                ref = types[t.name]
                return ("id", ref) if ref else ("val",)
            return None

        from .conditions import atoms
        for _ in range(len(names) + 1):
            changed = False
            for cond in prop_map.values():
                for a in atoms(cond):
                    if isinstance(a, Cmp):
                        for s1, s2 in ((a.lhs, a.rhs), (a.rhs, a.lhs)):
                            if (isinstance(s1, Var) and s1.name in resolved
                                    and not resolved[s1.name] and not s1.path):
                                t2 = term_type(s2)
                                if t2 is not None and t2 != ("null",):
                                    types[s1.name] = t2[1] if t2[0] == "id" else None
                                    resolved[s1.name] = True
                                    changed = True
                    elif isinstance(a, Rel):
                        rel = self.spec.db.relation(a.name)
                        if rel is None:
                            continue
                        slots = [("id", a.name)] + [
                            ("val",) if at.ref is None else ("id", at.ref)
                            for at in rel.attrs]
                        for arg, slot in zip(a.args, slots):
                            if (isinstance(arg, Var) and arg.name in resolved
                                    and not resolved[arg.name] and not arg.path):
                                types[arg.name] = slot[1] if slot[0] == "id" else None
                                resolved[arg.name] = True
                                changed = True
            if not changed:
                break
        return tuple(Variable(n, types.get(n)) for n in names)

    def _check_scopes(self, prop_map: dict[str, Condition]) -> None:
        allowed = {v.name for v in self.task.variables} | self.global_names
        for cond in prop_map.values():
            extra = free_vars(cond) - allowed
            if extra:
                self.fail("condition mentions variables outside the task scope: "
                          + ", ".join(sorted(extra)))


def parse_property(text: str, spec: HASSpec, filename: str = "<property>") -> LTLFOProperty:
    return _PropertyParser(text, filename, spec).parse()


# -- serialization ------------------------------------------------------------


def _fmt_term(t) -> str:
    return str(t)


def _fmt_cond(c: Condition, top: bool = True) -> str:
    if isinstance(c, TrueCond):
        return "true"
    if isinstance(c, FalseCond):
        return "false"
    if isinstance(c, Cmp):
        return f"{_fmt_term(c.lhs)} {c.op} {_fmt_term(c.rhs)}"
    if isinstance(c, Rel):
        body = "%s(%s)" % (c.name, ", ".join(_fmt_term(a) for a in c.args))
        return body if c.positive else f"not {body}"
    if isinstance(c, Not):
        return f"not ({_fmt_cond(c.sub, False)})"
    if isinstance(c, And):
        s = " and ".join(_wrap(p) for p in c.parts)
        return s
    if isinstance(c, Or):
        s = " or ".join(_wrap(p) for p in c.parts)
        return s
    raise TypeError(c)


def _wrap(c: Condition) -> str:
    if isinstance(c, (And, Or)):
        return "(" + _fmt_cond(c, False) + ")"
    return _fmt_cond(c, False)


def serialize_spec(spec: HASSpec) -> str:
    out = ["SCHEMA {"]
    for r in spec.db.relations:
        attrs = ", ".join(
            f"{a.name}: VAL" if a.ref is None else f"{a.name}: REF {a.ref}"
            for a in r.attrs)
        out.append(f"  {r.name}(ID{', ' + attrs if attrs else ''})")
    out.append("}")
    for t in spec.tasks:
        head = f"TASK {t.name}"
        if t.parent:
            head += f" CHILD OF {t.parent}"
        out.append("")
        out.append(head + " {")
        decls = " ".join(
            f"{v.name}: VAL" if v.ref is None else f"{v.name}: REF {v.ref}"
            for v in t.variables)
        out.append(f"  VARS {decls}")
        if t.inputs:
            out.append("  IN " + ", ".join(t.inputs))
        if t.outputs:
            out.append("  OUT " + ", ".join(t.outputs))
        for r in t.relations:
            out.append(f"  SETREL {r.name}(" + ", ".join(a.name for a in r.attrs) + ")")
        out.append("  OPEN " + _fmt_cond(t.opening_pre))
        out.append("  CLOSE " + _fmt_cond(t.closing_pre))
        for s in t.services:
            out.append(f"  SERVICE {s.name} {{")
            out.append("    PRE " + _fmt_cond(s.pre))
            out.append("    POST " + _fmt_cond(s.post))
            if s.propagated:
                out.append("    PROPAGATE " + ", ".join(s.propagated))
            if s.insert:
                out.append(f"    INSERT {s.insert[0]}(" + ", ".join(s.insert[1]) + ")")
            if s.retrieve:
                out.append(f"    RETRIEVE {s.retrieve[0]}(" + ", ".join(s.retrieve[1]) + ")")
            out.append("  }")
        out.append("}")
    out.append("")
    out.append("INIT " + _fmt_cond(spec.global_pre))
    out.append("")
    return "\n".join(out)


def property_constants(prop: LTLFOProperty) -> set[str]:
    out: set[str] = set()
    for c in prop.conditions():
        out |= {v for v in cond_constants(c) if v is not None}
    return out
