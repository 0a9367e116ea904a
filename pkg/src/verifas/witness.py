"""Rendering of verdicts and counterexample traces.

A trace lists one step per line with the applied service, the constraints
the step added, and the stored-tuple counter deltas; repeating suffixes are
marked with a LASSO line.  The structured form is plain JSON-serializable
data for machine consumption.
"""

from __future__ import annotations

from .repeated import Verdict, Witness
from .state import OMEGA, PSI


def _fmt_edge(u, edge) -> str:
    a, b, op = edge
    return f"{u.exprs[a]} {op} {u.exprs[b]}"


def _fmt_count(v) -> str:
    return "omega" if v == OMEGA else str(int(v))


def _fmt_key(u, key) -> str:
    rel, tau = key
    inner = ", ".join(sorted(_fmt_edge(u, e) for e in tau.edges))
    return "%s{%s}" % (rel, inner)


def _step_edges(u, prev: PSI | None, cur: PSI) -> list[str]:
    added = cur.tau.edges - (prev.tau.edges if prev is not None else frozenset())
    return sorted(_fmt_edge(u, e) for e in added)


def _step_counters(u, prev: PSI | None, cur: PSI) -> list[str]:
    before = prev.counter_dict() if prev is not None else {}
    after = cur.counter_dict()
    out = []
    for key in sorted(set(before) | set(after),
                      key=lambda k: (k[0], k[1].classes, tuple(sorted(k[1].neqs)))):
        b, a = before.get(key, 0), after.get(key, 0)
        if a != b:
            sign = "+" if a > b else "-"
            out.append(f"{sign}{_fmt_key(u, key)} -> {_fmt_count(a)}")
    return out


def serialize_counterexample(u, witness: Witness) -> str:
    """Stable text rendering: one step per line, lasso marker when the
    trace has a repeating suffix."""
    lines = []
    prev = None
    for k, ws in enumerate(witness.steps):
        edges = _step_edges(u, prev, ws.psi)
        counters = _step_counters(u, prev, ws.psi)
        lines.append("#%d SERVICE %s EDGES {%s} COUNTERS {%s}" % (
            k, ws.service, "; ".join(edges), "; ".join(counters)))
        prev = ws.psi
    if witness.lasso_start is not None:
        lines.append("LASSO @%d" % witness.lasso_start)
    return "\n".join(lines)


def counterexample_record(u, witness: Witness) -> dict:
    steps = []
    prev = None
    for ws in witness.steps:
        steps.append({
            "service": ws.service,
            "added_edges": _step_edges(u, prev, ws.psi),
            "counter_deltas": _step_counters(u, prev, ws.psi),
            "automaton_state": ws.psi.q,
        })
        prev = ws.psi
    return {"steps": steps, "lasso_start": witness.lasso_start}


def verdict_record(verdict: Verdict, u=None) -> dict:
    out = {
        "result": verdict.result,
        "detail": verdict.detail,
        "stats": verdict.stats.as_dict(),
    }
    if verdict.counterexample is not None and u is not None:
        out["counterexample"] = counterexample_record(u, verdict.counterexample)
    return out
