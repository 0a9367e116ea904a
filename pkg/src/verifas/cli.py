"""Command-line interface: verify, gen, complexity and bench subcommands.

Exit codes: 0 when every property is satisfied, 1 when some property is
violated, 2 on errors or timeouts.  The bench subcommand writes a
delimited results table next to rendered summary figures.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from .generator import GenParams, condition_subformulas, generate_workflow, spec_statistics
from .ltl import negate_property
from .metrics import control_flow_projection, cyclomatic_complexity
from .model import HASSpec
from .parser import (
    LTLFOProperty, SpecParseError, parse_property, parse_spec, serialize_spec,
    _fmt_cond,
)
from .repeated import Verdict, verify
from .search import SearchOptions
from .semantics import Engine
from .witness import serialize_counterexample, verdict_record

log = logging.getLogger("verifas")

EXIT_SATISFIED = 0
EXIT_VIOLATED = 1
EXIT_ERROR = 2

PROPERTY_TEMPLATES = [
    "false",
    "G {phi}",
    "(not {phi}) U {psi}",
    "((not {phi}) U {psi}) and G ({phi} -> X ((not {phi}) U {psi}))",
    "G ({phi} -> ({psi} or X {psi} or X X {psi}))",
    "G ({phi} or G not {phi})",
    "G ({phi} -> F {psi})",
    "F {phi}",
    "(G F {phi}) -> (G F {psi})",
    "G F {phi}",
    "G ({phi} or G {psi})",
    "(F G {phi}) -> (G F {psi})",
]


def options_from_args(args) -> SearchOptions:
    return SearchOptions(
        pruning=not args.no_sp,
        ordering=args.ordering,
        static_filter=not args.no_sa,
        use_indices=not args.no_dss,
        repeated=not args.no_repeated,
        closing=args.closing,
        timeout=args.timeout,
        mem_cap=args.mem,
        seed=args.seed,
    )


def add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--no-sp", action="store_true", help="disable state pruning")
    p.add_argument("--no-sa", action="store_true", help="disable static analysis filtering")
    p.add_argument("--no-dss", action="store_true", help="disable index data structures")
    p.add_argument("--no-repeated", action="store_true",
                   help="answer finite-word violations only")
    p.add_argument("--ordering", choices=("leq", "preceq"), default="preceq")
    p.add_argument("--closing", choices=("achievable", "all"), default="achievable")
    p.add_argument("--timeout", type=float, default=600.0, help="seconds per run")
    p.add_argument("--mem", type=int, default=8 << 30, help="memory budget in bytes")
    p.add_argument("--format", choices=("text", "structured"), default="text")
    p.add_argument("--seed", type=int, default=0)


def _load_spec(path: str) -> HASSpec:
    return parse_spec(Path(path).read_text(), filename=path)


def cmd_verify(args) -> int:
    opts = options_from_args(args)
    try:
        spec = _load_spec(args.spec)
        props = []
        for ppath in args.properties:
            props.append((ppath, parse_property(Path(ppath).read_text(), spec,
                                                filename=ppath)))
    except SpecParseError as e:
        for d in e.diagnostics:
            print(str(d), file=sys.stderr)
        return EXIT_ERROR
    except OSError as e:
        print(str(e), file=sys.stderr)
        return EXIT_ERROR

    worst = EXIT_SATISFIED
    for ppath, prop in props:
        verdict = verify(spec, prop, opts)
        if args.format == "structured":
            u = _property_universe(spec, prop, opts)
            print(json.dumps({"property": ppath, **verdict_record(verdict, u)},
                             indent=None, sort_keys=True))
        else:
            print(f"{ppath}: {verdict.result}"
                  + (f" ({verdict.detail})" if verdict.detail else ""))
            print("  stats:", json.dumps(verdict.stats.as_dict(), sort_keys=True))
            if verdict.counterexample is not None:
                u = _property_universe(spec, prop, opts)
                print(serialize_counterexample(u, verdict.counterexample))
        if verdict.result == "violated":
            worst = max(worst, EXIT_VIOLATED)
        elif verdict.result == "timeout":
            worst = EXIT_ERROR
    return worst


def _property_universe(spec, prop, opts):
    engine = Engine(spec, opts, negate_property(prop))
    return engine.context(prop.task, with_property=True).u


def cmd_complexity(args) -> int:
    try:
        spec = _load_spec(args.spec)
    except SpecParseError as e:
        for d in e.diagnostics:
            print(str(d), file=sys.stderr)
        return EXIT_ERROR
    rows = []
    for task in spec.tasks:
        for v in task.variables:
            if v.ref is None:
                g = control_flow_projection(spec, task, v.name)
                rows.append((task.name, v.name, len(g.nodes), len(g.edges), g.complexity))
    total = cyclomatic_complexity(spec)
    if args.format == "structured":
        print(json.dumps({
            "complexity": total,
            "projections": [
                {"task": t, "variable": v, "nodes": n, "edges": e, "complexity": c}
                for t, v, n, e, c in rows],
        }, sort_keys=True))
    else:
        for t, v, n, e, c in rows:
            print(f"{t}.{v}: |V|={n} |E|={e} complexity={c}")
        print(f"cyclomatic complexity: {total}")
    return EXIT_SATISFIED


def cmd_gen(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    import random
    for k in range(args.count):
        params = GenParams(args.relations, args.tasks, args.vars, args.services,
                           seed=args.seed + k)
        spec = generate_workflow(params)
        stem = f"wf_{args.seed + k:04d}"
        (outdir / f"{stem}.has").write_text(serialize_spec(spec))
        subs = condition_subformulas(spec, spec.root.name)
        rng = random.Random(f"{args.seed + k}/properties")
        for ti, template in enumerate(PROPERTY_TEMPLATES):
            phi = "(%s)" % _fmt_cond(rng.choice(subs))
            psi = "(%s)" % _fmt_cond(rng.choice(subs))
            body = template.format(phi=phi, psi=psi)
            text = f"PROPERTY ON {spec.root.name} :\n  {body}\n"
            (outdir / f"{stem}_p{ti:02d}.prop").write_text(text)
        if args.format == "structured":
            print(json.dumps({"file": f"{stem}.has", **spec_statistics(spec)},
                             sort_keys=True))
        else:
            print(f"{stem}.has", spec_statistics(spec))
    return EXIT_SATISFIED


def _bench_one(spec_path: str, prop_path: str, opts: SearchOptions) -> dict:
    spec = _load_spec(spec_path)
    prop = parse_property(Path(prop_path).read_text(), spec, filename=prop_path)
    t0 = time.monotonic()
    verdict = verify(spec, prop, opts)
    wall = time.monotonic() - t0
    return {
        "spec": os.path.basename(spec_path),
        "property": os.path.basename(prop_path),
        "result": verdict.result,
        "wall_s": round(wall, 4),
        **verdict.stats.as_dict(),
        "complexity": cyclomatic_complexity(spec),
    }


def trimmed_mean(values, fraction: float = 0.05) -> float:
    """Mean with the top and bottom fraction of the samples removed."""
    if not values:
        return 0.0
    vs = sorted(values)
    k = int(len(vs) * fraction)
    vs = vs[k:len(vs) - k] if len(vs) > 2 * k else vs
    return sum(vs) / len(vs)


def cmd_bench(args) -> int:
    corpus = Path(args.corpus)
    specs = sorted(corpus.glob("*.has"))
    if not specs:
        print(f"no specifications in {corpus}", file=sys.stderr)
        return EXIT_ERROR
    base = options_from_args(args)
    modes = {
        "full": base,
        "no-sp": replace(base, pruning=False, ordering="leq"),
        "no-sa": replace(base, static_filter=False),
        "no-dss": replace(base, use_indices=False),
        "no-repeated": replace(base, repeated=False),
    }
    jobs = []
    for spec_path in specs:
        for prop_path in sorted(corpus.glob(spec_path.stem + "_p*.prop")):
            for mode in modes:
                jobs.append((str(spec_path), str(prop_path), mode))

    rows = []
    if args.workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            futures = [(s, p, m, pool.submit(_bench_one, s, p, modes[m]))
                       for s, p, m in jobs]
            for s, p, m, fut in futures:
                row = fut.result()
                row["mode"] = m
                rows.append(row)
    else:
        for s, p, m in jobs:
            row = _bench_one(s, p, modes[m])
            row["mode"] = m
            rows.append(row)

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    fields = ["spec", "property", "mode", "result", "wall_s", "nodes", "pruned",
              "accelerations", "maxflow_calls", "peak_w", "phase2_nodes",
              "phase2_wall_s", "timed_out", "complexity"]
    csv_path = outdir / "bench.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)

    report = _bench_report(rows)
    (outdir / "bench_summary.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    _bench_figures(rows, outdir)
    if args.format == "structured":
        print(json.dumps(report, sort_keys=True))
    else:
        print(f"wrote {csv_path}")
        for mode, agg in sorted(report["speedups"].items()):
            print(f"speedup vs {mode}: mean {agg['mean']:.2f}x"
                  f"  trimmed {agg['trimmed']:.2f}x over {agg['samples']} runs")
        print(f"repeated-reachability share: {report['phase2_share']:.1%}")
    return EXIT_SATISFIED


def _bench_report(rows) -> dict:
    by_key = {}
    for row in rows:
        by_key.setdefault((row["spec"], row["property"]), {})[row["mode"]] = row
    speedups = {m: [] for m in ("no-sp", "no-sa", "no-dss")}
    for pair in by_key.values():
        full = pair.get("full")
        if full is None or full["timed_out"]:
            continue
        for mode, acc in speedups.items():
            other = pair.get(mode)
            if other is not None and not other["timed_out"] and full["wall_s"] > 0:
                acc.append(other["wall_s"] / full["wall_s"])
    full_rows = [r for r in rows if r["mode"] == "full" and not r["timed_out"]]
    total = sum(r["wall_s"] for r in full_rows) or 1.0
    p2 = sum(r["phase2_wall_s"] for r in full_rows)
    return {
        "runs": len(rows),
        "timeouts": sum(1 for r in rows if r["timed_out"]),
        "speedups": {m: {"mean": (sum(v) / len(v)) if v else 0.0,
                         "trimmed": trimmed_mean(v),
                         "samples": len(v)} for m, v in speedups.items()},
        "phase2_share": p2 / total,
    }


def _bench_figures(rows, outdir: Path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    full = [r for r in rows if r["mode"] == "full" and not r["timed_out"]]
    if full:
        fig, ax = plt.subplots(figsize=(6, 4))
        xs = [r["complexity"] for r in full]
        ys = [max(r["wall_s"], 1e-4) for r in full]
        ax.scatter(xs, ys, s=14, alpha=0.7)
        ax.set_yscale("log")
        ax.set_xlabel("cyclomatic complexity")
        ax.set_ylabel("verification time (s)")
        ax.set_title("Verification time vs workflow complexity")
        fig.tight_layout()
        fig.savefig(outdir / "time_vs_complexity.png", dpi=120)
        plt.close(fig)

    pairs = {}
    for r in rows:
        pairs.setdefault((r["spec"], r["property"]), {})[r["mode"]] = r
    on, off = [], []
    for pair in pairs.values():
        if "full" in pair and "no-sp" in pair:
            on.append(pair["full"]["nodes"])
            off.append(pair["no-sp"]["nodes"])
    if on:
        fig, ax = plt.subplots(figsize=(5, 5))
        ax.scatter(off, on, s=14, alpha=0.7)
        lim = max(max(on, default=1), max(off, default=1)) * 1.2 + 1
        ax.plot([1, lim], [1, lim], "k--", linewidth=0.8)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlim(0.8, lim)
        ax.set_ylim(0.8, lim)
        ax.set_xlabel("explored states, pruning off")
        ax.set_ylabel("explored states, pruning on")
        ax.set_title("Effect of state pruning")
        fig.tight_layout()
        fig.savefig(outdir / "pruning_effect.png", dpi=120)
        plt.close(fig)


def main(argv=None) -> int:
    level = os.environ.get("VERIFAS_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    ap = argparse.ArgumentParser(prog="verifas",
                                 description="Verifier for hierarchical "
                                 "data-driven workflow specifications")
    sub = ap.add_subparsers(dest="command", required=True)

    pv = sub.add_parser("verify", help="verify temporal properties of a specification")
    pv.add_argument("spec")
    pv.add_argument("properties", nargs="+")
    add_common_flags(pv)
    pv.set_defaults(fn=cmd_verify)

    pg = sub.add_parser("gen", help="generate synthetic workflows and properties")
    pg.add_argument("--relations", type=int, default=5)
    pg.add_argument("--tasks", type=int, default=5)
    pg.add_argument("--vars", type=int, default=75)
    pg.add_argument("--services", type=int, default=75)
    pg.add_argument("--count", type=int, default=1)
    pg.add_argument("--out", default="generated")
    add_common_flags(pg)
    pg.set_defaults(fn=cmd_gen)

    pc = sub.add_parser("complexity", help="cyclomatic complexity of a specification")
    pc.add_argument("spec")
    add_common_flags(pc)
    pc.set_defaults(fn=cmd_complexity)

    pb = sub.add_parser("bench", help="run a corpus under all optimization modes")
    pb.add_argument("corpus", help="directory of .has specs with *_pNN.prop files")
    pb.add_argument("--out", default="bench-out")
    pb.add_argument("--workers", type=int, default=1)
    add_common_flags(pb)
    pb.set_defaults(fn=cmd_bench)

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except KeyboardInterrupt:
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
