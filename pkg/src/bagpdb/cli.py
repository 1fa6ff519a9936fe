"""Command line entry point.  Every command prints one JSON document on stdout."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from .approx import SEED_ENV, approximate_rpoly, default_seed, one_pass, relative_budget
from .circuit import DEFAULT_EXPANSION_CAP, build_lineage_circuit
from .errors import BagPdbError, CapExceededError
from .exact import expected_multiplicity_exact
from .hardness import interpolate_kmatchings, load_graph, motif_counts_closed_form, solve_single_p
from .karp_luby import exact_dnf_probability, karp_luby_estimate, load_dnf, trial_count
from .model import CTidb, enumerate_worlds, load_bidb, load_ctidb, reduce_to_binary_bidb, write_bidb
from .query import parse_query, resolve
from .synth import GAMMA_SUITE, gamma_report, generate_bidb


def _load(args):
    if args.bidb:
        return load_bidb(args.bidb)
    if not args.relations:
        raise BagPdbError("give relation files with --relations or a block database with --bidb")
    return load_ctidb(args.relations, args.probs, args.c)


def _query_text(args) -> str:
    if args.query_file:
        return Path(args.query_file).read_text().strip()
    if args.query:
        return args.query
    raise BagPdbError("give a query with --query or --query-file")


def _prepare(args):
    db = _load(args)
    bidb = reduce_to_binary_bidb(db) if isinstance(db, CTidb) else db
    text = _query_text(args)
    plan = resolve(parse_query(text), bidb.catalog)
    circuit = build_lineage_circuit(plan, bidb)
    if args.dump_circuit:
        Path(args.dump_circuit).write_text(json.dumps(circuit.to_json(), sort_keys=True, indent=1))
    return bidb, text, circuit


def cmd_exact(args) -> dict:
    bidb, text, c = _prepare(args)
    probs = bidb.probs
    results = []
    for t, sink in c.sinks.items():
        try:
            value = expected_multiplicity_exact(c, sink, probs, args.cap)
        except CapExceededError as e:
            raise CapExceededError(f"{e}; use the approx command for this instance") from None
        results.append({"tuple": list(t), "expectation": value})
    return {"command": "exact", "query": text, "results": results}


def cmd_approx(args) -> dict:
    bidb, text, c = _prepare(args)
    seed = args.seed if args.seed is not None else default_seed()
    probs = bidb.probs
    one_pass(c)
    z = max(len(c.sinks), 1)
    delta = args.delta / z
    results = []
    for i, (t, sink) in enumerate(c.sinks.items()):
        start = time.perf_counter()
        tuple_seed = seed + i
        eps = args.epsilon
        if args.relative:
            pilot = approximate_rpoly(c, probs, delta, args.epsilon, tuple_seed, sink, args.threads)
            eps = min(1.0, relative_budget(c, probs, args.epsilon, pilot.estimate, sink))
        res = approximate_rpoly(c, probs, delta, eps, tuple_seed, sink, args.threads)
        row = {
            "tuple": list(t),
            "estimate": res.estimate,
            "N": res.N,
            "all_ones": res.all_ones,
            "gamma_estimate": res.gamma_estimate,
        }
        if args.relative:
            row["epsilon_additive"] = eps
        if not args.no_timing:
            row["elapsed_ms"] = round(1000 * (time.perf_counter() - start), 3)
        results.append(row)
    return {
        "command": "approx",
        "query": text,
        "seed": seed,
        "epsilon": args.epsilon,
        "delta": args.delta,
        "delta_per_tuple": delta,
        "results": results,
    }


def cmd_worlds(args) -> dict:
    db = _load(args)
    worlds = [{"assignment": w, "probability": p} for w, p in enumerate_worlds(db, args.cap)]
    return {"command": "worlds", "count": len(worlds), "worlds": worlds}


def cmd_gamma_report(args) -> dict:
    if not args.bidb:
        raise BagPdbError("gamma-report needs a block database (--bidb)")
    db = load_bidb(args.bidb)
    queries = [(f"q{i}", q) for i, q in enumerate(args.query, start=1)] if args.query else GAMMA_SUITE
    rows = gamma_report(db, queries, args.cap)
    return {
        "command": "gamma-report",
        "rows": [
            {"query": r.query, "text": r.text, "outputs": r.outputs, "CF": r.with_cross,
             "CI": r.without_cross, "gamma": r.gamma}
            for r in rows
        ],
    }


def cmd_hardness(args) -> dict:
    g = load_graph(args.graph)
    out: dict = {"command": f"hardness {args.task}", "n": g.n, "m": g.m}
    if args.task == "motifs":
        mc = motif_counts_closed_form(g)
        out.update(mc.__dict__)
    elif args.task == "interpolate":
        p_values = [float(x) for x in args.p_values.split(",")] if args.p_values else None
        r = interpolate_kmatchings(g, args.k, p_values)
        out.update({"k": args.k, "k_matchings": r.count, "quotient": r.quotient, "residual": r.residual})
    else:
        r = solve_single_p(g, args.p)
        out.update({"p": args.p, "triangles": r.triangles, "three_matchings": r.three_matchings,
                    "residual": r.residual, "det": r.det})
    return out


def cmd_karp_luby(args) -> dict:
    f = load_dnf(args.dnf, args.probs)
    seed = args.seed if args.seed is not None else default_seed()
    out = {
        "command": "karp-luby",
        "clauses": len(f.clauses),
        "variables": len(f.variables),
        "trials": trial_count(len(f.clauses), args.epsilon, args.delta),
        "seed": seed,
        "estimate": karp_luby_estimate(f, args.epsilon, args.delta, seed),
    }
    if args.exact:
        out["exact"] = exact_dnf_probability(f)
    return out


def cmd_gen_bidb(args) -> dict:
    seed = args.seed if args.seed is not None else default_seed()
    db = generate_bidb(args.blocks, args.block_size, args.p_low, args.p_high, args.domain, seed)
    paths = write_bidb(db, args.out)
    return {"command": "gen-bidb", "seed": seed, "files": [str(p) for p in paths],
            "variables": len(db.variables), "blocks": len(db.blocks)}


# ---------------------------------------------------------------- output


def _pretty(doc: dict) -> str:
    lines = []
    tables = {k: v for k, v in doc.items() if isinstance(v, list) and v and isinstance(v[0], dict)}
    for k, v in doc.items():
        if k not in tables:
            lines.append(f"{k}: {v}")
    for name, rows in tables.items():
        cols = list(rows[0])
        cells = [[json.dumps(r.get(c)) if not isinstance(r.get(c), str) else r[c] for c in cols] for r in rows]
        widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
        lines.append(f"\n{name}:")
        lines.append("  ".join(c.ljust(w) for c, w in zip(cols, widths)))
        lines.append("  ".join("-" * w for w in widths))
        lines.extend("  ".join(x.ljust(w) for x, w in zip(row, widths)) for row in cells)
    return "\n".join(lines)


def _data_args(p: argparse.ArgumentParser, query: bool = True) -> None:
    p.add_argument("--relations", nargs="+", help="relation TSV files (file stem = relation name)")
    p.add_argument("--probs", help="probability file: tuple_id p_0 ... p_c")
    p.add_argument("--c", type=int, help="maximum multiplicity (default: widest distribution)")
    p.add_argument("--bidb", nargs="+", help="block database TSV files with _block/_p columns")
    if query:
        p.add_argument("--query", help="query text")
        p.add_argument("--query-file", help="file holding the query text")
        p.add_argument("--dump-circuit", help="write the lineage circuit as JSON to this path")
    p.add_argument("--cap", type=int, default=DEFAULT_EXPANSION_CAP, help="expansion or world cap")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bagpdb", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--pretty", action="store_true", help="human-readable tables instead of JSON")
    common.add_argument("--threads", type=int, default=1, help="worker cap for sampling")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exact", parents=[common], help="exact expected multiplicities")
    _data_args(p)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("approx", parents=[common], help="sampling estimate of expected multiplicities")
    _data_args(p)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--seed", type=int, help=f"default {default_seed()} (env {SEED_ENV})")
    p.add_argument("--relative", action="store_true", help="treat epsilon as a relative error target")
    p.add_argument("--no-timing", action="store_true", help="omit elapsed_ms for reproducible output")
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("worlds", parents=[common], help="enumerate possible worlds")
    _data_args(p, query=False)
    p.set_defaults(func=cmd_worlds)

    p = sub.add_parser("gamma-report", parents=[common], help="cancellation share per query on a block database")
    p.add_argument("--bidb", nargs="+")
    p.add_argument("--query", action="append", help="query text; repeatable (default: built-in suite)")
    p.add_argument("--cap", type=int, default=DEFAULT_EXPANSION_CAP)
    p.set_defaults(func=cmd_gamma_report)

    p = sub.add_parser("hardness", parents=[common], help="graph counting experiments")
    p.add_argument("task", choices=["motifs", "interpolate", "single-p"])
    p.add_argument("--graph", required=True, help="edge list file, one 'u v' pair per line")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--p-values", help="comma separated probabilities for interpolation")
    p.set_defaults(func=cmd_hardness)

    p = sub.add_parser("karp-luby", parents=[common], help="DNF probability baseline")
    p.add_argument("--dnf", required=True)
    p.add_argument("--probs", required=True)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--seed", type=int)
    p.add_argument("--exact", action="store_true", help="also report the enumerated probability")
    p.set_defaults(func=cmd_karp_luby)

    p = sub.add_parser("gen-bidb", parents=[common], help="write a synthetic block database")
    p.add_argument("--out", required=True)
    p.add_argument("--blocks", type=int, default=10)
    p.add_argument("--block-size", type=int, default=3)
    p.add_argument("--p-low", type=float, default=0.05)
    p.add_argument("--p-high", type=float, default=0.5)
    p.add_argument("--domain", type=int, default=8)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_gen_bidb)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        doc = args.func(args)
    except (BagPdbError, ValueError, OSError) as e:
        code = e.code if isinstance(e, BagPdbError) else type(e).__name__
        print(json.dumps({"error": {"type": code, "message": str(e)}}, sort_keys=True))
        return 2
    print(_pretty(doc) if args.pretty else json.dumps(doc, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
