"""Shared fixtures data: the worked instances and random instance generators."""

from __future__ import annotations

import random
from pathlib import Path

from bagpdb.circuit import Circuit
from bagpdb.hardness import Graph
from bagpdb.model import BidbVariable, BinaryBidb, CTidb, MultiplicityDistribution, TupleRow

Q1 = "project[](join(T as t1, R, T as t2 on t1.Point=R.Point1, t2.Point=R.Point2))"
Q2 = "project[Point](join(T, R on Point=Point1))"

POINTS_T = "id\tPoint\nA\te1\nB\te2\nC\te3\nE\te4\n"
POINTS_R = "id\tPoint1\tPoint2\nU\te1\te2\nY\te2\te4\nZ\te2\te3\n"


def write_points(directory: Path) -> tuple:
    t, r = directory / "T.tsv", directory / "R.tsv"
    t.write_text(POINTS_T)
    r.write_text(POINTS_R)
    return t, r


def points_bidb(rng: random.Random) -> BinaryBidb:
    """T tuples as two weight-1 alternatives, R tuples as weight 1 and weight 2 alternatives."""
    variables = []

    def block(name, rel, values, weights):
        raw = [rng.random() for _ in weights]
        scale = rng.uniform(0.3, 1.0) / sum(raw)
        for i, (w, x) in enumerate(zip(weights, raw), start=1):
            variables.append(BidbVariable(f"{name}{i}", rel, values, w, name, x * scale))

    for name, point in (("A", "e1"), ("B", "e2"), ("C", "e3"), ("E", "e4")):
        block(name, "T", (point,), (1, 1))
    for name, edge in (("U", ("e1", "e2")), ("Y", ("e2", "e4")), ("Z", ("e2", "e3"))):
        block(name, "R", edge, (1, 2))
    return BinaryBidb({"T": ("Point",), "R": ("Point1", "Point2")}, variables)


def signed_circuit() -> Circuit:
    """(X + 2Y)(2X - Y) with shared leaves X, 2, Y, -1."""
    c = Circuit()
    x, two, y, neg = c.var("X"), c.num(2), c.var("Y"), c.num(-1)
    a2, b2, c2 = c.times(x, two), c.times(two, y), c.times(y, neg)
    red, green = c.plus(x, b2), c.plus(a2, c2)
    c.sinks[()] = c.times(red, green)
    return c


def difference_circuit() -> tuple:
    """(X + Y)(X - Y) + Y^2; returns the circuit and its two inner + gates."""
    c = Circuit()
    x, y = c.var("X"), c.var("Y")
    s1 = c.plus(x, y)
    s2 = c.plus(x, c.times(c.num(-1), y))
    c.sinks[()] = c.plus(c.times(s1, s2), c.times(y, y))
    return c, s1, s2


# ---------------------------------------------------------------- random c-TIDBs and queries

SCHEMAS = {"R": ("a", "b"), "S": ("b", "c"), "T": ("a",)}
DOMAIN = (0, 1, 2)


def random_distribution(rng: random.Random, c: int) -> MultiplicityDistribution:
    while True:
        raw = [rng.random() if rng.random() < 0.75 else 0.0 for _ in range(c + 1)]
        if sum(raw) > 0:
            break
    total = sum(raw)
    return MultiplicityDistribution(tuple(x / total for x in raw))


def random_ctidb(rng: random.Random, n_max: int = 8, c_max: int = 3, c: int | None = None) -> CTidb:
    rels = rng.sample(sorted(SCHEMAS), rng.choice((2, 3)))
    c = rng.randint(1, c_max) if c is None else c
    n = rng.randint(2, n_max)
    rows: dict = {r: [] for r in rels}
    seen: set = set()
    attempts = 0
    while sum(len(v) for v in rows.values()) < n and attempts < 200:
        attempts += 1
        rel = rng.choice(rels)
        values = tuple(rng.choice(DOMAIN) for _ in SCHEMAS[rel])
        if (rel, values) in seen:
            continue
        seen.add((rel, values))
        rows[rel].append(TupleRow(rel, values, f"{rel}:{len(rows[rel])}"))
    dist = {row.id: random_distribution(rng, c) for rs in rows.values() for row in rs}
    return CTidb({r: SCHEMAS[r] for r in rels}, rows, c, dist)


class QueryGen:
    """Random schema-valid queries; every table occurrence gets a fresh alias."""

    def __init__(self, rng: random.Random, schemas: dict, max_joins: int = 2):
        self.rng = rng
        self.schemas = schemas
        self.alias = 0
        self.joins_left = max_joins

    def table(self) -> tuple:
        rel = self.rng.choice(sorted(self.schemas))
        self.alias += 1
        a = f"t{self.alias}"
        return f"{rel} as {a}", [(a, x) for x in self.schemas[rel]]

    def gen(self, depth: int) -> tuple:
        rng = self.rng
        if depth <= 1:
            return self.table()
        options = ["table", "select", "project"]
        if self.joins_left > 0:
            options += ["join", "join", "join"]
        if depth >= 3:
            options.append("union")
        choice = rng.choice(options)
        if choice == "table":
            return self.table()
        if choice == "select":
            text, cols = self.gen(depth - 1)
            if not cols:
                return text, cols
            q, n = rng.choice(cols)
            op = rng.choice(["=", "=", "!=", "<", "<=", ">", ">="])
            if rng.random() < 0.3 and len(cols) > 1:
                q2, n2 = rng.choice(cols)
                rhs = f"{q2}.{n2}"
            else:
                rhs = str(rng.choice(DOMAIN))
            return f"select[{q}.{n}{op}{rhs}]({text})", cols
        if choice == "project":
            text, cols = self.gen(depth - 1)
            kept = [col for col in cols if rng.random() < 0.5]
            return f"project[{', '.join(f'{q}.{n}' for q, n in kept)}]({text})", kept
        if choice == "join":
            self.joins_left -= 1
            parts = [self.gen(rng.randint(1, depth - 1)) for _ in range(rng.choice((2, 2, 3)))]
            conds = []
            for i in range(1, len(parts)):
                if parts[i][1] and rng.random() < 0.8:
                    left = rng.choice([c for p in parts[:i] for c in p[1]] or [None])
                    if left is not None:
                        right = rng.choice(parts[i][1])
                        conds.append(f"{left[0]}.{left[1]}={right[0]}.{right[1]}")
            body = ", ".join(p[0] for p in parts)
            if conds:
                body += " on " + ", ".join(conds)
            return f"join({body})", [c for p in parts for c in p[1]]
        left, lcols = self.gen(depth - 2)
        right, rcols = self.gen(depth - 2)
        pool = list(rcols)
        lkeep, rkeep = [], []
        for col in lcols:
            match = next((r for r in pool if r[1] == col[1]), None)
            if match is not None and rng.random() < 0.8:
                pool.remove(match)
                lkeep.append(col)
                rkeep.append(match)

        def proj(text, keep):
            return f"project[{', '.join(f'{q}.{n}' for q, n in keep)}]({text})"

        return f"union({proj(left, lkeep)}, {proj(right, rkeep)})", lkeep


def random_query(rng: random.Random, schemas: dict, max_depth: int = 5) -> str:
    return QueryGen(rng, schemas).gen(rng.randint(2, max_depth))[0]


def random_graph(rng: random.Random, m_max: int = 10, n_max: int = 9) -> Graph:
    while True:
        n = rng.randint(2, n_max)
        m = rng.randint(1, min(m_max, n * (n - 1) // 2))
        edges: set = set()
        while len(edges) < m:
            u, v = rng.sample(range(n), 2)
            edges.add((min(u, v), max(u, v)))
        used = sorted({x for e in edges for x in e})
        index = {v: i for i, v in enumerate(used)}
        return Graph.from_edges([(index[u], index[v]) for u, v in sorted(edges)])


def random_circuit(rng: random.Random, gates: int = 12, names: str = "XYZW", block_of: dict | None = None,
                   const: int = 1) -> Circuit:
    """Random DAG with sharing; constants in [-const, const]."""
    c = Circuit()
    pool = [c.var(rng.choice(names)) for _ in range(2)] + [c.num(rng.randint(-const, const))]
    for _ in range(gates):
        r = rng.random()
        if r < 0.15:
            pool.append(c.var(rng.choice(names)))
        elif r < 0.25:
            pool.append(c.num(rng.randint(-const, const)))
        else:
            a, b = rng.choice(pool), rng.choice(pool)
            pool.append(c.plus(a, b) if rng.random() < 0.5 else c.times(a, b))
    c.sinks[()] = pool[-1]
    c.block_of = dict(block_of or {})
    c.collect_garbage()
    return c
