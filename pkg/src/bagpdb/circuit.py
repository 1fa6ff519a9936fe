"""Arithmetic circuits for lineage polynomials: construction, measures, expansion and gamma."""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .errors import CapExceededError, CircuitError
from .model import BinaryBidb, CTidb
from .query import Plan, Semiring, evaluate, parse_query, resolve

PLUS = "plus"
TIMES = "times"
VAR = "var"
NUM = "num"

DEFAULT_EXPANSION_CAP = 10**6


@dataclass(frozen=True)
class Gate:
    kind: str
    inputs: tuple
    val: object


@dataclass(frozen=True)
class Measures:
    size: int
    depth: int
    deg: int


class Circuit:
    """Gate pool in topological order (inputs always precede their consumers).

    Gate 0 is the shared ``num(0)`` gate.  ``sinks`` maps output tuples to
    gate indexes.  ``partial`` is filled in by the one-pass annotation.
    """

    def __init__(self):
        self.kind: list = []
        self.left: list = []
        self.right: list = []
        self.val: list = []
        self.sinks: dict = {}
        self.block_of: dict = {}
        self.partial: list | None = None
        self.zero_gate = self.num(0)

    # construction

    def _add(self, kind, left, right, val) -> int:
        self.kind.append(kind)
        self.left.append(left)
        self.right.append(right)
        self.val.append(val)
        self.partial = None
        return len(self.kind) - 1

    def var(self, name: str) -> int:
        return self._add(VAR, -1, -1, name)

    def num(self, value: int) -> int:
        return self._add(NUM, -1, -1, value)

    def plus(self, a: int, b: int) -> int:
        return self._add(PLUS, a, b, None)

    def times(self, a: int, b: int) -> int:
        return self._add(TIMES, a, b, None)

    def balanced(self, kind: str, gates: Sequence) -> int:
        """Fan-in two tree over ``gates``; the left half takes the extra input."""
        if not gates:
            raise CircuitError("empty fan-in")
        if len(gates) == 1:
            return gates[0]
        mid = (len(gates) + 1) // 2
        return self._add(kind, self.balanced(kind, gates[:mid]), self.balanced(kind, gates[mid:]), None)

    # access

    def __len__(self) -> int:
        return len(self.kind)

    def gate(self, i: int) -> Gate:
        inputs = () if self.left[i] < 0 else (self.left[i], self.right[i])
        return Gate(self.kind[i], inputs, self.val[i])

    def sink_gate(self, sink) -> int:
        if isinstance(sink, int) and not isinstance(sink, bool):
            if not 0 <= sink < len(self):
                raise CircuitError(f"gate {sink} out of range")
            return sink
        key = tuple(sink)
        if key not in self.sinks:
            raise CircuitError(f"no sink for tuple {key}")
        return self.sinks[key]

    def only_sink(self) -> int:
        if len(self.sinks) != 1:
            raise CircuitError(f"circuit has {len(self.sinks)} sinks; name one")
        return next(iter(self.sinks.values()))

    def cone(self, sink) -> list:
        """Gates reachable from ``sink``, in topological order."""
        root = self.sink_gate(sink)
        seen = {root}
        stack = [root]
        while stack:
            g = stack.pop()
            if self.left[g] >= 0:
                for ch in (self.left[g], self.right[g]):
                    if ch not in seen:
                        seen.add(ch)
                        stack.append(ch)
        return sorted(seen)

    def variables(self, sink=None) -> list:
        gates = range(len(self)) if sink is None else self.cone(sink)
        return sorted({self.val[g] for g in gates if self.kind[g] == VAR})

    def copy(self) -> "Circuit":
        c = Circuit.__new__(Circuit)
        c.kind, c.left, c.right, c.val = list(self.kind), list(self.left), list(self.right), list(self.val)
        c.sinks, c.block_of = dict(self.sinks), dict(self.block_of)
        c.partial = None if self.partial is None else list(self.partial)
        c.zero_gate = self.zero_gate
        return c

    def collect_garbage(self) -> None:
        """Drop gates that no sink reaches; the zero gate always survives."""
        live = {self.zero_gate}
        for s in self.sinks.values():
            live.update(self.cone(s))
        order = sorted(live)
        remap = {old: new for new, old in enumerate(order)}
        self.kind = [self.kind[g] for g in order]
        self.val = [self.val[g] for g in order]
        self.left = [remap[self.left[g]] if self.left[g] >= 0 else -1 for g in order]
        self.right = [remap[self.right[g]] if self.right[g] >= 0 else -1 for g in order]
        self.sinks = {t: remap[g] for t, g in self.sinks.items()}
        self.zero_gate = remap[self.zero_gate]
        self.partial = None

    # serialization

    def to_json(self) -> dict:
        return {
            "gates": [
                {"kind": self.kind[i], "inputs": list(self.gate(i).inputs), "val": self.val[i]}
                for i in range(len(self))
            ],
            "sinks": [{"tuple": list(t), "gate": g} for t, g in self.sinks.items()],
            "zero_gate": self.zero_gate,
            "block_of": dict(sorted(self.block_of.items())),
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "Circuit":
        c = cls.__new__(cls)
        c.kind, c.left, c.right, c.val = [], [], [], []
        c.partial = None
        for g in data["gates"]:
            ins = list(g["inputs"])
            c.kind.append(g["kind"])
            c.left.append(ins[0] if ins else -1)
            c.right.append(ins[1] if ins else -1)
            c.val.append(g["val"])
        c.sinks = {tuple(s["tuple"]): s["gate"] for s in data["sinks"]}
        c.zero_gate = data["zero_gate"]
        c.block_of = dict(data.get("block_of", {}))
        c.validate()
        return c

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    def validate(self) -> None:
        for i, k in enumerate(self.kind):
            if k in (PLUS, TIMES):
                if not (0 <= self.left[i] < i and 0 <= self.right[i] < i):
                    raise CircuitError(f"gate {i} inputs must precede it")
            elif k in (VAR, NUM):
                if self.left[i] >= 0:
                    raise CircuitError(f"source gate {i} has inputs")
            else:
                raise CircuitError(f"gate {i} has unknown kind {k!r}")


def circuit_from_expr(expr, block_of: Mapping | None = None) -> Circuit:
    """Build a single-sink circuit from nested tuples: ('+', a, b), ('*', a, b), 'X', 3."""
    c = Circuit()

    def build(e) -> int:
        if isinstance(e, str):
            return c.var(e)
        if isinstance(e, int):
            return c.num(e)
        op, a, b = e
        ga, gb = build(a), build(b)
        return c.plus(ga, gb) if op == "+" else c.times(ga, gb)

    c.sinks[()] = build(expr)
    c.block_of = dict(block_of or {})
    return c


# ---------------------------------------------------------------- lineage construction


def build_lineage_circuit(q, db: CTidb | BinaryBidb, certain_as_constant: bool = False) -> Circuit:
    """One circuit holding a sink per output tuple of ``q`` over the bounding database.

    A c-TIDB is treated as a 1-TIDB over variables ``rel:id``.  Binary-BIDB
    variables with weight j > 1 enter as ``times(num(j), var)`` and
    alternatives sharing values are summed.  With ``certain_as_constant``
    variables of probability 1 become constants.
    """
    plan = q if isinstance(q, Plan) else resolve(parse_query(q) if isinstance(q, str) else q, db.catalog)
    c = Circuit()

    if isinstance(db, CTidb):
        by_rel: dict = {rel: [] for rel in db.schemas}
        for row in db.tuples():
            certain = certain_as_constant and max(db.dist[row.id].probs) == 1.0
            const = db.dist[row.id].probs.index(1.0) if certain else None
            by_rel[row.relation].append((row.values, row.id, 1, const))
            if const is None:
                c.block_of[row.id] = row.id
    else:
        by_rel = {rel: [] for rel in db.schemas}
        for v in db.variables:
            const = v.weight if certain_as_constant and v.prob == 1.0 else None
            by_rel[v.relation].append((v.values, v.name, v.weight, const))
            if const is None:
                c.block_of[v.name] = v.block

    def leaves(rel: str) -> dict:
        groups: dict = {}
        for values, name, weight, const in by_rel[rel]:
            if const is not None:
                g = c.num(const)
            elif weight == 1:
                g = c.var(name)
            else:
                g = c.times(c.num(weight), c.var(name))
            groups.setdefault(values, []).append(g)
        return {v: c.balanced(PLUS, gs) for v, gs in groups.items()}

    sr = Semiring(sum=lambda gs: c.balanced(PLUS, gs), prod=lambda gs: c.balanced(TIMES, gs))
    c.sinks = evaluate(plan, leaves, sr)
    c.collect_garbage()
    return c


# ---------------------------------------------------------------- evaluation and measures


def poly_eval(c: Circuit, sink, assignment: Mapping):
    vals: dict = {}
    for g in c.cone(sink):
        k = c.kind[g]
        if k == VAR:
            name = c.val[g]
            if name not in assignment:
                raise CircuitError(f"assignment misses variable {name}")
            vals[g] = assignment[name]
        elif k == NUM:
            vals[g] = c.val[g]
        elif k == PLUS:
            vals[g] = vals[c.left[g]] + vals[c.right[g]]
        else:
            vals[g] = vals[c.left[g]] * vals[c.right[g]]
    return vals[c.sink_gate(sink)]


def positive(c: Circuit) -> Circuit:
    out = c.copy()
    out.val = [abs(v) if k == NUM else v for k, v in zip(out.kind, out.val)]
    out.partial = None
    return out


def gate_values(c: Circuit, num, var, plus, times, gates=None) -> list:
    """Bottom-up fold over the pool with one callback per gate kind."""
    out: list = [None] * len(c)
    for g in range(len(c)) if gates is None else gates:
        k = c.kind[g]
        if k == VAR:
            out[g] = var(c.val[g])
        elif k == NUM:
            out[g] = num(c.val[g])
        elif k == PLUS:
            out[g] = plus(out[c.left[g]], out[c.right[g]])
        else:
            out[g] = times(out[c.left[g]], out[c.right[g]])
    return out


def degrees(c: Circuit) -> list:
    """Structural degree per gate: times adds one on top of its inputs."""
    return gate_values(c, lambda v: 0, lambda v: 1, max, lambda a, b: a + b + 1)


def monomial_degrees(c: Circuit) -> list:
    """Degree of the polynomial computed at each gate, assuming no cancellation."""
    return gate_values(c, lambda v: 0, lambda v: 1, max, lambda a, b: a + b)


def levels(c: Circuit) -> list:
    return gate_values(c, lambda v: 0, lambda v: 0, lambda a, b: max(a, b) + 1, lambda a, b: max(a, b) + 1)


def measures(c: Circuit, sink=None) -> Measures:
    if sink is None:
        if len(c) == 0:
            return Measures(0, 0, 0)
        return Measures(len(c), max(levels(c)), max(degrees(c)))
    cone = c.cone(sink)
    root = c.sink_gate(sink)
    return Measures(len(cone), levels(c)[root], degrees(c)[root])


def all_ones_values(c: Circuit) -> list:
    return gate_values(c, abs, lambda v: 1, lambda a, b: a + b, lambda a, b: a * b)


def all_ones_value(c: Circuit, sink=None) -> int:
    root = c.only_sink() if sink is None else c.sink_gate(sink)
    cone = c.cone(root)
    return gate_values(c, abs, lambda v: 1, lambda a, b: a + b, lambda a, b: a * b, gates=cone)[root]


def is_tree(c: Circuit, sink) -> bool:
    cone = c.cone(sink)
    parents: dict = {}
    for g in cone:
        if c.left[g] >= 0:
            for ch in (c.left[g], c.right[g]):
                parents[ch] = parents.get(ch, 0) + 1
    return all(n == 1 for n in parents.values())


# ---------------------------------------------------------------- expansion


def expand(c: Circuit, sink=None, cap: int = DEFAULT_EXPANSION_CAP) -> list:
    """Expanded term list: sums concatenate, products merge pairwise left-major."""
    root = c.only_sink() if sink is None else c.sink_gate(sink)
    lists: dict = {}
    for g in c.cone(root):
        k = c.kind[g]
        if k == VAR:
            lists[g] = [(frozenset((c.val[g],)), 1)]
        elif k == NUM:
            lists[g] = [(frozenset(), c.val[g])]
        else:
            a, b = lists[c.left[g]], lists[c.right[g]]
            n = len(a) + len(b) if k == PLUS else len(a) * len(b)
            if n > cap:
                raise CapExceededError(f"expansion needs {n} terms, cap is {cap}")
            if k == PLUS:
                lists[g] = a + b
            else:
                lists[g] = [(va | vb, ca * cb) for va, ca in a for vb, cb in b]
    return lists[root]


def is_independent(vars_, block_of: Mapping) -> bool:
    blocks = sorted(block_of.get(v, v) for v in vars_)
    return all(x != y for x, y in zip(blocks, blocks[1:]))


def gamma(c: Circuit, sink=None, mode: str = "exact", samples: int = 10_000, seed: int = 0,
          cap: int = DEFAULT_EXPANSION_CAP) -> float:
    """Share of expanded coefficient mass on terms with two variables from one block."""
    root = c.only_sink() if sink is None else c.sink_gate(sink)
    if mode == "exact":
        return float(gamma_exact(c, root, cap))
    if mode == "estimate":
        from .approx import sample_batch

        batch = sample_batch(c, root, samples, seed)
        return float(1.0 - batch.independent.mean()) if samples else 0.0
    raise ValueError(f"unknown gamma mode {mode!r}")


def gamma_exact(c: Circuit, sink=None, cap: int = DEFAULT_EXPANSION_CAP) -> Fraction:
    root = c.only_sink() if sink is None else c.sink_gate(sink)
    total = all_ones_value(c, root)
    if total == 0:
        return Fraction(0)
    crossed = sum(abs(k) for v, k in expand(c, root, cap) if not is_independent(v, c.block_of))
    return Fraction(crossed, total)
