"""RA+ query AST, parser, annotated bag evaluation and the deterministic cost model.

Grammar (prefix notation, whitespace insensitive)::

    expr    := NAME ["as" NAME]
             | "select" "[" cmp {("," | "and") cmp} "]" "(" expr ")"
             | "project" "[" [ref {"," ref}] "]" "(" expr ")"
             | "join" "(" expr {"," expr} ["on" ref "=" ref {"," ref "=" ref}] ")"
             | "union" "(" expr "," expr ")"
    cmp     := ref OP (ref | INT | STRING)
    OP      := "=" | "!=" | "<>" | "<" | "<=" | ">" | ">=" | "≠" | "≤" | "≥"
    ref     := NAME ["." NAME]

A join without an ``on`` clause is a cross product.  String constants are
quoted with ' or ".
"""

from __future__ import annotations

import functools
import math
import operator
import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .errors import QueryError, QuerySyntaxError

# ---------------------------------------------------------------- AST


@dataclass(frozen=True)
class Attr:
    ref: str


@dataclass(frozen=True)
class Const:
    value: object


@dataclass(frozen=True)
class Comparison:
    left: str
    op: str
    right: Union[Attr, Const]


@dataclass(frozen=True)
class Table:
    name: str
    alias: str | None = None


@dataclass(frozen=True)
class Select:
    predicate: tuple
    child: "QueryExpr"


@dataclass(frozen=True)
class Project:
    attrs: tuple
    child: "QueryExpr"


@dataclass(frozen=True)
class Join:
    children: tuple
    conditions: tuple = ()

    def __post_init__(self):
        if len(self.children) < 2:
            raise QueryError("join needs at least two inputs")


@dataclass(frozen=True)
class Union_:
    left: "QueryExpr"
    right: "QueryExpr"


QueryExpr = Union[Table, Select, Project, Join, Union_]

_OPS: dict = {
    "=": operator.eq,
    "!=": operator.ne,
    "<>": operator.ne,
    "≠": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    "≤": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
    "≥": operator.ge,
}
_CANON = {"<>": "!=", "≠": "!=", "≤": "<=", "≥": ">="}


def to_text(q: QueryExpr) -> str:
    if isinstance(q, Table):
        return q.name if q.alias is None else f"{q.name} as {q.alias}"
    if isinstance(q, Select):
        parts = []
        for c in q.predicate:
            rhs = c.right.ref if isinstance(c.right, Attr) else (
                repr(c.right.value) if isinstance(c.right.value, str) else str(c.right.value)
            )
            parts.append(f"{c.left}{c.op}{rhs}")
        return f"select[{', '.join(parts)}]({to_text(q.child)})"
    if isinstance(q, Project):
        return f"project[{', '.join(q.attrs)}]({to_text(q.child)})"
    if isinstance(q, Join):
        body = ", ".join(to_text(c) for c in q.children)
        if q.conditions:
            body += " on " + ", ".join(f"{a}={b}" for a, b in q.conditions)
        return f"join({body})"
    return f"union({to_text(q.left)}, {to_text(q.right)})"


def query_depth(q: QueryExpr) -> int:
    if isinstance(q, Table):
        return 1
    if isinstance(q, (Select, Project)):
        return 1 + query_depth(q.child)
    if isinstance(q, Join):
        return 1 + max(query_depth(c) for c in q.children)
    return 1 + max(query_depth(q.left), query_depth(q.right))


# ---------------------------------------------------------------- parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>-?\d+)|(?P<str>'[^']*'|\"[^\"]*\")|(?P<op><=|>=|!=|<>|[=<>≠≤≥])"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<punct>[()\[\],.]))"
)


def _tokenize(text: str) -> list:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            at = len(text) - len(text[pos:].lstrip())
            raise QuerySyntaxError(f"unexpected character {text[at]!r}", at)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self, k: int = 0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def take(self, kind=None, value=None):
        tok = self.peek()
        if (kind and tok[0] != kind) or (value is not None and tok[1] != value):
            want = value if value is not None else kind
            got = tok[1] if tok[0] != "eof" else "end of input"
            raise QuerySyntaxError(f"expected {want!r}, got {got!r}", tok[2])
        self.i += 1
        return tok

    def at(self, kind, value=None) -> bool:
        tok = self.peek()
        return tok[0] == kind and (value is None or tok[1] == value)

    def parse(self) -> QueryExpr:
        q = self.expr()
        self.take("eof")
        return q

    def expr(self) -> QueryExpr:
        kind, word, pos = self.take("name")
        nxt = self.peek()
        if word == "select" and nxt[1] == "[":
            self.take("punct", "[")
            pred = [self.comparison()]
            while self.at("punct", ",") or self.at("name", "and"):
                self.i += 1
                pred.append(self.comparison())
            self.take("punct", "]")
            return Select(tuple(pred), self.paren_expr())
        if word == "project" and nxt[1] == "[":
            self.take("punct", "[")
            attrs = []
            if not self.at("punct", "]"):
                attrs.append(self.ref())
                while self.at("punct", ","):
                    self.i += 1
                    attrs.append(self.ref())
            self.take("punct", "]")
            return Project(tuple(attrs), self.paren_expr())
        if word == "join" and nxt[1] == "(":
            self.take("punct", "(")
            children = [self.expr()]
            while self.at("punct", ","):
                self.i += 1
                children.append(self.expr())
            conds = []
            if self.at("name", "on"):
                self.i += 1
                conds.append(self.condition())
                while self.at("punct", ","):
                    self.i += 1
                    conds.append(self.condition())
            close = self.take("punct", ")")
            if len(children) < 2:
                raise QuerySyntaxError("join needs at least two inputs", close[2])
            return Join(tuple(children), tuple(conds))
        if word == "union" and nxt[1] == "(":
            self.take("punct", "(")
            left = self.expr()
            self.take("punct", ",")
            right = self.expr()
            self.take("punct", ")")
            return Union_(left, right)
        if self.at("name", "as"):
            self.i += 1
            return Table(word, self.take("name")[1])
        return Table(word)

    def paren_expr(self) -> QueryExpr:
        self.take("punct", "(")
        q = self.expr()
        self.take("punct", ")")
        return q

    def ref(self) -> str:
        name = self.take("name")[1]
        if self.at("punct", "."):
            self.i += 1
            name = f"{name}.{self.take('name')[1]}"
        return name

    def comparison(self) -> Comparison:
        left = self.ref()
        op = self.take("op")[1]
        kind, text, _ = self.peek()
        if kind == "num":
            self.i += 1
            right: Union[Attr, Const] = Const(int(text))
        elif kind == "str":
            self.i += 1
            right = Const(text[1:-1])
        else:
            right = Attr(self.ref())
        return Comparison(left, _CANON.get(op, op), right)

    def condition(self) -> tuple:
        left = self.ref()
        tok = self.take("op")
        if tok[1] != "=":
            raise QuerySyntaxError("join conditions must be equalities", tok[2])
        return (left, self.ref())


def parse_query(text: str, catalog: Mapping | None = None) -> QueryExpr:
    """Parse query text; when a catalog is given the result is also schema-checked."""
    q = _Parser(text).parse()
    if catalog is not None:
        resolve(q, catalog)
    return q


# ---------------------------------------------------------------- resolved plans


@dataclass(frozen=True)
class Column:
    qualifier: str
    name: str

    def __str__(self):
        return f"{self.qualifier}.{self.name}"


@dataclass(eq=False)
class Plan:
    kind: str
    schema: tuple
    children: tuple = ()
    relation: str = ""
    tests: tuple = ()  # select: (index, op, is_column, operand)
    indexes: tuple = ()  # project: kept column positions
    conditions: tuple = ()  # join: pairs of positions in the concatenated schema
    offsets: tuple = ()  # join: start position of each child

    def label(self) -> str:
        if self.kind == "table":
            return self.relation
        return self.kind

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()


def _lookup(schema: Sequence, ref: str) -> int:
    if "." in ref:
        qual, name = ref.split(".", 1)
        hits = [i for i, c in enumerate(schema) if c.qualifier == qual and c.name == name]
    else:
        hits = [i for i, c in enumerate(schema) if c.name == ref]
    if not hits:
        raise QueryError(f"unknown attribute {ref!r}")
    if len(hits) > 1:
        raise QueryError(f"ambiguous attribute {ref!r}; qualify it")
    return hits[0]


def resolve(q: QueryExpr, catalog: Mapping) -> Plan:
    """Schema-check a query and bind attribute references to column positions."""
    if isinstance(q, Table):
        if q.name not in catalog:
            raise QueryError(f"unknown relation {q.name!r}")
        qual = q.alias or q.name
        return Plan("table", tuple(Column(qual, a) for a in catalog[q.name]), relation=q.name)
    if isinstance(q, Select):
        child = resolve(q.child, catalog)
        tests = []
        for c in q.predicate:
            if c.op not in _OPS:
                raise QueryError(f"unknown comparison {c.op!r}")
            left = _lookup(child.schema, c.left)
            if isinstance(c.right, Attr):
                tests.append((left, c.op, True, _lookup(child.schema, c.right.ref)))
            else:
                tests.append((left, c.op, False, c.right.value))
        return Plan("select", child.schema, (child,), tests=tuple(tests))
    if isinstance(q, Project):
        child = resolve(q.child, catalog)
        idx = tuple(_lookup(child.schema, a) for a in q.attrs)
        return Plan("project", tuple(child.schema[i] for i in idx), (child,), indexes=idx)
    if isinstance(q, Join):
        children = tuple(resolve(c, catalog) for c in q.children)
        schema: list = []
        offsets = []
        for ch in children:
            offsets.append(len(schema))
            schema.extend(ch.schema)
        if len(set(schema)) != len(schema):
            raise QueryError("join inputs share a qualified column; alias one of the relations")
        conds = tuple(tuple(sorted((_lookup(schema, a), _lookup(schema, b)))) for a, b in q.conditions)
        return Plan("join", tuple(schema), children, conditions=conds, offsets=tuple(offsets))
    if isinstance(q, Union_):
        left, right = resolve(q.left, catalog), resolve(q.right, catalog)
        if [c.name for c in left.schema] != [c.name for c in right.schema]:
            raise QueryError(
                "union operands have different schemas: "
                f"({', '.join(c.name for c in left.schema)}) vs ({', '.join(c.name for c in right.schema)})"
            )
        return Plan("union", left.schema, (left, right))
    raise QueryError(f"not a query expression: {q!r}")


# ---------------------------------------------------------------- annotated evaluation


@dataclass(frozen=True)
class Semiring:
    """Annotation algebra: n-ary sum and product plus a predicate for nonzero annotations."""

    sum: Callable
    prod: Callable
    nonzero: Callable = lambda a: True


NATURAL = Semiring(sum=sum, prod=math.prod, nonzero=lambda a: a != 0)
VECTOR = Semiring(
    sum=lambda xs: functools.reduce(np.add, xs),
    prod=lambda xs: functools.reduce(np.multiply, xs),
)


def _compare(op: str, a, b) -> bool:
    try:
        return bool(_OPS[op](a, b))
    except TypeError:
        return op == "!="


def _passes(values: tuple, tests: tuple) -> bool:
    for idx, op, is_col, operand in tests:
        if not _compare(op, values[idx], values[operand] if is_col else operand):
            return False
    return True


def evaluate(plan: Plan, leaves: Callable, sr: Semiring, trace: dict | None = None) -> dict:
    """Evaluate a plan over an annotation semiring.

    ``leaves(relation)`` returns ``{values: annotation}`` for one table
    occurrence.  The result maps output tuples to annotations in a
    deterministic order.  ``trace`` collects output sizes per plan node.
    """
    if plan.kind == "table":
        out = {v: a for v, a in leaves(plan.relation).items() if sr.nonzero(a)}
    elif plan.kind == "select":
        child = evaluate(plan.children[0], leaves, sr, trace)
        out = {v: a for v, a in child.items() if _passes(v, plan.tests)}
    elif plan.kind == "project":
        child = evaluate(plan.children[0], leaves, sr, trace)
        groups: dict = {}
        for v, a in child.items():
            groups.setdefault(tuple(v[i] for i in plan.indexes), []).append(a)
        out = {}
        for v, anns in groups.items():
            a = anns[0] if len(anns) == 1 else sr.sum(anns)
            if sr.nonzero(a):
                out[v] = a
    elif plan.kind == "union":
        left = evaluate(plan.children[0], leaves, sr, trace)
        right = evaluate(plan.children[1], leaves, sr, trace)
        out = dict(left)
        for v, a in right.items():
            if v in out:
                s = sr.sum([out[v], a])
                if sr.nonzero(s):
                    out[v] = s
                else:
                    del out[v]
            else:
                out[v] = a
    elif plan.kind == "join":
        inputs = [evaluate(c, leaves, sr, trace) for c in plan.children]
        out = {}
        for v, anns in _hash_join(plan, inputs):
            a = sr.prod(anns)
            if sr.nonzero(a):
                out[v] = a
    else:
        raise QueryError(f"unknown plan node {plan.kind}")
    if trace is not None:
        trace[id(plan)] = len(out)
    return out


def _hash_join(plan: Plan, inputs: list) -> list:
    """Left-deep hash join; each condition is applied once both sides are bound."""
    bounds = [(off, off + len(ch.schema)) for off, ch in zip(plan.offsets, plan.children)]

    def owner(pos: int) -> int:
        return next(i for i, (lo, hi) in enumerate(bounds) if lo <= pos < hi)

    local: dict = {i: [] for i in range(len(inputs))}
    staged: dict = {i: [] for i in range(len(inputs))}
    for a, b in plan.conditions:
        oa, ob = owner(a), owner(b)
        if oa == ob:
            local[oa].append((a - bounds[oa][0], b - bounds[oa][0]))
        else:
            staged[max(oa, ob)].append((a, b) if oa < ob else (b, a))

    def filtered(i: int) -> list:
        return [(v, a) for v, a in inputs[i].items() if all(v[x] == v[y] for x, y in local[i])]

    acc = [(v, [a]) for v, a in filtered(0)]
    for i in range(1, len(inputs)):
        lo = bounds[i][0]
        keys = staged[i]
        index: dict = {}
        for v, a in filtered(i):
            index.setdefault(tuple(v[b - lo] for _, b in keys), []).append((v, a))
        nxt = []
        for v, anns in acc:
            for w, a in index.get(tuple(v[x] for x, _ in keys), ()):
                nxt.append((v + w, anns + [a]))
        acc = nxt
    return acc


# ---------------------------------------------------------------- deterministic evaluation


@dataclass
class BagRelation:
    columns: tuple
    rows: dict

    def __getitem__(self, t) -> int:
        return self.rows.get(tuple(t), 0)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def items(self):
        return self.rows.items()


def _as_plan(q, catalog: Mapping) -> Plan:
    if isinstance(q, Plan):
        return q
    if isinstance(q, str):
        q = parse_query(q)
    return resolve(q, catalog)


def eval_deterministic(q, world: Mapping, catalog: Mapping) -> BagRelation:
    """Bag semantics over a deterministic database ``{relation: {values: multiplicity}}``."""
    plan = _as_plan(q, catalog)
    rows = evaluate(plan, lambda rel: world.get(rel, {}), NATURAL)
    return BagRelation(tuple(c.name for c in plan.schema), rows)


def eval_vectorized(q, world: Mapping, catalog: Mapping) -> dict:
    """Same semantics with per-world multiplicity vectors as annotations."""
    plan = _as_plan(q, catalog)
    return evaluate(plan, lambda rel: world.get(rel, {}), VECTOR)


# ---------------------------------------------------------------- cost model


@dataclass
class CostReport:
    total: int
    breakdown: list = field(default_factory=list)  # (operator, cost, output size), post-order


def det_cost(q, world: Mapping, catalog: Mapping) -> CostReport:
    """Deterministic runtime recursion with hash-join accounting for T_join."""
    plan = _as_plan(q, catalog)
    sizes: dict = {}
    evaluate(plan, lambda rel: world.get(rel, {}), NATURAL, trace=sizes)
    report = CostReport(0)

    def cost(p: Plan) -> int:
        out = sizes[id(p)]
        if p.kind == "table":
            c = out
        elif p.kind == "select":
            c = cost(p.children[0])
        elif p.kind == "project":
            # projection pays for scanning its input
            c = cost(p.children[0]) + sizes[id(p.children[0])]
        elif p.kind == "union":
            c = cost(p.children[0]) + cost(p.children[1])
            c += sizes[id(p.children[0])] + sizes[id(p.children[1])]
        else:
            c = sum(cost(ch) for ch in p.children)
            c += sum(sizes[id(ch)] for ch in p.children) + out
        report.breakdown.append((p.label(), c, out))
        return c

    report.total = cost(plan)
    return report
