import json
import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from bagpdb.circuit import (
    NUM,
    Circuit,
    all_ones_value,
    build_lineage_circuit,
    circuit_from_expr,
    expand,
    gamma,
    gamma_exact,
    is_tree,
    measures,
    monomial_degrees,
    poly_eval,
    positive,
)
from bagpdb.errors import CapExceededError, CircuitError
from bagpdb.model import bounding_database, load_ctidb, reduce_to_binary_bidb, world_database
from bagpdb.query import Join, Project, Select, Table, Union_, det_cost, eval_deterministic, parse_query

from instances import Q1, Q2, points_bidb, random_circuit, random_ctidb, random_query


def int_assignment(rng, names):
    return {n: rng.randint(-4, 4) for n in names}


# ---------------------------------------------------------------- lineage of the worked instances


def test_q1_lineage_over_points(points_files, rng):
    db = load_ctidb(points_files)
    c = build_lineage_circuit(Q1, db)
    assert list(c.sinks) == [()]
    for _ in range(20):
        v = int_assignment(rng, c.variables())
        A, B, C, E = v["T:A"], v["T:B"], v["T:C"], v["T:E"]
        U, Y, Z = v["R:U"], v["R:Y"], v["R:Z"]
        assert poly_eval(c, (), v) == A * U * B + B * Y * E + B * Z * C


def test_q2_e1_is_single_product(rng):
    db = points_bidb(rng)
    c = build_lineage_circuit(Q2, db)
    assert sorted(c.sinks) == [("e1",), ("e2",)]
    for _ in range(20):
        v = int_assignment(rng, c.variables())
        A = v["A1"] + v["A2"]
        U = v["U1"] + 2 * v["U2"]
        assert poly_eval(c, ("e1",), v) == A * U
    root = c.sinks[("e1",)]
    assert c.kind[root] == "times"


def test_q2_e2_factorizes(rng):
    db = points_bidb(rng)
    c = build_lineage_circuit(Q2, db)
    for _ in range(20):
        v = int_assignment(rng, c.variables())
        B = v["B1"] + v["B2"]
        Y, Z = v["Y1"] + 2 * v["Y2"], v["Z1"] + 2 * v["Z2"]
        assert poly_eval(c, ("e2",), v) == B * (Y + Z)


def test_weight_leaf_is_three_gates():
    from bagpdb.model import BidbVariable, BinaryBidb

    db = BinaryBidb({"R": ("x",)}, [BidbVariable("R:t#2", "R", (1,), 2, "R:t", 0.4)])
    c = build_lineage_circuit("R", db)
    assert len(c) == 4  # zero gate + num(2), var, times
    assert poly_eval(c, (1,), {"R:t#2": 1}) == 2


def test_failed_selection_sinks_are_collected(points_files):
    db = load_ctidb(points_files)
    c = build_lineage_circuit("select[Point='e9'](T)", db)
    assert c.sinks == {}
    assert len(c) == 1 and c.kind[0] == NUM and c.val[0] == 0


def test_union_adds_common_tuples(points_files):
    c = build_lineage_circuit("union(T, T)", load_ctidb(points_files))
    assert poly_eval(c, ("e1",), {"T:A": 3}) == 6


# ---------------------------------------------------------------- worked circuit examples


def test_signed_evaluation(signed):
    assert poly_eval(signed, (), {"X": 1, "Y": 1}) == 3
    assert poly_eval(signed, (), {"X": 0, "Y": 0}) == 0


def test_factorized_circuit_evaluation():
    c = circuit_from_expr(("*", "B", ("+", "Y", "Z")))
    assert poly_eval(c, (), {"B": 1, "Y": 1, "Z": 1}) == 2


def test_missing_variable():
    with pytest.raises(CircuitError, match="misses variable"):
        poly_eval(circuit_from_expr(("*", "X", "Y")), (), {"X": 1})


def test_signed_expansion(signed):
    E = [(tuple(sorted(v)), k) for v, k in expand(signed)]
    assert E == [(("X",), 2), (("X", "Y"), -1), (("X", "Y"), 4), (("Y",), -2)]


def test_leaf_expansions():
    assert expand(circuit_from_expr("X")) == [(frozenset({"X"}), 1)]
    assert expand(circuit_from_expr(5)) == [(frozenset(), 5)]


def test_expansion_cap():
    c = circuit_from_expr(("*", ("+", "X", "Y"), ("+", "X", "Y")))
    assert len(expand(c, cap=4)) == 4
    with pytest.raises(CapExceededError):
        expand(c, cap=3)


def test_positive_signed(signed, rng):
    pos = positive(signed)
    for _ in range(10):
        x, y = rng.randint(-5, 5), rng.randint(-5, 5)
        assert poly_eval(pos, (), {"X": x, "Y": y}) == (x + 2 * y) * (2 * x + y)
    assert pos.val[signed.val.index(-1)] == 1
    assert pos.kind == signed.kind and pos.left == signed.left


def test_positive_is_identity_on_nonnegative_circuits():
    c = circuit_from_expr(("+", ("*", 2, "X"), "Y"))
    assert positive(c).to_json() == c.to_json()


def test_measures_examples(signed):
    assert measures(signed).deg == 5
    assert measures(circuit_from_expr("X"), ()) == measures(circuit_from_expr("X"), ()).__class__(1, 0, 1)
    assert measures(circuit_from_expr(("*", "X", "Y")), ()).deg == 3
    m = measures(signed, ())
    assert (m.size, m.depth) == (10, 3)


def test_all_ones_examples(signed):
    assert all_ones_value(signed) == 9
    assert all_ones_value(circuit_from_expr("X")) == 1
    assert all_ones_value(circuit_from_expr(-3)) == 3


def test_gamma_examples(points_files):
    c = build_lineage_circuit(Q1, load_ctidb(points_files))
    assert gamma(c) == 0.0
    sq = circuit_from_expr(("*", ("+", "a", ("*", 2, "b")), ("+", "a", ("*", 2, "b"))), {"a": "t", "b": "t"})
    assert gamma_exact(sq) == Fraction(4, 9)
    est = gamma(sq, mode="estimate", samples=20000, seed=3)
    assert abs(est - 4 / 9) < 0.02


def test_json_round_trip(points_files, tmp_path):
    c = build_lineage_circuit(Q2, reduce_to_binary_bidb(load_ctidb(points_files)))
    back = Circuit.from_json(json.loads(c.dumps()))
    assert back.to_json() == c.to_json()
    assert back.block_of == c.block_of


def test_json_rejects_forward_references():
    doc = {"gates": [{"kind": "num", "inputs": [], "val": 0}, {"kind": "plus", "inputs": [0, 2], "val": None}],
           "sinks": [], "zero_gate": 0}
    with pytest.raises(CircuitError):
        Circuit.from_json(doc)


# ---------------------------------------------------------------- properties


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6))
def test_lineage_commutes_with_evaluation(seed):
    rng = random.Random(seed)
    db = random_ctidb(rng)
    q = random_query(rng, db.schemas)
    c = build_lineage_circuit(q, db)
    for _ in range(3):
        w = {r.id: rng.randint(0, db.c) for r in db.tuples()}
        out = eval_deterministic(q, world_database(db, w), db.catalog)
        got = {t: poly_eval(c, s, w) for t, s in c.sinks.items()}
        assert {t: m for t, m in got.items() if m} == out.rows
        assert set(c.sinks) == set(eval_deterministic(q, bounding_database(db), db.catalog).rows)


def _depth_budget(q, world, catalog) -> int:
    """Levels each operator may add: ceil(log2 fan-in) + 1, maximized along plan paths."""
    def size(sub):
        return max(len(eval_deterministic(sub, world, catalog)), 1)

    if isinstance(q, Table):
        return 0
    if isinstance(q, Select):
        return _depth_budget(q.child, world, catalog)
    if isinstance(q, Project):
        return math.ceil(math.log2(size(q.child))) + 1 + _depth_budget(q.child, world, catalog)
    if isinstance(q, Join):
        own = math.ceil(math.log2(len(q.children))) + 1
        return own + max(_depth_budget(ch, world, catalog) for ch in q.children)
    assert isinstance(q, Union_)
    return 1 + max(_depth_budget(q.left, world, catalog), _depth_budget(q.right, world, catalog))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6))
def test_size_and_depth_bounds_on_one_tidb_circuits(seed):
    rng = random.Random(seed)
    db = random_ctidb(rng, c=1)
    q = parse_query(random_query(rng, db.schemas))
    c = build_lineage_circuit(q, db)
    if not c.sinks:
        return
    world = bounding_database(db)
    poly_deg = monomial_degrees(c)
    k = max(1, *(poly_deg[g] for g in c.sinks.values()))
    assert len(c) - 1 <= k * det_cost(q, world, db.catalog).total + 1
    assert measures(c).depth <= _depth_budget(q, world, db.catalog)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6))
def test_value_bounds_on_reduced_query_circuits(seed):
    rng = random.Random(seed)
    db = reduce_to_binary_bidb(random_ctidb(rng, n_max=6))
    c = build_lineage_circuit(random_query(rng, db.schemas), db)
    for sink in c.sinks.values():
        m = measures(c, sink)
        ones = all_ones_value(c, sink)
        assert sum(abs(k) for _, k in expand(c, sink)) == ones
        assert ones <= 2 ** (2**m.deg * m.depth)
        if is_tree(c, sink):
            assert ones <= m.size ** (m.deg + 1)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6))
def test_coefficient_mass_and_value_bounds(seed):
    rng = random.Random(seed)
    c = random_circuit(rng, gates=rng.randint(1, 14))
    terms = expand(c)
    ones = all_ones_value(c)
    assert sum(abs(k) for _, k in terms) == ones
    m = measures(c, ())
    assert ones <= 2 ** (2**m.deg * m.depth)
    if is_tree(c, ()):
        assert ones <= m.size ** (m.deg + 1)
    # deg bounds the degree of the positive polynomial
    assert max((len(v) for v, k in expand(positive(c)) if k), default=0) <= m.deg


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_expansion_evaluates_like_the_circuit_on_boolean_points(seed):
    # exponents collapse, so agreement is only expected on 0/1 points
    rng = random.Random(seed)
    c = random_circuit(rng, const=3)
    terms = expand(c)
    for _ in range(4):
        v = {n: rng.randint(0, 1) for n in c.variables()}
        assert poly_eval(c, (), v) == sum(k * math.prod(v[x] for x in vs) for vs, k in terms)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_tree_circuits_meet_the_size_power_bound(seed):
    rng = random.Random(seed)
    depth = rng.randint(1, 4)

    def tree(d):
        if d == 0 or rng.random() < 0.2:
            return rng.choice(["X", "Y", rng.randint(-1, 1)])
        return (rng.choice("+*"), tree(d - 1), tree(d - 1))

    c = circuit_from_expr(tree(depth))
    assert is_tree(c, ())
    m = measures(c, ())
    assert all_ones_value(c) <= m.size ** (m.deg + 1)
