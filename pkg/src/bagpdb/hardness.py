"""Graph-counting constructions: hard instances, lifts, motif counts, interpolation."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .circuit import build_lineage_circuit
from .errors import CapExceededError, DataError, IllConditionedError
from .exact import ReducedPolynomial, reduced_polynomial
from .model import DETERMINISTIC, CTidb, MultiplicityDistribution, TupleRow
from .query import Join, QueryExpr, parse_query

PATTERNS = ("edge", "2path", "2match", "tri", "3star", "3path", "e+2path", "3match")
BRUTE_LIMIT = 2_000_000
RESIDUAL_TOL = 1e-6


@dataclass(frozen=True)
class Graph:
    n: int
    edges: tuple

    def __post_init__(self):
        norm = []
        for u, v in self.edges:
            if u == v:
                raise DataError(f"self-loop at vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise DataError(f"edge ({u}, {v}) outside 0..{self.n - 1}")
            norm.append((min(u, v), max(u, v)))
        if len(set(norm)) != len(norm):
            raise DataError("parallel edges are not allowed")
        object.__setattr__(self, "edges", tuple(norm))
        isolated = [v for v, d in enumerate(self.degrees) if d == 0]
        if isolated:
            raise DataError(f"vertex {isolated[0]} has degree 0")

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def degrees(self) -> list:
        d = [0] * self.n
        for u, v in self.edges:
            d[u] += 1
            d[v] += 1
        return d

    @classmethod
    def from_edges(cls, edges) -> "Graph":
        edges = [tuple(e) for e in edges]
        n = 1 + max((max(e) for e in edges), default=-1)
        return cls(n, tuple(edges))


def load_graph(path) -> Graph:
    edges = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: expected 'u v'")
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise DataError(f"{path}:{lineno}: vertex ids must be integers") from None
    return Graph.from_edges(edges)


def complete_graph(n: int) -> Graph:
    return Graph(n, tuple(itertools.combinations(range(n), 2)))


def cycle_graph(n: int) -> Graph:
    return Graph(n, tuple((i, (i + 1) % n) for i in range(n)))


def path_graph(n: int) -> Graph:
    return Graph(n, tuple((i, i + 1) for i in range(n - 1)))


def star_graph(leaves: int) -> Graph:
    return Graph(leaves + 1, tuple((0, i) for i in range(1, leaves + 1)))


def lift_graph(g: Graph, ell: int) -> Graph:
    """Replace every edge by a path of ``ell`` edges through fresh vertices."""
    if ell < 1:
        raise DataError("lift length must be >= 1")
    if ell == 1:
        return g
    edges = []
    nxt = g.n
    for u, v in g.edges:
        chain = [u, *range(nxt, nxt + ell - 1), v]
        nxt += ell - 1
        edges.extend(zip(chain, chain[1:]))
    return Graph(nxt, tuple(edges))


# ---------------------------------------------------------------- hard instance


def hard_query(k: int) -> QueryExpr:
    q1 = parse_query("project[](join(T as t1, R, T as t2 on t1.Point=R.Point1, t2.Point=R.Point2))")
    return q1 if k == 1 else Join(tuple([q1] * k))


def build_hard_instance(g: Graph, p: float, k: int = 1) -> tuple:
    """Vertices in T with presence probability p, edges in R with probability 1."""
    vertex = MultiplicityDistribution((1.0 - p, p))
    t_rows = [TupleRow("T", (v,), f"T:{v}") for v in range(g.n)]
    r_rows = [TupleRow("R", e, f"R:{i}") for i, e in enumerate(g.edges)]
    dist = {r.id: vertex for r in t_rows}
    dist.update({r.id: DETERMINISTIC for r in r_rows})
    db = CTidb({"T": ("Point",), "R": ("Point1", "Point2")}, {"T": t_rows, "R": r_rows}, 1, dist)
    return db, hard_query(k)


def hard_circuit(g: Graph, k: int):
    """Lineage circuit of the count tuple; edge tuples are folded to constants."""
    db, q = build_hard_instance(g, 0.5, k)
    return build_lineage_circuit(q, db, certain_as_constant=True)


@lru_cache(maxsize=256)
def hard_rpoly(g: Graph, k: int, cap: int = 10**6) -> ReducedPolynomial:
    if g.m**k > cap:
        raise CapExceededError(f"expanding m^k = {g.m**k} terms exceeds cap {cap}")
    return reduced_polynomial(hard_circuit(g, k), (), cap)


def rpoly_hard_eval(g: Graph, k: int, p: float, method: str = "circuit") -> float:
    if method == "closed_form":
        if k != 3:
            raise ValueError("the closed form covers k = 3 only")
        return q3_closed_form(brute_counts(g), p)
    poly = hard_rpoly(g, k)
    return poly.evaluate({f"T:{v}": p for v in range(g.n)})


def q3_closed_form(counts: dict, p: float) -> float:
    return (
        counts["edge"] * p**2
        + 6 * counts["2path"] * p**3
        + 6 * counts["2match"] * p**4
        + 6 * counts["tri"] * p**3
        + 6 * counts["3star"] * p**4
        + 6 * counts["3path"] * p**4
        + 6 * counts["e+2path"] * p**5
        + 6 * counts["3match"] * p**6
    )


# ---------------------------------------------------------------- motif counts


@dataclass(frozen=True)
class MotifCounts:
    edge: int
    two_path: int
    two_matching: int
    three_star: int
    edge_path_aggregate: int  # (e + 2-path) + 3 * 3-matching
    path_triangle_aggregate: int  # 3-path + 3 * triangle


def motif_counts_closed_form(g: Graph) -> MotifCounts:
    d = g.degrees
    m = g.m
    two_match2 = 0
    edge_path = 0
    path_triangle = 0
    for u, v in g.edges:
        free = m - d[u] - d[v] + 1
        two_match2 += free
        edge_path += math.comb(free, 2)
        path_triangle += (d[u] - 1) * (d[v] - 1)
    return MotifCounts(
        edge=m,
        two_path=sum(math.comb(x, 2) for x in d),
        two_matching=two_match2 // 2,
        three_star=sum(math.comb(x, 3) for x in d),
        edge_path_aggregate=edge_path,
        path_triangle_aggregate=path_triangle,
    )


def _classify(edges: tuple) -> str:
    verts = {v for e in edges for v in e}
    if len(edges) == 1:
        return "edge"
    if len(edges) == 2:
        return "2path" if len(verts) == 3 else "2match"
    if len(verts) == 3:
        return "tri"
    if len(verts) == 4:
        deg: dict = {}
        for u, v in edges:
            deg[u] = deg.get(u, 0) + 1
            deg[v] = deg.get(v, 0) + 1
        return "3star" if max(deg.values()) == 3 else "3path"
    return "e+2path" if len(verts) == 5 else "3match"


def brute_counts(g: Graph) -> dict:
    """Count every pattern with at most three edges by enumerating edge subsets."""
    if math.comb(g.m, 3) > BRUTE_LIMIT:
        raise CapExceededError(f"C({g.m}, 3) edge subsets exceed the brute-force guard")
    out = dict.fromkeys(PATTERNS, 0)
    for size in (1, 2, 3):
        for sub in itertools.combinations(g.edges, size):
            out[_classify(sub)] += 1
    return out


def brute_subgraph_counts(g: Graph, pattern: str) -> int:
    if pattern not in PATTERNS:
        raise ValueError(f"unknown pattern {pattern!r}; choose from {', '.join(PATTERNS)}")
    return brute_counts(g)[pattern]


def brute_kmatchings(g: Graph, k: int) -> int:
    return sum(
        1
        for sub in itertools.combinations(g.edges, k)
        if len({v for e in sub for v in e}) == 2 * k
    )


# ---------------------------------------------------------------- interpolation


@dataclass(frozen=True)
class InterpolationResult:
    count: int
    quotient: float
    residual: float
    coefficients: tuple


def default_grid(k: int) -> list:
    return [i / (2 * k + 2) for i in range(1, 2 * k + 2)]


def interpolate_kmatchings(g: Graph, k: int, p_values=None, method: str = "auto") -> InterpolationResult:
    if k < 1:
        raise ValueError("k must be >= 1")
    if g.m < k:
        return InterpolationResult(0, 0.0, 0.0, ())
    ps = list(default_grid(k) if p_values is None else p_values)
    if len(ps) != 2 * k + 1 or len(set(ps)) != len(ps):
        raise ValueError(f"need {2 * k + 1} distinct probabilities")
    if any(not 0 < p <= 1 for p in ps):
        raise ValueError("probabilities must lie in (0, 1]")
    if method == "auto":
        method = "closed_form" if k == 3 else "circuit"
    b = np.array([rpoly_hard_eval(g, k, p, method) for p in ps])
    vander = np.vander(np.array(ps), 2 * k + 1, increasing=True)
    coeffs = np.linalg.solve(vander, b)
    quotient = float(coeffs[2 * k]) / math.factorial(k)
    count = round(quotient)
    residual = abs(quotient - count)
    if residual > RESIDUAL_TOL:
        raise IllConditionedError(f"interpolated count {quotient} is {residual:.2e} from an integer")
    return InterpolationResult(count, quotient, residual, tuple(float(x) for x in coeffs))


def kmatch_by_interpolation(g: Graph, k: int, p_values=None) -> int:
    return interpolate_kmatchings(g, k, p_values).count


# ---------------------------------------------------------------- single-p system


def det_closed_form(p: float) -> float:
    return 10 * p**2 * (3 - p) * (1 - p) ** 3


def system_matrix(p: float) -> np.ndarray:
    s = 3 * p**2 - p**3
    return np.array([[1 - 3 * p, -s], [10 * s, 10 * s]])


@dataclass(frozen=True)
class SinglePResult:
    triangles: int
    three_matchings: int
    residual: float
    det: float
    solution: tuple


def _known_part(q: float, mc: MotifCounts, p: float) -> float:
    """Terms of Q^3/(6p^3) determined by closed-form counts alone."""
    return (
        q / (6 * p**3)
        - mc.edge / (6 * p)
        - mc.two_path
        - mc.two_matching * p
        - mc.three_star * p
        - mc.path_triangle_aggregate * p
        - mc.edge_path_aggregate * p**2
    )


def solve_single_p(g: Graph, p: float) -> SinglePResult:
    """Triangle and 3-matching counts from Q^3 at one probability on G and its 2-lift."""
    if not 0 < p < 1:
        raise ValueError("p must lie strictly inside (0, 1)")
    g2 = lift_graph(g, 2)
    mc, mc2 = motif_counts_closed_form(g), motif_counts_closed_form(g2)
    s = 3 * p**2 - p**3
    b1 = _known_part(rpoly_hard_eval(g, 3, p), mc, p)
    b2 = _known_part(rpoly_hard_eval(g2, 3, p), mc2, p)
    b2 += (4 * mc.three_star + 6 * mc.edge_path_aggregate + 4 * mc.path_triangle_aggregate) * s
    mat = system_matrix(p)
    x = np.linalg.solve(mat, np.array([b1, b2]))
    rounded = np.rint(x)
    residual = float(np.max(np.abs(x - rounded)))
    if residual > RESIDUAL_TOL:
        raise IllConditionedError(f"solution {x.tolist()} is {residual:.2e} from integers")
    return SinglePResult(int(rounded[0]), int(rounded[1]), residual, float(np.linalg.det(mat)),
                         tuple(float(v) for v in x))
