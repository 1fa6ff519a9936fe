"""Exact expected multiplicities: reduced polynomials and the world-enumeration oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .circuit import DEFAULT_EXPANSION_CAP, Circuit, expand, is_independent
from .model import BinaryBidb, CTidb, enumerate_worlds, world_array, world_database
from .query import eval_deterministic, eval_vectorized, parse_query, resolve

WORLD_CHUNK = 8192


@dataclass
class ReducedPolynomial:
    """Multilinear polynomial keyed by sorted variable tuples; no term spans a block twice."""

    terms: dict = field(default_factory=dict)

    def evaluate(self, probs: Mapping) -> float:
        return math.fsum(k * math.prod(probs[v] for v in vs) for vs, k in self.terms.items())

    def univariate(self) -> dict:
        """Coefficients by term size, i.e. the polynomial obtained by setting all p equal."""
        out: dict = {}
        for vs, k in self.terms.items():
            out[len(vs)] = out.get(len(vs), 0) + k
        return dict(sorted(out.items()))

    def __len__(self) -> int:
        return len(self.terms)


def reduce_polynomial(terms: Iterable, blocks: Mapping | BinaryBidb) -> ReducedPolynomial:
    block_of = blocks.block_of if isinstance(blocks, BinaryBidb) else blocks
    merged: dict = {}
    for vs, k in terms:
        if not is_independent(vs, block_of):
            continue
        key = tuple(sorted(vs))
        merged[key] = merged.get(key, 0) + k
    return ReducedPolynomial({vs: k for vs, k in sorted(merged.items()) if k != 0})


def reduced_polynomial(c: Circuit, sink=None, cap: int = DEFAULT_EXPANSION_CAP) -> ReducedPolynomial:
    return reduce_polynomial(expand(c, sink, cap), c.block_of)


def expected_multiplicity_exact(c: Circuit, sink, probs: Mapping, cap: int = DEFAULT_EXPANSION_CAP) -> float:
    return reduced_polynomial(c, sink, cap).evaluate(probs)


def _vector_worlds(db: CTidb, keys: list, worlds: np.ndarray) -> dict:
    col = {k: i for i, k in enumerate(keys)}
    out: dict = {rel: {} for rel in db.schemas}
    for row in db.tuples():
        out[row.relation][row.values] = worlds[:, col[row.id]]
    return out


def brute_force_expectations(q, db: CTidb | BinaryBidb, cap: int = 10**6) -> dict:
    """Expected multiplicity of every possible output tuple, by summing over all worlds."""
    plan = resolve(parse_query(q) if isinstance(q, str) else q, db.catalog)
    totals: dict = {}
    if isinstance(db, BinaryBidb):
        for w, p in enumerate_worlds(db, cap):
            for t, m in eval_deterministic(plan, world_database(db, w), db.catalog).items():
                totals[t] = totals.get(t, 0.0) + m * p
        return totals
    keys, worlds, probs = world_array(db, cap)
    for lo in range(0, len(probs), WORLD_CHUNK):
        chunk = worlds[lo:lo + WORLD_CHUNK]
        pc = probs[lo:lo + WORLD_CHUNK]
        for t, mult in eval_vectorized(plan, _vector_worlds(db, keys, chunk), db.catalog).items():
            totals[t] = totals.get(t, 0.0) + float(np.dot(mult, pc))
    return totals


def brute_force_expectation(q, db: CTidb | BinaryBidb, t, cap: int = 10**6) -> float:
    return brute_force_expectations(q, db, cap).get(tuple(t), 0.0)
