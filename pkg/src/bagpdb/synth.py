"""Synthetic block-independent databases and the cancellation (gamma) report."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import DEFAULT_EXPANSION_CAP, all_ones_value, build_lineage_circuit, expand, is_independent
from .model import BidbVariable, BinaryBidb

GAMMA_SUITE = (
    ("proj", "project[b](R)"),
    ("self-join", "project[](join(R as r1, R as r2 on r1.b=r2.b))"),
    ("same-key", "project[S.c](join(R as r1, S, R as r2 on r1.b=S.b, r2.a=r1.a))"),
)


def _block_probs(rng: np.random.Generator, size: int, p_low: float, p_high: float) -> list:
    raw = rng.uniform(p_low, p_high, size)
    total = raw.sum()
    return (raw / total if total > 1.0 else raw).tolist()


def generate_bidb(blocks: int = 10, block_size: int = 3, p_low: float = 0.05, p_high: float = 0.5,
                  domain: int = 8, seed: int = 0) -> BinaryBidb:
    """R(a, b) and S(b, c); every block holds ``block_size`` alternatives for one key."""
    rng = np.random.default_rng(seed)
    alt = min(block_size, domain)
    variables = []
    for rel, attrs in (("R", ("a", "b")), ("S", ("b", "c"))):
        for i in range(blocks):
            key = i if rel == "R" else i % domain
            others = rng.choice(domain, size=alt, replace=False).tolist()
            for j, (other, p) in enumerate(zip(others, _block_probs(rng, alt, p_low, p_high))):
                variables.append(BidbVariable(f"{rel}:{i}.{j}", rel, (key, other), 1, f"{rel}:{i}", p))
    return BinaryBidb({"R": ("a", "b"), "S": ("b", "c")}, variables)


@dataclass(frozen=True)
class GammaRow:
    query: str
    text: str
    outputs: int
    with_cross: int  # coefficient mass of the expansion, cross terms included
    without_cross: int
    gamma: float


def gamma_report(db: BinaryBidb, queries=GAMMA_SUITE, cap: int = DEFAULT_EXPANSION_CAP) -> list:
    rows = []
    for name, text in queries:
        c = build_lineage_circuit(text, db)
        total = kept = 0
        for sink in c.sinks.values():
            total += all_ones_value(c, sink)
            kept += sum(abs(k) for v, k in expand(c, sink, cap) if is_independent(v, c.block_of))
        gamma = 0.0 if total == 0 else 1.0 - kept / total
        rows.append(GammaRow(name, text, len(c.sinks), total, kept, gamma))
    return rows
