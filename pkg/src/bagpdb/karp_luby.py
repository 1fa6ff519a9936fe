"""Karp-Luby coverage estimator for DNF probability, with an exact enumeration oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .approx import CHUNK, _chunk_rng, default_seed
from .errors import CapExceededError, DataError, EstimationError
from .model import read_prob_rows


@dataclass(frozen=True)
class DnfFormula:
    clauses: tuple  # of frozensets
    probs: dict

    def __post_init__(self):
        if not self.clauses:
            raise DataError("DNF needs at least one clause")
        for cl in self.clauses:
            if not cl:
                raise DataError("empty clause")
            for v in cl:
                if v not in self.probs:
                    raise DataError(f"no probability for variable {v}")
                if not 0.0 <= self.probs[v] <= 1.0:
                    raise DataError(f"probability of {v} outside [0, 1]")

    @property
    def variables(self) -> list:
        return sorted({v for cl in self.clauses for v in cl})

    def clause_probabilities(self) -> np.ndarray:
        return np.array([math.prod(self.probs[v] for v in cl) for cl in self.clauses])


def load_dnf(dnf_file, prob_file=None) -> DnfFormula:
    clauses = []
    for line in Path(dnf_file).read_text().splitlines():
        parts = line.split()
        if parts and not parts[0].startswith("#"):
            clauses.append(frozenset(parts))
    probs: dict = {}
    if prob_file is not None:
        for ref, dist, lineno in read_prob_rows(prob_file):
            if len(dist) == 1:
                probs[ref] = dist[0]
            elif len(dist) == 2 and abs(sum(dist) - 1.0) <= 1e-9:
                probs[ref] = dist[1]
            else:
                raise DataError(f"{prob_file}:{lineno}: DNF variables need 'name p_0 p_1'")
    return DnfFormula(tuple(clauses), probs)


def trial_count(clauses: int, epsilon: float, delta: float) -> int:
    if not (0 < epsilon <= 1) or not (0 < delta <= 1):
        raise EstimationError("epsilon and delta must lie in (0, 1]")
    return math.ceil(3 * clauses * math.log(2 / delta) / epsilon**2)


def _masks(f: DnfFormula) -> tuple:
    names = f.variables
    index = {v: i for i, v in enumerate(names)}
    mask = np.zeros((len(f.clauses), len(names)), dtype=bool)
    for i, cl in enumerate(f.clauses):
        mask[i, [index[v] for v in cl]] = True
    return names, mask


def karp_luby_estimate(f: DnfFormula, epsilon: float, delta: float, rng=None) -> float:
    """Union mass times the mean of 1/(#clauses satisfied) over clause-conditioned worlds."""
    weights = f.clause_probabilities()
    total = float(weights.sum())
    if total == 0.0:
        raise EstimationError("every clause has probability 0")
    seed = default_seed() if rng is None else (
        int(rng.integers(0, 2**63)) if isinstance(rng, np.random.Generator) else int(rng)
    )
    trials = trial_count(len(f.clauses), epsilon, delta)
    names, mask = _masks(f)
    p = np.array([f.probs[v] for v in names])
    sizes = mask.sum(axis=1)
    chooser = weights / total
    acc = []
    for chunk, lo in enumerate(range(0, trials, CHUNK)):
        count = min(CHUNK, trials - lo)
        gen = _chunk_rng(seed, chunk)
        picked = gen.choice(len(f.clauses), size=count, p=chooser)
        worlds = (gen.random((count, len(names))) < p) | mask[picked]
        satisfied = (worlds.astype(np.int64) @ mask.T.astype(np.int64)) == sizes
        acc.append(1.0 / satisfied.sum(axis=1))
    return total * math.fsum(np.concatenate(acc).tolist()) / trials


def exact_dnf_probability(f: DnfFormula, cap: int = 2**22) -> float:
    names, mask = _masks(f)
    n = len(names)
    if 2**n > cap:
        raise CapExceededError(f"2^{n} worlds exceed cap {cap}")
    p = np.array([f.probs[v] for v in names])
    worlds = ((np.arange(2**n)[:, None] >> np.arange(n)) & 1).astype(bool)
    probs = np.where(worlds, p, 1.0 - p).prod(axis=1)
    sat = ((worlds.astype(np.int64) @ mask.T.astype(np.int64)) == mask.sum(axis=1)).any(axis=1)
    return float(probs[sat].sum())
