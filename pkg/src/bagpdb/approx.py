"""One-pass annotation, proportional monomial sampling and the sampling estimator."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import numpy as np

from .circuit import NUM, PLUS, TIMES, VAR, Circuit, all_ones_values, is_independent
from .errors import EstimationError

DEFAULT_SEED = 20220615
SEED_ENV = "BAGPDB_SEED"
CHUNK = 4096  # samples per RNG stream
_INT64_SAFE = 2**62

_KIND_CODE = {PLUS: 0, TIMES: 1, VAR: 2, NUM: 3}


def default_seed() -> int:
    return int(os.environ.get(SEED_ENV, DEFAULT_SEED))


def sample_count(epsilon: float, delta: float) -> int:
    if not (0 < epsilon <= 1) or not (0 < delta <= 1):
        raise EstimationError("epsilon and delta must lie in (0, 1]")
    return max(1, math.ceil(2 * math.log(2 / delta) / epsilon**2))


@dataclass(frozen=True)
class SampleBudget:
    epsilon: float
    delta: float

    def __post_init__(self):
        sample_count(self.epsilon, self.delta)

    @property
    def N(self) -> int:
        return sample_count(self.epsilon, self.delta)


@dataclass(frozen=True)
class MonomialSample:
    vars: frozenset
    sign: int


# ---------------------------------------------------------------- one pass


def one_pass(c: Circuit, sink=None) -> tuple:
    """Annotate every gate with |subcircuit|(1,...,1); returns (circuit, sink partial).

    Without ``sink`` the partial is reported only for single-sink circuits.
    """
    c.partial = all_ones_values(c)
    if sink is None and len(c.sinks) != 1:
        return c, None
    root = c.only_sink() if sink is None else c.sink_gate(sink)
    return c, c.partial[root]


def _require_partial(c: Circuit) -> list:
    if c.partial is None or len(c.partial) != len(c):
        raise EstimationError("circuit is not annotated; run one_pass first")
    return c.partial


def lweight(c: Circuit, g: int) -> Fraction:
    p = _require_partial(c)
    return Fraction(p[c.left[g]], p[g]) if c.kind[g] == PLUS and p[g] else Fraction(0)


def rweight(c: Circuit, g: int) -> Fraction:
    p = _require_partial(c)
    return Fraction(p[c.right[g]], p[g]) if c.kind[g] == PLUS and p[g] else Fraction(0)


# ---------------------------------------------------------------- single samples


def _uniform_1_to(rng: np.random.Generator, n: int) -> int:
    """Uniform integer in [1, n] for arbitrarily large n."""
    if n < _INT64_SAFE:
        return int(rng.integers(1, n, endpoint=True))
    nbytes = (n.bit_length() + 7) // 8
    shift = 8 * nbytes - n.bit_length()
    while True:
        r = int.from_bytes(rng.bytes(nbytes), "big") >> shift
        if r < n:
            return r + 1


def sample_monomial(c: Circuit, rng, sink=None) -> MonomialSample:
    """Draw (vars, sign) with probability |coeff| / |C|(1,...,1) over the expansion."""
    p = _require_partial(c)
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    root = c.only_sink() if sink is None else c.sink_gate(sink)
    if p[root] == 0:
        raise EstimationError("circuit evaluates to zero at all ones; nothing to sample")
    found: set = set()
    sign = 1
    stack = [root]
    while stack:
        g = stack.pop()
        k = c.kind[g]
        if k == PLUS:
            left = c.left[g]
            stack.append(left if _uniform_1_to(rng, p[g]) <= p[left] else c.right[g])
        elif k == TIMES:
            stack.append(c.right[g])
            stack.append(c.left[g])
        elif k == VAR:
            found.add(c.val[g])
        elif c.val[g] < 0:
            sign = -sign
    return MonomialSample(frozenset(found), sign)


# ---------------------------------------------------------------- batched sampling


class _Compiled:
    def __init__(self, c: Circuit):
        p = _require_partial(c)
        self.kind = np.array([_KIND_CODE[k] for k in c.kind], dtype=np.int8)
        self.left = np.array(c.left, dtype=np.int64)
        self.right = np.array(c.right, dtype=np.int64)
        self.exact_int64 = max(p, default=0) < _INT64_SAFE
        self.partial = np.array(p, dtype=np.int64) if self.exact_int64 else None
        names = sorted({v for k, v in zip(c.kind, c.val) if k == VAR})
        self.names = names
        index = {v: i for i, v in enumerate(names)}
        self.var_index = np.array([index[v] if k == VAR else -1 for k, v in zip(c.kind, c.val)], dtype=np.int64)
        self.negative = np.array([k == NUM and v < 0 for k, v in zip(c.kind, c.val)], dtype=np.int64)
        blocks = {}
        self.block = np.array([blocks.setdefault(c.block_of.get(v, v), len(blocks)) for v in names], dtype=np.int64)
        self.n_blocks = max(len(blocks), 1)


@dataclass
class SampleBatch:
    """Samples as arrays; ``sample_ids``/``var_ids`` list each distinct (sample, variable) pair."""

    count: int
    sign: np.ndarray
    independent: np.ndarray
    sample_ids: np.ndarray
    var_ids: np.ndarray
    names: list

    def monomials(self) -> list:
        found: list = [set() for _ in range(self.count)]
        for s, v in zip(self.sample_ids.tolist(), self.var_ids.tolist()):
            found[s].add(self.names[v])
        return [MonomialSample(frozenset(f), int(g)) for f, g in zip(found, self.sign.tolist())]

    def products(self, probs: Mapping) -> np.ndarray:
        missing = [n for n in self.names if n not in probs]
        if missing:
            raise EstimationError(f"no probability for variable {missing[0]}")
        p = np.array([probs[n] for n in self.names], dtype=float)
        out = np.ones(self.count)
        np.multiply.at(out, self.sample_ids, p[self.var_ids])
        return out


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(chunk,)))


def _walk_vectorized(comp: _Compiled, root: int, count: int, rng) -> tuple:
    fs = np.arange(count, dtype=np.int64)
    fg = np.full(count, root, dtype=np.int64)
    negatives = np.zeros(count, dtype=np.int64)
    s_parts, v_parts = [], []
    while fs.size:
        kind = comp.kind[fg]
        plus = kind == 0
        g = fg[plus]
        r = rng.integers(1, comp.partial[g], endpoint=True)
        chosen = np.where(r <= comp.partial[comp.left[g]], comp.left[g], comp.right[g])
        times = kind == 1
        ts, tg = fs[times], fg[times]
        is_var = kind == 2
        s_parts.append(fs[is_var])
        v_parts.append(comp.var_index[fg[is_var]])
        is_num = kind == 3
        negatives += np.bincount(fs[is_num], weights=comp.negative[fg[is_num]], minlength=count).astype(np.int64)
        fs = np.concatenate([fs[plus], ts, ts])
        fg = np.concatenate([chosen, comp.left[tg], comp.right[tg]])
    sign = np.where(negatives % 2 == 1, -1, 1).astype(np.int64)
    return sign, np.concatenate(s_parts), np.concatenate(v_parts)


def _walk_scalar(c: Circuit, comp: _Compiled, root: int, count: int, rng) -> tuple:
    index = {n: i for i, n in enumerate(comp.names)}
    sign = np.empty(count, dtype=np.int64)
    ss, vs = [], []
    for i in range(count):
        m = sample_monomial(c, rng, root)
        sign[i] = m.sign
        for v in m.vars:
            ss.append(i)
            vs.append(index[v])
    return sign, np.array(ss, dtype=np.int64), np.array(vs, dtype=np.int64)


def _sample_chunk(c: Circuit, comp: _Compiled, root: int, count: int, seed: int, chunk: int) -> tuple:
    rng = _chunk_rng(seed, chunk)
    if comp.exact_int64:
        sign, s, v = _walk_vectorized(comp, root, count, rng)
    else:
        sign, s, v = _walk_scalar(c, comp, root, count, rng)
    nv = max(len(comp.names), 1)
    key = np.unique(s * nv + v)
    s, v = key // nv, key % nv
    blocks = np.unique(s * comp.n_blocks + comp.block[v]) // comp.n_blocks
    independent = np.bincount(s, minlength=count) == np.bincount(blocks, minlength=count)
    return sign, independent, s + chunk * CHUNK, v


def sample_batch(c: Circuit, sink, count: int, seed: int, threads: int = 1) -> SampleBatch:
    """``count`` proportional samples; chunk i of CHUNK samples draws from stream (seed, i)."""
    if c.partial is None or len(c.partial) != len(c):
        one_pass(c)
    root = c.sink_gate(sink) if sink is not None else c.only_sink()
    if c.partial[root] == 0:
        raise EstimationError("circuit evaluates to zero at all ones; nothing to sample")
    comp = _Compiled(c)
    sizes = [min(CHUNK, count - lo) for lo in range(0, count, CHUNK)]

    def run(i: int) -> tuple:
        return _sample_chunk(c, comp, root, sizes[i], seed, i)

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(i) for i in range(len(sizes))]
    if not parts:
        empty = np.zeros(0, dtype=np.int64)
        return SampleBatch(0, empty, empty.astype(bool), empty, empty, comp.names)
    return SampleBatch(
        count,
        np.concatenate([p[0] for p in parts]),
        np.concatenate([p[1] for p in parts]),
        np.concatenate([p[2] for p in parts]),
        np.concatenate([p[3] for p in parts]),
        comp.names,
    )


# ---------------------------------------------------------------- estimator


@dataclass(frozen=True)
class ApproxResult:
    estimate: float
    N: int
    all_ones: int
    gamma_estimate: float
    seed: int


def _seed_of(rng) -> int:
    if rng is None:
        return default_seed()
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 2**63))
    return int(rng)


def approximate_rpoly(c: Circuit, probs: Mapping, delta: float, epsilon: float, rng=None,
                      sink=None, threads: int = 1) -> ApproxResult:
    """Additive estimate of the reduced polynomial at ``probs``.

    With N = ceil(2 ln(2/delta) / epsilon^2) samples the error exceeds
    epsilon * |C|(1,...,1) with probability at most delta.
    """
    n = sample_count(epsilon, delta)
    seed = _seed_of(rng)
    if c.partial is None or len(c.partial) != len(c):
        one_pass(c)
    root = c.sink_gate(sink) if sink is not None else c.only_sink()
    size = c.partial[root]
    if size == 0:
        return ApproxResult(0.0, n, 0, 0.0, seed)
    batch = sample_batch(c, root, n, seed, threads)
    y = batch.sign * batch.products(probs) * batch.independent
    estimate = math.fsum(y.tolist()) * (size / n)
    return ApproxResult(estimate, n, size, float(1.0 - batch.independent.mean()), seed)


def relative_budget(c: Circuit, probs: Mapping, target_rel_eps: float, qtilde: float | None = None,
                    sink=None) -> float:
    """Additive epsilon that yields a relative error of ``target_rel_eps``."""
    if qtilde is None:
        from .exact import expected_multiplicity_exact

        qtilde = expected_multiplicity_exact(c, c.only_sink() if sink is None else sink, probs)
    if qtilde == 0:
        raise EstimationError("relative error is undefined when the expectation is 0")
    if c.partial is None or len(c.partial) != len(c):
        one_pass(c)
    root = c.only_sink() if sink is None else c.sink_gate(sink)
    return target_rel_eps * abs(qtilde) / c.partial[root]


def independent_sample(sample: MonomialSample, block_of: Mapping) -> bool:
    return is_independent(sample.vars, block_of)
