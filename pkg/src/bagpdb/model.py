"""Bounding databases, c-TIDBs, Binary-BIDBs and their possible worlds."""

from __future__ import annotations

import csv
import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence, Union

import numpy as np

from .errors import CapExceededError, DataError

Value = Union[int, str]
Row = tuple  # tuple of Value
WorldVector = dict  # tuple key or variable name -> multiplicity
BagDatabase = dict  # relation -> {row values: multiplicity}

TOL = 1e-9
ID_COLUMN = "id"
BLOCK_COLUMN = "_block"
PROB_COLUMN = "_p"
WEIGHT_COLUMN = "_weight"
VAR_COLUMN = "_var"


def parse_value(text: str) -> Value:
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        return text


@dataclass(frozen=True)
class TupleRow:
    relation: str
    values: Row
    id: str  # qualified key "rel:id"


@dataclass(frozen=True)
class MultiplicityDistribution:
    probs: tuple

    def __post_init__(self):
        if not self.probs:
            raise DataError("empty multiplicity distribution")
        for p in self.probs:
            if not (-TOL <= p <= 1 + TOL) or math.isnan(p):
                raise DataError(f"probability {p} outside [0, 1]")
        total = math.fsum(self.probs)
        if abs(total - 1.0) > TOL:
            raise DataError(f"distribution sums to {total:g}, expected 1")

    @property
    def c(self) -> int:
        return len(self.probs) - 1

    def p(self, j: int) -> float:
        return self.probs[j] if 0 <= j < len(self.probs) else 0.0

    def padded(self, c: int) -> "MultiplicityDistribution":
        if self.c > c:
            raise DataError(f"multiplicity {self.c} exceeds c={c}")
        return MultiplicityDistribution(tuple(self.probs) + (0.0,) * (c - self.c))


DETERMINISTIC = MultiplicityDistribution((0.0, 1.0))


@dataclass
class CTidb:
    """Bounding database plus an independent multiplicity distribution per tuple."""

    schemas: dict
    bounding_db: dict
    c: int
    dist: dict

    def __post_init__(self):
        if self.c < 1:
            raise DataError("c must be a positive integer")
        seen: set = set()
        for rel, rows in self.bounding_db.items():
            if rel not in self.schemas:
                raise DataError(f"relation {rel!r} has no schema")
            arity = len(self.schemas[rel])
            values_seen: set = set()
            for row in rows:
                if len(row.values) != arity:
                    raise DataError(f"tuple {row.id} has arity {len(row.values)}, expected {arity}")
                if row.id in seen:
                    raise DataError(f"duplicate tuple id {row.id}")
                if row.values in values_seen:
                    raise DataError(f"duplicate tuple {row.values} in {rel}; use multiplicities instead")
                seen.add(row.id)
                values_seen.add(row.values)
                if row.id not in self.dist:
                    raise DataError(f"tuple {row.id} has no distribution")
                self.dist[row.id] = self.dist[row.id].padded(self.c)

    def tuples(self) -> list:
        return [row for rows in self.bounding_db.values() for row in rows]

    @property
    def n(self) -> int:
        return sum(len(rows) for rows in self.bounding_db.values())

    @property
    def catalog(self) -> dict:
        return self.schemas


@dataclass(frozen=True)
class BidbVariable:
    name: str
    relation: str
    values: Row
    weight: int
    block: str
    prob: float


@dataclass
class BinaryBidb:
    """0/1 variables with multiplicity weights, partitioned into disjoint blocks."""

    schemas: dict
    variables: list
    _blocks: dict = field(init=False, repr=False)

    def __post_init__(self):
        names: set = set()
        blocks: dict = defaultdict(list)
        for v in self.variables:
            if v.name in names:
                raise DataError(f"duplicate variable {v.name}")
            names.add(v.name)
            if v.relation not in self.schemas:
                raise DataError(f"relation {v.relation!r} has no schema")
            if len(v.values) != len(self.schemas[v.relation]):
                raise DataError(f"variable {v.name} has wrong arity")
            if not (-TOL <= v.prob <= 1 + TOL):
                raise DataError(f"probability {v.prob} of {v.name} outside [0, 1]")
            if v.weight < 1:
                raise DataError(f"weight of {v.name} must be >= 1")
            blocks[v.block].append(v.name)
        by_name = {v.name: v for v in self.variables}
        for b, members in blocks.items():
            s = math.fsum(by_name[m].prob for m in members)
            if s > 1 + TOL:
                raise DataError(f"block {b} has probability mass {s:g} > 1")
        self._blocks = dict(blocks)

    @property
    def catalog(self) -> dict:
        return self.schemas

    @property
    def blocks(self) -> dict:
        return self._blocks

    @property
    def probs(self) -> dict:
        return {v.name: v.prob for v in self.variables}

    @property
    def block_of(self) -> dict:
        return {v.name: v.block for v in self.variables}

    @property
    def weights(self) -> dict:
        return {v.name: v.weight for v in self.variables}


def variable_name(key: str, j: int, c: int) -> str:
    return key if c == 1 else f"{key}#{j}"


def reduce_to_binary_bidb(db: CTidb) -> BinaryBidb:
    """Replace each tuple by a block of weighted 0/1 alternatives, one per nonzero multiplicity."""
    variables = []
    for row in db.tuples():
        d = db.dist[row.id]
        for j in range(1, db.c + 1):
            if d.p(j) > 0.0:
                variables.append(
                    BidbVariable(variable_name(row.id, j, db.c), row.relation, row.values, j, row.id, d.p(j))
                )
    return BinaryBidb(dict(db.schemas), variables)


def world_probability(db: CTidb | BinaryBidb, w: Mapping) -> float:
    if isinstance(db, CTidb):
        prob = 1.0
        for row in db.tuples():
            if row.id not in w:
                raise DataError(f"world does not assign tuple {row.id}")
            m = w[row.id]
            if not (0 <= m <= db.c) or m != int(m):
                raise DataError(f"multiplicity {m} of {row.id} outside [0, {db.c}]")
            prob *= db.dist[row.id].p(int(m))
        return prob
    by_name = {v.name: v for v in db.variables}
    prob = 1.0
    for members in db.blocks.values():
        on = []
        for name in members:
            if name not in w:
                raise DataError(f"world does not assign variable {name}")
            if w[name] not in (0, 1):
                raise DataError(f"variable {name} must be 0 or 1")
            if w[name]:
                on.append(name)
        if len(on) > 1:
            return 0.0
        prob *= by_name[on[0]].prob if on else 1.0 - math.fsum(by_name[m].prob for m in members)
    return prob


def world_array(db: CTidb, cap: int = 10**6) -> tuple:
    """All nonzero-probability worlds as (tuple keys, int matrix worlds x tuples, probabilities)."""
    rows = db.tuples()
    if (db.c + 1) ** len(rows) > cap:
        raise CapExceededError(f"{db.c + 1}^{len(rows)} worlds exceed cap {cap}")
    keys = [r.id for r in rows]
    supports = [[j for j in range(db.c + 1) if db.dist[k].p(j) > 0.0] for k in keys]
    count = math.prod(len(s) for s in supports)
    worlds = np.zeros((count, len(keys)), dtype=np.int64)
    probs = np.ones(count)
    stride = count
    for col, (k, s) in enumerate(zip(keys, supports)):
        stride //= len(s)
        choice = (np.arange(count) // stride) % len(s)
        values = np.array(s, dtype=np.int64)[choice]
        worlds[:, col] = values
        probs *= np.array([db.dist[k].p(j) for j in s])[choice]
    return keys, worlds, probs


def enumerate_worlds(db: CTidb | BinaryBidb, cap: int = 10**6) -> Iterator:
    """Yield (world, probability) for every world with nonzero probability."""
    if isinstance(db, CTidb):
        keys, worlds, probs = world_array(db, cap)
        for i in range(len(probs)):
            yield {k: int(m) for k, m in zip(keys, worlds[i])}, float(probs[i])
        return
    blocks = list(db.blocks.values())
    if math.prod(len(b) + 1 for b in blocks) > cap:
        raise CapExceededError(f"world count exceeds cap {cap}")
    names = [v.name for v in db.variables]
    for choice in itertools.product(*[[None, *b] for b in blocks]):
        w = dict.fromkeys(names, 0)
        for name in choice:
            if name is not None:
                w[name] = 1
        p = world_probability(db, w)
        if p > 0.0:
            yield w, p


def world_database(db: CTidb | BinaryBidb, w: Mapping) -> BagDatabase:
    """Deterministic bag database of a world; zero-multiplicity tuples are dropped."""
    out: BagDatabase = {rel: {} for rel in db.schemas}
    if isinstance(db, CTidb):
        for row in db.tuples():
            m = w.get(row.id, 0)
            if m:
                out[row.relation][row.values] = m
        return out
    for v in db.variables:
        if w.get(v.name, 0):
            rel = out[v.relation]
            rel[v.values] = rel.get(v.values, 0) + v.weight
    return out


def bounding_database(db: CTidb | BinaryBidb) -> BagDatabase:
    out: BagDatabase = {rel: {} for rel in db.schemas}
    rows = db.tuples() if isinstance(db, CTidb) else db.variables
    for r in rows:
        out[r.relation][r.values] = 1
    return out


# ---------------------------------------------------------------- file formats


def _read_tsv(path: Path) -> tuple:
    with open(path, newline="") as fh:
        lines = [ln for ln in csv.reader(fh, delimiter="\t") if ln and any(x.strip() for x in ln)]
    if not lines:
        raise DataError(f"{path}: missing header line")
    header = [h.strip() for h in lines[0]]
    body = []
    for lineno, cells in enumerate(lines[1:], start=2):
        if len(cells) != len(header):
            raise DataError(f"{path}:{lineno}: malformed row, expected {len(header)} fields, got {len(cells)}")
        body.append([c.strip() for c in cells])
    return header, body


def load_relations(relation_files: Iterable) -> tuple:
    """Read relation TSVs; returns (schemas, rows per relation as (local id, values))."""
    schemas: dict = {}
    rows: dict = {}
    for f in relation_files:
        path = Path(f)
        rel = path.stem
        if rel in schemas:
            raise DataError(f"relation {rel} given twice")
        header, body = _read_tsv(path)
        id_col = header.index(ID_COLUMN) if ID_COLUMN in header else None
        attrs = tuple(h for i, h in enumerate(header) if i != id_col)
        if len(set(attrs)) != len(attrs):
            raise DataError(f"{path}: duplicate attribute names")
        schemas[rel] = attrs
        rows[rel] = [
            (
                cells[id_col] if id_col is not None else str(i),
                tuple(parse_value(x) for k, x in enumerate(cells) if k != id_col),
            )
            for i, cells in enumerate(body)
        ]
    return schemas, rows


def _resolve_tuple_ref(ref: str, keys: Sequence, bare: dict) -> str:
    if ref in keys:
        return ref
    hits = bare.get(ref, [])
    if len(hits) == 1:
        return hits[0]
    if not hits:
        raise DataError(f"probability file references unknown tuple {ref!r}")
    raise DataError(f"tuple id {ref!r} is ambiguous; qualify it as relation:id")


def read_prob_rows(prob_file) -> list:
    """Parse `tuple_id p_0 ... p_c` lines (whitespace separated, optional header)."""
    out = []
    with open(prob_file) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if lineno == 1 and parts[0] == "tuple_id":
                continue
            try:
                probs = tuple(float(x) for x in parts[1:])
            except ValueError:
                raise DataError(f"{prob_file}:{lineno}: malformed row") from None
            if not probs:
                raise DataError(f"{prob_file}:{lineno}: malformed row, no probabilities")
            out.append((parts[0], probs, lineno))
    return out


def load_ctidb(relation_files: Iterable, prob_file=None, c: int | None = None) -> CTidb:
    schemas, raw = load_relations(relation_files)
    bounding = {
        rel: [TupleRow(rel, values, f"{rel}:{local}") for local, values in rows] for rel, rows in raw.items()
    }
    keys = [r.id for rows in bounding.values() for r in rows]
    bare: dict = defaultdict(list)
    for k in keys:
        bare[k.split(":", 1)[1]].append(k)
    given: dict = {}
    if prob_file is not None:
        for ref, probs, lineno in read_prob_rows(prob_file):
            key = _resolve_tuple_ref(ref, keys, bare)
            try:
                given[key] = MultiplicityDistribution(probs)
            except DataError as e:
                raise DataError(f"{prob_file}:{lineno}: {e}") from None
    width = max([d.c for d in given.values()] + [1])
    if c is None:
        c = width
    elif width > c:
        raise DataError(f"multiplicity {width} exceeds c={c}")
    dist = {k: given.get(k, DETERMINISTIC) for k in keys}
    return CTidb(schemas, bounding, c, dist)


def load_bidb(relation_files: Iterable) -> BinaryBidb:
    """Read BIDB relation TSVs carrying `_block`, `_p` and optional `_weight`/`_var` columns."""
    schemas: dict = {}
    variables = []
    for f in relation_files:
        path = Path(f)
        rel = path.stem
        header, body = _read_tsv(path)
        for col in (BLOCK_COLUMN, PROB_COLUMN):
            if col not in header:
                raise DataError(f"{path}: missing block metadata column {col!r}")
        meta = {BLOCK_COLUMN, PROB_COLUMN, WEIGHT_COLUMN, VAR_COLUMN, ID_COLUMN}
        attr_idx = [i for i, h in enumerate(header) if h not in meta]
        schemas[rel] = tuple(header[i] for i in attr_idx)
        col = {h: i for i, h in enumerate(header)}
        for i, cells in enumerate(body):
            try:
                prob = float(cells[col[PROB_COLUMN]])
                weight = int(cells[col[WEIGHT_COLUMN]]) if WEIGHT_COLUMN in col else 1
            except ValueError:
                raise DataError(f"{path}:{i + 2}: malformed row") from None
            name = cells[col[VAR_COLUMN]] if VAR_COLUMN in col else f"{rel}:{i}"
            variables.append(
                BidbVariable(
                    name,
                    rel,
                    tuple(parse_value(cells[k]) for k in attr_idx),
                    weight,
                    cells[col[BLOCK_COLUMN]],
                    prob,
                )
            )
    return BinaryBidb(schemas, variables)


def write_bidb(db: BinaryBidb, directory) -> list:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for rel, attrs in db.schemas.items():
        path = directory / f"{rel}.tsv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow([*attrs, VAR_COLUMN, BLOCK_COLUMN, WEIGHT_COLUMN, PROB_COLUMN])
            for v in db.variables:
                if v.relation == rel:
                    w.writerow([*v.values, v.name, v.block, v.weight, repr(v.prob)])
        paths.append(path)
    return paths
