"""Bag-semantics probabilistic database engine with lineage circuits."""

from .approx import (
    ApproxResult,
    MonomialSample,
    SampleBudget,
    approximate_rpoly,
    one_pass,
    relative_budget,
    sample_monomial,
)
from .circuit import (
    Circuit,
    all_ones_value,
    build_lineage_circuit,
    expand,
    gamma,
    measures,
    poly_eval,
    positive,
)
from .exact import (
    ReducedPolynomial,
    brute_force_expectation,
    expected_multiplicity_exact,
    reduce_polynomial,
)
from .model import (
    BinaryBidb,
    CTidb,
    MultiplicityDistribution,
    TupleRow,
    enumerate_worlds,
    load_bidb,
    load_ctidb,
    reduce_to_binary_bidb,
    world_probability,
)
from .query import det_cost, eval_deterministic, parse_query

__version__ = "0.1.0"

__all__ = [
    "ApproxResult",
    "BinaryBidb",
    "CTidb",
    "Circuit",
    "MonomialSample",
    "MultiplicityDistribution",
    "ReducedPolynomial",
    "SampleBudget",
    "TupleRow",
    "all_ones_value",
    "approximate_rpoly",
    "brute_force_expectation",
    "build_lineage_circuit",
    "det_cost",
    "enumerate_worlds",
    "eval_deterministic",
    "expand",
    "expected_multiplicity_exact",
    "gamma",
    "load_bidb",
    "load_ctidb",
    "measures",
    "one_pass",
    "parse_query",
    "poly_eval",
    "positive",
    "reduce_polynomial",
    "reduce_to_binary_bidb",
    "relative_budget",
    "sample_monomial",
    "world_probability",
]
