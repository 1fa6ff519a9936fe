"""Exception hierarchy shared by every module."""

from __future__ import annotations


class BagPdbError(Exception):
    """Base class; the CLI turns these into JSON error objects."""

    code = "error"


class DataError(BagPdbError):
    code = "data_error"


class QueryError(BagPdbError):
    code = "query_error"


class QuerySyntaxError(QueryError):
    code = "syntax_error"

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class CapExceededError(BagPdbError):
    code = "cap_exceeded"


class CircuitError(BagPdbError):
    code = "circuit_error"


class EstimationError(BagPdbError):
    code = "estimation_error"


class IllConditionedError(BagPdbError):
    code = "ill_conditioned"
