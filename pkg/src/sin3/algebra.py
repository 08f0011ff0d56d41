"""SPARQL algebra: filter expressions, graph patterns, and query forms.

Pattern containers keep their triples in construction order but compare as
sets, so structurally equal patterns are equal regardless of source layout
while serialization stays deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import typing
from typing import Optional

from .terms import Iri, Literal, Triple, Variable

COMPARISON_OPS = ("=", "!=", "<", "<=", ">", ">=")
ARITHMETIC_OPS = ("+", "-", "*", "/")


@dataclass(frozen=True)
class Comparison:
    op: str
    lhs: "FilterAtom"
    rhs: "FilterAtom"

    def __post_init__(self) -> None:
        if self.op not in COMPARISON_OPS:
            raise ValueError(f"unknown comparison operator {self.op!r}")


@dataclass(frozen=True)
class Conjunction:
    lhs: "FilterExpr"
    rhs: "FilterExpr"


@dataclass(frozen=True)
class Disjunction:
    lhs: "FilterExpr"
    rhs: "FilterExpr"


@dataclass(frozen=True)
class Negation:
    expr: "FilterExpr"


@dataclass(frozen=True)
class Bound:
    var: Variable


@dataclass(frozen=True)
class Arith:
    """Arithmetic usable as a comparison operand."""

    op: str
    lhs: "FilterAtom"
    rhs: "FilterAtom"

    def __post_init__(self) -> None:
        if self.op not in ARITHMETIC_OPS:
            raise ValueError(f"unknown arithmetic operator {self.op!r}")


@dataclass(frozen=True)
class TrueExpr:
    pass


@dataclass(frozen=True)
class FalseExpr:
    pass


TRUE = TrueExpr()
FALSE = FalseExpr()

FilterAtom = typing.Union[Variable, Literal, Iri, Arith]
FilterExpr = typing.Union[Comparison, Conjunction, Disjunction, Negation, Bound, TrueExpr, FalseExpr]


def _dedup(triples) -> tuple[Triple, ...]:
    seen = set()
    out = []
    for t in triples:
        if t not in seen:
            seen.add(t)
            out.append(t)
    return tuple(out)


class Bgp:
    """A basic graph pattern: a set of triple patterns."""

    __slots__ = ("triples", "_frozen")

    def __init__(self, triples=()):
        self.triples = _dedup(triples)
        self._frozen = frozenset(self.triples)

    def __eq__(self, other) -> bool:
        return isinstance(other, Bgp) and self._frozen == other._frozen

    def __hash__(self) -> int:
        return hash(self._frozen)

    def __repr__(self) -> str:
        return f"Bgp({list(self.triples)!r})"


@dataclass(frozen=True)
class Join:
    left: "GraphPattern"
    right: "GraphPattern"


@dataclass(frozen=True)
class Union:
    left: "GraphPattern"
    right: "GraphPattern"


@dataclass(frozen=True)
class Minus:
    left: "GraphPattern"
    right: "GraphPattern"


@dataclass(frozen=True)
class LeftJoin:
    """An optional pattern; the filter is always explicit (TRUE when the
    source query had none)."""

    left: "GraphPattern"
    right: "GraphPattern"
    expr: FilterExpr = TRUE


@dataclass(frozen=True)
class Exists:
    left: "GraphPattern"
    right: "GraphPattern"


@dataclass(frozen=True)
class NotExists:
    left: "GraphPattern"
    right: "GraphPattern"


@dataclass(frozen=True)
class Filter:
    pattern: "GraphPattern"
    expr: FilterExpr


GraphPattern = typing.Union[Bgp, Join, Union, Minus, LeftJoin, Exists, NotExists, Filter]


@dataclass(frozen=True)
class Select:
    """Projection is None for ``SELECT *``."""

    projection: Optional[tuple[Variable, ...]] = None


class Construct:
    __slots__ = ("template", "_frozen")

    def __init__(self, template=()):
        self.template = _dedup(template)
        self._frozen = frozenset(self.template)

    def __eq__(self, other) -> bool:
        return isinstance(other, Construct) and self._frozen == other._frozen

    def __hash__(self) -> int:
        return hash(self._frozen)

    def __repr__(self) -> str:
        return f"Construct({list(self.template)!r})"


QueryForm = typing.Union[Select, Construct]


@dataclass(frozen=True)
class Query:
    form: QueryForm
    pattern: GraphPattern
    prefixes: tuple[tuple[str, str], ...] = field(default=())
