"""Core RDF data model: terms, triples, and ground graphs.

Term identity is structural and literal identity is lexical: the integer
literals "1" and "01" are distinct terms, and value comparison happens only
inside filter and builtin evaluation. All values are immutable after
construction, so they are safe to share across threads and between the
evaluator and the rule engines.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Iterator, Optional, Union

RDF_NS = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS_NS = "http://www.w3.org/2000/01/rdf-schema#"
XSD_NS = "http://www.w3.org/2001/XMLSchema#"

# Blank-node labels with this prefix are reserved for the unbound marker;
# parsers must reject them in user input.
RESERVED_BLANK_PREFIX = "ub_"

_WHITESPACE = re.compile(r"\s")


@dataclass(frozen=True)
class Iri:
    """An absolute IRI."""

    value: str

    def __post_init__(self) -> None:
        if not self.value:
            raise ValueError("IRI must be non-empty")
        if _WHITESPACE.search(self.value):
            raise ValueError(f"IRI contains whitespace: {self.value!r}")

    def __repr__(self) -> str:
        return f"Iri({self.value!r})"


@dataclass(frozen=True)
class BlankNode:
    label: str

    def __post_init__(self) -> None:
        if not self.label:
            raise ValueError("blank node label must be non-empty")

    def __repr__(self) -> str:
        return f"BlankNode({self.label!r})"


RDF_TYPE = Iri(RDF_NS + "type")
RDF_LANG_STRING = Iri(RDF_NS + "langString")
RDFS_SUBCLASS_OF = Iri(RDFS_NS + "subClassOf")
XSD_STRING = Iri(XSD_NS + "string")
XSD_INTEGER = Iri(XSD_NS + "integer")
XSD_DECIMAL = Iri(XSD_NS + "decimal")
XSD_BOOLEAN = Iri(XSD_NS + "boolean")


@dataclass(frozen=True)
class Literal:
    """An RDF literal. A language tag is only legal on rdf:langString."""

    lexical: str
    datatype: Iri = XSD_STRING
    langtag: Optional[str] = None

    def __post_init__(self) -> None:
        if self.langtag is not None and self.datatype != RDF_LANG_STRING:
            raise ValueError("language tag requires the language-string datatype")
        if self.datatype == RDF_LANG_STRING and self.langtag is None:
            raise ValueError("language-string literal requires a language tag")

    def __repr__(self) -> str:
        if self.langtag is not None:
            return f"Literal({self.lexical!r}@{self.langtag})"
        return f"Literal({self.lexical!r}^^{self.datatype.value})"


@dataclass(frozen=True)
class Variable:
    """A query or rule variable; the name never carries the ``?`` prefix."""

    name: str

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("variable name must be non-empty")
        if self.name.startswith("?"):
            raise ValueError("variable name must not include the '?' prefix")

    def __repr__(self) -> str:
        return f"Variable({self.name!r})"


# Atomic terms. Graph terms and list terms (see the n3 module) extend this
# union; Triple fields deliberately accept those as well.
Term = Union[Iri, BlankNode, Literal, Variable]

# The distinguished term standing for "left unbound by an optional branch"
# in evaluator results and constructed graphs.
UNBOUND = BlankNode(RESERVED_BLANK_PREFIX + "0")

# Reserved variable used as the subject of scoped-containment builtins; a
# user variable with this name is rejected wherever rules are loaded.
CLOSURE_VAR = Variable("__closure")


@dataclass(frozen=True)
class Triple:
    subject: object
    predicate: object
    object: object

    def __iter__(self) -> Iterator[object]:
        return iter((self.subject, self.predicate, self.object))

    def __repr__(self) -> str:
        return f"Triple({self.subject!r}, {self.predicate!r}, {self.object!r})"


def is_atomic(term: object) -> bool:
    return isinstance(term, (Iri, BlankNode, Literal, Variable))


def is_plain(triple: Triple) -> bool:
    """True if all three positions are atomic terms (no graph/list terms)."""
    return all(is_atomic(t) for t in triple)


def is_ground_triple(triple: Triple) -> bool:
    return is_plain(triple) and not any(isinstance(t, Variable) for t in triple)


_KIND_RANK = {Iri: 0, BlankNode: 1, Literal: 2, Variable: 3}


def term_key(term: object):
    """Total order over terms: IRI < blank < literal < variable < list < graph,
    lexicographic within each kind. Used for deterministic serialization."""
    kind = type(term)
    if kind is Iri:
        return (0, term.value)
    if kind is BlankNode:
        return (1, term.label)
    if kind is Literal:
        return (2, (term.datatype.value, term.lexical, term.langtag or ""))
    if kind is Variable:
        return (3, term.name)
    # list and graph terms from the n3 module
    items = getattr(term, "items", None)
    if items is not None:
        return (4, tuple(term_key(i) for i in items))
    triples = getattr(term, "triples", None)
    if triples is not None:
        return (5, tuple(triple_key(t) for t in sorted(triples, key=triple_key)))
    raise TypeError(f"not a term: {term!r}")


def triple_key(triple: Triple):
    return (term_key(triple.subject), term_key(triple.predicate), term_key(triple.object))


@dataclass(frozen=True)
class Graph:
    """A set of triples. Construction deduplicates; iteration is sorted so
    every downstream consumer is deterministic."""

    triples: frozenset[Triple]

    @classmethod
    def of(cls, triples: Iterable[Triple] = ()) -> "Graph":
        return cls(frozenset(triples))

    def __len__(self) -> int:
        return len(self.triples)

    def __contains__(self, triple: Triple) -> bool:
        return triple in self.triples

    def __iter__(self) -> Iterator[Triple]:
        return iter(self.sorted_triples)

    @cached_property
    def sorted_triples(self) -> tuple[Triple, ...]:
        return tuple(sorted(self.triples, key=triple_key))

    def union(self, other: "Graph | Iterable[Triple]") -> "Graph":
        extra = other.triples if isinstance(other, Graph) else frozenset(other)
        return Graph(self.triples | extra)

    def difference(self, other: "Graph") -> "Graph":
        return Graph(self.triples - other.triples)

    def blank_labels(self) -> set[str]:
        labels: set[str] = set()
        for t in self.triples:
            for term in t:
                if isinstance(term, BlankNode):
                    labels.add(term.label)
        return labels

    @cached_property
    def _index(self) -> dict:
        by_p: dict = {}
        by_s: dict = {}
        by_o: dict = {}
        by_sp: dict = {}
        by_po: dict = {}
        by_so: dict = {}
        for t in self.sorted_triples:
            by_p.setdefault(t.predicate, []).append(t)
            by_s.setdefault(t.subject, []).append(t)
            by_o.setdefault(t.object, []).append(t)
            by_sp.setdefault((t.subject, t.predicate), []).append(t)
            by_po.setdefault((t.predicate, t.object), []).append(t)
            by_so.setdefault((t.subject, t.object), []).append(t)
        return {"p": by_p, "s": by_s, "o": by_o, "sp": by_sp, "po": by_po, "so": by_so}

    def candidates(self, s: object | None, p: object | None, o: object | None) -> Iterable[Triple]:
        """Triples matching the given constant positions (None = wildcard)."""
        idx = self._index
        if s is not None and p is not None and o is not None:
            t = Triple(s, p, o)
            return (t,) if t in self.triples else ()
        if s is not None and p is not None:
            return idx["sp"].get((s, p), ())
        if p is not None and o is not None:
            return idx["po"].get((p, o), ())
        if s is not None and o is not None:
            return idx["so"].get((s, o), ())
        if p is not None:
            return idx["p"].get(p, ())
        if s is not None:
            return idx["s"].get(s, ())
        if o is not None:
            return idx["o"].get(o, ())
        return self.sorted_triples


EMPTY_GRAPH = Graph(frozenset())

_INTEGER_LEXICAL = re.compile(r"[+-]?\d+$")
_DECIMAL_LEXICAL = re.compile(r"[+-]?(\d+\.\d*|\.?\d+)$")

# Internal datatype for exact non-terminating division results; never emitted
# by the parsers, only minted by builtin arithmetic.
SIN3_FRACTION_SUFFIX = "fraction"


def numeric_value(term: object, fraction_datatype: Iri | None = None) -> Fraction | None:
    """Exact numeric value of an integer or decimal literal, else None."""
    if not isinstance(term, Literal):
        return None
    if term.datatype == XSD_INTEGER:
        if _INTEGER_LEXICAL.match(term.lexical):
            return Fraction(int(term.lexical))
        return None
    if term.datatype == XSD_DECIMAL:
        if _DECIMAL_LEXICAL.match(term.lexical):
            return Fraction(term.lexical)
        return None
    if fraction_datatype is not None and term.datatype == fraction_datatype:
        try:
            return Fraction(term.lexical)
        except (ValueError, ZeroDivisionError):
            return None
    return None


def integer_literal(value: int) -> Literal:
    return Literal(str(value), XSD_INTEGER)


def decimal_literal_from_fraction(value: Fraction) -> Literal | None:
    """Exact decimal literal for a fraction, or None when non-terminating."""
    if value.denominator == 1:
        return Literal(str(value.numerator), XSD_DECIMAL)
    den = value.denominator
    twos = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    fives = 0
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return None
    scale = max(twos, fives)
    scaled = value.numerator * 10**scale // value.denominator
    sign = "-" if scaled < 0 else ""
    digits = str(abs(scaled)).rjust(scale + 1, "0")
    lexical = f"{sign}{digits[:-scale]}.{digits[-scale:]}" if scale else f"{sign}{digits}"
    return Literal(lexical, XSD_DECIMAL)
