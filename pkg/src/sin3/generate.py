"""Synthetic inputs: taxonomy and chain datasets plus the fuzz corpus.

The fuzz generator is the documented source of differential test cases:
patterns of depth up to 3 over all eight pattern constructors, data graphs of
up to 50 triples over a vocabulary of 8 IRIs and the integers 0 to 9. About
30% of generated pattern nodes exercise difference or existence tests and
another 30% exercise optional or union, so the negation and left-join paths
stay covered. SELECT cases use the full grammar; CONSTRUCT cases keep
predicates constant and draw template predicates from a reserved vocabulary
disjoint from the data, so a single rule application is the whole fixpoint
and every translated ruleset stratifies.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from . import algebra as A
from .rdfio import serialize_term_ntriples
from .scoping import ordered_scope, vars_in
from .terms import (
    RDFS_SUBCLASS_OF,
    RDF_TYPE,
    XSD_DECIMAL,
    XSD_INTEGER,
    Graph,
    Iri,
    Literal,
    Triple,
    Variable,
)

DT_NS = "http://example.org/dt#"
CHAIN_NS = "http://example.org/chain#"
FUZZ_NS = "urn:fuzz:"

_DATA_IRIS = tuple(Iri(FUZZ_NS + f"i{k}") for k in range(8))
_TEMPLATE_PREDS = tuple(Iri(FUZZ_NS + f"tp{k}") for k in range(4))
_FUZZ_VARS = tuple(Variable(f"v{k}") for k in range(5))


# ---------------------------------------------------------------------------
# Deep taxonomy and chains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TaxonomyCase:
    graph: Graph
    subclass_query: str
    membership_query: str
    goal: str


def class_iri(level: int) -> Iri:
    return Iri(f"{DT_NS}N{level}")


def deep_taxonomy(depth: int, width: int) -> TaxonomyCase:
    """One instance at the bottom of a subclass chain of the given depth,
    with ``width`` extra sibling superclasses per level and a terminal
    marker class above the chain."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    triples = [Triple(Iri(DT_NS + "z"), RDF_TYPE, class_iri(0))]
    for level in range(1, depth + 1):
        triples.append(Triple(class_iri(level - 1), RDFS_SUBCLASS_OF, class_iri(level)))
        for j in range(width):
            sibling = Iri(f"{DT_NS}N{level}sib{j}")
            triples.append(Triple(class_iri(level - 1), RDFS_SUBCLASS_OF, sibling))
    triples.append(Triple(class_iri(depth), RDFS_SUBCLASS_OF, Iri(DT_NS + "Top")))
    subclass_query = (
        "PREFIX rdfs: <http://www.w3.org/2000/01/rdf-schema#>\n"
        "CONSTRUCT { ?x a ?d }\n"
        "WHERE { ?x a ?c . ?c rdfs:subClassOf ?d }\n"
    )
    top = class_iri(depth)
    membership_query = f"SELECT ?x WHERE {{ ?x a <{top.value}> }}\n"
    goal = f"?x a <{top.value}>"
    return TaxonomyCase(Graph.of(triples), subclass_query, membership_query, goal)


@dataclass(frozen=True)
class ChainCase:
    graph: Graph
    transitivity_query: str


def chain(length: int) -> ChainCase:
    """``length`` edges in a line, plus the query closing them transitively."""
    if length < 1:
        raise ValueError("length must be at least 1")
    pred = Iri(CHAIN_NS + "next")
    triples = [
        Triple(Iri(f"{CHAIN_NS}n{i}"), pred, Iri(f"{CHAIN_NS}n{i + 1}"))
        for i in range(length)
    ]
    query = (
        f"CONSTRUCT {{ ?x <{pred.value}> ?z }}\n"
        f"WHERE {{ ?x <{pred.value}> ?y . ?y <{pred.value}> ?z }}\n"
    )
    return ChainCase(Graph.of(triples), query)


# ---------------------------------------------------------------------------
# Fuzz corpus
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FuzzCase:
    query_text: str
    graph: Graph


def random_graph(rng: random.Random, max_triples: int = 50) -> Graph:
    size = rng.randint(1, max_triples)
    triples = []
    for _ in range(size):
        s = rng.choice(_DATA_IRIS)
        p = rng.choice(_DATA_IRIS)
        if rng.random() < 0.35:
            o = Literal(str(rng.randint(0, 9)), XSD_INTEGER)
        else:
            o = rng.choice(_DATA_IRIS)
        triples.append(Triple(s, p, o))
    return Graph.of(triples)


def _random_term(rng: random.Random, var_chance: float, int_chance: float):
    roll = rng.random()
    if roll < var_chance:
        return rng.choice(_FUZZ_VARS)
    if roll < var_chance + int_chance:
        return Literal(str(rng.randint(0, 9)), XSD_INTEGER)
    return rng.choice(_DATA_IRIS)


def _random_bgp(rng: random.Random, allow_var_pred: bool) -> A.Bgp:
    triples = []
    for _ in range(rng.randint(1, 3)):
        s = _random_term(rng, 0.6, 0.0)
        if allow_var_pred and rng.random() < 0.12:
            p = rng.choice(_FUZZ_VARS)
        else:
            p = rng.choice(_DATA_IRIS)
        o = _random_term(rng, 0.45, 0.25)
        triples.append(Triple(s, p, o))
    return A.Bgp(tuple(triples))


def _random_atom(rng: random.Random, scope: list[Variable]):
    roll = rng.random()
    if scope and roll < 0.55:
        return rng.choice(scope)
    if roll < 0.8 or not scope:
        return Literal(str(rng.randint(0, 9)), XSD_INTEGER)
    return rng.choice(_DATA_IRIS)


def _random_filter(rng: random.Random, scope: list[Variable], depth: int = 2) -> A.FilterExpr:
    roll = rng.random()
    if depth > 0 and roll < 0.15:
        return A.Conjunction(
            _random_filter(rng, scope, depth - 1), _random_filter(rng, scope, depth - 1)
        )
    if depth > 0 and roll < 0.3:
        return A.Disjunction(
            _random_filter(rng, scope, depth - 1), _random_filter(rng, scope, depth - 1)
        )
    if depth > 0 and roll < 0.4:
        return A.Negation(_random_filter(rng, scope, depth - 1))
    if scope and roll < 0.5:
        return A.Bound(rng.choice(scope))
    lhs = _random_atom(rng, scope)
    if rng.random() < 0.2:
        lhs = A.Arith(rng.choice(("+", "-", "*")), lhs, Literal(str(rng.randint(1, 5)), XSD_INTEGER))
    op = rng.choice(A.COMPARISON_OPS)
    return A.Comparison(op, lhs, _random_atom(rng, scope))


def random_pattern(rng: random.Random, depth: int, allow_var_pred: bool) -> A.GraphPattern:
    if depth <= 0:
        return _random_bgp(rng, allow_var_pred)
    roll = rng.random()
    if roll < 0.10:
        return A.Minus(
            random_pattern(rng, depth - 1, allow_var_pred),
            random_pattern(rng, depth - 1, allow_var_pred),
        )
    if roll < 0.20:
        return A.Exists(
            random_pattern(rng, depth - 1, allow_var_pred),
            random_pattern(rng, depth - 1, allow_var_pred),
        )
    if roll < 0.30:
        return A.NotExists(
            random_pattern(rng, depth - 1, allow_var_pred),
            random_pattern(rng, depth - 1, allow_var_pred),
        )
    if roll < 0.45:
        left = random_pattern(rng, depth - 1, allow_var_pred)
        right = random_pattern(rng, depth - 1, allow_var_pred)
        scope = sorted(vars_in(left) | vars_in(right), key=lambda v: v.name)
        expr = _random_filter(rng, scope) if rng.random() < 0.5 else A.TRUE
        return A.LeftJoin(left, right, expr)
    if roll < 0.60:
        return A.Union(
            random_pattern(rng, depth - 1, allow_var_pred),
            random_pattern(rng, depth - 1, allow_var_pred),
        )
    if roll < 0.75:
        return A.Join(
            random_pattern(rng, depth - 1, allow_var_pred),
            random_pattern(rng, depth - 1, allow_var_pred),
        )
    if roll < 0.90:
        inner = random_pattern(rng, depth - 1, allow_var_pred)
        # filters only mention the subtree's own variables, so a filter read
        # as part of an enclosing optional means the same thing
        scope = sorted(vars_in(inner), key=lambda v: v.name)
        return A.Filter(inner, _random_filter(rng, scope))
    return _random_bgp(rng, allow_var_pred)


def random_query(rng: random.Random) -> A.Query:
    depth = rng.randint(1, 3)
    if rng.random() < 0.7:
        pattern = random_pattern(rng, depth, allow_var_pred=True)
        return A.Query(A.Select(None), pattern)
    pattern = random_pattern(rng, depth, allow_var_pred=False)
    scope = list(ordered_scope(pattern))
    template = []
    for _ in range(rng.randint(1, 2)):
        s = rng.choice(scope) if scope and rng.random() < 0.8 else rng.choice(_DATA_IRIS)
        p = rng.choice(_TEMPLATE_PREDS)
        o = rng.choice(scope) if scope and rng.random() < 0.6 else rng.choice(_DATA_IRIS)
        template.append(Triple(s, p, o))
    return A.Query(A.Construct(tuple(template)), pattern)


def fuzz_case(rng: random.Random) -> FuzzCase:
    return FuzzCase(render_query(random_query(rng)), random_graph(rng))


# ---------------------------------------------------------------------------
# Rendering algebra back to query text (for reproducers)
# ---------------------------------------------------------------------------

def _render_term(term) -> str:
    if isinstance(term, Variable):
        return f"?{term.name}"
    if isinstance(term, Iri):
        return f"<{term.value}>"
    if isinstance(term, Literal) and term.datatype == XSD_INTEGER:
        return term.lexical
    if isinstance(term, Literal) and term.datatype == XSD_DECIMAL:
        return term.lexical
    return serialize_term_ntriples(term)


def _render_triples(triples) -> str:
    return " . ".join(" ".join(_render_term(t) for t in triple) for triple in triples)


def _render_atom(atom) -> str:
    if isinstance(atom, A.Arith):
        return f"({_render_atom(atom.lhs)} {atom.op} {_render_atom(atom.rhs)})"
    return _render_term(atom)


def render_filter(expr) -> str:
    if isinstance(expr, A.TrueExpr):
        return "true"
    if isinstance(expr, A.FalseExpr):
        return "false"
    if isinstance(expr, A.Comparison):
        return f"{_render_atom(expr.lhs)} {expr.op} {_render_atom(expr.rhs)}"
    if isinstance(expr, A.Conjunction):
        return f"({render_filter(expr.lhs)}) && ({render_filter(expr.rhs)})"
    if isinstance(expr, A.Disjunction):
        return f"({render_filter(expr.lhs)}) || ({render_filter(expr.rhs)})"
    if isinstance(expr, A.Negation):
        return f"!({render_filter(expr.expr)})"
    if isinstance(expr, A.Bound):
        return f"BOUND(?{expr.var.name})"
    raise TypeError(f"not a filter expression: {expr!r}")


def render_group(pattern) -> str:
    return "{ " + _render_inner(pattern) + " }"


def _render_inner(pattern) -> str:
    if isinstance(pattern, A.Bgp):
        return _render_triples(pattern.triples)
    if isinstance(pattern, A.Join):
        return f"{render_group(pattern.left)} {render_group(pattern.right)}"
    if isinstance(pattern, A.Union):
        return f"{render_group(pattern.left)} UNION {render_group(pattern.right)}"
    if isinstance(pattern, A.Minus):
        return f"{render_group(pattern.left)} MINUS {render_group(pattern.right)}"
    if isinstance(pattern, A.LeftJoin):
        inner = render_group(pattern.right)
        if not isinstance(pattern.expr, A.TrueExpr):
            inner = f"{inner} FILTER({render_filter(pattern.expr)})"
        return f"{render_group(pattern.left)} OPTIONAL {{ {inner} }}"
    if isinstance(pattern, A.Exists):
        return f"{render_group(pattern.left)} FILTER EXISTS {render_group(pattern.right)}"
    if isinstance(pattern, A.NotExists):
        return f"{render_group(pattern.left)} FILTER NOT EXISTS {render_group(pattern.right)}"
    if isinstance(pattern, A.Filter):
        return f"{render_group(pattern.pattern)} FILTER({render_filter(pattern.expr)})"
    raise TypeError(f"not a graph pattern: {pattern!r}")


def render_query(query: A.Query) -> str:
    if isinstance(query.form, A.Select):
        if query.form.projection is None:
            head = "SELECT *"
        else:
            head = "SELECT " + " ".join(f"?{v.name}" for v in query.form.projection)
    else:
        head = "CONSTRUCT { " + _render_triples(query.form.template) + " }"
    return f"{head} WHERE {render_group(query.pattern)}\n"
