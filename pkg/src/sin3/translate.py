"""Compile queries to rules: one query becomes exactly one rule.

The premise mapping turns a graph pattern into an N3 graph pattern, encoding
difference and existence tests as scoped-containment builtins over the
deductive closure, and union/optional as dedicated predicates backed either
by the engine's builtins or by the shipped runtime ruleset. The head mapping
turns the query form into the rule conclusion: a CONSTRUCT template verbatim,
or a result triple carrying (name, variable) pairs for SELECT.
"""

from __future__ import annotations

from itertools import count
from typing import Iterable, Iterator

from . import algebra as A
from .errors import UnsupportedFeatureError
from .n3 import (
    DEFAULT_PREFIXES,
    LOG_EQUAL,
    LOG_INCLUDES,
    LOG_NOT_EQUAL,
    LOG_NOT_INCLUDES,
    LOG_CONJUNCTION,
    LOG_COPY,
    MATH_GREATER,
    MATH_LESS,
    MATH_NOT_GREATER,
    MATH_NOT_LESS,
    MATH_DIFFERENCE,
    MATH_PRODUCT,
    MATH_QUOTIENT,
    MATH_SUM,
    SIN3_EVAL,
    SIN3_LEFTJOIN,
    SIN3_NS,
    SIN3_OPTIONAL,
    SIN3_RESULT,
    SIN3_UNBOUND,
    SIN3_UNION,
    SIN3_UNNEST,
    GraphTerm,
    ListTerm,
    LOG_NS,
    N3Document,
    N3Rule,
    make_rule,
    pair,
)
from .scoping import ordered_scope, relabel, scope_vars
from .sparql import validate_query
from .terms import (
    CLOSURE_VAR,
    XSD_STRING,
    BlankNode,
    Iri,
    Literal,
    Triple,
    Variable,
)

_COMPARISON_IRIS = {
    "<": MATH_LESS,
    "<=": MATH_NOT_GREATER,
    ">": MATH_GREATER,
    ">=": MATH_NOT_LESS,
    "=": LOG_EQUAL,
    "!=": LOG_NOT_EQUAL,
}
_INVERSE_OP = {"<": ">=", ">=": "<", ">": "<=", "<=": ">", "=": "!=", "!=": "="}
_ARITHMETIC_IRIS = {"+": MATH_SUM, "-": MATH_DIFFERENCE, "*": MATH_PRODUCT, "/": MATH_QUOTIENT}


def _dedup(triples: Iterable[Triple]) -> tuple[Triple, ...]:
    seen = set()
    out = []
    for t in triples:
        if t not in seen:
            seen.add(t)
            out.append(t)
    return tuple(out)


def translate_filter(expr: A.FilterExpr, counter: Iterator[int] | None = None) -> tuple[Triple, ...]:
    """Translate a filter expression into builtin triples. Always-true adds
    no constraint; disjunction reuses the union predicate; negation is
    compiled away by operator inversion and De Morgan rewriting; arithmetic
    operands become auxiliary triples binding fresh ?tmp_<k> variables."""
    if counter is None:
        counter = count(1)
    return _ft(expr, counter)


def _ft(expr, counter) -> tuple[Triple, ...]:
    if isinstance(expr, A.TrueExpr):
        return ()
    if isinstance(expr, A.FalseExpr):
        return (Triple(SIN3_UNBOUND, LOG_NOT_EQUAL, SIN3_UNBOUND),)
    if isinstance(expr, A.Bound):
        return (Triple(expr.var, LOG_NOT_EQUAL, SIN3_UNBOUND),)
    if isinstance(expr, A.Comparison):
        lhs, aux_l = _ft_atom(expr.lhs, counter)
        rhs, aux_r = _ft_atom(expr.rhs, counter)
        return aux_l + aux_r + (Triple(lhs, _COMPARISON_IRIS[expr.op], rhs),)
    if isinstance(expr, A.Conjunction):
        return _dedup(_ft(expr.lhs, counter) + _ft(expr.rhs, counter))
    if isinstance(expr, A.Disjunction):
        return (
            Triple(
                GraphTerm(_ft(expr.lhs, counter)),
                SIN3_UNION,
                GraphTerm(_ft(expr.rhs, counter)),
            ),
        )
    if isinstance(expr, A.Negation):
        return _ft(_negate(expr.expr), counter)
    raise UnsupportedFeatureError(f"filter expression {type(expr).__name__} is not supported")


def _negate(expr) -> A.FilterExpr:
    if isinstance(expr, A.Comparison):
        return A.Comparison(_INVERSE_OP[expr.op], expr.lhs, expr.rhs)
    if isinstance(expr, A.Conjunction):
        return A.Disjunction(A.Negation(expr.lhs), A.Negation(expr.rhs))
    if isinstance(expr, A.Disjunction):
        return A.Conjunction(A.Negation(expr.lhs), A.Negation(expr.rhs))
    if isinstance(expr, A.Negation):
        return expr.expr
    if isinstance(expr, A.Bound):
        # negated boundness asserts equality with the unbound marker
        return A.Comparison("=", expr.var, SIN3_UNBOUND)
    if isinstance(expr, A.TrueExpr):
        return A.FALSE
    if isinstance(expr, A.FalseExpr):
        return A.TRUE
    raise UnsupportedFeatureError(f"filter expression {type(expr).__name__} is not supported")


def _ft_atom(atom, counter):
    if isinstance(atom, A.Arith):
        lhs, aux_l = _ft_atom(atom.lhs, counter)
        rhs, aux_r = _ft_atom(atom.rhs, counter)
        tmp = Variable(f"tmp_{next(counter)}")
        aux = aux_l + aux_r + (Triple(ListTerm((lhs, rhs)), _ARITHMETIC_IRIS[atom.op], tmp),)
        return tmp, aux
    return atom, ()


def translate_pattern(pattern: A.GraphPattern, counter: Iterator[int] | None = None) -> tuple[Triple, ...]:
    """Map a graph pattern to the rule premise it stands for."""
    if counter is None:
        counter = count(1)
    return _m(pattern, counter)


def _m(pattern, counter) -> tuple[Triple, ...]:
    if isinstance(pattern, A.Bgp):
        return pattern.triples
    if isinstance(pattern, A.Join):
        return _dedup(_m(pattern.left, counter) + _m(pattern.right, counter))
    if isinstance(pattern, A.LeftJoin):
        body = _dedup(_m(pattern.right, counter) + _ft(pattern.expr, counter))
        return (Triple(GraphTerm(_m(pattern.left, counter)), SIN3_OPTIONAL, GraphTerm(body)),)
    if isinstance(pattern, A.Union):
        return (
            Triple(
                GraphTerm(_m(pattern.left, counter)),
                SIN3_UNION,
                GraphTerm(_m(pattern.right, counter)),
            ),
        )
    if isinstance(pattern, A.Minus):
        shared = scope_vars(pattern.right) & scope_vars(pattern.left)
        left = _m(pattern.left, counter)
        if not shared:
            return left
        body = relabel(_m(pattern.right, counter), shared)
        return _dedup(left + (Triple(CLOSURE_VAR, LOG_NOT_INCLUDES, GraphTerm(body)),))
    if isinstance(pattern, A.NotExists):
        return _dedup(
            _m(pattern.left, counter)
            + (Triple(CLOSURE_VAR, LOG_NOT_INCLUDES, GraphTerm(_m(pattern.right, counter))),)
        )
    if isinstance(pattern, A.Exists):
        return _dedup(
            _m(pattern.left, counter)
            + (Triple(CLOSURE_VAR, LOG_INCLUDES, GraphTerm(_m(pattern.right, counter))),)
        )
    if isinstance(pattern, A.Filter):
        return _dedup(_m(pattern.pattern, counter) + _ft(pattern.expr, counter))
    raise TypeError(f"not a graph pattern: {pattern!r}")


def translate_head(form: A.QueryForm, pattern: A.GraphPattern) -> tuple[Triple, ...]:
    """Map the query form to the rule conclusion. SELECT produces a single
    result triple whose list pairs each original variable name (as a string)
    with the variable, so decoded answers keep their source names; ``*``
    resolves to the pattern's scope in name order."""
    if isinstance(form, A.Construct):
        return form.template
    if form.projection is not None:
        projection = []
        for v in form.projection:
            if v not in projection:
                projection.append(v)
    else:
        projection = list(ordered_scope(pattern))
    entries = ListTerm(tuple(pair(Literal(v.name, XSD_STRING), v) for v in projection))
    return (Triple(BlankNode("r0"), SIN3_RESULT, entries),)


def translate_query(query: A.Query, mode: str = "forward") -> N3Rule:
    """One query, one rule: translated premise implies translated head."""
    validate_query(query)
    counter = count(1)
    premise = _m(query.pattern, counter)
    conclusion = translate_head(query.form, query.pattern)
    return make_rule(premise, conclusion, mode)


def rule_prefixes(query: A.Query) -> dict[str, str]:
    merged = dict(DEFAULT_PREFIXES)
    merged.update(dict(query.prefixes))
    return merged


def _v(name: str) -> Variable:
    return Variable(name)


def runtime_rules(include_optional_rules: bool = True) -> N3Document:
    """The fixed ruleset shipped with every translation: two rules resolving
    a union triple from either branch, and seven rules expressing optional as
    a recursively unnested left join over pattern/instance pairs. The engine
    executes union/optional natively; this file is the interchange form."""
    x, y = _v("x"), _v("y")
    m, o = _v("m"), _v("o")
    xp, xi = _v("xp"), _v("xi")
    yp, yi = _v("yp"), _v("yi")
    zp, zi = _v("zp"), _v("zi")
    mp, mi = _v("mp"), _v("mi")
    op_, oi = _v("op"), _v("oi")
    rp, ri = _v("rp"), _v("ri")
    cp, ci = _v("cp"), _v("ci")
    empty = GraphTerm()

    rules = [
        N3Rule(
            (Triple(CLOSURE_VAR, LOG_INCLUDES, x),),
            (Triple(x, SIN3_UNION, y),),
            "backward",
        ),
        N3Rule(
            (Triple(CLOSURE_VAR, LOG_INCLUDES, y),),
            (Triple(x, SIN3_UNION, y),),
            "backward",
        ),
    ]
    if include_optional_rules:
        opt_triple = GraphTerm((Triple(m, SIN3_OPTIONAL, o),))
        rules += [
            N3Rule(
                (
                    Triple(pair(m, o), SIN3_EVAL, pair(xp, xi)),
                    Triple(xp, LOG_INCLUDES, xi),
                ),
                (Triple(m, SIN3_OPTIONAL, o),),
                "backward",
            ),
            N3Rule(
                (
                    Triple(m, SIN3_UNNEST, pair(xp, xi)),
                    Triple(o, SIN3_UNNEST, pair(yp, yi)),
                    Triple(pair(pair(xp, xi), pair(yp, yi)), SIN3_LEFTJOIN, pair(zp, zi)),
                ),
                (Triple(pair(m, o), SIN3_EVAL, pair(zp, zi)),),
                "backward",
            ),
            N3Rule(
                (
                    Triple(x, LOG_EQUAL, opt_triple),
                    Triple(pair(m, o), SIN3_EVAL, pair(yp, yi)),
                ),
                (Triple(x, SIN3_UNNEST, pair(yp, yi)),),
                "backward",
            ),
            N3Rule(
                (Triple(x, LOG_NOT_EQUAL, opt_triple),),
                (Triple(x, SIN3_UNNEST, pair(x, empty)),),
                "backward",
            ),
            N3Rule(
                (
                    Triple(pair(mp, op_), LOG_CONJUNCTION, rp),
                    Triple(rp, LOG_COPY, ri),
                    Triple(CLOSURE_VAR, LOG_INCLUDES, ri),
                    Triple(ri, LOG_INCLUDES, mi),
                    Triple(ri, LOG_INCLUDES, oi),
                ),
                (Triple(pair(pair(mp, mi), pair(op_, oi)), SIN3_LEFTJOIN, pair(rp, ri)),),
                "backward",
            ),
            N3Rule(
                (
                    Triple(mp, LOG_COPY, ri),
                    Triple(CLOSURE_VAR, LOG_INCLUDES, ri),
                    Triple(pair(mp, op_), LOG_CONJUNCTION, cp),
                    Triple(cp, LOG_COPY, ci),
                    Triple(ci, LOG_INCLUDES, ri),
                    Triple(CLOSURE_VAR, LOG_NOT_INCLUDES, ci),
                ),
                (Triple(pair(pair(mp, mi), pair(op_, oi)), SIN3_LEFTJOIN, pair(mp, ri)),),
                "backward",
            ),
            N3Rule(
                (Triple(CLOSURE_VAR, LOG_NOT_INCLUDES, mp),),
                (Triple(pair(pair(mp, mi), pair(op_, oi)), SIN3_LEFTJOIN, pair(empty, empty)),),
                "backward",
            ),
        ]
    prefixes = (("log", LOG_NS), ("sin3", SIN3_NS))
    return N3Document(prefixes, (), tuple(rules))
