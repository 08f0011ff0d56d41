"""Variable analysis: occurring variables, result scope, and relabeling."""

from __future__ import annotations

from typing import Iterable

from . import algebra as A
from .terms import CLOSURE_VAR, Triple, Variable


def vars_in(obj) -> set[Variable]:
    """All variables occurring in a pattern, filter expression, triple,
    N3 term, or collection thereof, at any nesting depth."""
    out: set[Variable] = set()
    _collect(obj, out)
    return out


def _collect(obj, out: set[Variable]) -> None:
    if isinstance(obj, Variable):
        out.add(obj)
    elif isinstance(obj, Triple):
        for part in obj:
            _collect(part, out)
    elif isinstance(obj, A.Bgp):
        _collect(obj.triples, out)
    elif isinstance(obj, (A.Join, A.Union, A.Minus, A.Exists, A.NotExists)):
        _collect(obj.left, out)
        _collect(obj.right, out)
    elif isinstance(obj, A.LeftJoin):
        _collect(obj.left, out)
        _collect(obj.right, out)
        _collect(obj.expr, out)
    elif isinstance(obj, A.Filter):
        _collect(obj.pattern, out)
        _collect(obj.expr, out)
    elif isinstance(obj, (A.Comparison, A.Arith)):
        _collect(obj.lhs, out)
        _collect(obj.rhs, out)
    elif isinstance(obj, (A.Conjunction, A.Disjunction)):
        _collect(obj.lhs, out)
        _collect(obj.rhs, out)
    elif isinstance(obj, A.Negation):
        _collect(obj.expr, out)
    elif isinstance(obj, A.Bound):
        out.add(obj.var)
    elif isinstance(obj, (list, tuple, set, frozenset)):
        for item in obj:
            _collect(item, out)
    else:
        # graph terms and list terms expose their contents via attributes;
        # atomic non-variable terms and TRUE/FALSE contribute nothing
        triples = getattr(obj, "triples", None)
        if triples is not None:
            _collect(triples, out)
        items = getattr(obj, "items", None)
        if items is not None:
            _collect(items, out)


def scope_vars(pattern: A.GraphPattern) -> set[Variable]:
    """Variables a pattern can bind in its results. Joins, unions, and
    optionals contribute both sides; difference, existence tests, and filters
    contribute only the mandatory side."""
    if isinstance(pattern, A.Bgp):
        return vars_in(pattern)
    if isinstance(pattern, (A.Join, A.Union, A.LeftJoin)):
        return scope_vars(pattern.left) | scope_vars(pattern.right)
    if isinstance(pattern, (A.Minus, A.Exists, A.NotExists)):
        return scope_vars(pattern.left)
    if isinstance(pattern, A.Filter):
        return scope_vars(pattern.pattern)
    raise TypeError(f"not a graph pattern: {pattern!r}")


def ordered_scope(pattern: A.GraphPattern) -> tuple[Variable, ...]:
    """Scope variables in their canonical (name-lexicographic) order."""
    return tuple(sorted(scope_vars(pattern), key=lambda v: v.name))


def relabel(triples: Iterable[Triple], keep: set[Variable]) -> tuple[Triple, ...]:
    """Replace every variable not in ``keep`` by a fresh one, consistently
    within this call. Fresh names are ``<old>_rl<k>`` numbered from 1 in
    first-occurrence order, skipping any name already present; the reserved
    closure variable is never relabeled."""
    triples = tuple(triples)
    taken = {v.name for v in vars_in(triples)} | {v.name for v in keep}
    mapping: dict[Variable, Variable] = {}
    counter = 1

    def fresh(old: Variable) -> Variable:
        nonlocal counter
        while True:
            name = f"{old.name}_rl{counter}"
            counter += 1
            if name not in taken:
                taken.add(name)
                return Variable(name)

    def walk(term):
        if isinstance(term, Variable):
            if term in keep or term == CLOSURE_VAR:
                return term
            if term not in mapping:
                mapping[term] = fresh(term)
            return mapping[term]
        triples_attr = getattr(term, "triples", None)
        if triples_attr is not None:
            return type(term)(tuple(walk_triple(t) for t in triples_attr))
        items = getattr(term, "items", None)
        if items is not None:
            return type(term)(tuple(walk(i) for i in items))
        return term

    def walk_triple(t: Triple) -> Triple:
        return Triple(walk(t.subject), walk(t.predicate), walk(t.object))

    return tuple(walk_triple(t) for t in triples)
