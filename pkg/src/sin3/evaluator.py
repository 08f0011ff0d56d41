"""Reference evaluator for the supported SPARQL algebra.

This is the oracle half of the differential harness: evaluation is naive and
exhaustive on purpose, with set semantics for solutions. Filter errors follow
a three-valued collapse: a type mismatch, an unbound or unbound-marker
operand, or division by zero makes the enclosing comparison an error, errors
propagate through the boolean connectives the usual Kleene way, and a filter
keeps a solution only on definite truth.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Iterator, Optional

from . import algebra as A
from .errors import CapExceededError, ValidationError
from .scoping import ordered_scope, scope_vars, vars_in
from .sparql import validate_query
from .terms import (
    UNBOUND,
    XSD_STRING,
    BlankNode,
    Graph,
    Iri,
    Literal,
    Triple,
    Variable,
    numeric_value,
    term_key,
)


class SolutionMapping:
    """An immutable partial map from variables to ground terms."""

    __slots__ = ("_bindings", "_frozen")

    def __init__(self, bindings: Iterable = ()):
        d = dict(bindings)
        for var, term in d.items():
            if not isinstance(var, Variable) or isinstance(term, Variable):
                raise ValueError(f"bad binding {var!r} -> {term!r}")
        self._bindings = d
        self._frozen = frozenset(d.items())

    def get(self, var: Variable, default=None):
        return self._bindings.get(var, default)

    def __getitem__(self, var: Variable):
        return self._bindings[var]

    def __contains__(self, var: Variable) -> bool:
        return var in self._bindings

    def __len__(self) -> int:
        return len(self._bindings)

    def __iter__(self) -> Iterator[Variable]:
        return iter(sorted(self._bindings, key=lambda v: v.name))

    @property
    def domain(self) -> frozenset[Variable]:
        return frozenset(self._bindings)

    def items(self):
        return sorted(self._bindings.items(), key=lambda kv: kv[0].name)

    def __eq__(self, other) -> bool:
        return isinstance(other, SolutionMapping) and self._frozen == other._frozen

    def __hash__(self) -> int:
        return hash(self._frozen)

    def __repr__(self) -> str:
        inner = ", ".join(f"?{v.name}={t!r}" for v, t in self.items())
        return f"SolutionMapping({inner})"

    def sort_key(self):
        return tuple((v.name, term_key(t)) for v, t in self.items())


EMPTY_MAPPING = SolutionMapping()

SolutionSet = frozenset[SolutionMapping]


def compatible(m1: SolutionMapping, m2: SolutionMapping) -> bool:
    """True when the mappings agree on every shared variable."""
    small, large = (m1, m2) if len(m1) <= len(m2) else (m2, m1)
    for var, term in small._bindings.items():
        other = large.get(var)
        if other is not None and other != term:
            return False
    return True


def merge(m1: SolutionMapping, m2: SolutionMapping) -> SolutionMapping:
    combined = dict(m1._bindings)
    combined.update(m2._bindings)
    return SolutionMapping(combined)


def join(s1: Iterable[SolutionMapping], s2: Iterable[SolutionMapping]) -> SolutionSet:
    s2 = list(s2)
    return frozenset(merge(a, b) for a in s1 for b in s2 if compatible(a, b))


def union(s1: Iterable[SolutionMapping], s2: Iterable[SolutionMapping]) -> SolutionSet:
    return frozenset(s1) | frozenset(s2)


def minus_compatible(s1: Iterable[SolutionMapping], s2: Iterable[SolutionMapping]) -> SolutionSet:
    """Keep a mapping unless some right-side mapping is compatible with it
    and shares at least one variable."""
    s2 = list(s2)
    out = []
    for a in s1:
        removed = any(
            compatible(a, b) and not a.domain.isdisjoint(b.domain) for b in s2
        )
        if not removed:
            out.append(a)
    return frozenset(out)


# ---------------------------------------------------------------------------
# Filters
# ---------------------------------------------------------------------------

class _FilterError(Exception):
    pass


def _atom_value(atom, mapping: SolutionMapping):
    """Resolve a filter atom to a term or an exact numeric value."""
    if isinstance(atom, Variable):
        term = mapping.get(atom)
        if term is None or term == UNBOUND:
            raise _FilterError()
        return term
    if isinstance(atom, A.Arith):
        lhs = _numeric(_atom_value(atom.lhs, mapping))
        rhs = _numeric(_atom_value(atom.rhs, mapping))
        if atom.op == "+":
            return lhs + rhs
        if atom.op == "-":
            return lhs - rhs
        if atom.op == "*":
            return lhs * rhs
        if rhs == 0:
            raise _FilterError()
        return lhs / rhs
    if atom == UNBOUND:
        raise _FilterError()
    return atom


def _numeric(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    number = numeric_value(value)
    if number is None:
        raise _FilterError()
    return number


def compare_terms(op: str, lhs, rhs) -> bool:
    """Comparison table mirrored by the rule engine builtins: numerics
    compare by value, strings of the same type lexicographically, equality
    between distinct term kinds is definite inequality, literals of
    incomparable datatypes are a type error, and the unbound marker poisons
    every comparison."""
    if lhs == UNBOUND or rhs == UNBOUND:
        raise _FilterError()
    ln = lhs if isinstance(lhs, Fraction) else numeric_value(lhs)
    rn = rhs if isinstance(rhs, Fraction) else numeric_value(rhs)
    if ln is not None and rn is not None:
        return _apply_order(op, ln, rn)
    if isinstance(lhs, Fraction) or isinstance(rhs, Fraction):
        raise _FilterError()
    if op in ("=", "!="):
        if lhs == rhs:
            return op == "="
        if isinstance(lhs, Literal) and isinstance(rhs, Literal):
            if lhs.datatype == rhs.datatype and lhs.langtag == rhs.langtag:
                return (lhs.lexical == rhs.lexical) == (op == "=")
            raise _FilterError()
        return op == "!="
    if isinstance(lhs, Literal) and isinstance(rhs, Literal):
        same_type = lhs.datatype == rhs.datatype and lhs.langtag == rhs.langtag
        if same_type and (lhs.datatype == XSD_STRING or lhs.langtag is not None):
            return _apply_order(op, lhs.lexical, rhs.lexical)
    raise _FilterError()


def _apply_order(op: str, lhs, rhs) -> bool:
    if op == "=":
        return lhs == rhs
    if op == "!=":
        return lhs != rhs
    if op == "<":
        return lhs < rhs
    if op == "<=":
        return lhs <= rhs
    if op == ">":
        return lhs > rhs
    return lhs >= rhs


def _eval_filter3(expr, mapping: SolutionMapping) -> Optional[bool]:
    """Three-valued evaluation; None means error."""
    if isinstance(expr, A.TrueExpr):
        return True
    if isinstance(expr, A.FalseExpr):
        return False
    if isinstance(expr, A.Bound):
        term = mapping.get(expr.var)
        return term is not None and term != UNBOUND
    if isinstance(expr, A.Comparison):
        try:
            lhs = _atom_value(expr.lhs, mapping)
            rhs = _atom_value(expr.rhs, mapping)
            return compare_terms(expr.op, lhs, rhs)
        except _FilterError:
            return None
    if isinstance(expr, A.Conjunction):
        lhs = _eval_filter3(expr.lhs, mapping)
        rhs = _eval_filter3(expr.rhs, mapping)
        if lhs is False or rhs is False:
            return False
        if lhs is None or rhs is None:
            return None
        return True
    if isinstance(expr, A.Disjunction):
        lhs = _eval_filter3(expr.lhs, mapping)
        rhs = _eval_filter3(expr.rhs, mapping)
        if lhs is True or rhs is True:
            return True
        if lhs is None or rhs is None:
            return None
        return False
    if isinstance(expr, A.Negation):
        inner = _eval_filter3(expr.expr, mapping)
        return None if inner is None else not inner
    raise TypeError(f"not a filter expression: {expr!r}")


def evaluate_filter(expr, mapping: SolutionMapping) -> bool:
    """Definite-truth check; errors fold to rejection."""
    return _eval_filter3(expr, mapping) is True


# ---------------------------------------------------------------------------
# Pattern evaluation
# ---------------------------------------------------------------------------

def _match_bgp(triples, graph: Graph) -> list[dict]:
    partials: list[dict] = [{}]
    for pattern in triples:
        out: list[dict] = []
        for binding in partials:
            parts = []
            for term in pattern:
                if isinstance(term, Variable):
                    parts.append(binding.get(term))
                else:
                    parts.append(term)
            for fact in graph.candidates(*parts):
                extension = dict(binding)
                ok = True
                for term, value in zip(pattern, fact):
                    if isinstance(term, Variable):
                        bound = extension.get(term)
                        if bound is None:
                            extension[term] = value
                        elif bound != value:
                            ok = False
                            break
                    elif term != value:
                        ok = False
                        break
                if ok:
                    out.append(extension)
        partials = out
        if not partials:
            break
    return partials


def _substitute_term(term, mapping: SolutionMapping):
    if isinstance(term, Variable):
        value = mapping.get(term)
        return term if value is None else value
    return term


def _substitute_atom(atom, mapping: SolutionMapping):
    if isinstance(atom, A.Arith):
        return A.Arith(atom.op, _substitute_atom(atom.lhs, mapping), _substitute_atom(atom.rhs, mapping))
    return _substitute_term(atom, mapping)


def substitute_filter(expr, mapping: SolutionMapping):
    if isinstance(expr, A.Comparison):
        return A.Comparison(expr.op, _substitute_atom(expr.lhs, mapping), _substitute_atom(expr.rhs, mapping))
    if isinstance(expr, A.Conjunction):
        return A.Conjunction(substitute_filter(expr.lhs, mapping), substitute_filter(expr.rhs, mapping))
    if isinstance(expr, A.Disjunction):
        return A.Disjunction(substitute_filter(expr.lhs, mapping), substitute_filter(expr.rhs, mapping))
    if isinstance(expr, A.Negation):
        return A.Negation(substitute_filter(expr.expr, mapping))
    if isinstance(expr, A.Bound):
        value = mapping.get(expr.var)
        if value is None:
            return expr
        return A.TRUE if value != UNBOUND else A.FALSE
    return expr


def substitute_pattern(pattern, mapping: SolutionMapping):
    """Instantiate a pattern under a mapping; substituted blank nodes behave
    as constants during matching."""
    if isinstance(pattern, A.Bgp):
        return A.Bgp(
            tuple(
                Triple(*(_substitute_term(t, mapping) for t in triple))
                for triple in pattern.triples
            )
        )
    if isinstance(pattern, A.Join):
        return A.Join(substitute_pattern(pattern.left, mapping), substitute_pattern(pattern.right, mapping))
    if isinstance(pattern, A.Union):
        return A.Union(substitute_pattern(pattern.left, mapping), substitute_pattern(pattern.right, mapping))
    if isinstance(pattern, A.Minus):
        return A.Minus(substitute_pattern(pattern.left, mapping), substitute_pattern(pattern.right, mapping))
    if isinstance(pattern, A.LeftJoin):
        return A.LeftJoin(
            substitute_pattern(pattern.left, mapping),
            substitute_pattern(pattern.right, mapping),
            substitute_filter(pattern.expr, mapping),
        )
    if isinstance(pattern, A.Exists):
        return A.Exists(substitute_pattern(pattern.left, mapping), substitute_pattern(pattern.right, mapping))
    if isinstance(pattern, A.NotExists):
        return A.NotExists(substitute_pattern(pattern.left, mapping), substitute_pattern(pattern.right, mapping))
    if isinstance(pattern, A.Filter):
        return A.Filter(substitute_pattern(pattern.pattern, mapping), substitute_filter(pattern.expr, mapping))
    raise TypeError(f"not a graph pattern: {pattern!r}")


def evaluate_pattern(pattern, graph: Graph) -> SolutionSet:
    if isinstance(pattern, A.Bgp):
        return frozenset(SolutionMapping(b) for b in _match_bgp(pattern.triples, graph))
    if isinstance(pattern, A.Join):
        return join(evaluate_pattern(pattern.left, graph), evaluate_pattern(pattern.right, graph))
    if isinstance(pattern, A.Union):
        return union(evaluate_pattern(pattern.left, graph), evaluate_pattern(pattern.right, graph))
    if isinstance(pattern, A.Minus):
        return minus_compatible(
            evaluate_pattern(pattern.left, graph), evaluate_pattern(pattern.right, graph)
        )
    if isinstance(pattern, A.LeftJoin):
        left = evaluate_pattern(pattern.left, graph)
        right = evaluate_pattern(pattern.right, graph)
        out = set()
        for m1 in left:
            extended = False
            for m2 in right:
                if compatible(m1, m2):
                    combined = merge(m1, m2)
                    if evaluate_filter(pattern.expr, combined):
                        out.add(combined)
                        extended = True
            if not extended:
                out.add(m1)
        return frozenset(out)
    if isinstance(pattern, A.Exists):
        return frozenset(
            m
            for m in evaluate_pattern(pattern.left, graph)
            if evaluate_pattern(substitute_pattern(pattern.right, m), graph)
        )
    if isinstance(pattern, A.NotExists):
        return frozenset(
            m
            for m in evaluate_pattern(pattern.left, graph)
            if not evaluate_pattern(substitute_pattern(pattern.right, m), graph)
        )
    if isinstance(pattern, A.Filter):
        return frozenset(
            m
            for m in evaluate_pattern(pattern.pattern, graph)
            if evaluate_filter(pattern.expr, m)
        )
    raise TypeError(f"not a graph pattern: {pattern!r}")


# ---------------------------------------------------------------------------
# Query evaluation
# ---------------------------------------------------------------------------

def projection_variables(query: A.Query) -> tuple[Variable, ...]:
    form = query.form
    if isinstance(form, A.Select) and form.projection is not None:
        seen: list[Variable] = []
        for v in form.projection:
            if v not in seen:
                seen.append(v)
        return tuple(seen)
    return ordered_scope(query.pattern)


def evaluate_query(query: A.Query, graph: Graph):
    """SELECT: project every solution onto the projection list, filling gaps
    with the unbound marker. CONSTRUCT: instantiate the template per solution
    with fresh blank nodes that do not occur in the input graph."""
    validate_query(query)
    solutions = evaluate_pattern(query.pattern, graph)
    if isinstance(query.form, A.Select):
        proj = projection_variables(query)
        return frozenset(
            SolutionMapping({v: (m.get(v) if m.get(v) is not None else UNBOUND) for v in proj})
            for m in solutions
        )
    taken = graph.blank_labels()
    counter = 0

    def fresh_blank() -> BlankNode:
        nonlocal counter
        while True:
            label = f"c{counter}"
            counter += 1
            if label not in taken:
                taken.add(label)
                return BlankNode(label)

    out: set[Triple] = set()
    for m in sorted(solutions, key=SolutionMapping.sort_key):
        blank_map: dict[BlankNode, BlankNode] = {}
        for triple in query.form.template:
            parts = []
            for term in triple:
                if isinstance(term, Variable):
                    parts.append(m.get(term) if m.get(term) is not None else UNBOUND)
                elif isinstance(term, BlankNode):
                    if term not in blank_map:
                        blank_map[term] = fresh_blank()
                    parts.append(blank_map[term])
                else:
                    parts.append(term)
            out.add(Triple(*parts))
    return Graph.of(out)


def fixpoint_construct(queries, graph: Graph, cap: int) -> Graph:
    """Apply CONSTRUCT queries cumulatively until nothing new appears.

    Restricted to blank-node-free templates so the fixpoint is well defined;
    raises when the iteration bound is hit before quiescence."""
    if cap < 1:
        raise ValueError("cap must be at least 1")
    queries = list(queries)
    for q in queries:
        if not isinstance(q.form, A.Construct):
            raise ValidationError("fixpoint evaluation requires CONSTRUCT queries")
        if any(isinstance(t, BlankNode) for triple in q.form.template for t in triple):
            raise ValidationError("fixpoint evaluation requires blank-node-free templates")
    for _ in range(cap):
        added = Graph.of()
        for q in queries:
            added = added.union(evaluate_query(q, graph))
        merged = graph.union(added)
        if len(merged) == len(graph):
            return graph
        graph = merged
    raise CapExceededError(f"no fixpoint after {cap} iterations")
