"""Forward-chaining saturation over a fact base.

Rules fire stratum by stratum so that every scoped negative containment test
runs against a completed deductive closure of the predicates it reads. Within
a stratum, plain rules run semi-naive on the delta of the previous round;
rules containing graph-term builtins are re-evaluated in full each round. A
(rule, premise-binding) pair fires at most once ever, which is what makes
rules with blank nodes in the conclusion terminate.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional

from .errors import CapExceededError, Sin3Error, UnsupportedFeatureError, UnstratifiableError, ValidationError
from .evaluator import SolutionMapping
from .n3 import (
    ARITHMETIC_BUILTINS,
    COMPARISON_BUILTINS,
    GraphTerm,
    ListTerm,
    LOG_EQUAL,
    LOG_IMPLIES,
    LOG_INCLUDES,
    LOG_NOT_EQUAL,
    LOG_NOT_INCLUDES,
    MATH_DIFFERENCE,
    MATH_GREATER,
    MATH_LESS,
    MATH_NOT_GREATER,
    MATH_NOT_LESS,
    MATH_PRODUCT,
    MATH_QUOTIENT,
    MATH_SUM,
    N3Rule,
    SIN3_FRACTION,
    SIN3_OPTIONAL,
    SIN3_RESULT,
    SIN3_UNBOUND,
    SIN3_UNION,
    make_rule,
)
from .scoping import vars_in
from .terms import (
    CLOSURE_VAR,
    UNBOUND,
    XSD_STRING,
    BlankNode,
    Graph,
    Iri,
    Literal,
    Triple,
    Variable,
    decimal_literal_from_fraction,
    integer_literal,
    is_atomic,
    is_plain,
    numeric_value,
)

# marker node in the dependency graph for facts reached through a variable
# predicate
_ANY = object()


@dataclass
class EngineConfig:
    max_iterations: int = 10_000
    trace: bool = False
    trace_sink: Optional[Callable[[str], None]] = None


class FactBase:
    """Growing store of derived facts. Plain triples (all positions atomic)
    are indexed for pattern matching; result triples and other non-plain
    facts are stored but never matched by patterns or containment tests."""

    def __init__(self, initial: Iterable[Triple] = ()):
        self.facts: dict[Triple, None] = {}
        self._by_p: dict = {}
        self._by_sp: dict = {}
        self._by_po: dict = {}
        self._by_s: dict = {}
        self._plain: list[Triple] = []
        self.generation = 0
        self._taken_labels: set[str] = set()
        self._blank_counter = 0
        for t in initial:
            self.add(t)

    def add(self, triple: Triple) -> bool:
        if triple in self.facts:
            return False
        self.facts[triple] = None
        for term in triple:
            if isinstance(term, BlankNode):
                self._taken_labels.add(term.label)
        if is_plain(triple):
            self._plain.append(triple)
            self._by_p.setdefault(triple.predicate, []).append(triple)
            self._by_s.setdefault(triple.subject, []).append(triple)
            self._by_sp.setdefault((triple.subject, triple.predicate), []).append(triple)
            self._by_po.setdefault((triple.predicate, triple.object), []).append(triple)
        return True

    def __contains__(self, triple: Triple) -> bool:
        return triple in self.facts

    def __len__(self) -> int:
        return len(self.facts)

    def plain_candidates(self, s, p, o) -> Iterable[Triple]:
        if s is not None and p is not None and o is not None:
            t = Triple(s, p, o)
            return (t,) if t in self.facts else ()
        if s is not None and p is not None:
            return self._by_sp.get((s, p), ())
        if p is not None and o is not None:
            return self._by_po.get((p, o), ())
        if p is not None:
            return self._by_p.get(p, ())
        if s is not None:
            return self._by_s.get(s, ())
        return self._plain

    def fresh_blank(self) -> BlankNode:
        while True:
            label = f"e{self._blank_counter}"
            self._blank_counter += 1
            if label not in self._taken_labels:
                self._taken_labels.add(label)
                return BlankNode(label)

    def plain_graph(self) -> Graph:
        return Graph.of(self._plain)

    def all_graph(self) -> Graph:
        return Graph.of(self.facts)


# ---------------------------------------------------------------------------
# Premise analysis
# ---------------------------------------------------------------------------

_PLAIN, _COMPARE, _ARITH, _UNION, _OPTIONAL, _INCLUDES, _NOT_INCLUDES = range(7)

_BUILTIN_KIND = {
    SIN3_UNION: _UNION,
    SIN3_OPTIONAL: _OPTIONAL,
    LOG_INCLUDES: _INCLUDES,
    LOG_NOT_INCLUDES: _NOT_INCLUDES,
}


@dataclass
class _Atom:
    kind: int
    triple: Triple
    # classified sub-bodies for graph-term arguments, populated lazily
    subject_body: Optional[list] = None
    object_body: Optional[list] = None
    subject_vars: frozenset = frozenset()
    object_vars: frozenset = frozenset()


def _classify_body(triples: Iterable[Triple]) -> list[_Atom]:
    atoms: list[_Atom] = []
    for t in triples:
        p = t.predicate
        if isinstance(p, Iri) and p == LOG_IMPLIES:
            raise UnsupportedFeatureError("nested rules are not supported")
        kind = _BUILTIN_KIND.get(p) if isinstance(p, Iri) else None
        if kind is not None:
            if kind in (_INCLUDES, _NOT_INCLUDES):
                if t.subject != CLOSURE_VAR:
                    raise ValidationError(
                        "containment builtins take the reserved closure variable as subject"
                    )
                if not isinstance(t.object, GraphTerm):
                    raise ValidationError("containment builtins take a graph term object")
                atom = _Atom(kind, t, object_body=_classify_body(t.object.triples))
                atom.object_vars = frozenset(vars_in(t.object.triples)) - {CLOSURE_VAR}
            else:
                if not isinstance(t.subject, GraphTerm) or not isinstance(t.object, GraphTerm):
                    raise ValidationError(
                        f"{p.value.rsplit('#', 1)[-1]} takes graph terms on both sides"
                    )
                atom = _Atom(
                    kind,
                    t,
                    subject_body=_classify_body(t.subject.triples),
                    object_body=_classify_body(t.object.triples),
                )
                atom.subject_vars = frozenset(vars_in(t.subject.triples)) - {CLOSURE_VAR}
                atom.object_vars = frozenset(vars_in(t.object.triples)) - {CLOSURE_VAR}
            atoms.append(atom)
            continue
        if isinstance(p, Iri) and p in COMPARISON_BUILTINS:
            if not (is_atomic(t.subject) and is_atomic(t.object)):
                raise UnsupportedFeatureError("comparison builtins take atomic operands")
            atoms.append(_Atom(_COMPARE, t))
            continue
        if isinstance(p, Iri) and p in ARITHMETIC_BUILTINS:
            if not isinstance(t.subject, ListTerm) or len(t.subject.items) != 2:
                raise ValidationError("arithmetic builtins take a two-element list subject")
            if not all(is_atomic(i) for i in t.subject.items) or not is_atomic(t.object):
                raise UnsupportedFeatureError("arithmetic builtins take atomic operands")
            atoms.append(_Atom(_ARITH, t))
            continue
        if not is_plain(t):
            raise UnsupportedFeatureError(
                "graph or list terms are only supported as builtin arguments"
            )
        if CLOSURE_VAR in (t.subject, t.predicate, t.object):
            raise ValidationError("the reserved closure variable cannot be used as a plain term")
        atoms.append(_Atom(_PLAIN, t))
    return atoms


def _order_atoms(atoms: list[_Atom]) -> list[_Atom]:
    """Deterministic evaluation order: plain triples first, then builtins as
    their inputs become (statically) available, containment tests last."""
    plains = [a for a in atoms if a.kind == _PLAIN]
    pending = [a for a in atoms if a.kind != _PLAIN]
    bound: set[Variable] = set(vars_in([a.triple for a in plains]))
    ordered = list(plains)
    while pending:
        chosen = None
        for a in pending:
            if a.kind == _COMPARE and _operand_vars(a.triple) <= bound:
                chosen = a
                break
        if chosen is None:
            for a in pending:
                if a.kind == _ARITH and set(vars_in(a.triple.subject.items)) <= bound:
                    chosen = a
                    break
        if chosen is None:
            for a in pending:
                if a.kind in (_UNION, _OPTIONAL):
                    chosen = a
                    break
        if chosen is None:
            for a in pending:
                if a.kind in (_COMPARE, _ARITH):
                    chosen = a
                    break
        if chosen is None:
            chosen = pending[0]
        pending.remove(chosen)
        ordered.append(chosen)
        if chosen.kind == _ARITH and isinstance(chosen.triple.object, Variable):
            bound.add(chosen.triple.object)
        elif chosen.kind in (_UNION, _OPTIONAL):
            bound |= chosen.subject_vars | chosen.object_vars
    return ordered


def _operand_vars(triple: Triple) -> set[Variable]:
    out = set()
    for term in (triple.subject, triple.object):
        if isinstance(term, Variable):
            out.add(term)
    return out


# ---------------------------------------------------------------------------
# Builtin evaluation
# ---------------------------------------------------------------------------

def _resolve_operand(term, binding: dict):
    """Returns (value, rejected). A variable left unbound, or bound to the
    unbound marker, poisons the builtin it feeds."""
    if isinstance(term, Variable):
        value = binding.get(term)
        if value is None or value == SIN3_UNBOUND:
            return None, True
        return value, False
    return term, False


def _builtin_compare(pred: Iri, lhs, rhs) -> Optional[bool]:
    """Engine-side comparison table; None means the binding is rejected.
    Numerics compare by value, strings of the same type lexicographically,
    equality between distinct term kinds is definite inequality, and
    literals of incomparable datatypes reject."""
    ln = numeric_value(lhs, SIN3_FRACTION)
    rn = numeric_value(rhs, SIN3_FRACTION)
    if ln is not None and rn is not None:
        return _numeric_compare(pred, ln, rn)
    if pred in (LOG_EQUAL, LOG_NOT_EQUAL):
        if lhs == rhs:
            return pred == LOG_EQUAL
        if isinstance(lhs, Literal) and isinstance(rhs, Literal):
            if lhs.datatype == rhs.datatype and lhs.langtag == rhs.langtag:
                return (lhs.lexical == rhs.lexical) == (pred == LOG_EQUAL)
            return None
        return pred == LOG_NOT_EQUAL
    if isinstance(lhs, Literal) and isinstance(rhs, Literal):
        same_type = lhs.datatype == rhs.datatype and lhs.langtag == rhs.langtag
        if same_type and (lhs.datatype == XSD_STRING or lhs.langtag is not None):
            return _numeric_compare(pred, lhs.lexical, rhs.lexical)
    return None


def _numeric_compare(pred: Iri, lhs, rhs) -> bool:
    if pred == MATH_LESS:
        return lhs < rhs
    if pred == MATH_GREATER:
        return lhs > rhs
    if pred == MATH_NOT_LESS:
        return lhs >= rhs
    if pred == MATH_NOT_GREATER:
        return lhs <= rhs
    if pred == LOG_EQUAL:
        return lhs == rhs
    return lhs != rhs


def _fraction_literal(value: Fraction) -> Literal:
    if value.denominator == 1:
        return integer_literal(value.numerator)
    decimal = decimal_literal_from_fraction(value)
    if decimal is not None:
        return decimal
    return Literal(f"{value.numerator}/{value.denominator}", SIN3_FRACTION)


# ---------------------------------------------------------------------------
# Premise matching
# ---------------------------------------------------------------------------

def _solve(atoms: list[_Atom], fb: FactBase, seed: dict) -> list[dict]:
    bindings = [dict(seed)]
    for atom in atoms:
        if not bindings:
            return []
        if atom.kind == _PLAIN:
            bindings = _match_plain(atom.triple, fb, bindings)
        elif atom.kind == _COMPARE:
            bindings = [b for b in bindings if _check_compare(atom.triple, b)]
        elif atom.kind == _ARITH:
            bindings = [b2 for b in bindings for b2 in _apply_arith(atom.triple, b)]
        elif atom.kind == _UNION:
            bindings = [b2 for b in bindings for b2 in _match_union(atom, fb, b)]
        elif atom.kind == _OPTIONAL:
            bindings = [b2 for b in bindings for b2 in _match_optional(atom, fb, b)]
        else:
            keep_if = atom.kind == _INCLUDES
            bindings = [b for b in bindings if _holds(atom, fb, b) == keep_if]
    return bindings


def _match_plain(
    pattern: Triple, fb: FactBase, bindings: list[dict], candidates=None
) -> list[dict]:
    out: list[dict] = []
    for binding in bindings:
        parts = []
        for term in pattern:
            if isinstance(term, Variable):
                parts.append(binding.get(term))
            else:
                parts.append(term)
        pool = candidates if candidates is not None else fb.plain_candidates(*parts)
        for fact in pool:
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
    return out


def _check_compare(triple: Triple, binding: dict) -> bool:
    # When one operand is the unbound-marker constant itself (the boundness
    # encoding), an unbound or marker-valued variable on the other side
    # compares as the marker instead of poisoning the comparison.
    marker_constant = SIN3_UNBOUND in (triple.subject, triple.object)

    def resolve(term):
        value, rejected = _resolve_operand(term, binding)
        if rejected and marker_constant:
            return SIN3_UNBOUND, False
        return value, rejected

    lhs, rejected = resolve(triple.subject)
    if rejected:
        return False
    rhs, rejected = resolve(triple.object)
    if rejected:
        return False
    result = _builtin_compare(triple.predicate, lhs, rhs)
    return bool(result)


def _apply_arith(triple: Triple, binding: dict) -> list[dict]:
    values = []
    for item in triple.subject.items:
        value, rejected = _resolve_operand(item, binding)
        if rejected:
            return []
        number = numeric_value(value, SIN3_FRACTION)
        if number is None:
            return []
        values.append(number)
    lhs, rhs = values
    pred = triple.predicate
    if pred == MATH_SUM:
        result = lhs + rhs
    elif pred == MATH_DIFFERENCE:
        result = lhs - rhs
    elif pred == MATH_PRODUCT:
        result = lhs * rhs
    else:
        if rhs == 0:
            return []
        result = lhs / rhs
    target = triple.object
    if isinstance(target, Variable) and target not in binding:
        extended = dict(binding)
        extended[target] = _fraction_literal(result)
        return [extended]
    value, rejected = _resolve_operand(target, binding)
    if rejected:
        return []
    number = numeric_value(value, SIN3_FRACTION)
    if number is not None and number == result:
        return [binding]
    return []


def _match_union(atom: _Atom, fb: FactBase, binding: dict) -> list[dict]:
    out = []
    for body, body_vars in (
        (atom.subject_body, atom.subject_vars),
        (atom.object_body, atom.object_vars),
    ):
        seed = {v: binding[v] for v in body_vars if v in binding}
        for solution in _solve(body, fb, seed):
            merged = dict(binding)
            merged.update(solution)
            out.append(merged)
    return _dedup_bindings(out)


def _match_optional(atom: _Atom, fb: FactBase, binding: dict) -> list[dict]:
    """Left-join semantics: mandatory matches extend with optional matches
    that are compatible and satisfy the optional side's filter triples;
    otherwise the optional side's variables take the unbound marker. The
    optional side is matched independently of the surrounding binding so the
    existence test sees only the mandatory match, and the surrounding binding
    is joined back in afterwards."""
    out = []
    seed_m = {v: binding[v] for v in atom.subject_vars if v in binding}
    for m1 in _solve(atom.subject_body, fb, seed_m):
        seed_o = {v: m1[v] for v in atom.object_vars if v in m1}
        extensions = _solve(atom.object_body, fb, seed_o)
        if extensions:
            for ext in extensions:
                merged = dict(m1)
                merged.update(ext)
                if all(binding.get(v, value) == value for v, value in merged.items()):
                    combined = dict(binding)
                    combined.update(merged)
                    out.append(combined)
        else:
            combined = dict(binding)
            combined.update(m1)
            for v in atom.object_vars:
                if v not in combined:
                    combined[v] = SIN3_UNBOUND
            out.append(combined)
    return _dedup_bindings(out)


def _holds(atom: _Atom, fb: FactBase, binding: dict) -> bool:
    seed = {v: binding[v] for v in atom.object_vars if v in binding}
    return bool(_solve(atom.object_body, fb, seed))


def _dedup_bindings(bindings: list[dict]) -> list[dict]:
    seen = set()
    out = []
    for b in bindings:
        key = frozenset(b.items())
        if key not in seen:
            seen.add(key)
            out.append(b)
    return out


def match_premise(premise: Iterable[Triple], fb: FactBase) -> list[SolutionMapping]:
    """All bindings of the premise's variables against the fact base."""
    atoms = _order_atoms(_classify_body(premise))
    return [
        SolutionMapping({v: t for v, t in b.items() if v != CLOSURE_VAR})
        for b in _dedup_bindings(_solve(atoms, fb, {}))
    ]


# ---------------------------------------------------------------------------
# Stratification
# ---------------------------------------------------------------------------

@dataclass
class _RuleRec:
    rule: N3Rule
    index: int
    atoms: list[_Atom] = field(default_factory=list)
    plain_count: int = 0
    volatile: bool = False
    premise_vars: frozenset = frozenset()
    heads: set = field(default_factory=set)
    pos_deps: set = field(default_factory=set)
    neg_deps: set = field(default_factory=set)
    stratum: int = 0


@dataclass
class Stratification:
    strata: tuple[tuple[_RuleRec, ...], ...]
    pred_stratum: dict

    @property
    def rule_count(self) -> int:
        return sum(len(s) for s in self.strata)


def _dep_pred(term) -> object:
    return term if isinstance(term, Iri) else _ANY


def _collect_deps(atoms: list[_Atom], negated: bool, pos: set, neg: set) -> None:
    for atom in atoms:
        if atom.kind == _PLAIN:
            (neg if negated else pos).add(_dep_pred(atom.triple.predicate))
        elif atom.kind in (_UNION, _OPTIONAL):
            _collect_deps(atom.subject_body, negated, pos, neg)
            _collect_deps(atom.object_body, negated, pos, neg)
        elif atom.kind == _INCLUDES:
            _collect_deps(atom.object_body, negated, pos, neg)
        elif atom.kind == _NOT_INCLUDES:
            # everything under a negative containment test must be complete
            # before the test runs, even nested positive parts
            _collect_deps(atom.object_body, True, pos, neg)


def _prepare(rules: Iterable[N3Rule]) -> list[_RuleRec]:
    recs = []
    for rule in rules:
        if rule.mode != "forward":
            continue
        rec = _RuleRec(rule=rule, index=len(recs))
        rec.atoms = _order_atoms(_classify_body(rule.premise))
        rec.plain_count = sum(1 for a in rec.atoms if a.kind == _PLAIN)
        rec.volatile = any(
            a.kind in (_UNION, _OPTIONAL, _INCLUDES, _NOT_INCLUDES) for a in rec.atoms
        )
        rec.premise_vars = frozenset(vars_in(rule.premise)) - {CLOSURE_VAR}
        for t in rule.conclusion:
            if isinstance(t.predicate, Iri) and t.predicate == LOG_IMPLIES:
                raise UnsupportedFeatureError("rules deriving rules are not supported")
            if isinstance(t.subject, GraphTerm) or isinstance(t.object, GraphTerm):
                raise UnsupportedFeatureError("graph terms in conclusions are not supported")
            if CLOSURE_VAR in vars_in(t):
                raise ValidationError(
                    "the reserved closure variable cannot appear in a conclusion"
                )
            # non-plain conclusions (result triples carry a list) can never
            # be read back by patterns, so they are not producers
            if all(is_atomic(term) for term in t):
                rec.heads.add(_dep_pred(t.predicate))
        _collect_deps(rec.atoms, False, rec.pos_deps, rec.neg_deps)
        recs.append(rec)
    return recs


def stratify(rules: Iterable[N3Rule]) -> Stratification:
    """Partition rules so every negative containment dependency points to a
    strictly lower stratum; raises when a negation cycle makes that
    impossible."""
    recs = rules if isinstance(rules, list) and all(isinstance(r, _RuleRec) for r in rules) else None
    if recs is None:
        recs = _prepare(rules)
    universe: set = set()
    for rec in recs:
        universe |= {p for p in rec.heads | rec.pos_deps | rec.neg_deps if p is not _ANY}
    ordered_universe = sorted(universe, key=lambda p: p.value)

    def expand(preds: set) -> list:
        out = []
        for p in sorted((x for x in preds if x is not _ANY), key=lambda x: x.value):
            out.append(p)
        if _ANY in preds:
            out.extend(ordered_universe)
        return out

    edges: dict = {p: [] for p in ordered_universe}
    for rec in recs:
        for head in expand(rec.heads):
            for dep in expand(rec.pos_deps):
                edges.setdefault(dep, []).append((head, False))
            for dep in expand(rec.neg_deps):
                edges.setdefault(dep, []).append((head, True))

    sccs = _sccs(edges)
    scc_of = {}
    for i, comp in enumerate(sccs):
        for node in comp:
            scc_of[node] = i
    for dep, outs in edges.items():
        for head, negative in outs:
            if negative and scc_of[dep] == scc_of[head]:
                comp = sorted(sccs[scc_of[dep]], key=lambda p: p.value)
                names = ", ".join(p.value for p in comp)
                raise UnstratifiableError(f"unstratifiable: negation cycle through {names}")

    # longest-path strata over the condensation
    stratum = {i: 0 for i in range(len(sccs))}
    changed = True
    while changed:
        changed = False
        for dep, outs in edges.items():
            for head, negative in outs:
                needed = stratum[scc_of[dep]] + (1 if negative else 0)
                if stratum[scc_of[head]] < needed:
                    stratum[scc_of[head]] = needed
                    changed = True

    pred_stratum = {p: stratum[scc_of[p]] for p in edges}
    for rec in recs:
        req = 0
        for dep in expand(rec.pos_deps):
            req = max(req, pred_stratum.get(dep, 0))
        for dep in expand(rec.neg_deps):
            req = max(req, pred_stratum.get(dep, 0) + 1)
        rec.stratum = req
    by_stratum: dict[int, list[_RuleRec]] = {}
    for rec in recs:
        by_stratum.setdefault(rec.stratum, []).append(rec)
    strata = tuple(tuple(by_stratum[s]) for s in sorted(by_stratum))
    return Stratification(strata, pred_stratum)


def _sccs(edges: dict) -> list[list]:
    """Iterative Tarjan over the (dep -> head) digraph."""
    index_of: dict = {}
    lowlink: dict = {}
    on_stack: set = set()
    stack: list = []
    sccs: list[list] = []
    counter = [0]
    succ = {node: [h for h, _ in outs] for node, outs in edges.items()}
    for node in edges:
        if node in index_of:
            continue
        work = [(node, 0)]
        while work:
            current, child_index = work[-1]
            if child_index == 0:
                index_of[current] = lowlink[current] = counter[0]
                counter[0] += 1
                stack.append(current)
                on_stack.add(current)
            advanced = False
            children = succ.get(current, [])
            for i in range(child_index, len(children)):
                child = children[i]
                if child not in index_of:
                    work[-1] = (current, i + 1)
                    work.append((child, 0))
                    advanced = True
                    break
                if child in on_stack:
                    lowlink[current] = min(lowlink[current], index_of[child])
            if advanced:
                continue
            work.pop()
            if lowlink[current] == index_of[current]:
                comp = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    comp.append(member)
                    if member == current:
                        break
                sccs.append(comp)
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[current])
    return sccs


# ---------------------------------------------------------------------------
# Saturation
# ---------------------------------------------------------------------------

def saturate(facts: Graph | Iterable[Triple], rules: Iterable[N3Rule], cfg: EngineConfig | None = None) -> FactBase:
    """Run all forward rules to a stratified fixpoint and return the fact
    base; backward rules in the input are ignored."""
    cfg = cfg or EngineConfig()
    recs = _prepare(rules)
    stratification = stratify(recs)
    fb = FactBase(facts if isinstance(facts, Graph) else Graph.of(facts))
    sink = cfg.trace_sink or (lambda line: print(line, file=sys.stderr))
    fired: set = set()
    iterations = 0

    for stratum_index, stratum in enumerate(stratification.strata):
        delta: Optional[list[Triple]] = None
        while True:
            iterations += 1
            if iterations > cfg.max_iterations:
                raise CapExceededError(
                    f"saturation exceeded {cfg.max_iterations} iterations"
                )
            added: list[Triple] = []
            for rec in stratum:
                for binding in _rule_bindings(rec, fb, delta):
                    key = (rec.index, frozenset(binding.items()))
                    if key in fired:
                        continue
                    fired.add(key)
                    if cfg.trace:
                        rendered = ", ".join(
                            f"?{v.name}={value!r}"
                            for v, value in sorted(binding.items(), key=lambda kv: kv[0].name)
                        )
                        sink(f"stratum={stratum_index} rule={rec.index} binding=[{rendered}]")
                    for fact in _instantiate(rec, binding, fb):
                        if fb.add(fact):
                            added.append(fact)
            if not added:
                break
            delta = added
    fb.generation = iterations
    return fb


def _rule_bindings(rec: _RuleRec, fb: FactBase, delta: Optional[list[Triple]]) -> list[dict]:
    if rec.volatile or delta is None or rec.plain_count == 0:
        return _dedup_bindings(_solve(rec.atoms, fb, {}))
    out: list[dict] = []
    plain_positions = [i for i, a in enumerate(rec.atoms) if a.kind == _PLAIN]
    for pos in plain_positions:
        anchor = rec.atoms[pos]
        bindings = _match_plain(anchor.triple, fb, [{}], candidates=delta)
        if not bindings:
            continue
        rest = [a for i, a in enumerate(rec.atoms) if i != pos]
        for binding in bindings:
            out.extend(_solve(rest, fb, binding))
    return _dedup_bindings(out)


def _instantiate(rec: _RuleRec, binding: dict, fb: FactBase) -> list[Triple]:
    blank_map: dict[BlankNode, BlankNode] = {}

    def resolve(term):
        if isinstance(term, Variable):
            return binding.get(term, SIN3_UNBOUND)
        if isinstance(term, BlankNode):
            if term not in blank_map:
                blank_map[term] = fb.fresh_blank()
            return blank_map[term]
        if isinstance(term, ListTerm):
            return ListTerm(tuple(resolve(i) for i in term.items))
        return term

    return [
        Triple(resolve(t.subject), resolve(t.predicate), resolve(t.object))
        for t in rec.rule.conclusion
    ]


# ---------------------------------------------------------------------------
# Result decoding
# ---------------------------------------------------------------------------

def answer_select(fb: FactBase, head: Iterable[Triple]) -> frozenset[SolutionMapping]:
    """Decode stored result triples back into solution mappings keyed by the
    original variable names; the engine's unbound marker becomes the
    evaluator's."""
    head = tuple(head)
    names = None
    for t in head:
        if t.predicate == SIN3_RESULT and isinstance(t.object, ListTerm):
            names = [
                entry.items[0].lexical
                for entry in t.object.items
                if isinstance(entry, ListTerm)
                and len(entry.items) == 2
                and isinstance(entry.items[0], Literal)
            ]
            if len(names) != len(t.object.items):
                raise Sin3Error(f"malformed result head {t!r}")
            break
    if names is None:
        raise Sin3Error("head has no result triple")
    out = []
    for fact in fb.facts:
        if fact.predicate != SIN3_RESULT:
            continue
        if not isinstance(fact.object, ListTerm):
            raise Sin3Error(f"malformed result list in {fact!r}")
        bindings = {}
        seen_names = []
        for entry in fact.object.items:
            if (
                not isinstance(entry, ListTerm)
                or len(entry.items) != 2
                or not isinstance(entry.items[0], Literal)
            ):
                raise Sin3Error(f"malformed result list in {fact!r}")
            name, value = entry.items[0].lexical, entry.items[1]
            seen_names.append(name)
            if isinstance(value, Variable):
                raise Sin3Error(f"unresolved variable in result {fact!r}")
            bindings[Variable(name)] = UNBOUND if value == SIN3_UNBOUND else value
        if seen_names != names:
            raise Sin3Error(f"result list {seen_names} does not match head {names} in {fact!r}")
        out.append(SolutionMapping(bindings))
    return frozenset(out)
