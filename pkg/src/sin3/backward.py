"""Goal-directed proving for the Datalog fragment of the rule language.

Accepts rules whose premises contain only plain triples and comparison
builtins. Subgoals are tabled (memoized) by default, which makes recursive
rulesets such as transitive closures terminate; evaluation passes repeat
until the tables stop growing, so cyclic goal dependencies converge to the
same answers forward saturation would produce.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .errors import CapExceededError, UnsupportedFeatureError
from .evaluator import SolutionMapping
from .n3 import COMPARISON_BUILTINS, N3Rule
from .forward import _builtin_compare
from .terms import (
    CLOSURE_VAR,
    BlankNode,
    Graph,
    Iri,
    Literal,
    Triple,
    Variable,
    is_atomic,
    is_plain,
)
from .scoping import vars_in


@dataclass
class ProofConfig:
    depth_limit: int = 1_000_000
    memoize: bool = True


@dataclass
class ProofResult:
    answers: frozenset[SolutionMapping]
    expansions: int


@dataclass
class _Clause:
    head: Triple
    body: tuple[Triple, ...]
    index: int


def _load_clauses(rules: Iterable[N3Rule]) -> list[_Clause]:
    clauses: list[_Clause] = []
    for rule in rules:
        for t in rule.premise:
            if not is_plain(t):
                raise UnsupportedFeatureError(
                    "backward proving supports plain triples and comparison builtins only"
                )
            if CLOSURE_VAR in (t.subject, t.predicate, t.object):
                raise UnsupportedFeatureError(
                    "backward proving does not support containment builtins"
                )
        body_vars = vars_in(
            [t for t in rule.premise if not _is_comparison(t)]
        )
        for head in rule.conclusion:
            if not is_plain(head):
                raise UnsupportedFeatureError(
                    "backward proving supports plain conclusions only"
                )
            if any(isinstance(term, BlankNode) for term in head):
                raise UnsupportedFeatureError(
                    "backward proving does not support blank nodes in conclusions"
                )
            if vars_in(head) - body_vars:
                raise UnsupportedFeatureError(
                    "backward proving requires conclusion variables to occur in the premise"
                )
            clauses.append(_Clause(head, rule.premise, len(clauses)))
    return clauses


def _is_comparison(t: Triple) -> bool:
    return isinstance(t.predicate, Iri) and t.predicate in COMPARISON_BUILTINS


def _walk(term, env: dict):
    while isinstance(term, Variable) and term in env:
        term = env[term]
    return term


def _unify(a, b, env: dict) -> Optional[dict]:
    a = _walk(a, env)
    b = _walk(b, env)
    if a == b:
        return env
    if isinstance(a, Variable):
        env = dict(env)
        env[a] = b
        return env
    if isinstance(b, Variable):
        env = dict(env)
        env[b] = a
        return env
    return None


def _unify_triple(goal: Triple, head: Triple, env: dict) -> Optional[dict]:
    for g, h in zip(goal, head):
        env = _unify(g, h, env)
        if env is None:
            return None
    return env


class _Entry:
    __slots__ = ("answers", "answer_list", "active", "complete")

    def __init__(self):
        self.answers: set = set()
        self.answer_list: list = []
        self.active = False
        self.complete = False

    def add(self, answer: tuple) -> bool:
        if answer in self.answers:
            return False
        self.answers.add(answer)
        self.answer_list.append(answer)
        return True


class _Prover:
    def __init__(self, facts: Graph, clauses: list[_Clause], cfg: ProofConfig):
        self.facts = facts
        self.clauses = clauses
        self.cfg = cfg
        self.expansions = 0
        self.provisional_reads = 0
        self.rename_counter = 0
        self.table: dict = {}
        self.total_answers = 0

    # -- bookkeeping ---------------------------------------------------------

    def _budget(self) -> None:
        self.expansions += 1
        if self.expansions > self.cfg.depth_limit:
            raise CapExceededError(
                f"proof exceeded {self.cfg.depth_limit} expansions"
            )

    def _canonical(self, goal: Triple):
        """Key a goal by shape: variables numbered by first occurrence."""
        slots: dict[Variable, int] = {}
        key = []
        for term in goal:
            if isinstance(term, Variable):
                if term not in slots:
                    slots[term] = len(slots)
                key.append(("v", slots[term]))
            else:
                key.append(term)
        return tuple(key), list(slots)

    def _rename_clause(self, clause: _Clause) -> tuple[Triple, tuple[Triple, ...]]:
        self.rename_counter += 1
        suffix = f"_r{self.rename_counter}"
        renames: dict[Variable, Variable] = {}

        def walk(term):
            if isinstance(term, Variable):
                if term not in renames:
                    renames[term] = Variable(term.name + suffix)
                return renames[term]
            return term

        def walk_triple(t: Triple) -> Triple:
            return Triple(walk(t.subject), walk(t.predicate), walk(t.object))

        return walk_triple(clause.head), tuple(walk_triple(t) for t in clause.body)

    # -- resolution ----------------------------------------------------------

    def solve(self, goal: Triple) -> list[tuple]:
        """Answers as tuples of terms, one per distinct goal variable in
        first-occurrence order."""
        if not self.cfg.memoize:
            return self._evaluate(goal)
        key, _ = self._canonical(goal)
        entry = self.table.get(key)
        if entry is not None:
            if entry.complete:
                return entry.answer_list
            if entry.active:
                self.provisional_reads += 1
                return list(entry.answer_list)
            # re-evaluation in a later pass; keep accumulated answers
        else:
            entry = _Entry()
            self.table[key] = entry
        entry.active = True
        reads_before = self.provisional_reads
        try:
            for answer in self._evaluate(goal):
                if entry.add(answer):
                    self.total_answers += 1
        finally:
            entry.active = False
        if self.provisional_reads == reads_before:
            entry.complete = True
        return entry.answer_list

    def _evaluate(self, goal: Triple) -> list[tuple]:
        self._budget()
        _, goal_vars = self._canonical(goal)
        answers: list[tuple] = []
        seen: set = set()

        def record(env: dict) -> None:
            values = []
            for var in goal_vars:
                value = _walk(var, env)
                if isinstance(value, Variable):
                    return  # non-ground answer; cannot happen on loaded rules
                values.append(value)
            answer = tuple(values)
            if answer not in seen:
                seen.add(answer)
                answers.append(answer)

        s = goal.subject if not isinstance(goal.subject, Variable) else None
        p = goal.predicate if not isinstance(goal.predicate, Variable) else None
        o = goal.object if not isinstance(goal.object, Variable) else None
        for fact in self.facts.candidates(s, p, o):
            env = _unify_triple(goal, fact, {})
            if env is not None:
                record(env)
        for clause in self.clauses:
            head, body = self._rename_clause(clause)
            env = _unify_triple(goal, head, {})
            if env is None:
                continue
            for env2 in self._prove_body(list(body), env):
                record(env2)
        return answers

    def _prove_body(self, atoms: list[Triple], env: dict) -> list[dict]:
        if not atoms:
            return [env]
        index = self._select_atom(atoms, env)
        atom = atoms[index]
        rest = atoms[:index] + atoms[index + 1 :]
        resolved = Triple(
            _walk(atom.subject, env), _walk(atom.predicate, env), _walk(atom.object, env)
        )
        out: list[dict] = []
        if _is_comparison(resolved):
            if isinstance(resolved.subject, Variable) or isinstance(resolved.object, Variable):
                return []  # operands never became bound
            if _builtin_compare(resolved.predicate, resolved.subject, resolved.object):
                out.extend(self._prove_body(rest, env))
            return out
        _, goal_vars = self._canonical(resolved)
        for answer in self.solve(resolved):
            env2 = env
            for var, value in zip(goal_vars, answer):
                env2 = _unify(var, value, env2)
                if env2 is None:
                    break
            if env2 is None:
                continue
            out.extend(self._prove_body(rest, env2))
        return out

    def _select_atom(self, atoms: list[Triple], env: dict) -> int:
        """Comparisons run as soon as both operands are bound; otherwise the
        atom with the most bound positions goes first (ties: source order)."""
        best_index = 0
        best_score = -1
        for i, atom in enumerate(atoms):
            resolved = [
                _walk(atom.subject, env),
                _walk(atom.predicate, env),
                _walk(atom.object, env),
            ]
            bound = sum(0 if isinstance(t, Variable) else 1 for t in resolved)
            if _is_comparison(atom):
                if bound == 3:
                    return i
                continue
            if bound > best_score:
                best_score = bound
                best_index = i
        return best_index


def prove(
    goal: Triple,
    facts: Graph,
    rules: Iterable[N3Rule],
    cfg: ProofConfig | None = None,
) -> ProofResult:
    """All solutions for a single goal triple pattern, with the number of
    subgoal expansions performed."""
    cfg = cfg or ProofConfig()
    clauses = _load_clauses(rules)
    limit = sys.getrecursionlimit()
    if limit < 30_000:
        sys.setrecursionlimit(30_000)
    prover = _Prover(facts, clauses, cfg)
    try:
        if cfg.memoize:
            while True:
                prover.provisional_reads = 0
                before = prover.total_answers
                prover.solve(goal)
                if prover.provisional_reads == 0 or prover.total_answers == before:
                    break
            key, goal_vars = prover._canonical(goal)
            raw = prover.table[key].answer_list
        else:
            raw = prover._evaluate(goal)
            _, goal_vars = prover._canonical(goal)
    except RecursionError:
        raise CapExceededError("proof exceeded the recursion depth limit")
    answers = frozenset(
        SolutionMapping(dict(zip(goal_vars, answer))) for answer in raw
    )
    return ProofResult(answers, prover.expansions)
