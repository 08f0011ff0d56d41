"""Differential testing: run a query through the reference evaluator and
through translation plus forward chaining, and diff the results.

SELECT queries compare decoded solution sets, treating a missing variable
and the unbound marker as the same thing. CONSTRUCT queries compare the
engine's saturated plain facts against the evaluator's cumulative fixpoint,
so recursion through the constructed predicates is judged fairly on both
sides.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from . import algebra as A
from .errors import UnsupportedFeatureError
from .evaluator import SolutionMapping, evaluate_query, fixpoint_construct
from .forward import EngineConfig, answer_select, saturate
from .generate import fuzz_case, render_query
from .n3 import SIN3_UNBOUND
from .rdfio import serialize_ntriples
from .sparql import parse_query
from .terms import UNBOUND, BlankNode, Graph, Iri, Triple, Variable
from .translate import translate_query


@dataclass
class CheckResult:
    ok: bool
    detail: str = ""
    skipped: bool = False


def normalize_mappings(mappings) -> frozenset:
    """Solution sets modulo unbound markers: a variable bound to the marker
    compares equal to the variable being absent."""
    return frozenset(
        frozenset((v, t) for v, t in m.items() if t != UNBOUND) for m in mappings
    )


def decode_engine_graph(graph: Graph) -> Graph:
    """Map the engine's unbound-marker IRI to the evaluator's marker blank."""

    def decode(term):
        return UNBOUND if term == SIN3_UNBOUND else term

    return Graph.of(
        Triple(decode(t.subject), decode(t.predicate), decode(t.object)) for t in graph
    )


def _render_rows(mappings) -> str:
    rows = []
    for m in sorted(mappings, key=lambda fs: sorted((v.name, repr(t)) for v, t in fs)):
        cells = ", ".join(f"?{v.name}={t!r}" for v, t in sorted(m, key=lambda vt: vt[0].name))
        rows.append("  {" + cells + "}")
    return "\n".join(rows) if rows else "  (empty)"


def _has_existence_test(pattern) -> bool:
    if isinstance(pattern, (A.Exists, A.NotExists)):
        return True
    if isinstance(pattern, (A.Join, A.Union, A.Minus, A.LeftJoin)):
        return _has_existence_test(pattern.left) or _has_existence_test(pattern.right)
    if isinstance(pattern, A.Filter):
        return _has_existence_test(pattern.pattern)
    return False


def reproducer(query_text: str, graph: Graph) -> str:
    return f"query:\n{query_text}\ndata:\n{serialize_ntriples(graph)}"


def run_check(query: A.Query, graph: Graph, query_text: str = "", max_iterations: int = 10_000) -> CheckResult:
    if _has_existence_test(query.pattern) and graph.blank_labels():
        return CheckResult(
            True,
            "skipped: existence tests over blank-node data are outside the verified envelope",
            skipped=True,
        )
    rule = translate_query(query)
    cfg = EngineConfig(max_iterations=max_iterations)
    if isinstance(query.form, A.Select):
        oracle = normalize_mappings(evaluate_query(query, graph))
        fb = saturate(graph, [rule], cfg)
        engine = normalize_mappings(answer_select(fb, rule.conclusion))
        if oracle == engine:
            return CheckResult(True)
        detail = (
            f"{reproducer(query_text or render_query(query), graph)}"
            f"evaluator rows:\n{_render_rows(oracle)}\n"
            f"engine rows:\n{_render_rows(engine)}"
        )
        return CheckResult(False, detail)
    if any(isinstance(t, BlankNode) for triple in query.form.template for t in triple):
        raise UnsupportedFeatureError(
            "differential checking does not support blank nodes in CONSTRUCT templates"
        )
    oracle_graph = fixpoint_construct([query], graph, max_iterations)
    fb = saturate(graph, [rule], cfg)
    engine_graph = decode_engine_graph(fb.plain_graph())
    if oracle_graph.triples == engine_graph.triples:
        return CheckResult(True)
    missing = oracle_graph.difference(engine_graph)
    extra = engine_graph.difference(oracle_graph)
    detail = (
        f"{reproducer(query_text or render_query(query), graph)}"
        f"only from evaluator:\n{serialize_ntriples(missing) or '  (none)'}\n"
        f"only from engine:\n{serialize_ntriples(extra) or '  (none)'}"
    )
    return CheckResult(False, detail)


@dataclass
class FuzzReport:
    checked: int
    skipped: int
    failure: CheckResult | None


def run_fuzz(count: int, seed: int) -> FuzzReport:
    """Generate seeded (query, graph) pairs and diff each; stops at the
    first mismatch with a minimal reproducer in the result detail."""
    rng = random.Random(seed)
    skipped = 0
    for i in range(count):
        case = fuzz_case(rng)
        query = parse_query(case.query_text)
        result = run_check(query, case.graph, query_text=case.query_text)
        if result.skipped:
            skipped += 1
        if not result.ok:
            result.detail = f"fuzz case {i} (seed {seed}):\n{result.detail}"
            return FuzzReport(i + 1, skipped, result)
    return FuzzReport(count, skipped, None)
