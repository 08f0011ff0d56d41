"""Command line surface.

Exit codes are stable: 0 success or check passed, 1 check mismatch or
reasoning failure, 2 usage or syntax error, 3 unsupported feature,
4 unstratifiable ruleset, 5 iteration or expansion cap exceeded.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import algebra as A
from .backward import ProofConfig, prove
from .check import run_check, run_fuzz
from .errors import ParseError, Sin3Error, ValidationError
from .evaluator import SolutionMapping, evaluate_query
from .forward import EngineConfig, answer_select, saturate
from .generate import chain, deep_taxonomy
from .n3 import (
    DEFAULT_PREFIXES,
    N3Document,
    SIN3_RESULT,
    ListTerm,
    parse_document,
    serialize_document,
)
from .rdfio import load_graph_files, serialize_ntriples, serialize_term_ntriples
from .sparql import parse_query, validate_query
from .terms import UNBOUND, Graph, Literal, Variable, XSD_DECIMAL, XSD_INTEGER
from .translate import rule_prefixes, runtime_rules, translate_query


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _term_cell(term) -> str:
    if term == UNBOUND:
        return "UNBOUND"
    if isinstance(term, Literal) and term.datatype in (XSD_INTEGER, XSD_DECIMAL):
        return term.lexical
    return serialize_term_ntriples(term)


def _solutions_tsv(mappings, columns: list[Variable]) -> str:
    lines = ["\t".join(f"?{v.name}" for v in columns)]
    rows = []
    for m in mappings:
        rows.append("\t".join(_term_cell(m.get(v, UNBOUND)) for v in columns))
    lines.extend(sorted(rows))
    return "".join(line + "\n" for line in lines)


def _load_rule_docs(paths) -> tuple[list, Graph, dict]:
    rules = []
    facts = Graph.of()
    prefixes = dict(DEFAULT_PREFIXES)
    for path in paths:
        doc = parse_document(_read(path))
        rules.extend(doc.rules)
        facts = facts.union(doc.facts)
        prefixes.update(dict(doc.prefixes))
    return rules, facts, prefixes


def cmd_translate(args) -> int:
    query = parse_query(_read(args.query))
    validate_query(query)
    rule = translate_query(query, mode=args.mode)
    doc = N3Document(tuple(sorted(rule_prefixes(query).items())), (), (rule,))
    Path(args.out).write_text(serialize_document(doc), encoding="utf-8")
    if args.runtime:
        runtime = runtime_rules(include_optional_rules=args.emit_figure1)
        Path(args.runtime).write_text(serialize_document(runtime), encoding="utf-8")
    return 0


def cmd_query(args) -> int:
    query = parse_query(_read(args.query))
    graph = load_graph_files([args.data])
    result = evaluate_query(query, graph)
    if isinstance(result, Graph):
        sys.stdout.write(serialize_ntriples(result))
    else:
        from .evaluator import projection_variables

        sys.stdout.write(_solutions_tsv(result, list(projection_variables(query))))
    return 0


def cmd_reason(args) -> int:
    graph = load_graph_files([args.data])
    rules, extra_facts, _ = _load_rule_docs(args.rules)
    cfg = EngineConfig(max_iterations=args.max_iter, trace=args.trace)
    initial = graph.union(extra_facts)
    fb = saturate(initial, rules, cfg)
    if args.select_decode:
        heads = [
            r.conclusion
            for r in rules
            if r.mode == "forward"
            and any(t.predicate == SIN3_RESULT and isinstance(t.object, ListTerm) for t in r.conclusion)
        ]
        if len(heads) != 1:
            raise Sin3Error(
                f"--select-decode needs exactly one rule with a result conclusion, found {len(heads)}"
            )
        mappings = answer_select(fb, heads[0])
        columns = _result_columns(heads[0])
        sys.stdout.write(_solutions_tsv(mappings, columns))
    else:
        derived = fb.plain_graph().difference(initial)
        sys.stdout.write(serialize_ntriples(derived))
    return 0


def _result_columns(head) -> list[Variable]:
    for t in head:
        if t.predicate == SIN3_RESULT and isinstance(t.object, ListTerm):
            return [Variable(entry.items[0].lexical) for entry in t.object.items]
    return []


def cmd_solve(args) -> int:
    graph = load_graph_files([args.data])
    rules, extra_facts, prefixes = _load_rule_docs(args.rules)
    goal_text = "".join(f"@prefix {p}: <{ns}>.\n" for p, ns in sorted(prefixes.items()))
    goal_text += args.goal.rstrip().rstrip(".") + " .\n"
    goal_doc = parse_document(goal_text)
    if len(goal_doc.facts) != 1:
        raise ValidationError("--goal must be a single triple pattern")
    goal = goal_doc.facts[0]
    cfg = ProofConfig(depth_limit=args.limit, memoize=not args.no_memo)
    result = prove(goal, graph.union(extra_facts), rules, cfg)
    columns = []
    for term in goal:
        if isinstance(term, Variable) and term not in columns:
            columns.append(term)
    sys.stdout.write(_solutions_tsv(result.answers, columns))
    print(f"expansions={result.expansions}", file=sys.stderr)
    return 0


def cmd_check(args) -> int:
    if args.fuzz:
        report = run_fuzz(args.fuzz, args.seed)
        if report.failure is not None:
            sys.stdout.write(report.failure.detail + "\n")
            return 1
        print(
            f"checked={report.checked} skipped={report.skipped} seed={args.seed}",
            file=sys.stderr,
        )
        return 0
    if not args.query or not args.data:
        raise ValidationError("check needs a query file and a data file, or --fuzz")
    query_text = _read(args.query)
    query = parse_query(query_text)
    graph = load_graph_files([args.data])
    result = run_check(query, graph, query_text=query_text)
    if result.skipped:
        print(result.detail, file=sys.stderr)
    if not result.ok:
        sys.stdout.write(result.detail + "\n")
        return 1
    return 0


def cmd_gen(args) -> int:
    out = Path(args.out)
    base = out.with_suffix("") if out.suffix else out
    if args.kind == "dt":
        case = deep_taxonomy(args.depth, args.width)
        out.write_text(serialize_ntriples(case.graph), encoding="utf-8")
        subclass = base.with_name(base.name + ".subclass.rq")
        membership = base.with_name(base.name + ".membership.rq")
        subclass.write_text(case.subclass_query, encoding="utf-8")
        membership.write_text(case.membership_query, encoding="utf-8")
        print(f"wrote {out} {subclass} {membership}", file=sys.stderr)
        print(f"goal: {case.goal}", file=sys.stderr)
    else:
        case = chain(args.length)
        out.write_text(serialize_ntriples(case.graph), encoding="utf-8")
        query = base.with_name(base.name + ".transitivity.rq")
        query.write_text(case.transitivity_query, encoding="utf-8")
        print(f"wrote {out} {query}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sin3",
        description="Compile SPARQL queries to N3 rules and run them forward or backward.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("translate", help="compile one query into one rule file")
    p.add_argument("query", help="SPARQL query file (.rq)")
    p.add_argument("out", help="output rule file (.n3)")
    p.add_argument("--runtime", help="also write the runtime ruleset here")
    p.add_argument("--mode", choices=["forward", "backward"], default="forward")
    p.add_argument(
        "--emit-figure1",
        dest="emit_figure1",
        action="store_true",
        default=True,
        help="include the optional meta-rules in the runtime file (default)",
    )
    p.add_argument("--no-emit-figure1", dest="emit_figure1", action="store_false")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("query", help="evaluate a query with the reference evaluator")
    p.add_argument("query")
    p.add_argument("data")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("reason", help="forward-chain rules over data to a fixpoint")
    p.add_argument("data")
    p.add_argument("rules", nargs="+")
    p.add_argument("--max-iter", type=int, default=10_000)
    p.add_argument("--trace", action="store_true")
    p.add_argument(
        "--select-decode",
        action="store_true",
        help="print decoded bindings instead of derived triples",
    )
    p.set_defaults(func=cmd_reason)

    p = sub.add_parser("solve", help="prove a goal by backward chaining")
    p.add_argument("data")
    p.add_argument("rules", nargs="+")
    p.add_argument("--goal", required=True, help='triple pattern, e.g. "?x a <urn:c>"')
    p.add_argument("--limit", type=int, default=1_000_000)
    p.add_argument("--no-memo", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("check", help="diff evaluator and engine answers")
    p.add_argument("query", nargs="?")
    p.add_argument("data", nargs="?")
    p.add_argument("--fuzz", type=int, default=0, metavar="N")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("gen", help="generate synthetic datasets and queries")
    gensub = p.add_subparsers(dest="kind", required=True)
    dt = gensub.add_parser("dt", help="deep subclass chain with one instance")
    dt.add_argument("out")
    dt.add_argument("--depth", type=int, required=True)
    dt.add_argument("--width", type=int, default=0)
    dt.set_defaults(func=cmd_gen, kind="dt")
    ch = gensub.add_parser("chain", help="linear chain of edges")
    ch.add_argument("out")
    ch.add_argument("--length", type=int, required=True)
    ch.set_defaults(func=cmd_gen, kind="chain")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Sin3Error as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
