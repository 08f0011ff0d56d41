"""N3 data model (graph terms, list terms, rules) and concrete syntax.

The reader and writer cover exactly the fragment the translator emits plus
the shipped runtime ruleset: quickvar variables, graph terms, lists, forward
``=>`` and backward ``<=`` rules, prefixed names, and literal shorthand for
integers and decimals.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator

from .errors import ParseError, UnsupportedFeatureError, ValidationError
from .scoping import vars_in
from .terms import (
    RDF_NS,
    RDFS_NS,
    RDF_LANG_STRING,
    RDF_TYPE,
    RESERVED_BLANK_PREFIX,
    XSD_BOOLEAN,
    XSD_DECIMAL,
    XSD_INTEGER,
    XSD_NS,
    XSD_STRING,
    BlankNode,
    Iri,
    Literal,
    Term,
    Triple,
    Variable,
    triple_key,
)
from .rdfio import _escape, _unescape

LOG_NS = "http://www.w3.org/2000/10/swap/log#"
MATH_NS = "http://www.w3.org/2000/10/swap/math#"

# The artifact's own vocabulary; the IRI is stable and documented in the README.
SIN3_NS = "http://example.org/sin3#"

LOG_IMPLIES = Iri(LOG_NS + "implies")
LOG_INCLUDES = Iri(LOG_NS + "includes")
LOG_NOT_INCLUDES = Iri(LOG_NS + "notIncludes")
LOG_EQUAL = Iri(LOG_NS + "equalTo")
LOG_NOT_EQUAL = Iri(LOG_NS + "notEqualTo")
LOG_COPY = Iri(LOG_NS + "copy")
LOG_CONJUNCTION = Iri(LOG_NS + "conjunction")

MATH_LESS = Iri(MATH_NS + "lessThan")
MATH_GREATER = Iri(MATH_NS + "greaterThan")
MATH_NOT_LESS = Iri(MATH_NS + "notLessThan")
MATH_NOT_GREATER = Iri(MATH_NS + "notGreaterThan")
MATH_SUM = Iri(MATH_NS + "sum")
MATH_DIFFERENCE = Iri(MATH_NS + "difference")
MATH_PRODUCT = Iri(MATH_NS + "product")
MATH_QUOTIENT = Iri(MATH_NS + "quotient")

SIN3_UNION = Iri(SIN3_NS + "union")
SIN3_OPTIONAL = Iri(SIN3_NS + "optional")
SIN3_RESULT = Iri(SIN3_NS + "result")
SIN3_UNBOUND = Iri(SIN3_NS + "unbound")
SIN3_EVAL = Iri(SIN3_NS + "eval")
SIN3_UNNEST = Iri(SIN3_NS + "unnest")
SIN3_LEFTJOIN = Iri(SIN3_NS + "leftjoin")
# internal datatype for exact division results that have no finite decimal
SIN3_FRACTION = Iri(SIN3_NS + "fraction")

DEFAULT_PREFIXES: dict[str, str] = {
    "rdf": RDF_NS,
    "rdfs": RDFS_NS,
    "xsd": XSD_NS,
    "log": LOG_NS,
    "math": MATH_NS,
    "sin3": SIN3_NS,
}

COMPARISON_BUILTINS = frozenset(
    [MATH_LESS, MATH_GREATER, MATH_NOT_LESS, MATH_NOT_GREATER, LOG_EQUAL, LOG_NOT_EQUAL]
)
ARITHMETIC_BUILTINS = frozenset([MATH_SUM, MATH_DIFFERENCE, MATH_PRODUCT, MATH_QUOTIENT])
SCOPED_BUILTINS = frozenset([LOG_INCLUDES, LOG_NOT_INCLUDES])
PATTERN_BUILTINS = frozenset([SIN3_UNION, SIN3_OPTIONAL])
ALL_BUILTINS = COMPARISON_BUILTINS | ARITHMETIC_BUILTINS | SCOPED_BUILTINS | PATTERN_BUILTINS


def _dedup(triples: Iterable[Triple]) -> tuple[Triple, ...]:
    seen = set()
    out = []
    for t in triples:
        if t not in seen:
            seen.add(t)
            out.append(t)
    return tuple(out)


class GraphTerm:
    """A graph quoted as a first-class term. Keeps construction order for
    deterministic output but compares as a set of triples."""

    __slots__ = ("triples", "_frozen")

    def __init__(self, triples: Iterable[Triple] = ()):
        self.triples = _dedup(triples)
        self._frozen = frozenset(self.triples)

    def __eq__(self, other) -> bool:
        return isinstance(other, GraphTerm) and self._frozen == other._frozen

    def __hash__(self) -> int:
        return hash(self._frozen)

    def __repr__(self) -> str:
        return f"GraphTerm({list(self.triples)!r})"


@dataclass(frozen=True)
class ListTerm:
    items: tuple

    def __repr__(self) -> str:
        return f"ListTerm({list(self.items)!r})"


def pair(a, b) -> ListTerm:
    return ListTerm((a, b))


def is_closed(term) -> bool:
    """No variables at any nesting depth."""
    return not vars_in(term)


class N3Rule:
    """One rule: premise implies conclusion, applied forward or backward."""

    __slots__ = ("premise", "conclusion", "mode", "_frozen")

    def __init__(self, premise: Iterable[Triple], conclusion: Iterable[Triple], mode: str = "forward"):
        if mode not in ("forward", "backward"):
            raise ValueError(f"bad rule mode {mode!r}")
        self.premise = _dedup(premise)
        self.conclusion = _dedup(conclusion)
        self.mode = mode
        self._frozen = (frozenset(self.premise), frozenset(self.conclusion), mode)

    def __eq__(self, other) -> bool:
        return isinstance(other, N3Rule) and self._frozen == other._frozen

    def __hash__(self) -> int:
        return hash(self._frozen)

    def __repr__(self) -> str:
        arrow = "=>" if self.mode == "forward" else "<="
        return f"N3Rule({list(self.premise)!r} {arrow} {list(self.conclusion)!r})"


@dataclass(frozen=True)
class N3Document:
    prefixes: tuple[tuple[str, str], ...]
    facts: tuple[Triple, ...]
    rules: tuple[N3Rule, ...]


def make_rule(premise: Iterable[Triple], conclusion: Iterable[Triple], mode: str = "forward") -> N3Rule:
    """Build a rule, turning conclusion-only variables into blank nodes so
    they mint a fresh blank node on every firing."""
    premise = tuple(premise)
    conclusion = tuple(conclusion)
    extra = vars_in(conclusion) - vars_in(premise)
    if extra:
        taken = {
            t.label
            for triple in conclusion
            for t in _walk_terms(triple)
            if isinstance(t, BlankNode)
        }
        renames: dict[Variable, BlankNode] = {}
        for var in sorted(extra, key=lambda v: v.name):
            label = f"v_{var.name}"
            while label in taken:
                label += "_"
            taken.add(label)
            renames[var] = BlankNode(label)
        conclusion = tuple(_replace_vars(t, renames) for t in conclusion)
    return N3Rule(premise, conclusion, mode)


def _walk_terms(triple: Triple):
    for term in triple:
        yield term
        if isinstance(term, GraphTerm):
            for t in term.triples:
                yield from _walk_terms(t)
        elif isinstance(term, ListTerm):
            stack = list(term.items)
            while stack:
                item = stack.pop()
                yield item
                if isinstance(item, ListTerm):
                    stack.extend(item.items)
                elif isinstance(item, GraphTerm):
                    for t in item.triples:
                        yield from _walk_terms(t)


def _replace_vars(triple: Triple, renames: dict):
    def walk(term):
        if isinstance(term, Variable):
            return renames.get(term, term)
        if isinstance(term, GraphTerm):
            return GraphTerm(tuple(_replace_vars(t, renames) for t in term.triples))
        if isinstance(term, ListTerm):
            return ListTerm(tuple(walk(i) for i in term.items))
        return term

    return Triple(walk(triple.subject), walk(triple.predicate), walk(triple.object))


# ---------------------------------------------------------------------------
# Writer
# ---------------------------------------------------------------------------

_SAFE_LOCAL = re.compile(r"[A-Za-z_][A-Za-z0-9_-]*$")
_BARE_INTEGER = re.compile(r"-?\d+$")
_BARE_DECIMAL = re.compile(r"-?\d+\.\d+$")


class _Writer:
    def __init__(self, prefixes: dict[str, str]):
        # longest namespace wins; ties resolved by prefix name
        self.by_namespace = sorted(
            ((ns, p) for p, ns in prefixes.items()), key=lambda x: (-len(x[0]), x[1])
        )

    def term(self, term, predicate: bool = False) -> str:
        if isinstance(term, Iri):
            if predicate and term == RDF_TYPE:
                return "a"
            for ns, prefix in self.by_namespace:
                if term.value.startswith(ns):
                    local = term.value[len(ns):]
                    if _SAFE_LOCAL.match(local):
                        return f"{prefix}:{local}"
            return f"<{term.value}>"
        if isinstance(term, BlankNode):
            return f"_:{term.label}"
        if isinstance(term, Variable):
            return f"?{term.name}"
        if isinstance(term, Literal):
            if term.datatype == XSD_INTEGER and _BARE_INTEGER.match(term.lexical):
                return term.lexical
            if term.datatype == XSD_DECIMAL and _BARE_DECIMAL.match(term.lexical):
                return term.lexical
            body = f'"{_escape(term.lexical)}"'
            if term.langtag is not None:
                return f"{body}@{term.langtag}"
            if term.datatype == XSD_STRING:
                return body
            return f"{body}^^{self.term(term.datatype)}"
        if isinstance(term, ListTerm):
            return "(" + " ".join(self.term(i) for i in term.items) + ")"
        if isinstance(term, GraphTerm):
            if not term.triples:
                return "{}"
            return "{" + " ".join(self.triple(t) for t in term.triples) + "}"
        raise ValidationError(f"cannot serialize term {term!r}")

    def triple(self, t: Triple) -> str:
        return f"{self.term(t.subject)} {self.term(t.predicate, predicate=True)} {self.term(t.object)}."


def serialize_document(doc: N3Document) -> str:
    """Deterministic N3 text: sorted prefixes, sorted facts, rules in
    document order, one statement per line."""
    writer = _Writer(dict(doc.prefixes))
    lines = [f"@prefix {p}: <{ns}>." for p, ns in sorted(doc.prefixes)]
    if lines and (doc.facts or doc.rules):
        lines.append("")
    for fact in sorted(doc.facts, key=triple_key):
        lines.append(writer.triple(fact))
    for rule in doc.rules:
        premise = writer.term(GraphTerm(rule.premise))
        conclusion = writer.term(GraphTerm(rule.conclusion))
        if rule.mode == "forward":
            lines.append(f"{premise} => {conclusion}.")
        else:
            lines.append(f"{conclusion} <= {premise}.")
    return "".join(line + "\n" for line in lines)


# ---------------------------------------------------------------------------
# Reader
# ---------------------------------------------------------------------------

_N3_TOKEN = re.compile(
    r"""
      (?P<ws>\s+|\#[^\n]*)
    | (?P<directive>@prefix|@forAll|@forSome|@base|@keywords)
    | (?P<iri><[^<>"\s{}|^`\\]*>)
    | (?P<var>\?[A-Za-z_][A-Za-z0-9_]*)
    | (?P<blank>_:[A-Za-z0-9_](?:[A-Za-z0-9_.-]*[A-Za-z0-9_-])?)
    | (?P<string>"(?:[^"\\\n]|\\.)*")
    | (?P<number>[+-]?(?:\d+\.\d+|\d+))
    | (?P<dtmark>\^\^)
    | (?P<langtag>@[A-Za-z]+(?:-[A-Za-z0-9]+)*)
    | (?P<pname>[A-Za-z][A-Za-z0-9_-]*:[A-Za-z0-9_](?:[A-Za-z0-9_.-]*[A-Za-z0-9_-])?
        |:[A-Za-z0-9_](?:[A-Za-z0-9_.-]*[A-Za-z0-9_-])?
        |[A-Za-z][A-Za-z0-9_-]*:
        |:)
    | (?P<word>[A-Za-z][A-Za-z0-9_]*)
    | (?P<op>=>|<=|[{}().;,])
    """,
    re.VERBOSE,
)


class _N3Parser:
    def __init__(self, text: str):
        self.tokens = self._tokenize(text)
        self.pos = 0
        self.prefixes: dict[str, str] = {}
        self.facts: list[Triple] = []
        self.rules: list[N3Rule] = []

    @staticmethod
    def _tokenize(text: str):
        tokens = []
        pos = 0
        line = 1
        col = 1
        while pos < len(text):
            m = _N3_TOKEN.match(text, pos)
            if not m:
                raise ParseError(f"unexpected character {text[pos]!r}", line, col)
            if m.lastgroup != "ws":
                tokens.append((m.lastgroup, m.group(), line, col))
            chunk = m.group()
            newlines = chunk.count("\n")
            if newlines:
                line += newlines
                col = len(chunk) - chunk.rfind("\n")
            else:
                col += len(chunk)
            pos = m.end()
        return tokens

    def _peek(self, ahead: int = 0):
        i = self.pos + ahead
        return self.tokens[i] if i < len(self.tokens) else None

    def _next(self):
        tok = self._peek()
        if tok is None:
            raise ParseError("unexpected end of input")
        self.pos += 1
        return tok

    def _take_op(self, op: str) -> bool:
        tok = self._peek()
        if tok is not None and tok[0] == "op" and tok[1] == op:
            self.pos += 1
            return True
        return False

    def _expect_op(self, op: str) -> None:
        tok = self._peek()
        if not self._take_op(op):
            found = tok[1] if tok else "end of input"
            raise ParseError(f"expected {op!r}, found {found!r}", *(tok[2:] if tok else (None, None)))

    def parse(self) -> N3Document:
        while self._peek() is not None:
            tok = self._peek()
            if tok[0] == "directive":
                if tok[1] == "@prefix":
                    self._prefix_decl()
                else:
                    raise UnsupportedFeatureError(f"{tok[1]} is not supported", tok[2], tok[3])
                continue
            self._statement()
        return N3Document(tuple(sorted(self.prefixes.items())), tuple(self.facts), tuple(self.rules))

    def _prefix_decl(self) -> None:
        self._next()
        tok = self._next()
        if tok[0] != "pname" or not tok[1].endswith(":"):
            raise ParseError("expected prefix name", tok[2], tok[3])
        iri_tok = self._next()
        if iri_tok[0] != "iri":
            raise ParseError("expected IRI in prefix declaration", iri_tok[2], iri_tok[3])
        self._expect_op(".")
        self.prefixes[tok[1][:-1]] = iri_tok[1][1:-1]

    def _statement(self) -> None:
        subject = self._term()
        tok = self._peek()
        if tok is not None and tok[0] == "op" and tok[1] in ("=>", "<="):
            self._next()
            other = self._term()
            if not isinstance(subject, GraphTerm) or not isinstance(other, GraphTerm):
                raise ParseError("rule arrows connect graph terms", tok[2], tok[3])
            self._expect_op(".")
            if tok[1] == "=>":
                self.rules.append(N3Rule(subject.triples, other.triples, "forward"))
            else:
                self.rules.append(N3Rule(other.triples, subject.triples, "backward"))
            return
        while True:
            predicate = self._term(predicate=True)
            objects = [self._term()]
            while self._take_op(","):
                objects.append(self._term())
            if predicate == LOG_IMPLIES:
                for obj in objects:
                    if not isinstance(subject, GraphTerm) or not isinstance(obj, GraphTerm):
                        raise ParseError("rule arrows connect graph terms")
                    self.rules.append(N3Rule(subject.triples, obj.triples, "forward"))
            else:
                for obj in objects:
                    self.facts.append(Triple(subject, predicate, obj))
            if self._take_op(";"):
                nxt = self._peek()
                if nxt is not None and nxt[0] == "op" and nxt[1] == ".":
                    break
                continue
            break
        self._expect_op(".")

    def _graph_term(self) -> GraphTerm:
        self._expect_op("{")
        triples: list[Triple] = []
        while not self._take_op("}"):
            subject = self._term()
            while True:
                predicate = self._term(predicate=True)
                objects = [self._term()]
                while self._take_op(","):
                    objects.append(self._term())
                for obj in objects:
                    triples.append(Triple(subject, predicate, obj))
                if self._take_op(";"):
                    nxt = self._peek()
                    if nxt is not None and nxt[0] == "op" and nxt[1] in (".", "}"):
                        break
                    continue
                break
            if not self._take_op("."):
                self._expect_op("}")
                break
        return GraphTerm(tuple(triples))

    def _term(self, predicate: bool = False):
        tok = self._peek()
        if tok is None:
            raise ParseError("unexpected end of input")
        kind, value, line, col = tok
        if kind == "op" and value == "{":
            return self._graph_term()
        if kind == "op" and value == "(":
            self._next()
            items = []
            while not self._take_op(")"):
                items.append(self._term())
            return ListTerm(tuple(items))
        if kind == "iri":
            self._next()
            try:
                return Iri(value[1:-1])
            except ValueError as exc:
                raise ParseError(str(exc), line, col)
        if kind == "var":
            self._next()
            return Variable(value[1:])
        if kind == "blank":
            self._next()
            label = value[2:]
            if label.startswith(RESERVED_BLANK_PREFIX):
                raise ParseError(f"blank node label {value} uses a reserved prefix", line, col)
            return BlankNode(label)
        if kind == "number":
            self._next()
            return Literal(value.lstrip("+"), XSD_DECIMAL if "." in value else XSD_INTEGER)
        if kind == "string":
            self._next()
            lexical = _unescape(value[1:-1], line)
            nxt = self._peek()
            if nxt is not None and nxt[0] == "dtmark":
                self._next()
                dt = self._term()
                if not isinstance(dt, Iri):
                    raise ParseError("datatype must be an IRI", line, col)
                return Literal(lexical, dt)
            if nxt is not None and nxt[0] == "langtag":
                self._next()
                return Literal(lexical, RDF_LANG_STRING, nxt[1][1:])
            return Literal(lexical, XSD_STRING)
        if kind == "pname":
            self._next()
            prefix, _, local = value.partition(":")
            if prefix not in self.prefixes:
                raise ParseError(f"undefined prefix {prefix!r}:", line, col)
            try:
                return Iri(self.prefixes[prefix] + local)
            except ValueError as exc:
                raise ParseError(str(exc), line, col)
        if kind == "word":
            if predicate and value == "a":
                self._next()
                return RDF_TYPE
            if value in ("true", "false"):
                self._next()
                return Literal(value, XSD_BOOLEAN)
        raise ParseError(f"unexpected {value!r}", line, col)


def parse_document(text: str) -> N3Document:
    return _N3Parser(text).parse()
