"""SPARQL parser for the supported query subset.

Produces the algebra directly, applying three conventions while building
groups: adjacent group elements fold left into joins, every optional pattern
carries an explicit filter (the conjunction of the plain FILTERs written
inside the optional group, true if there were none), and FILTER (NOT) EXISTS
becomes an existence-test pattern whose mandatory side is the whole group.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from . import algebra as A
from .errors import ParseError, UnsupportedFeatureError, ValidationError
from .scoping import scope_vars, vars_in
from .terms import (
    RDF_TYPE,
    RESERVED_BLANK_PREFIX,
    XSD_BOOLEAN,
    XSD_DECIMAL,
    XSD_INTEGER,
    XSD_STRING,
    RDF_LANG_STRING,
    BlankNode,
    Iri,
    Literal,
    Triple,
    Variable,
)

_KEYWORDS = {
    "PREFIX", "SELECT", "CONSTRUCT", "WHERE", "OPTIONAL", "UNION", "MINUS",
    "FILTER", "EXISTS", "NOT", "BOUND",
}
_UNSUPPORTED_KEYWORDS = {
    "HAVING", "GROUP", "ORDER", "LIMIT", "OFFSET", "BIND", "VALUES", "GRAPH",
    "SERVICE", "ASK", "DESCRIBE", "BASE", "FROM", "DISTINCT", "REDUCED",
}

# variable names the translator reserves for generated fresh variables
_RESERVED_VAR = re.compile(r"_rl\d")
_RESERVED_TMP = re.compile(r"tmp_\d+$")

_TOKEN = re.compile(
    r"""
      (?P<ws>\s+|\#[^\n]*)
    | (?P<iri><[^<>"\s{}|^`\\]*>)
    | (?P<var>\?[A-Za-z_][A-Za-z0-9_]*)
    | (?P<blank>_:[A-Za-z0-9_](?:[A-Za-z0-9_.-]*[A-Za-z0-9_-])?)
    | (?P<string>"(?:[^"\\\n]|\\.)*")
    | (?P<number>\d+\.\d+|\d+)
    | (?P<dtmark>\^\^)
    | (?P<langtag>@[A-Za-z]+(?:-[A-Za-z0-9]+)*)
    | (?P<pname>[A-Za-z][A-Za-z0-9_-]*:[A-Za-z0-9_](?:[A-Za-z0-9_.-]*[A-Za-z0-9_-])?
        |:[A-Za-z0-9_](?:[A-Za-z0-9_.-]*[A-Za-z0-9_-])?
        |[A-Za-z][A-Za-z0-9_-]*:
        |:)
    | (?P<word>[A-Za-z][A-Za-z0-9_]*)
    | (?P<op>&&|\|\||!=|<=|>=|[{}().;,=<>!+\-*/^|?])
    """,
    re.VERBOSE,
)

_PATH_OPS = {"/", "|", "^", "?", "*", "+"}

from .rdfio import _unescape  # same string escape rules as the data syntaxes


@dataclass
class _Token:
    kind: str
    value: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    line = 1
    col = 1
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        value = m.group()
        if kind != "ws":
            tokens.append(_Token(kind, value, line, col))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            col = len(value) - value.rfind("\n")
        else:
            col += len(value)
        pos = m.end()
    return tokens


class _Stream:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self, ahead: int = 0) -> _Token | None:
        i = self.pos + ahead
        return self.tokens[i] if i < len(self.tokens) else None

    def next(self) -> _Token:
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else None
            raise ParseError("unexpected end of input", last.line if last else 1)
        self.pos += 1
        return tok

    def take_op(self, op: str) -> bool:
        tok = self.peek()
        if tok is not None and tok.kind == "op" and tok.value == op:
            self.pos += 1
            return True
        return False

    def expect_op(self, op: str) -> None:
        tok = self.peek()
        if not self.take_op(op):
            found = tok.value if tok else "end of input"
            raise ParseError(
                f"expected {op!r}, found {found!r}",
                tok.line if tok else None,
                tok.col if tok else None,
            )

    def take_keyword(self, *words: str) -> str | None:
        tok = self.peek()
        if tok is not None and tok.kind == "word" and tok.value.upper() in words:
            self.pos += 1
            return tok.value.upper()
        return None

    def at_keyword(self, *words: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == "word" and tok.value.upper() in words


class _QueryParser:
    def __init__(self, text: str):
        self.stream = _Stream(_tokenize(text))
        self.prefixes: dict[str, str] = {}

    # -- entry -------------------------------------------------------------

    def parse(self) -> A.Query:
        s = self.stream
        self._prologue()
        if s.take_keyword("SELECT"):
            form = self._select_form()
        elif s.take_keyword("CONSTRUCT"):
            form = self._construct_form()
        else:
            tok = s.peek()
            self._reject_unsupported(tok)
            raise ParseError(
                "expected SELECT or CONSTRUCT",
                tok.line if tok else None,
                tok.col if tok else None,
            )
        s.take_keyword("WHERE")
        pattern = self._group()
        tok = s.peek()
        if tok is not None:
            self._reject_unsupported(tok)
            raise ParseError(f"unexpected {tok.value!r} after query", tok.line, tok.col)
        return A.Query(form, pattern, tuple(sorted(self.prefixes.items())))

    def _reject_unsupported(self, tok: _Token | None) -> None:
        if tok is not None and tok.kind == "word" and tok.value.upper() in _UNSUPPORTED_KEYWORDS:
            raise UnsupportedFeatureError(
                f"{tok.value.upper()} is not supported", tok.line, tok.col
            )

    def _prologue(self) -> None:
        s = self.stream
        while s.take_keyword("PREFIX"):
            tok = s.next()
            if tok.kind != "pname" or not tok.value.endswith(":"):
                raise ParseError("expected prefix name", tok.line, tok.col)
            iri_tok = s.next()
            if iri_tok.kind != "iri":
                raise ParseError("expected IRI after prefix name", iri_tok.line, iri_tok.col)
            self.prefixes[tok.value[:-1]] = iri_tok.value[1:-1]

    def _select_form(self) -> A.Select:
        s = self.stream
        tok = s.peek()
        self._reject_unsupported(tok)
        if s.take_op("*"):
            return A.Select(None)
        names: list[Variable] = []
        while True:
            tok = s.peek()
            if tok is not None and tok.kind == "var":
                s.next()
                names.append(self._make_var(tok))
            else:
                break
        if not names:
            raise ParseError(
                "SELECT needs '*' or at least one variable",
                tok.line if tok else None,
                tok.col if tok else None,
            )
        return A.Select(tuple(names))

    def _construct_form(self) -> A.Construct:
        s = self.stream
        s.expect_op("{")
        triples: list[Triple] = []
        while not s.take_op("}"):
            triples.extend(self._triple_statement(allow_blanks=True))
            while s.take_op("."):
                pass
        return A.Construct(tuple(triples))

    # -- groups ------------------------------------------------------------

    def _group(self) -> A.GraphPattern:
        pattern, filters = self._group_raw()
        if filters:
            return A.Filter(pattern, _fold_and(filters))
        return pattern

    def _group_raw(self) -> tuple[A.GraphPattern, list[A.FilterExpr]]:
        s = self.stream
        s.expect_op("{")
        pattern: A.GraphPattern | None = None
        run: list[Triple] = []
        exists_wraps: list[tuple[str, A.GraphPattern]] = []
        filters: list[A.FilterExpr] = []

        def flush() -> None:
            nonlocal pattern, run
            if run:
                bgp = A.Bgp(tuple(run))
                run = []
                pattern = bgp if pattern is None else A.Join(pattern, bgp)

        def attach(sub: A.GraphPattern) -> None:
            nonlocal pattern
            flush()
            pattern = sub if pattern is None else A.Join(pattern, sub)

        while True:
            if s.take_op("}"):
                break
            if s.take_op("."):
                continue
            tok = s.peek()
            if tok is None:
                raise ParseError("unterminated group")
            if tok.kind == "op" and tok.value == "{":
                attach(self._group_or_union())
                continue
            if tok.kind == "word":
                word = tok.value.upper()
                if word in _UNSUPPORTED_KEYWORDS or word == "SELECT":
                    if word == "SELECT":
                        raise UnsupportedFeatureError(
                            "subqueries are not supported", tok.line, tok.col
                        )
                    self._reject_unsupported(tok)
                if word == "OPTIONAL":
                    s.next()
                    flush()
                    left = pattern if pattern is not None else A.Bgp()
                    inner, inner_filters = self._group_raw()
                    expr = _fold_and(inner_filters) if inner_filters else A.TRUE
                    pattern = A.LeftJoin(left, inner, expr)
                    continue
                if word == "MINUS":
                    s.next()
                    flush()
                    left = pattern if pattern is not None else A.Bgp()
                    pattern = A.Minus(left, self._group())
                    continue
                if word == "FILTER":
                    s.next()
                    if s.take_keyword("EXISTS"):
                        exists_wraps.append(("exists", self._group()))
                    elif s.at_keyword("NOT"):
                        s.next()
                        not_tok = s.peek()
                        if not s.take_keyword("EXISTS"):
                            raise ParseError(
                                "expected EXISTS after NOT",
                                not_tok.line if not_tok else None,
                                not_tok.col if not_tok else None,
                            )
                        exists_wraps.append(("not-exists", self._group()))
                    else:
                        filters.append(self._constraint())
                    continue
                if word == "UNION":
                    raise ParseError("UNION without a preceding group", tok.line, tok.col)
            # anything else must start a triples statement
            run.extend(self._triple_statement(allow_blanks=False))

        flush()
        if pattern is None:
            pattern = A.Bgp()
        for kind, inner in exists_wraps:
            pattern = A.Exists(pattern, inner) if kind == "exists" else A.NotExists(pattern, inner)
        return pattern, filters

    def _group_or_union(self) -> A.GraphPattern:
        pattern = self._group()
        while self.stream.take_keyword("UNION"):
            pattern = A.Union(pattern, self._group())
        return pattern

    # -- triples -----------------------------------------------------------

    def _triple_statement(self, allow_blanks: bool) -> list[Triple]:
        s = self.stream
        out: list[Triple] = []
        subject = self._pattern_term(allow_blanks=allow_blanks, position="subject")
        while True:
            predicate = self._predicate()
            while True:
                obj = self._pattern_term(allow_blanks=allow_blanks, position="object")
                out.append(Triple(subject, predicate, obj))
                if not s.take_op(","):
                    break
            if s.take_op(";"):
                tok = s.peek()
                if tok is not None and tok.kind == "op" and tok.value in (".", "}"):
                    break
                continue
            break
        return out

    def _predicate(self):
        s = self.stream
        tok = s.peek()
        if tok is not None and tok.kind == "op" and tok.value == "^":
            raise UnsupportedFeatureError("property paths are not supported", tok.line, tok.col)
        if tok is not None and tok.kind == "word" and tok.value == "a":
            s.next()
            term = RDF_TYPE
        else:
            term = self._pattern_term(allow_blanks=False, position="predicate")
            if not isinstance(term, (Iri, Variable)):
                raise ParseError("predicate must be an IRI or variable", tok.line, tok.col)
        nxt = s.peek()
        if nxt is not None and nxt.kind == "op" and nxt.value in _PATH_OPS:
            raise UnsupportedFeatureError("property paths are not supported", nxt.line, nxt.col)
        return term

    def _pattern_term(self, allow_blanks: bool, position: str):
        s = self.stream
        tok = s.peek()
        if tok is None:
            raise ParseError("unexpected end of input in triple pattern")
        self._reject_unsupported(tok)
        if tok.kind == "var":
            s.next()
            return self._make_var(tok)
        if tok.kind == "iri":
            s.next()
            return self._iri_from_token(tok)
        if tok.kind == "pname":
            s.next()
            return self._expand_pname(tok)
        if tok.kind == "blank":
            s.next()
            if not allow_blanks:
                raise ParseError(
                    "blank nodes are not allowed in WHERE patterns", tok.line, tok.col
                )
            label = tok.value[2:]
            if label.startswith(RESERVED_BLANK_PREFIX):
                raise ParseError(
                    f"blank node label {tok.value} uses a reserved prefix", tok.line, tok.col
                )
            return BlankNode(label)
        if tok.kind == "number":
            s.next()
            return _number_literal(tok.value)
        if tok.kind == "op" and tok.value == "-":
            nxt = s.peek(1)
            if nxt is not None and nxt.kind == "number":
                s.next()
                s.next()
                return _number_literal("-" + nxt.value)
        if tok.kind == "string":
            s.next()
            return self._string_literal(tok)
        if tok.kind == "word" and tok.value.lower() in ("true", "false"):
            s.next()
            return Literal(tok.value.lower(), XSD_BOOLEAN)
        raise ParseError(f"unexpected {tok.value!r} in {position} position", tok.line, tok.col)

    def _string_literal(self, tok: _Token) -> Literal:
        lexical = _unescape(tok.value[1:-1], tok.line)
        s = self.stream
        nxt = s.peek()
        if nxt is not None and nxt.kind == "dtmark":
            s.next()
            dt_tok = s.next()
            if dt_tok.kind == "iri":
                return Literal(lexical, self._iri_from_token(dt_tok))
            if dt_tok.kind == "pname":
                return Literal(lexical, self._expand_pname(dt_tok))
            raise ParseError("expected datatype IRI", dt_tok.line, dt_tok.col)
        if nxt is not None and nxt.kind == "langtag":
            s.next()
            return Literal(lexical, RDF_LANG_STRING, nxt.value[1:])
        return Literal(lexical, XSD_STRING)

    def _iri_from_token(self, tok: _Token) -> Iri:
        try:
            return Iri(tok.value[1:-1])
        except ValueError as exc:
            raise ParseError(str(exc), tok.line, tok.col)

    def _expand_pname(self, tok: _Token) -> Iri:
        prefix, _, local = tok.value.partition(":")
        if prefix not in self.prefixes:
            raise ParseError(f"undefined prefix {prefix!r}:", tok.line, tok.col)
        try:
            return Iri(self.prefixes[prefix] + local)
        except ValueError as exc:
            raise ParseError(str(exc), tok.line, tok.col)

    def _make_var(self, tok: _Token) -> Variable:
        name = tok.value[1:]
        if name == "__closure" or _RESERVED_VAR.search(name) or _RESERVED_TMP.match(name):
            raise ParseError(f"variable name ?{name} is reserved", tok.line, tok.col)
        return Variable(name)

    # -- filter expressions --------------------------------------------------

    def _constraint(self) -> A.FilterExpr:
        s = self.stream
        tok = s.peek()
        if tok is not None and tok.kind == "op" and tok.value == "(":
            expr = self._parse_bracketted()
        elif tok is not None and (tok.kind == "word" or tok.kind == "op" and tok.value == "!"):
            expr = self._parse_unary()
        else:
            raise ParseError(
                "expected a bracketted expression or BOUND(...)",
                tok.line if tok else None,
                tok.col if tok else None,
            )
        return _require_bool(expr, tok)

    def _parse_bracketted(self) -> object:
        self.stream.expect_op("(")
        expr = self._parse_or()
        self.stream.expect_op(")")
        return expr

    def _parse_or(self) -> object:
        tok = self.stream.peek()
        expr = self._parse_and()
        while self.stream.take_op("||"):
            rhs = self._parse_and()
            expr = A.Disjunction(_require_bool(expr, tok), _require_bool(rhs, tok))
        return expr

    def _parse_and(self) -> object:
        tok = self.stream.peek()
        expr = self._parse_unary()
        while self.stream.take_op("&&"):
            rhs = self._parse_unary()
            expr = A.Conjunction(_require_bool(expr, tok), _require_bool(rhs, tok))
        return expr

    def _parse_unary(self) -> object:
        s = self.stream
        tok = s.peek()
        if s.take_op("!"):
            return A.Negation(_require_bool(self._parse_unary(), tok))
        return self._parse_relational()

    def _parse_relational(self) -> object:
        s = self.stream
        tok = s.peek()
        lhs = self._parse_additive()
        for op in A.COMPARISON_OPS:
            if s.take_op(op):
                rhs = self._parse_additive()
                return A.Comparison(op, _require_atom(lhs, tok), _require_atom(rhs, tok))
        return lhs

    def _parse_additive(self) -> object:
        s = self.stream
        tok = s.peek()
        expr = self._parse_multiplicative()
        while True:
            if s.take_op("+"):
                op = "+"
            elif s.take_op("-"):
                op = "-"
            else:
                return expr
            rhs = self._parse_multiplicative()
            expr = A.Arith(op, _require_atom(expr, tok), _require_atom(rhs, tok))

    def _parse_multiplicative(self) -> object:
        s = self.stream
        tok = s.peek()
        expr = self._parse_primary()
        while True:
            if s.take_op("*"):
                op = "*"
            elif s.take_op("/"):
                op = "/"
            else:
                return expr
            rhs = self._parse_primary()
            expr = A.Arith(op, _require_atom(expr, tok), _require_atom(rhs, tok))

    def _parse_primary(self) -> object:
        s = self.stream
        tok = s.peek()
        if tok is None:
            raise ParseError("unexpected end of filter expression")
        if tok.kind == "op" and tok.value == "(":
            return self._parse_bracketted()
        if tok.kind == "op" and tok.value == "-":
            nxt = s.peek(1)
            if nxt is not None and nxt.kind == "number":
                s.next()
                s.next()
                return _number_literal("-" + nxt.value)
        if tok.kind == "word":
            word = tok.value.upper()
            if word == "BOUND":
                s.next()
                s.expect_op("(")
                var_tok = s.next()
                if var_tok.kind != "var":
                    raise ParseError("BOUND takes a variable", var_tok.line, var_tok.col)
                var = self._make_var(var_tok)
                s.expect_op(")")
                return A.Bound(var)
            if tok.value.lower() == "true":
                s.next()
                return A.TRUE
            if tok.value.lower() == "false":
                s.next()
                return A.FALSE
            nxt = s.peek(1)
            if nxt is not None and nxt.kind == "op" and nxt.value == "(":
                raise UnsupportedFeatureError(
                    f"filter function {tok.value} is not supported", tok.line, tok.col
                )
            raise ParseError(f"unexpected {tok.value!r} in filter", tok.line, tok.col)
        if tok.kind == "var":
            s.next()
            return self._make_var(tok)
        if tok.kind == "number":
            s.next()
            return _number_literal(tok.value)
        if tok.kind == "string":
            s.next()
            return self._string_literal(tok)
        if tok.kind == "iri":
            s.next()
            return self._iri_from_token(tok)
        if tok.kind == "pname":
            s.next()
            return self._expand_pname(tok)
        raise ParseError(f"unexpected {tok.value!r} in filter", tok.line, tok.col)


_BOOL_TYPES = (A.Comparison, A.Conjunction, A.Disjunction, A.Negation, A.Bound, A.TrueExpr, A.FalseExpr)
_ATOM_TYPES = (Variable, Literal, Iri, A.Arith)


def _require_bool(expr, tok) -> A.FilterExpr:
    if isinstance(expr, _BOOL_TYPES):
        return expr
    raise ParseError(
        "expected a boolean filter expression",
        tok.line if tok else None,
        tok.col if tok else None,
    )


def _require_atom(expr, tok):
    if isinstance(expr, _ATOM_TYPES):
        return expr
    raise ParseError(
        "expected a value expression",
        tok.line if tok else None,
        tok.col if tok else None,
    )


def _fold_and(filters: list[A.FilterExpr]) -> A.FilterExpr:
    expr = filters[0]
    for f in filters[1:]:
        expr = A.Conjunction(expr, f)
    return expr


def _number_literal(lexical: str) -> Literal:
    return Literal(lexical, XSD_DECIMAL if "." in lexical else XSD_INTEGER)


def parse_query(text: str) -> A.Query:
    return _QueryParser(text).parse()


def validate_query(query: A.Query) -> None:
    """Reject CONSTRUCT templates with variables the pattern can never bind."""
    if not isinstance(query.form, A.Construct):
        return
    unbindable = vars_in(query.form.template) - scope_vars(query.pattern)
    if unbindable:
        names = ", ".join("?" + v.name for v in sorted(unbindable, key=lambda v: v.name))
        raise ValidationError(f"unbindable template variable {names}")
