"""N-Triples and Turtle-subset reading plus deterministic N-Triples writing.

The Turtle subset covers ``@prefix``, the ``a`` keyword, and the ``;`` / ``,``
abbreviations. Collections, blank-node property lists, and ``@base`` raise an
unsupported-construct error, which the CLI maps to a different exit code than
plain syntax errors.
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Iterable

from .errors import ParseError, UnsupportedFeatureError, ValidationError
from .terms import (
    RDF_LANG_STRING,
    RDF_TYPE,
    RESERVED_BLANK_PREFIX,
    XSD_BOOLEAN,
    XSD_DECIMAL,
    XSD_INTEGER,
    XSD_STRING,
    BlankNode,
    Graph,
    Iri,
    Literal,
    Triple,
    Variable,
    is_ground_triple,
)

_ESCAPES = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}
_BLANK_LABEL = re.compile(r"[A-Za-z0-9_][A-Za-z0-9_.-]*$")


def _unescape(raw: str, line: int) -> str:
    out: list[str] = []
    i = 0
    while i < len(raw):
        c = raw[i]
        if c != "\\":
            out.append(c)
            i += 1
            continue
        if i + 1 >= len(raw):
            raise ParseError("dangling escape in string", line)
        nxt = raw[i + 1]
        if nxt in _ESCAPES:
            out.append(_ESCAPES[nxt])
            i += 2
        elif nxt == "u" or nxt == "U":
            width = 4 if nxt == "u" else 8
            hexdigits = raw[i + 2 : i + 2 + width]
            if len(hexdigits) != width:
                raise ParseError("truncated unicode escape", line)
            try:
                out.append(chr(int(hexdigits, 16)))
            except ValueError:
                raise ParseError(f"bad unicode escape \\{nxt}{hexdigits}", line)
            i += 2 + width
        else:
            raise ParseError(f"unknown escape \\{nxt}", line)
    return "".join(out)


def _escape(text: str) -> str:
    out = []
    for c in text:
        if c == "\\":
            out.append("\\\\")
        elif c == '"':
            out.append('\\"')
        elif c == "\n":
            out.append("\\n")
        elif c == "\r":
            out.append("\\r")
        elif c == "\t":
            out.append("\\t")
        else:
            out.append(c)
    return "".join(out)


def _check_blank_label(label: str, line: int) -> str:
    if not _BLANK_LABEL.match(label):
        raise ParseError(f"bad blank node label _:{label}", line)
    if label.startswith(RESERVED_BLANK_PREFIX):
        raise ParseError(f"blank node label _:{label} uses a reserved prefix", line)
    return label


# ---------------------------------------------------------------------------
# N-Triples
# ---------------------------------------------------------------------------

_NT_TERM = re.compile(
    r"""\s*(?:
        <(?P<iri>[^<>"\s{}|^`\\]*)>
      | _:(?P<blank>\S+?)(?=[\s.])
      | "(?P<lit>(?:[^"\\]|\\.)*)"
        (?:\^\^<(?P<dt>[^<>\s]*)>|@(?P<lang>[A-Za-z]+(?:-[A-Za-z0-9]+)*))?
    )""",
    re.VERBOSE,
)


def _nt_term(text: str, pos: int, line: int):
    if text[pos:].lstrip().startswith("?"):
        raise ParseError("variables are not allowed in data graphs", line)
    m = _NT_TERM.match(text, pos)
    if not m:
        raise ParseError(f"malformed term near {text[pos:pos + 20]!r}", line)
    if m.group("iri") is not None:
        try:
            term = Iri(m.group("iri"))
        except ValueError as exc:
            raise ParseError(str(exc), line)
    elif m.group("blank") is not None:
        term = BlankNode(_check_blank_label(m.group("blank"), line))
    else:
        lexical = _unescape(m.group("lit"), line)
        if m.group("lang"):
            term = Literal(lexical, RDF_LANG_STRING, m.group("lang"))
        elif m.group("dt"):
            term = Literal(lexical, Iri(m.group("dt")))
        else:
            term = Literal(lexical, XSD_STRING)
    return term, m.end()


def parse_ntriples(text: str) -> Graph:
    """Parse line-oriented N-Triples into a graph; duplicate lines collapse."""
    triples: list[Triple] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        s, pos = _nt_term(raw, 0, lineno)
        p, pos = _nt_term(raw, pos, lineno)
        o, pos = _nt_term(raw, pos, lineno)
        rest = raw[pos:].strip()
        if rest != ".":
            raise ParseError("expected '.' at end of triple", lineno)
        if not isinstance(p, Iri):
            raise ParseError("predicate must be an IRI", lineno)
        if isinstance(s, Literal):
            raise ParseError("literal subjects are not allowed in N-Triples", lineno)
        triples.append(Triple(s, p, o))
    return Graph.of(triples)


def serialize_term_ntriples(term: object) -> str:
    if isinstance(term, Iri):
        return f"<{term.value}>"
    if isinstance(term, BlankNode):
        return f"_:{term.label}"
    if isinstance(term, Literal):
        body = f'"{_escape(term.lexical)}"'
        if term.langtag is not None:
            return f"{body}@{term.langtag}"
        if term.datatype == XSD_STRING:
            return body
        return f"{body}^^<{term.datatype.value}>"
    raise ValidationError(f"cannot serialize {term!r} as N-Triples")


def serialize_ntriples(graph: Graph) -> str:
    """Deterministic N-Triples text; triples appear in canonical term order."""
    lines = []
    for t in graph:
        if any(isinstance(x, Variable) for x in t):
            raise ValidationError("graph contains a variable; only ground graphs serialize")
        if not is_ground_triple(t):
            raise ValidationError("graph contains a non-atomic term")
        lines.append(
            f"{serialize_term_ntriples(t.subject)} "
            f"{serialize_term_ntriples(t.predicate)} "
            f"{serialize_term_ntriples(t.object)} ."
        )
    return "".join(line + "\n" for line in lines)


# ---------------------------------------------------------------------------
# Turtle subset
# ---------------------------------------------------------------------------

class _TurtleScanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def error(self, message: str) -> ParseError:
        return ParseError(message, self.line, self.col)

    def unsupported(self, message: str) -> UnsupportedFeatureError:
        return UnsupportedFeatureError(message, self.line, self.col)

    def _advance(self, n: int) -> None:
        chunk = self.text[self.pos : self.pos + n]
        newlines = chunk.count("\n")
        if newlines:
            self.line += newlines
            self.col = n - chunk.rfind("\n")
        else:
            self.col += n
        self.pos += n

    def skip_ws(self) -> None:
        while self.pos < len(self.text):
            c = self.text[self.pos]
            if c == "#":
                end = self.text.find("\n", self.pos)
                self._advance((end if end != -1 else len(self.text)) - self.pos)
            elif c.isspace():
                self._advance(1)
            else:
                return

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def startswith(self, prefix: str) -> bool:
        return self.text.startswith(prefix, self.pos)

    def take(self, prefix: str) -> bool:
        if self.startswith(prefix):
            self._advance(len(prefix))
            return True
        return False

    def expect(self, prefix: str) -> None:
        if not self.take(prefix):
            raise self.error(f"expected {prefix!r}")

    def take_regex(self, pattern: re.Pattern) -> re.Match | None:
        m = pattern.match(self.text, self.pos)
        if m:
            self._advance(m.end() - self.pos)
        return m

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)


_PNAME = re.compile(r"(?P<prefix>[A-Za-z][A-Za-z0-9_-]*)?:(?P<local>[A-Za-z0-9_][A-Za-z0-9_.-]*|)")
_NUMBER = re.compile(r"[+-]?(?:\d+\.\d+|\d+)")
_BLANK = re.compile(r"_:([A-Za-z0-9_][A-Za-z0-9_.-]*)")
_STRING = re.compile(r'"((?:[^"\\\n]|\\.)*)"')
_LANGTAG = re.compile(r"@([A-Za-z]+(?:-[A-Za-z0-9]+)*)")


class _TurtleParser:
    def __init__(self, text: str):
        self.scanner = _TurtleScanner(text)
        self.prefixes: dict[str, str] = {}
        self.triples: list[Triple] = []

    def parse(self) -> Graph:
        sc = self.scanner
        while not sc.at_end():
            if sc.startswith("@prefix"):
                self._prefix_decl()
            elif sc.startswith("@base") or sc.startswith("@forAll") or sc.startswith("@forSome"):
                raise sc.unsupported("directive is outside the supported Turtle subset")
            elif sc.peek() in "[({":
                raise sc.unsupported(
                    "collections and blank node property lists are not supported"
                )
            else:
                self._triples_block()
        return Graph.of(self.triples)

    def _prefix_decl(self) -> None:
        sc = self.scanner
        sc.expect("@prefix")
        sc.skip_ws()
        m = sc.take_regex(re.compile(r"([A-Za-z][A-Za-z0-9_-]*)?:"))
        if not m:
            raise sc.error("expected prefix name")
        prefix = m.group(1) or ""
        sc.skip_ws()
        iri = self._iriref()
        sc.skip_ws()
        sc.expect(".")
        self.prefixes[prefix] = iri.value

    def _iriref(self) -> Iri:
        sc = self.scanner
        m = sc.take_regex(re.compile(r'<([^<>"\s{}|^`\\]*)>'))
        if not m:
            raise sc.error("expected IRI")
        try:
            return Iri(m.group(1))
        except ValueError as exc:
            raise sc.error(str(exc))

    def _term(self, *, as_predicate: bool = False) -> object:
        sc = self.scanner
        sc.skip_ws()
        c = sc.peek()
        if c == "<":
            return self._iriref()
        if c == "?":
            raise sc.error("variables are not allowed in data graphs")
        if c in "[({":
            raise sc.unsupported("collections and blank node property lists are not supported")
        if c == '"':
            return self._literal()
        if c == "_":
            m = sc.take_regex(_BLANK)
            if not m:
                raise sc.error("malformed blank node")
            return BlankNode(_check_blank_label(m.group(1), sc.line))
        if as_predicate and c == "a" and not _PNAME.match(sc.text, sc.pos):
            m = sc.take_regex(re.compile(r"a(?![A-Za-z0-9_:-])"))
            if m:
                return RDF_TYPE
        m = sc.take_regex(_NUMBER)
        if m:
            lex = m.group(0)
            return Literal(lex, XSD_DECIMAL if "." in lex else XSD_INTEGER)
        if sc.startswith("true") or sc.startswith("false"):
            word = "true" if sc.take("true") else ("false" if sc.take("false") else "")
            if word:
                return Literal(word, XSD_BOOLEAN)
        m = sc.take_regex(_PNAME)
        if m:
            prefix = m.group("prefix") or ""
            if prefix not in self.prefixes:
                raise sc.error(f"undefined prefix {prefix!r}:")
            return Iri(self.prefixes[prefix] + m.group("local"))
        raise sc.error(f"unexpected input near {sc.text[sc.pos:sc.pos + 20]!r}")

    def _literal(self) -> Literal:
        sc = self.scanner
        m = sc.take_regex(_STRING)
        if not m:
            raise sc.error("malformed string literal")
        lexical = _unescape(m.group(1), sc.line)
        if sc.take("^^"):
            dt = self._term(as_predicate=False)
            if not isinstance(dt, Iri):
                raise sc.error("datatype must be an IRI")
            return Literal(lexical, dt)
        lang = sc.take_regex(_LANGTAG)
        if lang:
            return Literal(lexical, RDF_LANG_STRING, lang.group(1))
        return Literal(lexical, XSD_STRING)

    def _triples_block(self) -> None:
        sc = self.scanner
        subject = self._term()
        if isinstance(subject, Literal):
            raise sc.error("literal subjects are not allowed")
        while True:
            sc.skip_ws()
            predicate = self._term(as_predicate=True)
            if not isinstance(predicate, Iri):
                raise sc.error("predicate must be an IRI")
            while True:
                obj = self._term()
                self.triples.append(Triple(subject, predicate, obj))
                sc.skip_ws()
                if not sc.take(","):
                    break
                sc.skip_ws()
            sc.skip_ws()
            if sc.take(";"):
                sc.skip_ws()
                if sc.peek() == ".":  # tolerate trailing ';' before '.'
                    sc.take(".")
                    return
                continue
            sc.expect(".")
            return


def parse_turtle(text: str) -> Graph:
    """Parse the supported Turtle subset into a graph."""
    return _TurtleParser(text).parse()


def load_graph_text(text: str, filename: str = "") -> Graph:
    """Dispatch on extension: .nt parses as N-Triples, anything else as Turtle."""
    if filename.endswith(".nt"):
        return parse_ntriples(text)
    return parse_turtle(text)


def rename_blanks(graph: Graph, suffix: str) -> Graph:
    def rename(term: object) -> object:
        if isinstance(term, BlankNode):
            return BlankNode(term.label + suffix)
        return term

    return Graph.of(Triple(rename(t.subject), rename(t.predicate), rename(t.object)) for t in graph)


def load_graph_files(paths: Iterable[str | Path]) -> Graph:
    """Load and merge data files. With more than one file, blank node labels
    are file-scoped: file k has ``_f<k>`` appended to every label."""
    paths = list(paths)
    merged = Graph.of()
    for k, path in enumerate(paths):
        path = Path(path)
        graph = load_graph_text(path.read_text(encoding="utf-8"), path.name)
        if len(paths) > 1:
            graph = rename_blanks(graph, f"_f{k}")
        merged = merged.union(graph)
    return merged
