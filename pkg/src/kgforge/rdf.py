"""In-memory RDF graph model with a Turtle-subset parser and a deterministic serializer.

The accepted grammar is documented in ``docs/turtle-subset.md``.
"""

from __future__ import annotations

import bisect
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Union

RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS = "http://www.w3.org/2000/01/rdf-schema#"
OWL = "http://www.w3.org/2002/07/owl#"
XSD = "http://www.w3.org/2001/XMLSchema#"

STANDARD_PREFIXES = {"owl": OWL, "rdf": RDF, "rdfs": RDFS, "xsd": XSD}

_IRI_FORBIDDEN = re.compile(r'[\s<>"{}|^`\\]')
_BNODE_LABEL = re.compile(r"^[A-Za-z0-9_]+$")
_LANG_TAG = re.compile(r"^[A-Za-z]+(-[A-Za-z0-9]+)*$")
_PREFIX_LABEL = re.compile(r"^[^\s:<>\"]*$")


@dataclass(frozen=True, order=True)
class Iri:
    value: str

    def __post_init__(self) -> None:
        if not self.value or ":" not in self.value or _IRI_FORBIDDEN.search(self.value):
            raise ValueError(f"not an absolute IRI: {self.value!r}")

    def __str__(self) -> str:
        return self.value

    def n3(self) -> str:
        return f"<{self.value}>"

    @property
    def local_name(self) -> str:
        return re.split(r"[#/:]", self.value)[-1]

    @property
    def namespace(self) -> str:
        return self.value[: len(self.value) - len(self.local_name)]


@dataclass(frozen=True, order=True)
class BlankNode:
    label: str

    def __post_init__(self) -> None:
        if not _BNODE_LABEL.match(self.label):
            raise ValueError(f"invalid blank node label: {self.label!r}")

    def n3(self) -> str:
        return f"_:{self.label}"


XSD_STRING = Iri(XSD + "string")
XSD_INTEGER = Iri(XSD + "integer")
XSD_DECIMAL = Iri(XSD + "decimal")
XSD_BOOLEAN = Iri(XSD + "boolean")
RDF_LANGSTRING = Iri(RDF + "langString")
RDF_TYPE = Iri(RDF + "type")


@dataclass(frozen=True, order=True)
class Literal:
    lexical: str
    datatype: Iri = XSD_STRING
    language: Optional[str] = None

    def __post_init__(self) -> None:
        if self.language is not None:
            if not _LANG_TAG.match(self.language):
                raise ValueError(f"invalid language tag: {self.language!r}")
            object.__setattr__(self, "language", self.language.lower())
            if self.datatype == XSD_STRING:
                object.__setattr__(self, "datatype", RDF_LANGSTRING)
            elif self.datatype != RDF_LANGSTRING:
                raise ValueError("language-tagged literals must have datatype rdf:langString")
        elif self.datatype == RDF_LANGSTRING:
            raise ValueError("rdf:langString literal requires a language tag")

    def n3(self) -> str:
        text = '"' + _escape_string(self.lexical) + '"'
        if self.language:
            return f"{text}@{self.language}"
        if self.datatype == XSD_STRING:
            return text
        return f"{text}^^{self.datatype.n3()}"


Term = Union[Iri, BlankNode, Literal]


@dataclass(frozen=True)
class Triple:
    subject: Union[Iri, BlankNode]
    predicate: Iri
    object: Term

    def __post_init__(self) -> None:
        if not isinstance(self.subject, (Iri, BlankNode)):
            raise TypeError("triple subject must be an IRI or blank node")
        if not isinstance(self.predicate, Iri):
            raise TypeError("triple predicate must be an IRI")
        if not isinstance(self.object, (Iri, BlankNode, Literal)):
            raise TypeError("triple object must be an RDF term")

    def __iter__(self):
        return iter((self.subject, self.predicate, self.object))


def term_sort_key(term: Term) -> tuple:
    """Total order over terms: IRIs, then blank nodes, then literals."""
    if isinstance(term, Iri):
        return (0, term.value, "", "")
    if isinstance(term, BlankNode):
        return (1, term.label, "", "")
    return (2, term.lexical, term.datatype.value, term.language or "")


def triple_sort_key(t: Triple) -> tuple:
    return (term_sort_key(t.subject), t.predicate.value, term_sort_key(t.object))


class Graph:
    """A set of triples plus a cosmetic prefix map.

    Equality compares triples only. Blank node labels are compared literally.
    """

    def __init__(self, triples: Iterable[Triple] = (), prefixes: Optional[dict] = None):
        self._triples: set[Triple] = set()
        self.prefixes: dict[str, str] = {}
        for label, ns in (prefixes or {}).items():
            self.bind(label, ns)
        for t in triples:
            self.add(t)

    def bind(self, label: str, namespace: str) -> None:
        if not _PREFIX_LABEL.match(label):
            raise ValueError(f"invalid prefix label: {label!r}")
        Iri(namespace)
        self.prefixes[label] = namespace

    def add(self, triple: Triple) -> None:
        self._triples.add(triple)

    def __len__(self) -> int:
        return len(self._triples)

    def __iter__(self) -> Iterator[Triple]:
        return iter(self._triples)

    def __contains__(self, triple: object) -> bool:
        return triple in self._triples

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self._triples == other._triples

    def __hash__(self) -> int:
        return hash(frozenset(self._triples))

    def __repr__(self) -> str:
        return f"<Graph {len(self)} triples, {len(self.prefixes)} prefixes>"

    @property
    def triples(self) -> frozenset[Triple]:
        return frozenset(self._triples)

    def match(self, subject=None, predicate=None, obj=None) -> Iterator[Triple]:
        for t in self._triples:
            if subject is not None and t.subject != subject:
                continue
            if predicate is not None and t.predicate != predicate:
                continue
            if obj is not None and t.object != obj:
                continue
            yield t

    def objects(self, subject, predicate) -> list[Term]:
        return sorted((t.object for t in self.match(subject, predicate)), key=term_sort_key)

    def subjects(self, predicate, obj) -> list:
        return sorted({t.subject for t in self.match(None, predicate, obj)}, key=term_sort_key)

    def predicates(self) -> set[Iri]:
        return {t.predicate for t in self._triples}

    def copy(self) -> "Graph":
        return Graph(self._triples, self.prefixes)


def graph_union(a: Graph, b: Graph) -> Graph:
    """Set union of triples; prefix clashes in ``b`` get a numeric suffix."""
    out = Graph(a, a.prefixes)
    for t in b:
        out.add(t)
    used_namespaces = set(out.prefixes.values())
    for label in sorted(b.prefixes):
        ns = b.prefixes[label]
        current = out.prefixes.get(label)
        if current == ns:
            continue
        if current is None:
            out.prefixes[label] = ns
            used_namespaces.add(ns)
            continue
        if ns in used_namespaces:
            continue
        n = 1
        while f"{label}{n}" in out.prefixes:
            n += 1
        out.prefixes[f"{label}{n}"] = ns
        used_namespaces.add(ns)
    return out


# ---------------------------------------------------------------- parsing


class TurtleSyntaxError(ValueError):
    def __init__(self, line: int, column: int, message: str):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column
        self.message = message


@dataclass
class _Token:
    kind: str
    value: str
    line: int
    col: int
    extra: dict = field(default_factory=dict)


_PN_CHARS_BASE = r"A-Za-zÀ-ÖØ-öø-˿Ͱ-ͽͿ-῿‌-‍⁰-↏Ⰰ-⿯、-퟿豈-﷏ﷰ-�\U00010000-\U000EFFFF"
_PN_CHARS = _PN_CHARS_BASE + r"_0-9\-·̀-ͯ‿-⁀"
_PNAME = re.compile(
    rf"(?:[{_PN_CHARS_BASE}](?:[{_PN_CHARS}.]*[{_PN_CHARS}])?)?:"
    rf"(?:[{_PN_CHARS_BASE}_:0-9](?:[{_PN_CHARS}.:]*[{_PN_CHARS}:])?)?"
)
_NUMBER = re.compile(r"[+-]?(?:[0-9]+\.[0-9]+|\.[0-9]+|[0-9]+)")
_EXPONENT = re.compile(r"[eE][+-]?[0-9]+")
_LANGTAG_TOKEN = re.compile(r"@[A-Za-z]+(?:-[A-Za-z0-9]+)*")
_BNODE_TOKEN = re.compile(r"_:([A-Za-z0-9_]+)")
_WORD = re.compile(r"[A-Za-z_][A-Za-z0-9_\-]*")

_ECHAR = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}


class _Lexer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self._line_starts = [0] + [m.end() for m in re.finditer("\n", text)]

    def where(self, pos: int) -> tuple[int, int]:
        line = bisect.bisect_right(self._line_starts, pos)
        return line, pos - self._line_starts[line - 1] + 1

    def error(self, message: str, pos: Optional[int] = None) -> TurtleSyntaxError:
        line, col = self.where(self.pos if pos is None else pos)
        return TurtleSyntaxError(line, col, message)

    def _skip_ws(self) -> None:
        text = self.text
        n = len(text)
        while self.pos < n:
            ch = text[self.pos]
            if ch in " \t\r\n":
                self.pos += 1
            elif ch == "#":
                end = text.find("\n", self.pos)
                self.pos = n if end < 0 else end
            else:
                break

    def tokens(self) -> Iterator[_Token]:
        while True:
            self._skip_ws()
            if self.pos >= len(self.text):
                return
            start = self.pos
            tok = self._next(start)
            tok.line, tok.col = self.where(start)
            yield tok

    def _next(self, start: int) -> _Token:
        text = self.text
        ch = text[start]
        if ch == "<":
            return self._iriref(start)
        if ch in "\"'":
            return self._string(start)
        if ch in ".;," and not (ch == "." and text[start + 1 : start + 2].isdigit()):
            self.pos += 1
            return _Token(ch, ch, 0, 0)
        if ch == "^" and text.startswith("^^", start):
            self.pos += 2
            return _Token("^^", "^^", 0, 0)
        if ch == "@":
            m = _LANGTAG_TOKEN.match(text, start)
            if not m:
                raise self.error("malformed '@' directive or language tag")
            self.pos = m.end()
            return _Token("@", m.group()[1:], 0, 0)
        if ch == "_" and text.startswith("_:", start):
            m = _BNODE_TOKEN.match(text, start)
            if not m:
                raise self.error("malformed blank node label")
            self.pos = m.end()
            return _Token("bnode", m.group(1), 0, 0)
        if ch in "+-0123456789" or (ch == "." and start + 1 < len(text) and text[start + 1].isdigit()):
            m = _NUMBER.match(text, start)
            if m:
                if _EXPONENT.match(text, m.end()):
                    raise self.error("double literals are not supported")
                self.pos = m.end()
                kind = "decimal" if "." in m.group() else "integer"
                return _Token(kind, m.group(), 0, 0)
        if ch in "[]()":
            raise self.error(f"unsupported syntax {ch!r} (blank node property lists and collections are excluded)")
        m = _PNAME.match(text, start)
        if m:
            self.pos = m.end()
            prefix, _, local = m.group().partition(":")
            return _Token("pname", m.group(), 0, 0, {"prefix": prefix, "local": local})
        m = _WORD.match(text, start)
        if m:
            self.pos = m.end()
            return _Token("word", m.group(), 0, 0)
        raise self.error(f"unexpected character {ch!r}")

    def _iriref(self, start: int) -> _Token:
        text = self.text
        i = start + 1
        out = []
        while i < len(text):
            ch = text[i]
            if ch == ">":
                self.pos = i + 1
                return _Token("iri", "".join(out), 0, 0)
            if ch == "\\":
                value, i = self._uchar(i)
                out.append(value)
                continue
            if ch in ' \t\r\n<"{}|^`':
                raise self.error(f"illegal character {ch!r} in IRI", i)
            out.append(ch)
            i += 1
        raise self.error("unterminated IRI", start)

    def _uchar(self, i: int) -> tuple[str, int]:
        text = self.text
        kind = text[i + 1 : i + 2]
        width = {"u": 4, "U": 8}.get(kind)
        if width is None:
            raise self.error("invalid escape sequence", i)
        digits = text[i + 2 : i + 2 + width]
        if len(digits) != width or not re.fullmatch(r"[0-9A-Fa-f]+", digits):
            raise self.error("invalid unicode escape", i)
        code = int(digits, 16)
        if code > 0x10FFFF or 0xD800 <= code <= 0xDFFF:
            raise self.error("invalid unicode code point", i)
        return chr(code), i + 2 + width

    def _string(self, start: int) -> _Token:
        text = self.text
        quote = text[start]
        long = text.startswith(quote * 3, start)
        i = start + (3 if long else 1)
        out = []
        while i < len(text):
            ch = text[i]
            if long and text.startswith(quote * 3, i):
                # a long string may end with up to two extra quote characters
                while text.startswith(quote * 4, i):
                    out.append(quote)
                    i += 1
                self.pos = i + 3
                return _Token("string", "".join(out), 0, 0)
            if not long and ch == quote:
                self.pos = i + 1
                return _Token("string", "".join(out), 0, 0)
            if not long and ch in "\r\n":
                raise self.error("newline in single-quoted string", i)
            if ch == "\\":
                nxt = text[i + 1 : i + 2]
                if nxt in _ECHAR:
                    out.append(_ECHAR[nxt])
                    i += 2
                    continue
                value, i = self._uchar(i)
                out.append(value)
                continue
            out.append(ch)
            i += 1
        raise self.error("unterminated string literal", start)


class _Parser:
    def __init__(self, text: str):
        self.lexer = _Lexer(text)
        self._stream = self.lexer.tokens()
        self._buffer: list[_Token] = []
        self.graph = Graph()
        self.prefixes: dict[str, str] = {}

    def peek(self) -> Optional[_Token]:
        if not self._buffer:
            tok = next(self._stream, None)
            if tok is None:
                return None
            self._buffer.append(tok)
        return self._buffer[0]

    def advance(self) -> None:
        self._buffer.pop(0)

    def error(self, message: str, tok: Optional[_Token] = None) -> TurtleSyntaxError:
        tok = tok or self.peek()
        if tok is None:
            return self.lexer.error(message, len(self.lexer.text))
        return TurtleSyntaxError(tok.line, tok.col, message)

    def take(self, what: str = "token") -> _Token:
        tok = self.peek()
        if tok is None:
            raise self.error(f"unexpected end of document, expected {what}")
        self.advance()
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.take(repr(kind))
        if tok.kind != kind:
            raise self.error(f"expected {kind!r}, found {tok.value!r}", tok)
        return tok

    def parse(self) -> Graph:
        while self.peek() is not None:
            tok = self.peek()
            if tok.kind == "@":
                self.directive()
            else:
                self.statement()
        return self.graph

    def directive(self) -> None:
        tok = self.take()
        if tok.value != "prefix":
            raise self.error(f"unsupported directive @{tok.value}", tok)
        name = self.take("prefix name")
        if name.kind != "pname" or name.extra["local"]:
            raise self.error("expected prefix label ending in ':'", name)
        iri_tok = self.expect("iri")
        iri = self._absolute(iri_tok)
        self.expect(".")
        label = name.extra["prefix"]
        self.prefixes[label] = iri.value
        self.graph.prefixes[label] = iri.value

    def statement(self) -> None:
        subject = self.subject()
        while True:
            predicate = self.verb()
            while True:
                self.graph.add(Triple(subject, predicate, self.object()))
                if self.peek() is not None and self.peek().kind == ",":
                    self.advance()
                    continue
                break
            tok = self.take("'.' or ';'")
            if tok.kind == ".":
                return
            if tok.kind != ";":
                raise self.error(f"expected '.', ';' or ',', found {tok.value!r}", tok)
            while self.peek() is not None and self.peek().kind == ";":
                self.advance()
            nxt = self.peek()
            if nxt is not None and nxt.kind == ".":
                self.advance()
                return

    def _absolute(self, tok: _Token) -> Iri:
        try:
            return Iri(tok.value)
        except ValueError:
            raise self.error(f"relative or invalid IRI <{tok.value}>", tok) from None

    def _pname(self, tok: _Token) -> Iri:
        prefix = tok.extra["prefix"]
        if prefix not in self.prefixes:
            raise self.error(f"undefined prefix {prefix + ':'!r}", tok)
        try:
            return Iri(self.prefixes[prefix] + tok.extra["local"])
        except ValueError:
            raise self.error(f"invalid IRI from {tok.value!r}", tok) from None

    def iri(self, tok: _Token) -> Iri:
        if tok.kind == "iri":
            return self._absolute(tok)
        if tok.kind == "pname":
            return self._pname(tok)
        raise self.error(f"expected IRI, found {tok.value!r}", tok)

    def subject(self):
        tok = self.take("subject")
        if tok.kind == "bnode":
            return BlankNode(tok.value)
        if tok.kind in ("iri", "pname"):
            return self.iri(tok)
        raise self.error(f"expected subject, found {tok.value!r}", tok)

    def verb(self) -> Iri:
        tok = self.take("predicate")
        if tok.kind == "word" and tok.value == "a":
            return RDF_TYPE
        if tok.kind in ("iri", "pname"):
            return self.iri(tok)
        raise self.error(f"expected predicate, found {tok.value!r}", tok)

    def object(self) -> Term:
        tok = self.take("object")
        if tok.kind in ("iri", "pname"):
            return self.iri(tok)
        if tok.kind == "bnode":
            return BlankNode(tok.value)
        if tok.kind == "integer":
            return Literal(tok.value, XSD_INTEGER)
        if tok.kind == "decimal":
            return Literal(tok.value, XSD_DECIMAL)
        if tok.kind == "word" and tok.value in ("true", "false"):
            return Literal(tok.value, XSD_BOOLEAN)
        if tok.kind == "string":
            nxt = self.peek()
            if nxt is not None and nxt.kind == "@":
                self.advance()
                return Literal(tok.value, language=nxt.value)
            if nxt is not None and nxt.kind == "^^":
                self.advance()
                dt_tok = self.take("datatype IRI")
                return Literal(tok.value, self.iri(dt_tok))
            return Literal(tok.value)
        raise self.error(f"expected object, found {tok.value!r}", tok)


def parse_turtle(text: str) -> Graph:
    """Parse a Turtle document; any violation rejects the whole document."""
    return _Parser(text).parse()


# ---------------------------------------------------------- serialization

_LOCAL_SAFE = re.compile(r"^(?:[A-Za-z0-9_](?:[A-Za-z0-9_.\-]*[A-Za-z0-9_\-])?)?$")
_INTEGER_LEX = re.compile(r"^[+-]?[0-9]+$")
_DECIMAL_LEX = re.compile(r"^[+-]?[0-9]*\.[0-9]+$")


def _escape_string(s: str) -> str:
    return (
        s.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\r", "\\r")
        .replace("\t", "\\t")
    )


class _Namer:
    def __init__(self, prefixes: dict[str, str]):
        # longest namespace first, ties broken by label
        self.order = sorted(prefixes.items(), key=lambda kv: (-len(kv[1]), kv[0]))

    def iri(self, iri: Iri) -> str:
        for label, ns in self.order:
            if iri.value.startswith(ns):
                local = iri.value[len(ns) :]
                if _LOCAL_SAFE.match(local):
                    return f"{label}:{local}"
        return iri.n3()

    def term(self, term: Term) -> str:
        if isinstance(term, Iri):
            return self.iri(term)
        if isinstance(term, BlankNode):
            return term.n3()
        if term.language is None:
            dt = term.datatype
            if dt == XSD_INTEGER and _INTEGER_LEX.match(term.lexical):
                return term.lexical
            if dt == XSD_DECIMAL and _DECIMAL_LEX.match(term.lexical):
                return term.lexical
            if dt == XSD_BOOLEAN and term.lexical in ("true", "false"):
                return term.lexical
            if dt != XSD_STRING:
                return f'"{_escape_string(term.lexical)}"^^{self.iri(dt)}'
        return term.n3()


def serialize_turtle(graph: Graph) -> str:
    """Deterministic Turtle: sorted prefixes, then one block per subject."""
    namer = _Namer(graph.prefixes)
    lines = [f"@prefix {label}: <{graph.prefixes[label]}> ." for label in sorted(graph.prefixes)]

    by_subject: dict = {}
    for t in graph:
        by_subject.setdefault(t.subject, {}).setdefault(t.predicate, []).append(t.object)

    blocks = []
    for subj_text, subj in sorted((namer.term(s), s) for s in by_subject):
        preds = by_subject[subj]
        pred_items = sorted(
            ((p != RDF_TYPE, "a" if p == RDF_TYPE else namer.iri(p)), p) for p in preds
        )
        parts = []
        for (_, pred_text), p in pred_items:
            objs = sorted(namer.term(o) for o in preds[p])
            parts.append(f"{pred_text} " + " ,\n        ".join(objs))
        blocks.append(subj_text + " " + " ;\n    ".join(parts) + " .")

    out = "\n".join(lines)
    if blocks:
        out = (out + "\n\n" if out else "") + "\n\n".join(blocks)
    return out + "\n" if out else ""
