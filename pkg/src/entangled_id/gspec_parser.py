"""Line-oriented DSL for missing-data graphs, queries and scenarios.

A graph spec is a sequence of statements::

    # comment
    unit 1 {
      covariate C1
      missing Z1 [r2]
      hidden H1
    }
    O.C1 -> Z1[1;r2=1]
    edge Z1[1;r2=1] <-> Z1[1;r2=0]
    ctf_family Z1
    query singleworld (Z1[1;r2=0]) given r1=1, r2=0
    scenario default { n = 1000  seed = 7 }

Terms name vertices: ``O.C1`` covariates, ``H.H1`` hidden variables,
``R_Z1`` (or ``R_1``) indicators, ``Z1[1;r2=0]`` counterfactuals and bare
``Z1`` proxies.  ``Z1[*]`` stands for every counterfactual of ``Z1`` and
``ctf_family Z1`` joins all of them pairwise by bidirected edges.  Edges into
proxies are implied and never written.

Parsing never raises on bad input through :func:`parse_with_diagnostics`;
:func:`parse` raises :class:`ParseError` carrying the diagnostics.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from .errors import InputError
from .graph_model import (
    counterfactual_id,
    indicator_id,
    pattern_key,
    roles_for_decl,
    short_name,
)

__all__ = [
    "CondensedUnrepresentableWarning",
    "Decl",
    "Diagnostic",
    "EdgeStmt",
    "GraphSpec",
    "ParseError",
    "ParseResult",
    "QueryStmt",
    "ScenarioStmt",
    "Span",
    "UnitBlock",
    "normalize_indicator",
    "parse",
    "parse_file",
    "parse_with_diagnostics",
    "serialize",
    "serialize_with_diagnostics",
]


# ---------------------------------------------------------------------------
# tree
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Span:
    """Source location: 1-based line and column plus a character offset/length."""

    line: int
    column: int
    offset: int
    length: int = 0

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    span: Span
    severity: str = "error"
    hint: str | None = None

    def __str__(self) -> str:
        text = f"{self.span}: {self.severity} [{self.code}] {self.message}"
        return text + (f" (hint: {self.hint})" if self.hint else "")


@dataclass(frozen=True)
class Decl:
    kind: str
    name: str
    affectors: tuple[str, ...] = ()
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class UnitBlock:
    unit_id: str
    decls: tuple[Decl, ...]
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class EdgeStmt:
    source: str
    kind: str
    target: str
    span: Span | None = field(default=None, compare=False, repr=False)

    def key(self) -> tuple[str, str, str]:
        return (self.source, self.kind, self.target)


@dataclass(frozen=True)
class QueryStmt:
    kind: str
    counterfactuals: tuple[str, ...]
    given: tuple[tuple[str, int], ...]
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ScenarioStmt:
    name: str
    items: tuple[tuple[str, str], ...]
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class GraphSpec:
    """Normalized parse tree.

    Edges are canonical vertex ids, deduplicated and sorted; bidirected edges
    store their endpoints in sorted order; family shorthands are expanded.
    Spans are kept for diagnostics but ignored by equality.
    """

    units: tuple[UnitBlock, ...] = ()
    edges: tuple[EdgeStmt, ...] = ()
    queries: tuple[QueryStmt, ...] = ()
    scenarios: tuple[ScenarioStmt, ...] = ()

    def vertex_roles(self) -> dict[str, object]:
        out: dict[str, object] = {}
        for unit in self.units:
            for d in unit.decls:
                for vid, role in roles_for_decl(unit.unit_id, d.kind, d.name, d.affectors):
                    out[vid] = role
        return out

    def count_roles(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for role in self.vertex_roles().values():
            counts[role.kind] = counts.get(role.kind, 0) + 1
        return counts

    @property
    def is_empty(self) -> bool:
        return not (self.units or self.edges or self.queries or self.scenarios)


class ParseError(InputError):
    """Raised by :func:`parse` when the text has errors."""

    def __init__(self, diagnostics: Sequence[Diagnostic]):
        self.diagnostics = tuple(diagnostics)
        first = self.diagnostics[0] if self.diagnostics else None
        super().__init__(str(first) if first else "parse failed")


class CondensedUnrepresentableWarning(UserWarning):
    """A counterfactual family could not be written in condensed form."""


@dataclass(frozen=True)
class ParseResult:
    spec: GraphSpec | None
    diagnostics: tuple[Diagnostic, ...]

    @property
    def ok(self) -> bool:
        return self.spec is not None


# ---------------------------------------------------------------------------
# lexer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    span: Span


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\f\v\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nl>\n)
  | (?P<biarrow><->)
  | (?P<arrow>->)
  | (?P<number>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*)
  | (?P<string>"[^"\n]*")
  | (?P<punct>[{}\[\]();,=*:])
    """,
    re.VERBOSE,
)


def _lex(text: str, diags: list[Diagnostic]) -> list[_Tok]:
    tokens: list[_Tok] = []
    pos = 0
    line = 1
    line_start = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            ch = text[pos]
            diags.append(
                Diagnostic("SyntaxError", f"unexpected character {ch!r}", Span(line, pos - line_start + 1, pos, 1))
            )
            pos += 1
            continue
        kind = m.lastgroup or ""
        span = Span(line, pos - line_start + 1, pos, m.end() - pos)
        if kind == "nl":
            tokens.append(_Tok("nl", "\n", span))
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tokens.append(_Tok(kind, m.group(), span))
        pos = m.end()
    tokens.append(_Tok("eof", "", Span(line, pos - line_start + 1, pos, 0)))
    return tokens


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

_NAME_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_]*$")


def normalize_indicator(text: str) -> str | None:
    """Map ``R_Z1``, ``R_1``, ``r1`` or ``rZ1`` to the canonical indicator id."""
    if text.startswith("R_") and len(text) > 2:
        return "R_" + short_name(text[2:])
    if text.startswith("r") and len(text) > 1:
        rest = text[1:]
        if rest.isdigit() or _NAME_RE.match(rest):
            return "R_" + short_name(rest)
    return None


class _Stop(Exception):
    """Abort the current statement after a syntax error."""


@dataclass
class _RawTerm:
    kind: str  # "name", "ctf", "family"
    name: str
    pattern: tuple[tuple[str, int], ...] = ()
    span: Span | None = None


class _Parser:
    def __init__(self, tokens: list[_Tok], diags: list[Diagnostic]):
        self.toks = tokens
        self.i = 0
        self.diags = diags
        self.units: list[UnitBlock] = []
        self.raw_edges: list[tuple[_RawTerm, str, _RawTerm, Span]] = []
        self.families: list[tuple[str, Span]] = []
        self.raw_queries: list[tuple[list[_RawTerm], list[tuple[str, int, Span]], Span]] = []
        self.scenarios: list[ScenarioStmt] = []

    # token helpers ---------------------------------------------------------

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.tok
        return t.kind == kind and (text is None or t.text == text)

    def at_punct(self, text: str) -> bool:
        return self.at("punct", text)

    def error(self, message: str, tok: _Tok | None = None, hint: str | None = None) -> _Stop:
        t = tok or self.tok
        found = "end of input" if t.kind == "eof" else ("end of line" if t.kind == "nl" else repr(t.text))
        self.diags.append(Diagnostic("SyntaxError", f"{message}, found {found}", t.span, hint=hint))
        return _Stop()

    def expect_punct(self, text: str) -> _Tok:
        if not self.at_punct(text):
            raise self.error(f"expected {text!r}")
        return self.advance()

    def expect_ident(self, what: str) -> _Tok:
        if not self.at("ident"):
            raise self.error(f"expected {what}")
        return self.advance()

    def skip_newlines(self) -> None:
        while self.at("nl") or self.at_punct(";"):
            self.advance()

    def recover(self) -> None:
        while not (self.at("nl") or self.at("eof")):
            self.advance()

    def end_statement(self) -> None:
        if self.at("nl") or self.at("eof") or self.at_punct(";"):
            return
        raise self.error("expected end of statement")

    # statements ------------------------------------------------------------

    def parse(self) -> None:
        while True:
            self.skip_newlines()
            if self.at("eof"):
                return
            try:
                self.statement()
            except _Stop:
                self.recover()

    def statement(self) -> None:
        t = self.tok
        if t.kind == "ident" and t.text == "unit":
            self.unit_block()
        elif t.kind == "ident" and t.text == "query":
            self.query()
        elif t.kind == "ident" and t.text == "scenario":
            self.scenario()
        elif t.kind == "ident" and t.text == "ctf_family":
            self.advance()
            name = self.expect_ident("a missing-variable name")
            self.families.append((name.text, name.span))
            self.end_statement()
        else:
            if t.kind == "ident" and t.text == "edge":
                self.advance()
            self.edge()

    def unit_block(self) -> None:
        start = self.advance()
        if self.at("ident") or self.at("number"):
            uid = self.advance()
        else:
            raise self.error("expected a unit id")
        if not re.match(r"^[A-Za-z0-9_]+$", uid.text):
            raise self.error("unit ids are letters, digits and underscores", uid)
        while self.at("nl"):
            self.advance()
        self.expect_punct("{")
        decls: list[Decl] = []
        while True:
            self.skip_newlines()
            if self.at_punct("}"):
                self.advance()
                break
            if self.at("eof"):
                self.error(f"unterminated block for unit {uid.text}", hint="add a closing '}'")
                break
            try:
                decls.append(self.decl())
                if not (self.at("nl") or self.at_punct(";") or self.at_punct("}") or self.at("eof")):
                    raise self.error("expected end of declaration")
            except _Stop:
                while not (self.at("nl") or self.at("eof") or self.at_punct("}")):
                    self.advance()
        self.units.append(UnitBlock(uid.text, tuple(decls), start.span))

    def decl(self) -> Decl:
        kw = self.tok
        if not (kw.kind == "ident" and kw.text in ("covariate", "missing", "hidden", "context")):
            raise self.error("expected 'covariate', 'missing' or 'hidden'")
        self.advance()
        name = self.expect_ident("a variable name")
        if not _NAME_RE.match(name.text) or name.text.startswith("R_"):
            raise self.error("variable names start with a letter, contain no dots and do not start with 'R_'", name)
        affectors: list[str] = []
        if kw.text == "missing" and self.at_punct("["):
            self.advance()
            while True:
                key = self.expect_ident("an affector indicator such as r2")
                ind = normalize_indicator(key.text)
                if ind is None:
                    raise self.error("expected an indicator key such as r2 or R_Z2", key)
                if ind in affectors:
                    raise self.error(f"affector {key.text} listed twice", key)
                affectors.append(ind)
                if self.at_punct(","):
                    self.advance()
                    continue
                self.expect_punct("]")
                break
        return Decl(kw.text, name.text, tuple(sorted(affectors)), name.span)

    def term(self) -> _RawTerm:
        t = self.tok
        if t.kind != "ident":
            raise self.error("expected a vertex term")
        self.advance()
        if not self.at_punct("["):
            return _RawTerm("name", t.text, (), t.span)
        self.advance()
        if self.at_punct("*"):
            self.advance()
            self.expect_punct("]")
            return _RawTerm("family", t.text, (), t.span)
        one = self.tok
        if not (one.kind == "number" and one.text == "1"):
            raise self.error("counterfactuals are written Z[1] or Z[1;r2=0]")
        self.advance()
        pattern: dict[str, int] = {}
        if self.at_punct(";"):
            self.advance()
            while True:
                key = self.expect_ident("a pattern key such as r2")
                ind = normalize_indicator(key.text)
                if ind is None:
                    raise self.error("expected a pattern key such as r2", key)
                self.expect_punct("=")
                val = self.tok
                if not (val.kind == "number" and val.text in ("0", "1")):
                    raise self.error("pattern values are 0 or 1")
                self.advance()
                if ind in pattern:
                    raise self.error(f"pattern key {key.text} repeated", key)
                pattern[ind] = int(val.text)
                if self.at_punct(","):
                    self.advance()
                    continue
                break
        self.expect_punct("]")
        return _RawTerm("ctf", t.text, tuple(sorted(pattern.items())), t.span)

    def edge(self) -> None:
        start = self.tok
        a = self.term()
        if self.at("arrow"):
            kind = "->"
        elif self.at("biarrow"):
            kind = "<->"
        else:
            raise self.error("expected '->' or '<->'")
        self.advance()
        b = self.term()
        self.end_statement()
        self.raw_edges.append((a, kind, b, start.span))

    def query(self) -> None:
        start = self.advance()
        kind = self.expect_ident("a query kind")
        if kind.text != "singleworld":
            raise self.error("the only query kind is 'singleworld'", kind)
        self.expect_punct("(")
        terms: list[_RawTerm] = []
        if not self.at_punct(")"):
            while True:
                terms.append(self.term())
                if self.at_punct(","):
                    self.advance()
                    continue
                break
        self.expect_punct(")")
        kw = self.expect_ident("'given'")
        if kw.text != "given":
            raise self.error("expected 'given'", kw)
        given: list[tuple[str, int, Span]] = []
        while True:
            key = self.expect_ident("an indicator assignment such as r1=1")
            ind = normalize_indicator(key.text)
            if ind is None:
                raise self.error("expected an indicator key such as r1", key)
            self.expect_punct("=")
            val = self.tok
            if not (val.kind == "number" and val.text in ("0", "1")):
                raise self.error("indicator values are 0 or 1")
            self.advance()
            given.append((ind, int(val.text), key.span))
            if self.at_punct(","):
                self.advance()
                continue
            break
        self.end_statement()
        self.raw_queries.append((terms, given, start.span))

    def scenario(self) -> None:
        start = self.advance()
        name = self.expect_ident("a scenario name")
        while self.at("nl"):
            self.advance()
        self.expect_punct("{")
        items: list[tuple[str, str]] = []
        seen: set[str] = set()
        while True:
            self.skip_newlines()
            if self.at_punct("}"):
                self.advance()
                break
            if self.at("eof"):
                raise self.error(f"unterminated scenario {name.text}", hint="add a closing '}'")
            key = self.expect_ident("a scenario key")
            self.expect_punct("=")
            val = self.tok
            if val.kind not in ("number", "ident", "string"):
                raise self.error("expected a number, identifier or quoted string")
            self.advance()
            if key.text in seen:
                self.diags.append(Diagnostic("DuplicateVertex", f"scenario key {key.text!r} repeated", key.span))
            seen.add(key.text)
            items.append((key.text, val.text))
        self.scenarios.append(ScenarioStmt(name.text, tuple(items), start.span))


# ---------------------------------------------------------------------------
# resolution
# ---------------------------------------------------------------------------


def _resolve(p: _Parser, diags: list[Diagnostic]) -> GraphSpec:
    roles: dict[str, object] = {}
    owner_span: dict[str, Span | None] = {}
    missing: dict[str, str] = {}  # name -> unit
    covariates: dict[str, str] = {}
    hidden: dict[str, str] = {}
    units_seen: set[str] = set()
    units = []
    for unit in p.units:
        if unit.unit_id in units_seen:
            diags.append(Diagnostic("DuplicateVertex", f"unit {unit.unit_id} declared twice", unit.span))
        units_seen.add(unit.unit_id)
        for d in unit.decls:
            for vid, role in roles_for_decl(unit.unit_id, d.kind, d.name, d.affectors):
                if vid in roles:
                    diags.append(
                        Diagnostic(
                            "DuplicateVertex",
                            f"vertex {vid} declared twice",
                            d.span,
                            hint=f"first declared at {owner_span[vid]}",
                        )
                    )
                roles[vid] = role
                owner_span[vid] = d.span
            table = {"missing": missing, "covariate": covariates, "hidden": hidden}.get(d.kind)
            if table is not None:
                table.setdefault(d.name, unit.unit_id)
        units.append(UnitBlock(unit.unit_id, tuple(sorted(unit.decls, key=_decl_key)), unit.span))
    indicators = {v for v, r in roles.items() if r.kind == "indicator"}
    for unit in p.units:
        for d in unit.decls:
            for ind in d.affectors:
                if ind not in indicators:
                    diags.append(
                        Diagnostic("UndeclaredReference", f"affector indicator {ind} of {d.name} is not declared", d.span)
                    )

    def members(name: str) -> list[str]:
        return sorted(v for v, r in roles.items() if r.kind == "counterfactual" and r.name == name)

    def resolve(t: _RawTerm) -> list[str] | None:
        if t.kind == "family":
            ms = members(t.name)
            if not ms:
                diags.append(Diagnostic("UndeclaredReference", f"no counterfactuals for {t.name}", t.span))
                return None
            return ms
        if t.kind == "ctf":
            vid = counterfactual_id(t.name, t.pattern)
            if vid not in roles:
                avail = ", ".join(members(t.name)) or "none"
                diags.append(
                    Diagnostic("UndeclaredReference", f"unknown counterfactual {vid}", t.span, hint=f"declared: {avail}")
                )
                return None
            return [vid]
        name = t.name
        cands: list[str] = []
        if name.startswith(("O.", "H.", "W.")):
            cands = [name] if name in roles else []
        elif name.startswith("R_"):
            ind = normalize_indicator(name)
            cands = [ind] if ind in roles else []
        elif name in missing:
            cands = [name]
        else:
            cands = [x for x in ("O." + name, "H." + name) if x in roles]
        if len(cands) != 1:
            msg = f"undeclared vertex {name!r}" if not cands else f"ambiguous vertex {name!r}"
            diags.append(Diagnostic("UndeclaredReference", msg, t.span))
            return None
        return cands

    edges: dict[tuple[str, str, str], EdgeStmt] = {}
    for a, kind, b, span in p.raw_edges:
        ra, rb = resolve(a), resolve(b)
        if ra is None or rb is None:
            continue
        for x in ra:
            for y in rb:
                if x == y:
                    if a.kind == "family" and b.kind == "family":
                        continue
                    diags.append(Diagnostic("SyntaxError", f"self loop on {x}", span))
                    continue
                if kind == "<->" and y < x:
                    x, y = y, x
                edges.setdefault((x, kind, y), EdgeStmt(x, kind, y, span))
    for name, span in p.families:
        ms = members(name)
        if not ms:
            diags.append(Diagnostic("UndeclaredReference", f"no counterfactuals for {name}", span))
            continue
        for i, x in enumerate(ms):
            for y in ms[i + 1 :]:
                edges.setdefault((x, "<->", y), EdgeStmt(x, "<->", y, span))

    queries = []
    for terms, given, span in p.raw_queries:
        ctfs: list[str] = []
        bad = False
        for t in terms:
            r = resolve(t)
            if r is None:
                bad = True
                continue
            for v in r:
                if roles[v].kind != "counterfactual":
                    diags.append(Diagnostic("UndeclaredReference", f"{v} is not a counterfactual", t.span))
                    bad = True
                elif v not in ctfs:
                    ctfs.append(v)
        assignment: dict[str, int] = {}
        for ind, val, kspan in given:
            if ind not in indicators:
                diags.append(Diagnostic("UndeclaredReference", f"unknown indicator {ind}", kspan))
                bad = True
            elif ind in assignment:
                diags.append(Diagnostic("SyntaxError", f"indicator {ind} assigned twice", kspan))
                bad = True
            assignment[ind] = val
        if not bad:
            queries.append(QueryStmt("singleworld", tuple(sorted(ctfs)), tuple(sorted(assignment.items())), span))

    return GraphSpec(
        tuple(sorted(units, key=lambda u: _natural(u.unit_id))),
        tuple(edges[k] for k in sorted(edges)),
        tuple(queries),
        tuple(p.scenarios),
    )


def _natural(text: str) -> tuple:
    return tuple((0, int(t), "") if t.isdigit() else (1, 0, t) for t in re.split(r"(\d+)", text) if t)


_KIND_ORDER = {"covariate": 0, "hidden": 1, "missing": 2, "context": 3}


def _decl_key(d: Decl) -> tuple:
    return (_KIND_ORDER.get(d.kind, 9), _natural(d.name))


# ---------------------------------------------------------------------------
# public parse API
# ---------------------------------------------------------------------------


def parse_with_diagnostics(text: str | bytes) -> ParseResult:
    """Parse ``text``; never raises on malformed input."""
    diags: list[Diagnostic] = []
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            prefix = bytes(text)[: exc.start]
            line = prefix.count(b"\n") + 1
            col = exc.start - (prefix.rfind(b"\n") + 1) + 1
            diags.append(Diagnostic("SyntaxError", f"invalid UTF-8 at byte {exc.start}", Span(line, col, exc.start, 1)))
            return ParseResult(None, tuple(diags))
    if text.startswith("\ufeff"):
        text = " " + text[1:]
    tokens = _lex(text, diags)
    parser = _Parser(tokens, diags)
    parser.parse()
    spec = _resolve(parser, diags)
    errors = [d for d in diags if d.severity == "error"]
    diags.sort(key=lambda d: (d.span.offset, d.code))
    return ParseResult(None if errors else spec, tuple(diags))


def parse(text: str | bytes) -> GraphSpec:
    """Parse ``text`` or raise :class:`ParseError` listing every diagnostic."""
    result = parse_with_diagnostics(text)
    if result.spec is None:
        raise ParseError(result.diagnostics)
    return result.spec


def parse_file(path) -> GraphSpec:
    with open(path, "rb") as fh:
        return parse(fh.read())


# ---------------------------------------------------------------------------
# serializer
# ---------------------------------------------------------------------------


def _decl_text(d: Decl) -> str:
    if d.kind == "missing" and d.affectors:
        keys = ", ".join(pattern_key(a) for a in d.affectors)
        return f"missing {d.name} [{keys}]"
    return f"{d.kind} {d.name}"


def _family_of(vid: str, roles: dict) -> str | None:
    r = roles.get(vid)
    return r.name if r is not None and r.kind == "counterfactual" else None


def _condensable(name: str, members: list[str], edges: Iterable[EdgeStmt]) -> bool:
    mset = set(members)
    internal = {frozenset((e.source, e.target)) for e in edges if e.kind == "<->" and e.source in mset and e.target in mset}
    for i, x in enumerate(members):
        for y in members[i + 1 :]:
            if frozenset((x, y)) not in internal:
                return False
    signature: dict[str, set[tuple[str, str]]] = {m: set() for m in members}
    for e in edges:
        s_in, t_in = e.source in mset, e.target in mset
        if s_in and t_in:
            if e.kind == "->":
                return False
            continue
        if s_in:
            signature[e.source].add(("out" if e.kind == "->" else "bi", e.target))
        elif t_in:
            signature[e.target].add(("in" if e.kind == "->" else "bi", e.source))
    sigs = list(signature.values())
    if any(s != sigs[0] for s in sigs[1:]):
        return False
    # a family member's edge from another collapsed family must also be uniform,
    # which holds because both signatures are compared on expanded ids
    return True


def serialize_with_diagnostics(spec: GraphSpec, style: str = "expanded") -> tuple[str, list[Diagnostic]]:
    """Render ``spec`` deterministically; condensed style also returns fallback warnings."""
    if style not in ("expanded", "condensed"):
        raise ValueError(f"unknown style {style!r}")
    diags: list[Diagnostic] = []
    lines: list[str] = []
    for unit in spec.units:
        lines.append(f"unit {unit.unit_id} {{")
        for d in sorted(unit.decls, key=_decl_key):
            lines.append("  " + _decl_text(d))
        lines.append("}")
    edges = list(spec.edges)
    roles = spec.vertex_roles()
    condensed: set[str] = set()
    if style == "condensed":
        names = sorted({r.name for r in roles.values() if r.kind == "counterfactual"}, key=_natural)
        for name in names:
            ms = sorted(v for v, r in roles.items() if r.kind == "counterfactual" and r.name == name)
            if len(ms) < 2:
                continue
            if _condensable(name, ms, edges):
                condensed.add(name)
            else:
                diags.append(
                    Diagnostic(
                        "CondensedUnrepresentable",
                        f"counterfactuals of {name} have differing edges; written in expanded form",
                        Span(1, 1, 0, 0),
                        severity="warning",
                    )
                )
    out_edges: list[str] = []
    if condensed:
        for name in sorted(condensed, key=_natural):
            lines.append(f"ctf_family {name}")
        seen: set[str] = set()
        for e in edges:
            fs, ft = _family_of(e.source, roles), _family_of(e.target, roles)
            s = f"{fs}[*]" if fs in condensed else e.source
            t = f"{ft}[*]" if ft in condensed else e.target
            if fs in condensed and ft in condensed and fs == ft:
                continue
            text = f"{s} {e.kind} {t}"
            if text not in seen:
                seen.add(text)
                out_edges.append(text)
    else:
        out_edges = [f"{e.source} {e.kind} {e.target}" for e in edges]
    lines.extend(out_edges)
    for q in spec.queries:
        given = ", ".join(f"{pattern_key(k)}={v}" for k, v in q.given)
        lines.append(f"query {q.kind} ({', '.join(q.counterfactuals)}) given {given}")
    for s in spec.scenarios:
        lines.append(f"scenario {s.name} {{")
        for k, v in s.items:
            lines.append(f"  {k} = {v}")
        lines.append("}")
    return ("\n".join(lines) + "\n") if lines else "", diags


def serialize(spec: GraphSpec, style: str = "expanded") -> str:
    """Render ``spec``; families that cannot be condensed trigger a warning."""
    text, diags = serialize_with_diagnostics(spec, style)
    for d in diags:
        warnings.warn(d.message, CondensedUnrepresentableWarning, stacklevel=2)
    return text


def iter_diagnostics(result: ParseResult) -> Iterator[str]:
    for d in result.diagnostics:
        yield str(d)
