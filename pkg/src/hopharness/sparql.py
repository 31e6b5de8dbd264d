"""Pragmatic SPARQL subset: parse, split into hops, render, execute.

Supported surface: PREFIX declarations, a single SELECT (DISTINCT allowed)
over a basic graph pattern, FILTER expressions (comparisons against numeric
or date literals, !isLiteral, equality/inequality against an entity), and an
optional ORDER BY ASC|DESC(?v) LIMIT n tail. Anything else is rejected with
the construct name and byte offset.

The `#1` entity marker mirrors the natural-language placeholder: hop
splitting plants it in the second-hop query and substitution replaces it
with a concrete entity before execution.
"""

from __future__ import annotations

import datetime as _dt
import re
from dataclasses import dataclass, replace
from typing import Callable, Iterator, Union

from .errors import SparqlError
from .kg import LiteralValue, TripleStore

MARKER = "#1"

_UNSUPPORTED = {
    "UNION", "OPTIONAL", "GRAPH", "MINUS", "SERVICE", "BIND", "VALUES",
    "ASK", "CONSTRUCT", "DESCRIBE", "INSERT", "DELETE", "EXISTS",
    "GROUP", "HAVING", "OFFSET", "FROM",
}

_COMPARE_OPS = ("<=", ">=", "!=", "=", "<", ">")


@dataclass(frozen=True)
class Variable:
    name: str

    def __str__(self) -> str:
        return f"?{self.name}"


@dataclass(frozen=True)
class Entity:
    token: str

    def __str__(self) -> str:
        return self.token


@dataclass(frozen=True)
class Literal:
    value: LiteralValue

    def __str__(self) -> str:
        if isinstance(self.value, _dt.date):
            return f'"{self.value.isoformat()}"'
        if isinstance(self.value, str):
            escaped = self.value.replace("\\", "\\\\").replace('"', '\\"')
            return f'"{escaped}"'
        return repr(self.value)


Term = Union[Variable, Entity, Literal]


@dataclass(frozen=True)
class TriplePattern:
    subject: Term
    predicate: Term
    object: Term

    def __post_init__(self):
        if isinstance(self.predicate, Literal):
            raise SparqlError("a predicate can never be a literal")
        if isinstance(self.subject, Literal):
            raise SparqlError("a subject can never be a literal")

    def variables(self) -> set[str]:
        return {t.name for t in (self.subject, self.predicate, self.object) if isinstance(t, Variable)}


@dataclass(frozen=True)
class Comparison:
    var: str
    op: str
    literal: Literal

    def __post_init__(self):
        if not isinstance(self.literal.value, (int, float, _dt.date)):
            raise SparqlError("literal comparisons only allow numeric or date literals")


@dataclass(frozen=True)
class NotLiteral:
    var: str


@dataclass(frozen=True)
class NotEqualEntity:
    var: str
    entity: Entity


@dataclass(frozen=True)
class EqualEntity:
    var: str
    entity: Entity


FilterExpr = Union[Comparison, NotLiteral, NotEqualEntity, EqualEntity]


@dataclass(frozen=True)
class Ordering:
    var: str
    direction: str
    limit: int

    def __post_init__(self):
        if self.direction not in ("asc", "desc"):
            raise SparqlError(f"ordering direction must be asc or desc, got {self.direction!r}")
        if self.limit < 1:
            raise SparqlError("LIMIT must be a positive integer")


@dataclass(frozen=True)
class SparqlQuery:
    prefixes: tuple[tuple[str, str], ...]
    select_vars: tuple[str, ...]
    distinct: bool
    patterns: tuple[TriplePattern, ...]
    filters: tuple[FilterExpr, ...]
    ordering: Ordering | None = None


def _filter_var(f: FilterExpr) -> str:
    return f.var


def _validate(query: SparqlQuery) -> SparqlQuery:
    if not query.patterns:
        raise SparqlError("query has no triple patterns")
    pattern_vars: set[str] = set()
    for p in query.patterns:
        pattern_vars |= p.variables()
    for v in query.select_vars:
        if v not in pattern_vars:
            raise SparqlError(f"select variable ?{v} does not appear in any pattern")
    for f in query.filters:
        if _filter_var(f) not in pattern_vars:
            raise SparqlError(f"filter variable ?{_filter_var(f)} does not appear in any pattern")
    if query.ordering and query.ordering.var not in pattern_vars:
        raise SparqlError(f"ordering variable ?{query.ordering.var} does not appear in any pattern")
    return query


# ---------------------------------------------------------------------------
# Tokenizer / parser

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<iri><[^<>"{}|^`\\\s]*>)
  | (?P<marker>\#1)
  | (?P<var>\?[A-Za-z_][A-Za-z0-9_]*)
  | (?P<pname>[A-Za-z_][A-Za-z0-9_\-]*:(?:[A-Za-z0-9_](?:[A-Za-z0-9_.\-]*[A-Za-z0-9_\-])?)?)
  | (?P<number>-?\d+(?:\.\d+)?)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<typetag>\^\^)
  | (?P<op><=|>=|!=|=|<|>|!)
  | (?P<punct>[{}().;,])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    offset: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise SparqlError(f"unexpected character {text[pos]!r}", offset=pos)
        kind = m.lastgroup or ""
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.prefixes: dict[str, str] = {}

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def next(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message: str, tok: _Token | None = None) -> SparqlError:
        tok = tok or self.peek()
        return SparqlError(message, offset=tok.offset)

    def expect_word(self, word: str) -> _Token:
        tok = self.next()
        if tok.kind != "word" or tok.text.upper() != word:
            raise self.error(f"expected {word}, got {tok.text!r}", tok)
        return tok

    def expect_punct(self, punct: str) -> _Token:
        tok = self.next()
        if tok.kind != "punct" or tok.text != punct:
            raise self.error(f"expected {punct!r}, got {tok.text!r}", tok)
        return tok

    def at_word(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "word" and tok.text.upper() == word

    def check_unsupported(self, tok: _Token) -> None:
        if tok.kind == "word" and tok.text.upper() in _UNSUPPORTED:
            raise self.error(f"unsupported construct {tok.text.upper()}", tok)

    def parse(self) -> SparqlQuery:
        while self.at_word("PREFIX"):
            self.next()
            name_tok = self.next()
            if name_tok.kind != "pname" or not name_tok.text.endswith(":"):
                raise self.error("expected a prefix name ending in ':'", name_tok)
            iri_tok = self.next()
            if iri_tok.kind != "iri":
                raise self.error("expected an <IRI> after the prefix name", iri_tok)
            self.prefixes[name_tok.text[:-1]] = iri_tok.text[1:-1]
        first = self.peek()
        self.check_unsupported(first)
        self.expect_word("SELECT")
        distinct = False
        if self.at_word("DISTINCT"):
            self.next()
            distinct = True
        select_vars: list[str] = []
        while self.peek().kind == "var":
            select_vars.append(self.next().text[1:])
        if not select_vars:
            raise self.error("SELECT needs at least one variable")
        self.expect_word("WHERE")
        self.expect_punct("{")
        patterns: list[TriplePattern] = []
        filters: list[FilterExpr] = []
        while True:
            tok = self.peek()
            if tok.kind == "punct" and tok.text == "}":
                self.next()
                break
            if tok.kind == "eof":
                raise self.error("unterminated graph pattern", tok)
            if tok.kind == "punct" and tok.text == "{":
                raise self.error("unsupported construct subquery", tok)
            self.check_unsupported(tok)
            if self.at_word("FILTER"):
                self.next()
                filters.append(self.parse_filter())
            else:
                patterns.append(self.parse_pattern())
            if self.peek().kind == "punct" and self.peek().text == ".":
                self.next()
        ordering = self.parse_ordering()
        tail = self.peek()
        if tail.kind != "eof":
            self.check_unsupported(tail)
            raise self.error(f"unexpected trailing input {tail.text!r}", tail)
        query = SparqlQuery(
            prefixes=tuple(sorted(self.prefixes.items())),
            select_vars=tuple(select_vars),
            distinct=distinct,
            patterns=tuple(patterns),
            filters=tuple(filters),
            ordering=ordering,
        )
        return _validate(query)

    def parse_term(self, *, position: str) -> Term:
        tok = self.next()
        if tok.kind == "var":
            return Variable(tok.text[1:])
        if tok.kind == "marker":
            return Entity(MARKER)
        if tok.kind == "iri":
            return Entity(tok.text)
        if tok.kind == "pname":
            prefix = tok.text.split(":", 1)[0]
            if prefix not in self.prefixes:
                raise self.error(f"unknown prefix {prefix!r}", tok)
            return Entity(tok.text)
        if tok.kind in ("number", "string"):
            if position != "object":
                raise self.error(f"a {position} can never be a literal", tok)
            return Literal(self.literal_value(tok))
        self.check_unsupported(tok)
        raise self.error(f"expected a term, got {tok.text!r}", tok)

    def literal_value(self, tok: _Token) -> LiteralValue:
        if tok.kind == "number":
            return float(tok.text) if "." in tok.text else int(tok.text)
        raw = tok.text[1:-1].replace('\\"', '"').replace("\\\\", "\\")
        if self.peek().kind == "typetag":
            self.next()
            tag = self.next()
            if tag.kind not in ("pname", "iri", "word"):
                raise self.error("expected a datatype after ^^", tag)
        date = _parse_date(raw)
        return date if date is not None else raw

    def parse_pattern(self) -> TriplePattern:
        subject = self.parse_term(position="subject")
        predicate = self.parse_term(position="predicate")
        obj = self.parse_term(position="object")
        return TriplePattern(subject, predicate, obj)

    def parse_filter(self) -> FilterExpr:
        self.expect_punct("(")
        tok = self.peek()
        if tok.kind == "op" and tok.text == "!":
            self.next()
            fn = self.next()
            if fn.kind != "word" or fn.text != "isLiteral":
                raise self.error(f"unsupported filter function {fn.text!r}", fn)
            self.expect_punct("(")
            var_tok = self.next()
            if var_tok.kind != "var":
                raise self.error("expected a variable in isLiteral()", var_tok)
            self.expect_punct(")")
            self.expect_punct(")")
            return NotLiteral(var_tok.text[1:])
        if tok.kind != "var":
            raise self.error(f"expected a variable in FILTER, got {tok.text!r}", tok)
        var = self.next().text[1:]
        op_tok = self.next()
        if op_tok.kind != "op" or op_tok.text not in _COMPARE_OPS:
            raise self.error(f"unsupported filter operator {op_tok.text!r}", op_tok)
        rhs = self.peek()
        if rhs.kind in ("pname", "iri", "marker"):
            entity = self.parse_term(position="object")
            assert isinstance(entity, Entity)
            self.expect_punct(")")
            if op_tok.text == "!=":
                return NotEqualEntity(var, entity)
            if op_tok.text == "=":
                return EqualEntity(var, entity)
            raise self.error(f"operator {op_tok.text} is not supported against an entity", op_tok)
        if rhs.kind not in ("number", "string"):
            raise self.error(f"expected a literal or entity after {op_tok.text}, got {rhs.text!r}", rhs)
        value = self.literal_value(self.next())
        self.expect_punct(")")
        try:
            return Comparison(var, op_tok.text, Literal(value))
        except SparqlError as exc:
            raise self.error(str(exc), rhs) from None

    def parse_ordering(self) -> Ordering | None:
        if not self.at_word("ORDER"):
            return None
        self.next()
        self.expect_word("BY")
        direction = "asc"
        tok = self.next()
        if tok.kind == "word" and tok.text.upper() in ("ASC", "DESC"):
            direction = tok.text.lower()
            self.expect_punct("(")
            var_tok = self.next()
            self.expect_punct(")")
        else:
            var_tok = tok
        if var_tok.kind != "var":
            raise self.error("expected a variable in ORDER BY", var_tok)
        if not self.at_word("LIMIT"):
            raise self.error("ORDER BY requires a LIMIT in this subset")
        self.next()
        limit_tok = self.next()
        if limit_tok.kind != "number" or "." in limit_tok.text or int(limit_tok.text) < 1:
            raise self.error("LIMIT must be a positive integer", limit_tok)
        return Ordering(var_tok.text[1:], direction, int(limit_tok.text))


def _parse_date(raw: str) -> _dt.date | None:
    head = raw[:10]
    if re.fullmatch(r"\d{4}-\d{2}-\d{2}", head) and (len(raw) == 10 or raw[10] in "T "):
        try:
            return _dt.date.fromisoformat(head)
        except ValueError:
            return None
    return None


def parse(text: str) -> SparqlQuery:
    """Parse a query in the supported subset into its AST."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Serialization and pseudo-question rendering

def _term_text(term: Term, entity_text: Callable[[Entity], str]) -> str:
    if isinstance(term, Entity):
        return entity_text(term)
    return str(term)


def _filter_text(f: FilterExpr, entity_text: Callable[[Entity], str]) -> str:
    if isinstance(f, Comparison):
        return f"FILTER ( ?{f.var} {f.op} {f.literal} )"
    if isinstance(f, NotLiteral):
        return f"FILTER ( !isLiteral(?{f.var}) )"
    if isinstance(f, NotEqualEntity):
        return f"FILTER ( ?{f.var} != {entity_text(f.entity)} )"
    return f"FILTER ( ?{f.var} = {entity_text(f.entity)} )"


def _linearize(query: SparqlQuery, entity_text: Callable[[Entity], str], *, with_prefixes: bool) -> str:
    parts: list[str] = []
    if with_prefixes:
        for prefix, iri in query.prefixes:
            parts.append(f"PREFIX {prefix}: <{iri}>")
    head = "SELECT "
    if query.distinct:
        head += "DISTINCT "
    head += " ".join(f"?{v}" for v in query.select_vars) + " WHERE {"
    parts.append(head)
    for p in query.patterns:
        parts.append(
            f"{_term_text(p.subject, entity_text)} {_term_text(p.predicate, entity_text)} "
            f"{_term_text(p.object, entity_text)} ."
        )
    for f in query.filters:
        parts.append(_filter_text(f, entity_text))
    parts.append("}")
    if query.ordering:
        parts.append(
            f"ORDER BY {query.ordering.direction.upper()}(?{query.ordering.var}) LIMIT {query.ordering.limit}"
        )
    return " ".join(parts)


def serialize(query: SparqlQuery) -> str:
    """Deterministic, re-parseable text form of a query."""
    return _linearize(query, lambda e: e.token, with_prefixes=True)


def query_entities(query: SparqlQuery) -> list[Entity]:
    found: list[Entity] = []
    for p in query.patterns:
        for term in (p.subject, p.predicate, p.object):
            if isinstance(term, Entity):
                found.append(term)
    for f in query.filters:
        if isinstance(f, (NotEqualEntity, EqualEntity)):
            found.append(f.entity)
    return found


def _local_name(token: str) -> str:
    inner = token[1:-1] if token.startswith("<") and token.endswith(">") else token
    for sep in ("#", "/", ":"):
        if sep in inner:
            inner = inner.rsplit(sep, 1)[1]
    return inner


def render_pseudo_question(query: SparqlQuery, lexicon) -> str:
    """Linearize a query with entity identifiers replaced by surface names.

    Predicates and the `#1` marker stay verbatim; the PREFIX header is
    dropped. Raises when any subject/object identifier is absent from the
    lexicon, listing every missing identifier.
    """
    predicate_tokens = {p.predicate.token for p in query.patterns if isinstance(p.predicate, Entity)}
    missing: list[str] = []

    def entity_text(entity: Entity) -> str:
        if entity.token == MARKER or entity.token in predicate_tokens:
            return entity.token
        name = lexicon.lookup(entity.token) or lexicon.lookup(_local_name(entity.token))
        if name is None:
            missing.append(entity.token)
            return entity.token
        return name

    rendered = _linearize(query, entity_text, with_prefixes=False)
    if missing:
        raise SparqlError(
            "identifiers missing from the lexicon: " + ", ".join(sorted(set(missing)))
        )
    return rendered


# ---------------------------------------------------------------------------
# Hop splitting

def _components(patterns: tuple[TriplePattern, ...], ignore: str | None) -> list[list[int]]:
    """Connected components of the pattern graph, ignoring one shared variable."""
    n = len(patterns)
    varsets = [p.variables() - ({ignore} if ignore else set()) for p in patterns]
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(n):
        for j in range(i + 1, n):
            if varsets[i] & varsets[j]:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: g[0])


def _group_vars(patterns: tuple[TriplePattern, ...], indices: list[int]) -> set[str]:
    out: set[str] = set()
    for i in indices:
        out |= patterns[i].variables()
    return out


def _replace_var(p: TriplePattern, var: str, term: Term) -> TriplePattern:
    def swap(t: Term) -> Term:
        return term if isinstance(t, Variable) and t.name == var else t

    return TriplePattern(swap(p.subject), swap(p.predicate), swap(p.object))


def _assign(
    query: SparqlQuery,
    hop1_vars: set[str],
    hop2_vars: set[str],
) -> tuple[list[FilterExpr], list[FilterExpr], Ordering | None, Ordering | None]:
    f1: list[FilterExpr] = []
    f2: list[FilterExpr] = []
    for f in query.filters:
        if _filter_var(f) in hop1_vars:
            f1.append(f)
        elif _filter_var(f) in hop2_vars:
            f2.append(f)
        else:
            raise SparqlError(f"filter variable ?{_filter_var(f)} belongs to neither hop")
    o1 = o2 = None
    if query.ordering:
        if query.ordering.var in hop1_vars:
            o1 = query.ordering
        else:
            o2 = query.ordering
    return f1, f2, o1, o2


def split_hops(query: SparqlQuery) -> tuple[SparqlQuery, SparqlQuery]:
    """Split a two-hop query into (hop1, hop2-with-`#1`-marker).

    Composition-style queries split at the single non-answer variable that
    connects the two pattern groups; constraint-intersection queries split
    the groups sharing the answer variable, planting the marker in an
    equality filter so candidate entities can be injected one at a time.
    """
    if len(query.select_vars) != 1:
        raise SparqlError("not multi-hop: expected exactly one select variable")
    answer = query.select_vars[0]
    all_vars = _group_vars(query.patterns, list(range(len(query.patterns))))

    bridges: list[tuple[str, list[int], list[int]]] = []
    for v in sorted(all_vars - {answer}):
        comps = _components(query.patterns, v)
        if len(comps) < 2:
            continue
        hop2_idx: list[int] = []
        hop1_idx: list[int] = []
        ok = True
        for comp in comps:
            group_vars = _group_vars(query.patterns, comp)
            if answer in group_vars:
                hop2_idx.extend(comp)
            elif v in group_vars:
                hop1_idx.extend(comp)
            else:
                ok = False
        if not ok or not hop1_idx or not hop2_idx:
            continue
        if v not in _group_vars(query.patterns, hop2_idx):
            continue
        bridges.append((v, sorted(hop1_idx), sorted(hop2_idx)))

    if len(bridges) > 1:
        names = ", ".join(f"?{b[0]}" for b in bridges)
        raise SparqlError(f"more than one candidate bridge variable: {names}")

    if bridges:
        v, hop1_idx, hop2_idx = bridges[0]
        hop1_patterns = tuple(query.patterns[i] for i in hop1_idx)
        hop2_patterns = tuple(
            _replace_var(query.patterns[i], v, Entity(MARKER)) for i in hop2_idx
        )
        hop1_vars = _group_vars(query.patterns, hop1_idx) | {v}
        hop2_vars = _group_vars(query.patterns, hop2_idx) - {v}
        f1, f2, o1, o2 = _assign(query, hop1_vars, hop2_vars)
        hop1 = SparqlQuery(query.prefixes, (v,), query.distinct, hop1_patterns, tuple(f1), o1)
        hop2 = SparqlQuery(query.prefixes, (answer,), query.distinct, hop2_patterns, tuple(f2), o2)
        return _validate(hop1), _validate(hop2)

    comps = _components(query.patterns, answer)
    if len(comps) == 1:
        raise SparqlError("not multi-hop")
    if len(comps) > 2:
        raise SparqlError(f"more than one candidate split: {len(comps)} constraint groups on ?{answer}")
    for comp in comps:
        if answer not in _group_vars(query.patterns, comp):
            raise SparqlError("not multi-hop: disconnected pattern group")

    first, second = comps
    # The group carrying the ordering or literal-comparison condition is the
    # second hop; otherwise the group with the first pattern is the first hop.
    condition_vars: set[str] = set()
    if query.ordering:
        condition_vars.add(query.ordering.var)
    for f in query.filters:
        if isinstance(f, Comparison):
            condition_vars.add(f.var)
    if condition_vars and condition_vars & (_group_vars(query.patterns, first) - {answer}):
        first, second = second, first

    hop1_patterns = tuple(query.patterns[i] for i in first)
    hop2_patterns = tuple(query.patterns[i] for i in second)
    # Filters on the shared answer variable constrain the candidate set and
    # go to hop1; ordering on the answer variable is a condition and goes to
    # hop2 along with the marker filter.
    hop1_vars = _group_vars(query.patterns, first)
    hop2_vars = _group_vars(query.patterns, second) - {answer}
    f1, f2, o1, o2 = _assign(query, hop1_vars, hop2_vars)
    if query.ordering and query.ordering.var == answer:
        o1, o2 = None, query.ordering
    hop2_filters = tuple(f2) + (EqualEntity(answer, Entity(MARKER)),)
    hop1 = SparqlQuery(query.prefixes, (answer,), query.distinct, hop1_patterns, tuple(f1), o1)
    hop2 = SparqlQuery(query.prefixes, (answer,), query.distinct, hop2_patterns, hop2_filters, o2)
    return _validate(hop1), _validate(hop2)


def has_marker(query: SparqlQuery) -> bool:
    return any(e.token == MARKER for e in query_entities(query))


def substitute_marker(query: SparqlQuery, entity_id: str) -> SparqlQuery:
    """Replace every `#1` marker with a concrete entity identifier."""
    if not has_marker(query):
        raise SparqlError("query has no #1 marker to substitute")
    new_entity = Entity(entity_id)

    def swap_term(t: Term) -> Term:
        return new_entity if isinstance(t, Entity) and t.token == MARKER else t

    patterns = tuple(
        TriplePattern(swap_term(p.subject), swap_term(p.predicate), swap_term(p.object))
        for p in query.patterns
    )
    filters = tuple(
        replace(f, entity=new_entity)
        if isinstance(f, (NotEqualEntity, EqualEntity)) and f.entity.token == MARKER
        else f
        for f in query.filters
    )
    return SparqlQuery(query.prefixes, query.select_vars, query.distinct, patterns, filters, query.ordering)


# ---------------------------------------------------------------------------
# Brute-force execution

def _resolve_entity(store: TripleStore, entity: Entity) -> str | None:
    for candidate in (entity.token, _local_name(entity.token)):
        if candidate in store.names:
            return candidate
    return None


def _resolve_predicate(store: TripleStore, entity: Entity) -> tuple[str, str] | None:
    for candidate in (entity.token, _local_name(entity.token)):
        if candidate in store.relations:
            return "relation", candidate
        if candidate in store.attribute_names:
            return "attribute", candidate
    return None


def _term_lookup(term: Term, row: dict, store: TripleStore):
    """Resolve a term under a binding row: (is_known, value)."""
    if isinstance(term, Variable):
        if term.name in row:
            return True, row[term.name]
        return False, term.name
    if isinstance(term, Entity):
        if term.token == MARKER:
            raise SparqlError("query contains an unsubstituted #1 marker")
        return True, _resolve_entity(store, term)
    return True, term.value


def _match_pattern(pattern: TriplePattern, row: dict, store: TripleStore) -> Iterator[dict]:
    s_known, s_val = _term_lookup(pattern.subject, row, store)
    o_known, o_val = _term_lookup(pattern.object, row, store)

    if isinstance(pattern.predicate, Variable):
        pred_kinds: list[tuple[str, str]] = [("relation", r) for r in sorted(store.relations)]
        pred_kinds += [("attribute", a) for a in sorted(store.attribute_names)]
        pred_var = pattern.predicate.name
        bound = row.get(pred_var)
        if bound is not None:
            pred_kinds = [pk for pk in pred_kinds if pk[1] == bound]
    else:
        resolved = _resolve_predicate(store, pattern.predicate)
        if resolved is None:
            return
        pred_kinds = [resolved]
        pred_var = None

    for kind, name in pred_kinds:
        if kind == "relation":
            if s_known and s_val is None:
                continue
            if s_known and o_known:
                if o_val is not None and o_val in store.objects(s_val, name):
                    yield _extend(row, pred_var, name, None, None, None, None)
            elif s_known:
                for obj in store.objects(s_val, name):
                    yield _extend(row, pred_var, name, None, None, pattern.object, obj)
            elif o_known:
                if o_val is None or not isinstance(o_val, str):
                    continue
                for subj in store.subjects(name, o_val):
                    yield _extend(row, pred_var, name, pattern.subject, subj, None, None)
            else:
                for subj, rel, obj in store.triples:
                    if rel != name:
                        continue
                    yield _extend(row, pred_var, name, pattern.subject, subj, pattern.object, obj)
        else:
            if s_known and s_val is None:
                continue
            records = (
                [(s_val, name, store.attribute(s_val, name))]
                if s_known
                else [(e, a, v) for e, a, v in store.attributes if a == name]
            )
            for entity, _, value in records:
                if value is None:
                    continue
                if o_known:
                    if _literal_eq(o_val, value):
                        yield _extend(row, pred_var, name, None if s_known else pattern.subject, entity, None, None)
                else:
                    yield _extend(
                        row, pred_var, name,
                        None if s_known else pattern.subject, entity,
                        pattern.object, value,
                    )


def _extend(row: dict, pred_var, pred_name, s_term, s_val, o_term, o_val) -> dict:
    new = dict(row)
    if pred_var is not None:
        new[pred_var] = pred_name
    if s_term is not None and isinstance(s_term, Variable):
        new[s_term.name] = s_val
    if o_term is not None and isinstance(o_term, Variable):
        new[o_term.name] = o_val
    return new


def _literal_eq(a, b) -> bool:
    if isinstance(a, bool) or isinstance(b, bool):
        return a is b
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return a == b
    return type(a) is type(b) and a == b


def _apply_filter(f: FilterExpr, row: dict, store: TripleStore) -> bool:
    value = row.get(_filter_var(f))
    if value is None:
        return False
    if isinstance(f, Comparison):
        target = f.literal.value
        if isinstance(value, (int, float)) and isinstance(target, (int, float)):
            pass
        elif isinstance(value, _dt.date) and isinstance(target, _dt.date):
            pass
        else:
            return False
        return {
            "<": value < target,
            "<=": value <= target,
            ">": value > target,
            ">=": value >= target,
            "=": value == target,
            "!=": value != target,
        }[f.op]
    if isinstance(f, NotLiteral):
        return isinstance(value, str)
    resolved = _resolve_entity(store, f.entity)
    if isinstance(f, NotEqualEntity):
        return value != resolved
    return resolved is not None and value == resolved


def _rows(query: SparqlQuery, store: TripleStore) -> list[dict]:
    rows: list[dict] = [{}]
    for pattern in query.patterns:
        rows = [new for row in rows for new in _match_pattern(pattern, row, store)]
        if not rows:
            return []
    return [row for row in rows if all(_apply_filter(f, row, store) for f in query.filters)]


def _order_limit(rows: list[dict], ordering: Ordering | None) -> list[dict]:
    if ordering is None:
        return rows
    keyed = [row for row in rows if ordering.var in row]
    keyed.sort(key=lambda row: row[ordering.var], reverse=ordering.direction == "desc")
    return keyed[: ordering.limit]


def _value_text(value, store: TripleStore) -> str:
    if isinstance(value, str):
        return store.names.get(value, value)
    if isinstance(value, _dt.date):
        return value.isoformat()
    if isinstance(value, float):
        return repr(value)
    return str(value)


def execute(query: SparqlQuery, store: TripleStore) -> set[str]:
    """Exhaustively match the query against the store.

    Results are mapped to surface names; an unbound select variable yields
    the empty set rather than an error.
    """
    if has_marker(query):
        raise SparqlError("query contains an unsubstituted #1 marker")
    rows = _order_limit(_rows(query, store), query.ordering)
    var = query.select_vars[0]
    return {_value_text(row[var], store) for row in rows if var in row}


def compose_hops(hop1: SparqlQuery, hop2: SparqlQuery, store: TripleStore) -> set[str]:
    """Execute hop1, substitute each result into hop2, and combine.

    Ordering and LIMIT belong to the hop that carries them: hop2's ordering
    runs over the union of candidate rows, not per candidate.
    """
    hop1_rows = _order_limit(_rows(hop1, store), hop1.ordering)
    bridge_var = hop1.select_vars[0]
    bridges: list[str] = []
    for row in hop1_rows:
        value = row.get(bridge_var)
        if isinstance(value, str) and value not in bridges:
            bridges.append(value)
    combined: list[dict] = []
    for bridge in bridges:
        grounded = substitute_marker(hop2, bridge)
        combined.extend(_rows(grounded, store))
    combined = _order_limit(combined, hop2.ordering)
    var = hop2.select_vars[0]
    return {_value_text(row[var], store) for row in combined if var in row}
