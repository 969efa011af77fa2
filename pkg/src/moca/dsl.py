"""Line-oriented rule language: parser and canonical serializer.

Rule files (``.moca``) hold one declaration per line:

    document   := { line }
    line       := rule | condition | comment | blank
    comment    := "#" any-text
    condition  := "CONDITION" ident string ":" term { "AND" term }
    term       := "FLAG" ident | ("HIGH" | "LOW") ident
    rule       := "RULE" ident [ string ] ":" [ "IF" ident "THEN" ]
                  ("HIGH" | "LOW") ident "IMPACTS" ident
                  ("POSITIVE" | "NEGATIVE") [ "BECAUSE" string ]
    ident      := letter { letter | digit | "_" }
    string     := '"' { any character except '"' } '"'

Keywords are uppercase, case-sensitive, and reserved (they cannot be used
as identifiers). Files are UTF-8; LF and CRLF are both accepted and LF is
emitted. The parser does no reference resolution: rules may name metrics,
elements, or conditions declared elsewhere, and the knowledge-base loader
reports anything that dangles.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .model import (
    ConditionTerm,
    ContextFlag,
    IDENT_RE,
    ImpactCondition,
    ImpactRule,
    ImpactSign,
    Level,
    MetricPredicate,
    MocaError,
)

KEYWORDS = frozenset({
    "RULE", "CONDITION", "IF", "THEN", "HIGH", "LOW",
    "IMPACTS", "POSITIVE", "NEGATIVE", "BECAUSE", "AND", "FLAG",
})

_IDENT_TOKEN_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*")


@dataclass(frozen=True)
class Comment:
    """A standalone comment line, preserved for round-trip fidelity."""

    text: str


DocumentEntry = ImpactRule | ImpactCondition | Comment


@dataclass(frozen=True)
class ParseError:
    """One positioned syntax error. line and column are 1-based."""

    line: int
    column: int
    message: str
    expected: tuple[str, ...] = ()

    def __str__(self) -> str:
        out = f"{self.line}:{self.column}: {self.message}"
        if self.expected:
            out += f" (expected {', '.join(self.expected)})"
        return out


class RuleSyntaxError(MocaError):
    """Raised by parse(); carries every ParseError found in the source."""

    def __init__(self, errors: tuple[ParseError, ...]):
        self.errors = errors
        head = str(errors[0]) if errors else "syntax error"
        extra = f" (+{len(errors) - 1} more)" if len(errors) > 1 else ""
        super().__init__(head + extra)


@dataclass(frozen=True)
class RuleDocument:
    """Parsed rule file: declarations and comments in source order.

    ``lines`` maps each entry to its 1-based source line; it is excluded
    from equality so that a document and its re-parsed serialization
    compare equal.
    """

    entries: tuple[DocumentEntry, ...] = ()
    lines: tuple[int, ...] = field(default=(), compare=False)

    @property
    def rules(self) -> tuple[ImpactRule, ...]:
        return tuple(e for e in self.entries if isinstance(e, ImpactRule))

    @property
    def conditions(self) -> tuple[ImpactCondition, ...]:
        return tuple(e for e in self.entries if isinstance(e, ImpactCondition))


@dataclass(frozen=True)
class _Token:
    kind: str  # "keyword" | "ident" | "string" | "colon"
    text: str
    column: int

    def describe(self) -> str:
        if self.kind == "keyword":
            return f"keyword '{self.text}'"
        if self.kind == "string":
            return "string"
        if self.kind == "colon":
            return "':'"
        return f"identifier '{self.text}'"


class _LineError(Exception):
    def __init__(self, error: ParseError):
        self.error = error


def _tokenize(text: str, line_no: int) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in " \t":
            i += 1
            continue
        if ch == ":":
            tokens.append(_Token("colon", ":", i + 1))
            i += 1
            continue
        if ch == '"':
            end = text.find('"', i + 1)
            if end < 0:
                raise _LineError(ParseError(line_no, i + 1, "unterminated string", ('"',)))
            tokens.append(_Token("string", text[i + 1:end], i + 1))
            i = end + 1
            continue
        match = _IDENT_TOKEN_RE.match(text, i)
        if match:
            word = match.group(0)
            kind = "keyword" if word in KEYWORDS else "ident"
            tokens.append(_Token(kind, word, i + 1))
            i = match.end()
            continue
        raise _LineError(ParseError(line_no, i + 1, f"unexpected character {ch!r}"))
    return tokens


class _LineParser:
    def __init__(self, tokens: list[_Token], line_no: int, line_len: int):
        self.tokens = tokens
        self.line = line_no
        self.line_len = line_len
        self.pos = 0

    def peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _fail(self, what: str, expected: tuple[str, ...]):
        tok = self.peek()
        if tok is None:
            raise _LineError(ParseError(
                self.line, self.line_len + 1, f"expected {what} before end of line", expected))
        raise _LineError(ParseError(
            self.line, tok.column, f"expected {what}, found {tok.describe()}", expected))

    def ident(self, what: str) -> str:
        tok = self.peek()
        if tok is None or tok.kind != "ident":
            self._fail(what, ("identifier",))
        self.pos += 1
        return tok.text

    def string(self, what: str) -> str:
        tok = self.peek()
        if tok is None or tok.kind != "string":
            self._fail(what, ("string",))
        self.pos += 1
        return tok.text

    def opt_string(self) -> str:
        tok = self.peek()
        if tok is not None and tok.kind == "string":
            self.pos += 1
            return tok.text
        return ""

    def colon(self):
        tok = self.peek()
        if tok is None or tok.kind != "colon":
            self._fail("':'", ("':'",))
        self.pos += 1

    def keyword(self, *names: str) -> str:
        tok = self.peek()
        if tok is None or tok.kind != "keyword" or tok.text not in names:
            self._fail(" or ".join(names), names)
        self.pos += 1
        return tok.text

    def at_keyword(self, *names: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == "keyword" and tok.text in names

    def end(self):
        tok = self.peek()
        if tok is not None:
            raise _LineError(ParseError(
                self.line, tok.column,
                f"expected end of line, found {tok.describe()}", ("end of line",)))


def _parse_rule_line(p: _LineParser) -> ImpactRule:
    rule_id = p.ident("rule identifier")
    title = p.opt_string()
    p.colon()
    condition = None
    if p.at_keyword("IF"):
        p.keyword("IF")
        condition = p.ident("condition identifier")
        p.keyword("THEN")
    stated = p.keyword("HIGH", "LOW")
    metric = p.ident("metric identifier")
    p.keyword("IMPACTS")
    element = p.ident("element identifier")
    sign = p.keyword("POSITIVE", "NEGATIVE")
    rationale = ""
    if p.at_keyword("BECAUSE"):
        p.keyword("BECAUSE")
        rationale = p.string("rationale string")
    p.end()
    return ImpactRule(
        id=rule_id,
        title=title,
        metric=metric,
        stated_level=Level.HIGH if stated == "HIGH" else Level.LOW,
        sign=ImpactSign.POSITIVE if sign == "POSITIVE" else ImpactSign.NEGATIVE,
        element=element,
        condition=condition,
        rationale=rationale,
    )


def _parse_condition_line(p: _LineParser) -> ImpactCondition:
    cond_id = p.ident("condition identifier")
    description = p.string("description string")
    p.colon()
    terms: list[ConditionTerm] = []
    while True:
        kw = p.keyword("FLAG", "HIGH", "LOW")
        if kw == "FLAG":
            terms.append(ContextFlag(p.ident("flag identifier")))
        else:
            metric = p.ident("metric identifier")
            terms.append(MetricPredicate(metric, Level.HIGH if kw == "HIGH" else Level.LOW))
        if not p.at_keyword("AND"):
            break
        p.keyword("AND")
    p.end()
    return ImpactCondition(id=cond_id, description=description, terms=tuple(terms))


def _scan(source: str) -> tuple[list[DocumentEntry], list[int], list[ParseError]]:
    entries: list[DocumentEntry] = []
    lines: list[int] = []
    errors: list[ParseError] = []
    normalized = source.replace("\r\n", "\n")
    for line_no, raw in enumerate(normalized.split("\n"), start=1):
        stripped = raw.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            entries.append(Comment(raw.lstrip()[1:]))
            lines.append(line_no)
            continue
        try:
            tokens = _tokenize(raw, line_no)
            p = _LineParser(tokens, line_no, len(raw))
            if p.at_keyword("RULE"):
                p.keyword("RULE")
                entry = _parse_rule_line(p)
            elif p.at_keyword("CONDITION"):
                p.keyword("CONDITION")
                entry = _parse_condition_line(p)
            else:
                p._fail("RULE, CONDITION, or comment", ("RULE", "CONDITION", "#"))
        except _LineError as exc:
            errors.append(exc.error)
            continue
        entries.append(entry)
        lines.append(line_no)
    return entries, lines, errors


def parse(source: str) -> RuleDocument:
    """Parse rule-language source into a document.

    Raises RuleSyntaxError carrying every positioned ParseError found;
    a bad line never hides errors on the lines after it.
    """
    entries, lines, errors = _scan(source)
    if errors:
        raise RuleSyntaxError(tuple(errors))
    return RuleDocument(entries=tuple(entries), lines=tuple(lines))


def parse_errors(source: str) -> tuple[ParseError, ...]:
    """All syntax errors in the source; empty when it is well-formed."""
    _, _, errors = _scan(source)
    return tuple(errors)


def _emit_string(value: str, what: str) -> str:
    if '"' in value or "\n" in value or "\r" in value:
        raise ValueError(f"{what} cannot contain quotes or line breaks: {value!r}")
    return f'"{value}"'


def _emit_ident(value: str, what: str) -> str:
    if not IDENT_RE.match(value) or value in KEYWORDS:
        raise ValueError(f"{what} is not a serializable identifier: {value!r}")
    return value


def _emit_rule(rule: ImpactRule) -> str:
    head = ["RULE", _emit_ident(rule.id, "rule id")]
    if rule.title:
        head.append(_emit_string(rule.title, "rule title"))
    body = []
    if rule.condition is not None:
        body += ["IF", _emit_ident(rule.condition, "condition reference"), "THEN"]
    body += [
        "HIGH" if rule.stated_level is Level.HIGH else "LOW",
        _emit_ident(rule.metric, "metric reference"),
        "IMPACTS",
        _emit_ident(rule.element, "element reference"),
        "POSITIVE" if rule.sign is ImpactSign.POSITIVE else "NEGATIVE",
    ]
    if rule.rationale:
        body += ["BECAUSE", _emit_string(rule.rationale, "rationale")]
    return " ".join(head) + ": " + " ".join(body)


def _emit_term(term: ConditionTerm) -> str:
    if isinstance(term, ContextFlag):
        return f"FLAG {_emit_ident(term.flag, 'flag')}"
    keyword = "HIGH" if term.level is Level.HIGH else "LOW"
    return f"{keyword} {_emit_ident(term.metric, 'metric reference')}"


def _emit_condition(cond: ImpactCondition) -> str:
    head = (f"CONDITION {_emit_ident(cond.id, 'condition id')} "
            f"{_emit_string(cond.description, 'condition description')}")
    return head + ": " + " AND ".join(_emit_term(t) for t in cond.terms)


def serialize(doc: RuleDocument) -> str:
    """Render a document back to rule-language text.

    Output is deterministic, LF-terminated, and re-parses to a document
    equal to the input. Raises ValueError if an entry cannot be expressed
    in the grammar (e.g. a string containing a double quote).
    """
    out = []
    for entry in doc.entries:
        if isinstance(entry, Comment):
            if "\n" in entry.text or "\r" in entry.text:
                raise ValueError(f"comment cannot contain line breaks: {entry.text!r}")
            out.append(f"#{entry.text}")
        elif isinstance(entry, ImpactCondition):
            out.append(_emit_condition(entry))
        elif isinstance(entry, ImpactRule):
            out.append(_emit_rule(entry))
        else:
            raise ValueError(f"unsupported document entry: {entry!r}")
    return "\n".join(out) + ("\n" if out else "")
