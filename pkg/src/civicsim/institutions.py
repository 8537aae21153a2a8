"""Institutional rule grammar: parser, formatter, and compliance evaluator.

Rules follow the five-part institutional-statement form (nested ADICO): a
role filter, a deontic, an aim predicate over one proposal attribute, zero or
more conjunctive conditions, and an optional or-else consequence that is
either a sanction tag or a nested statement (depth at most 3).

Textual form, one statement per line, ``#`` comments::

    A(ProposalDeveloper) D(must) I(green_area_loss <= 0.1) C(zone = hillside) O(mandatory-modification)

Grammar::

    statement   := "A(" role ")" "D(" deontic ")" "I(" predicate ")"
                   {"C(" predicate ")"} ["O(" consequence ")"]
    consequence := "reject-trigger" | "mandatory-modification" | statement
    predicate   := name comparator value
    comparator  := "=" | "!=" | "<" | "<=" | ">" | ">=" | "in"
    value       := number | symbol | "{" value {"," value} "}"

Statements with deontic must/must-not carry exactly one or-else; should/
should-not/may carry none. The parser reports syntax errors with line/column
and the expected token set, and structural rule violations as semantic
diagnostics. The evaluator is pure: same (rules, proposal) in, same report out.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import SchemaError, SimulationError
from .kernel import RoleKind
from .lifecycle import Proposal

MAX_NESTING_DEPTH = 3


class Deontic(Enum):
    MUST = "must"
    MUST_NOT = "must-not"
    SHOULD = "should"
    SHOULD_NOT = "should-not"
    MAY = "may"


class Comparator(Enum):
    EQ = "="
    NE = "!="
    LT = "<"
    LE = "<="
    GT = ">"
    GE = ">="
    IN = "in"


ORDERED_COMPARATORS = {Comparator.LT, Comparator.LE, Comparator.GT, Comparator.GE}


class Sanction(Enum):
    REJECT_TRIGGER = "reject-trigger"
    MANDATORY_MODIFICATION = "mandatory-modification"


class Status(Enum):
    SATISFIED = "satisfied"
    VIOLATED = "violated"
    NOT_APPLICABLE = "not-applicable"


@dataclass(frozen=True)
class NumberValue:
    text: str
    value: float


@dataclass(frozen=True)
class SymbolValue:
    text: str


@dataclass(frozen=True)
class SetValue:
    items: tuple["NumberValue | SymbolValue", ...]


Value = NumberValue | SymbolValue | SetValue


@dataclass(frozen=True)
class Predicate:
    attribute: str
    comparator: Comparator
    value: Value
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Statement:
    role_filter: RoleKind | None  # None means "any"
    deontic: Deontic
    aim: Predicate
    conditions: tuple[Predicate, ...] = ()
    or_else: "Sanction | Statement | None" = None
    line: int = 0
    col: int = 0

    def depth(self) -> int:
        if isinstance(self.or_else, Statement):
            return 1 + self.or_else.depth()
        return 1


@dataclass(frozen=True)
class Modification:
    """An attribute change request derived from a violated aim.

    ``satisfy`` is True when the change should make the predicate hold
    (violated must/should) and False when it should make it fail
    (violated must-not/should-not).
    """

    attribute: str
    comparator: Comparator
    value: Value
    satisfy: bool
    source_id: str


@dataclass
class ComplianceReport:
    per_statement: list[tuple[str, Status]]
    mandatory_mods: list[Modification]
    optional_mods: list[Modification]
    compliance_score: float
    reject_trigger: bool = False


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    line: int
    col: int
    message: str
    expected: tuple[str, ...] = ()

    def render(self) -> str:
        text = f"{self.line}:{self.col}: {self.severity}: {self.message}"
        if self.expected:
            text += f" (expected {', '.join(self.expected)})"
        return text


class RuleError(SimulationError):
    """Syntax or semantic failure while parsing a rule statement."""

    def __init__(self, diagnostic: Diagnostic):
        self.diagnostic = diagnostic
        super().__init__(diagnostic.render())


# -- lexer --------------------------------------------------------------------

_PUNCT = {"(": "LPAREN", ")": "RPAREN", "{": "LBRACE", "}": "RBRACE", ",": "COMMA"}


@dataclass(frozen=True)
class _Token:
    kind: str  # IDENT NUMBER LPAREN RPAREN LBRACE RBRACE COMMA OP EOF
    text: str
    line: int
    col: int


def _lex(text: str, line: int) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        col = i + 1
        if ch in " \t":
            i += 1
            continue
        if ch == "#":
            break
        if ch in _PUNCT:
            tokens.append(_Token(_PUNCT[ch], ch, line, col))
            i += 1
            continue
        if ch in "=<>!":
            if text[i : i + 2] in ("<=", ">=", "!="):
                tokens.append(_Token("OP", text[i : i + 2], line, col))
                i += 2
            elif ch in "=<>":
                tokens.append(_Token("OP", ch, line, col))
                i += 1
            else:
                raise RuleError(
                    Diagnostic("error", line, col, f"stray {ch!r}", expected=("!=",))
                )
            continue
        if ch.isdigit() or (ch in "+-." and i + 1 < n and text[i + 1].isdigit()):
            j = i + 1
            while j < n and (text[j].isdigit() or text[j] in ".eE" or (text[j] in "+-" and text[j - 1] in "eE")):
                j += 1
            lexeme = text[i:j]
            try:
                value = float(lexeme)
            except ValueError:
                raise RuleError(Diagnostic("error", line, col, f"malformed number {lexeme!r}"))
            tokens.append(_Token("NUMBER", lexeme, line, col))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] in "_-"):
                j += 1
            tokens.append(_Token("IDENT", text[i:j], line, col))
            i = j
            continue
        raise RuleError(Diagnostic("error", line, col, f"unexpected character {ch!r}"))
    tokens.append(_Token("EOF", "", line, len(text) + 1))
    return tokens


# -- parser -------------------------------------------------------------------

_ROLE_NAMES = {
    "any": None,
    "ProposalDeveloper": RoleKind.PROPOSAL_DEVELOPER,
    "UrbanPlanner": RoleKind.URBAN_PLANNER,
    "Broadcaster": RoleKind.BROADCASTER,
    "Representative": RoleKind.REPRESENTATIVE,
    "Resident": RoleKind.RESIDENT,
    "MemberOfENGO": RoleKind.MEMBER_OF_ENGO,
    "ProposalReviewer": RoleKind.PROPOSAL_REVIEWER,
    "Activist": RoleKind.ACTIVIST,
}
_ROLE_TEXT = {v: k for k, v in _ROLE_NAMES.items() if v is not None}


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.pos]

    def _fail(self, message: str, expected: tuple[str, ...] = ()) -> RuleError:
        tok = self.current
        shown = message + (f", got {tok.text!r}" if tok.kind != "EOF" else ", got end of line")
        return RuleError(Diagnostic("error", tok.line, tok.col, shown, expected=expected))

    def expect(self, kind: str, text: str | None = None, expected: tuple[str, ...] = ()) -> _Token:
        tok = self.current
        if tok.kind != kind or (text is not None and tok.text != text):
            want = expected or ((text,) if text else (kind.lower(),))
            raise self._fail("unexpected token", expected=want)
        self.pos += 1
        return tok

    def _section(self, letter: str) -> None:
        self.expect("IDENT", letter, expected=(f"{letter}(",))
        self.expect("LPAREN", expected=("(",))

    def parse_statement(self) -> Statement:
        start = self.current
        self._section("A")
        role_tok = self.expect("IDENT", expected=("role name", "any"))
        if role_tok.text not in _ROLE_NAMES:
            raise RuleError(
                Diagnostic(
                    "error",
                    role_tok.line,
                    role_tok.col,
                    f"unknown role {role_tok.text!r}",
                    expected=tuple(sorted(_ROLE_NAMES)),
                )
            )
        role = _ROLE_NAMES[role_tok.text]
        self.expect("RPAREN", expected=(")",))

        self._section("D")
        deontic_tok = self.expect("IDENT", expected=tuple(d.value for d in Deontic))
        try:
            deontic = Deontic(deontic_tok.text)
        except ValueError:
            raise RuleError(
                Diagnostic(
                    "error",
                    deontic_tok.line,
                    deontic_tok.col,
                    f"unknown deontic {deontic_tok.text!r}",
                    expected=tuple(d.value for d in Deontic),
                )
            )
        self.expect("RPAREN", expected=(")",))

        self._section("I")
        aim = self.parse_predicate()
        self.expect("RPAREN", expected=(")",))

        conditions: list[Predicate] = []
        while self.current.kind == "IDENT" and self.current.text == "C":
            self._section("C")
            conditions.append(self.parse_predicate())
            self.expect("RPAREN", expected=(")",))

        or_else: Sanction | Statement | None = None
        if self.current.kind == "IDENT" and self.current.text == "O":
            self._section("O")
            or_else = self.parse_consequence()
            self.expect("RPAREN", expected=(")",))

        return Statement(
            role_filter=role,
            deontic=deontic,
            aim=aim,
            conditions=tuple(conditions),
            or_else=or_else,
            line=start.line,
            col=start.col,
        )

    def parse_consequence(self) -> Sanction | Statement:
        tok = self.current
        if tok.kind == "IDENT" and tok.text in (s.value for s in Sanction):
            self.pos += 1
            return Sanction(tok.text)
        if tok.kind == "IDENT" and tok.text == "A":
            return self.parse_statement()
        raise self._fail(
            "bad consequence",
            expected=("reject-trigger", "mandatory-modification", "A("),
        )

    def parse_predicate(self) -> Predicate:
        name_tok = self.expect("IDENT", expected=("attribute name",))
        op_tok = self.current
        if op_tok.kind == "OP":
            comparator = Comparator(op_tok.text)
            self.pos += 1
        elif op_tok.kind == "IDENT" and op_tok.text == "in":
            comparator = Comparator.IN
            self.pos += 1
        else:
            raise self._fail("bad comparator", expected=("=", "!=", "<", "<=", ">", ">=", "in"))
        value = self.parse_value()
        pred = Predicate(name_tok.text, comparator, value, name_tok.line, name_tok.col)
        if comparator is Comparator.IN and not isinstance(value, SetValue):
            raise RuleError(
                Diagnostic("error", op_tok.line, op_tok.col, "'in' requires a set value")
            )
        if comparator is not Comparator.IN and isinstance(value, SetValue):
            raise RuleError(
                Diagnostic("error", op_tok.line, op_tok.col, f"{comparator.value!r} takes a scalar value")
            )
        if comparator in ORDERED_COMPARATORS and not isinstance(value, NumberValue):
            raise RuleError(
                Diagnostic(
                    "error",
                    op_tok.line,
                    op_tok.col,
                    f"ordered comparator {comparator.value!r} requires a numeric value",
                )
            )
        return pred

    def parse_value(self) -> Value:
        tok = self.current
        if tok.kind == "NUMBER":
            self.pos += 1
            return NumberValue(tok.text, float(tok.text))
        if tok.kind == "IDENT":
            self.pos += 1
            return SymbolValue(tok.text)
        if tok.kind == "LBRACE":
            self.pos += 1
            items: list[NumberValue | SymbolValue] = []
            while True:
                item = self.parse_value()
                if isinstance(item, SetValue):
                    raise self._fail("sets do not nest")
                items.append(item)
                if self.current.kind == "COMMA":
                    self.pos += 1
                    continue
                break
            self.expect("RBRACE", expected=("}", ","))
            return SetValue(tuple(items))
        raise self._fail("bad value", expected=("number", "symbol", "{"))


def _check_semantics(s: Statement) -> None:
    if s.depth() > MAX_NESTING_DEPTH:
        raise RuleError(
            Diagnostic("error", s.line, s.col, f"or-else nesting exceeds depth {MAX_NESTING_DEPTH}")
        )
    if s.deontic in (Deontic.MUST, Deontic.MUST_NOT):
        if s.or_else is None:
            raise RuleError(
                Diagnostic(
                    "error", s.line, s.col, f"{s.deontic.value} statement requires an or-else"
                )
            )
    elif s.or_else is not None:
        raise RuleError(
            Diagnostic(
                "error", s.line, s.col, f"{s.deontic.value} statement must not carry an or-else"
            )
        )
    if isinstance(s.or_else, Statement):
        _check_semantics(s.or_else)


def parse_statement(text: str, line: int = 1) -> Statement:
    """Parse a single statement; raises RuleError with position diagnostics."""
    parser = _Parser(_lex(text, line))
    stmt = parser.parse_statement()
    if parser.current.kind != "EOF":
        raise parser._fail("trailing input after statement", expected=("end of line",))
    _check_semantics(stmt)
    return stmt


def parse_rules_text(text: str) -> tuple[list[Statement], list[Diagnostic]]:
    """Parse a rule file: one statement per non-comment line.

    Returns all successfully parsed statements plus diagnostics (errors for
    unparseable lines, warnings from the contradiction lint).
    """
    statements: list[Statement] = []
    diagnostics: list[Diagnostic] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            statements.append(parse_statement(raw, line=lineno))
        except RuleError as err:
            diagnostics.append(err.diagnostic)
    diagnostics.extend(lint_contradictions(statements))
    return statements, diagnostics


# -- formatter ------------------------------------------------------------------


def format_value(v: Value) -> str:
    if isinstance(v, SetValue):
        return "{" + ", ".join(format_value(item) for item in v.items) + "}"
    return v.text


def format_predicate(p: Predicate) -> str:
    return f"{p.attribute} {p.comparator.value} {format_value(p.value)}"


def format_statement(s: Statement) -> str:
    """Canonical single-space rendering; parse(format(s)) is structurally s."""
    role = "any" if s.role_filter is None else _ROLE_TEXT[s.role_filter]
    parts = [f"A({role})", f"D({s.deontic.value})", f"I({format_predicate(s.aim)})"]
    parts.extend(f"C({format_predicate(c)})" for c in s.conditions)
    if isinstance(s.or_else, Sanction):
        parts.append(f"O({s.or_else.value})")
    elif isinstance(s.or_else, Statement):
        parts.append(f"O({format_statement(s.or_else)})")
    return " ".join(parts)


# -- evaluator ------------------------------------------------------------------


def _check_attribute(p: Proposal, name: str) -> None:
    if name not in p.attributes:
        raise SchemaError(f"rule references attribute {name!r} missing from proposal {p.id}")


def _validate_references(s: Statement, p: Proposal) -> None:
    _check_attribute(p, s.aim.attribute)
    for cond in s.conditions:
        _check_attribute(p, cond.attribute)
    if isinstance(s.or_else, Statement):
        _validate_references(s.or_else, p)


def _scalar_matches(attr_value: float | str, literal: NumberValue | SymbolValue) -> bool:
    if isinstance(literal, NumberValue):
        return isinstance(attr_value, (int, float)) and float(attr_value) == literal.value
    return isinstance(attr_value, str) and attr_value == literal.text


def evaluate_predicate(pred: Predicate, p: Proposal) -> bool:
    """Truth of one predicate against the proposal's attributes."""
    _check_attribute(p, pred.attribute)
    attr_value = p.attributes[pred.attribute]
    if pred.comparator is Comparator.IN:
        assert isinstance(pred.value, SetValue)
        return any(_scalar_matches(attr_value, item) for item in pred.value.items)
    if pred.comparator is Comparator.EQ:
        return _scalar_matches(attr_value, pred.value)
    if pred.comparator is Comparator.NE:
        return not _scalar_matches(attr_value, pred.value)
    # ordered comparators: numeric on both sides
    if not isinstance(attr_value, (int, float)):
        raise SchemaError(
            f"ordered comparator {pred.comparator.value!r} on non-numeric attribute "
            f"{pred.attribute!r}"
        )
    assert isinstance(pred.value, NumberValue)
    bound = pred.value.value
    x = float(attr_value)
    if pred.comparator is Comparator.LT:
        return x < bound
    if pred.comparator is Comparator.LE:
        return x <= bound
    if pred.comparator is Comparator.GT:
        return x > bound
    return x >= bound


def evaluate_statement(s: Statement, p: Proposal, actor_role: RoleKind) -> Status:
    """Status of one statement: applicability gate, then deontic polarity."""
    _validate_references(s, p)
    if s.role_filter is not None and s.role_filter is not actor_role:
        return Status.NOT_APPLICABLE
    for cond in s.conditions:
        if not evaluate_predicate(cond, p):
            return Status.NOT_APPLICABLE
    if s.deontic is Deontic.MAY:
        return Status.SATISFIED
    aim_holds = evaluate_predicate(s.aim, p)
    if s.deontic in (Deontic.MUST, Deontic.SHOULD):
        return Status.SATISFIED if aim_holds else Status.VIOLATED
    return Status.VIOLATED if aim_holds else Status.SATISFIED


def evaluate_ruleset(
    rules: list[Statement],
    p: Proposal,
    actor_role: RoleKind = RoleKind.PROPOSAL_DEVELOPER,
) -> ComplianceReport:
    """Evaluate a ruleset and derive the compliance report.

    Nested or-else statements join the applicable set only when their parent
    is violated. Statements with zero applicable entries yield score 1
    (vacuous compliance, matching the empty-ruleset contract).
    """
    per_statement: list[tuple[str, Status]] = []
    mandatory: list[Modification] = []
    optional: list[Modification] = []
    reject = False

    def visit(stmt: Statement, stmt_id: str) -> None:
        nonlocal reject
        status = evaluate_statement(stmt, p, actor_role)
        per_statement.append((stmt_id, status))
        if status is not Status.VIOLATED:
            return
        mod = Modification(
            attribute=stmt.aim.attribute,
            comparator=stmt.aim.comparator,
            value=stmt.aim.value,
            satisfy=stmt.deontic in (Deontic.MUST, Deontic.SHOULD),
            source_id=stmt_id,
        )
        if stmt.deontic in (Deontic.MUST, Deontic.MUST_NOT):
            mandatory.append(mod)
            if stmt.or_else is Sanction.REJECT_TRIGGER:
                reject = True
            elif isinstance(stmt.or_else, Statement):
                visit(stmt.or_else, stmt_id + ".o")
        else:
            optional.append(mod)

    for index, stmt in enumerate(rules):
        visit(stmt, str(index))

    applicable = sum(1 for _, st in per_statement if st is not Status.NOT_APPLICABLE)
    satisfied = sum(1 for _, st in per_statement if st is Status.SATISFIED)
    score = satisfied / applicable if applicable else 1.0
    return ComplianceReport(
        per_statement=per_statement,
        mandatory_mods=mandatory,
        optional_mods=optional,
        compliance_score=score,
        reject_trigger=reject,
    )


# -- lint -----------------------------------------------------------------------


def lint_contradictions(rules: list[Statement]) -> list[Diagnostic]:
    """Warn on must/must-not pairs with identical aim, filter, and conditions."""
    warnings: list[Diagnostic] = []
    opposing = {Deontic.MUST: Deontic.MUST_NOT, Deontic.MUST_NOT: Deontic.MUST}
    for i, a in enumerate(rules):
        for b in rules[i + 1 :]:
            if opposing.get(a.deontic) is not b.deontic:
                continue
            if a.role_filter is not b.role_filter:
                continue
            if _predicate_key(a.aim) != _predicate_key(b.aim):
                continue
            if sorted(map(_predicate_key, a.conditions)) != sorted(map(_predicate_key, b.conditions)):
                continue
            warnings.append(
                Diagnostic(
                    "warning",
                    b.line,
                    b.col,
                    f"contradicts {a.deontic.value} statement at line {a.line} "
                    f"on aim {format_predicate(a.aim)!r}",
                )
            )
    return warnings


def _predicate_key(p: Predicate) -> tuple:
    return (p.attribute, p.comparator.value, format_value(p.value))
