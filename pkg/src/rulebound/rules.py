"""Label-rule DSL: parsing, formatting, and crisp evaluation.

A rule file is line oriented; `#` starts a comment and blank lines are
ignored. Each remaining line is one rule:

    A & !B => C | D        implication over label literals
    A & B => FALSE @ 2.5   forbidden conjunction, weight 2.5
    MUTEX(A, B, C)         pairwise-exclusion shorthand

The left side is a conjunction of literals, the right side a disjunction of
literals or the keyword FALSE for an empty one. `!` negates a literal.
`MUTEX(a1, ..., ak)` expands to the k(k-1)/2 rules `ai => !aj` for i < j.
A trailing `@ w` attaches a positive weight (default 1.0); MUTEX rules
inherit it. `MUTEX` and `FALSE` are reserved words and cannot name labels.
Identifiers match [A-Za-z_][A-Za-z0-9_]*. Files are UTF-8 with LF or CRLF.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_RESERVED = ("MUTEX", "FALSE")


# ---- errors ----


class RuleError(ValueError):
    """A rule, rule set, or rule file failed validation."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            message = f"{where}: {message}"
        super().__init__(message)


class RuleSyntaxError(RuleError):
    pass


class EmptyAntecedentError(RuleSyntaxError):
    pass


class UnknownLabelError(RuleError):
    pass


class DuplicateLiteralError(RuleError):
    pass


class InvalidWeightError(RuleError):
    pass


# ---- types ----


class LabelVocabulary:
    """Ordered unique label names; a label's index is its position in `names`."""

    def __init__(self, names: Iterable[str]):
        names = tuple(names)
        if not names:
            raise ValueError("vocabulary needs at least one label")
        seen: set[str] = set()
        for name in names:
            if not isinstance(name, str) or not _IDENT_RE.match(name):
                raise ValueError(f"invalid label identifier: {name!r}")
            if name in _RESERVED:
                raise ValueError(f"{name} is a reserved word and cannot name a label")
            if name in seen:
                raise ValueError(f"duplicate label name: {name}")
            seen.add(name)
        self.names = names
        self.index = {name: i for i, name in enumerate(names)}

    def __len__(self) -> int:
        return len(self.names)

    def __eq__(self, other) -> bool:
        return isinstance(other, LabelVocabulary) and self.names == other.names

    def __hash__(self) -> int:
        return hash(self.names)

    def __repr__(self) -> str:
        return f"LabelVocabulary({list(self.names)!r})"


@dataclass(frozen=True, order=True)
class Literal:
    """One label occurrence, possibly negated."""

    label: int
    negated: bool = False

    def holds(self, value) -> bool:
        return bool(value) != self.negated


@dataclass(frozen=True)
class RuleSource:
    """Where a rule came from in its file."""

    line: int
    text: str


@dataclass(frozen=True)
class Rule:
    """Conjunctive antecedent implying a disjunctive consequent.

    An empty consequent is the constant FALSE: the antecedent literals must
    not all hold at once. `source` carries file provenance and is ignored
    when comparing rules.
    """

    antecedent: tuple[Literal, ...]
    consequent: tuple[Literal, ...] = ()
    weight: float = 1.0
    source: RuleSource | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "antecedent", tuple(self.antecedent))
        object.__setattr__(self, "consequent", tuple(self.consequent))
        object.__setattr__(self, "weight", float(self.weight))
        if not self.antecedent:
            raise EmptyAntecedentError("rule has an empty antecedent")
        for side, lits in (("antecedent", self.antecedent), ("consequent", self.consequent)):
            labels = [lit.label for lit in lits]
            if len(set(labels)) != len(labels):
                raise DuplicateLiteralError(f"a label appears twice in the {side}")
        if not (self.weight > 0 and math.isfinite(self.weight)):
            raise InvalidWeightError(f"rule weight must be positive and finite, got {self.weight}")

    def mentioned_labels(self) -> tuple[int, ...]:
        """Labels the rule touches, in first-appearance order, no repeats."""
        seen = dict.fromkeys(lit.label for lit in self.antecedent + self.consequent)
        return tuple(seen)


@dataclass(frozen=True)
class RuleSet:
    """A vocabulary plus rules whose literals index into it."""

    vocabulary: LabelVocabulary
    rules: tuple[Rule, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        width = len(self.vocabulary)
        for rule in self.rules:
            for lit in rule.antecedent + rule.consequent:
                if not 0 <= lit.label < width:
                    raise RuleError(f"literal index {lit.label} outside vocabulary of size {width}")

    def __len__(self) -> int:
        return len(self.rules)


# ---- lexer ----


_TOKEN_RE = re.compile(
    r"(?P<space>\s+)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<number>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)"
    r"|(?P<arrow>=>)"
    r"|(?P<sym>[!&|(),@])"
)


@dataclass(frozen=True)
class _Token:
    kind: str
    value: str
    column: int  # 1-based


def _lex(line: str, line_no: int) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(line):
        match = _TOKEN_RE.match(line, pos)
        if match is None:
            raise RuleSyntaxError(f"unexpected character {line[pos]!r}", line_no, pos + 1)
        kind = match.lastgroup
        if kind != "space":
            tokens.append(_Token(kind, match.group(), match.start() + 1))
        pos = match.end()
    return tokens


# ---- parser ----


class _LineParser:
    def __init__(self, tokens: list[_Token], line_no: int, line_len: int, resolve):
        self.tokens = tokens
        self.line = line_no
        self.end_column = line_len + 1
        self.resolve = resolve  # (name, line, column) -> label index
        self.pos = 0

    def peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> _Token:
        tok = self.peek()
        self.pos += 1
        return tok

    def fail(self, message: str, tok: _Token | None = None):
        column = tok.column if tok is not None else self.end_column
        raise RuleSyntaxError(message, self.line, column)

    def is_sym(self, value: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == "sym" and tok.value == value

    def parse(self, source: RuleSource) -> list[Rule]:
        first = self.peek()
        second = self.tokens[1] if len(self.tokens) > 1 else None
        if (
            first is not None
            and first.kind == "ident"
            and first.value == "MUTEX"
            and second is not None
            and second.kind == "sym"
            and second.value == "("
        ):
            return self._parse_mutex(source)
        return [self._parse_clause(source)]

    def _parse_name(self, context: str) -> tuple[str, _Token]:
        tok = self.peek()
        if tok is None or tok.kind != "ident":
            self.fail(f"expected a label name {context}", tok)
        if tok.value in _RESERVED:
            self.fail(f"{tok.value} is a reserved word and cannot be used as a label", tok)
        return self.take().value, tok

    def _parse_literal(self, used: set[int], side: str) -> Literal:
        negated = False
        tok = self.peek()
        if self.is_sym("!"):
            self.take()
            negated = True
            tok = self.peek()
        name, tok = self._parse_name("after '!'" if negated else f"in the {side}")
        label = self.resolve(name, self.line, tok.column)
        if label in used:
            raise DuplicateLiteralError(
                f"label {name} appears twice in the {side}", self.line, tok.column
            )
        used.add(label)
        return Literal(label, negated)

    def _parse_weight(self) -> float:
        self.take()  # '@'
        tok = self.peek()
        if tok is None or tok.kind != "number":
            self.fail("expected a weight after '@'", tok)
        self.take()
        value = float(tok.value)
        if not (value > 0 and math.isfinite(value)):
            raise InvalidWeightError(
                f"rule weight must be positive and finite, got {tok.value}", self.line, tok.column
            )
        return value

    def _finish(self) -> float:
        weight = 1.0
        if self.is_sym("@"):
            weight = self._parse_weight()
        tok = self.peek()
        if tok is not None:
            self.fail("unexpected input after the rule", tok)
        return weight

    def _parse_clause(self, source: RuleSource) -> Rule:
        tok = self.peek()
        if tok is not None and tok.kind == "arrow":
            raise EmptyAntecedentError("empty antecedent", self.line, tok.column)
        ant_used: set[int] = set()
        antecedent = [self._parse_literal(ant_used, "antecedent")]
        while self.is_sym("&"):
            self.take()
            antecedent.append(self._parse_literal(ant_used, "antecedent"))
        tok = self.peek()
        if tok is None or tok.kind != "arrow":
            self.fail("expected '=>'", tok)
        self.take()
        consequent: list[Literal] = []
        tok = self.peek()
        if tok is not None and tok.kind == "ident" and tok.value == "FALSE":
            self.take()
        else:
            cons_used: set[int] = set()
            consequent.append(self._parse_literal(cons_used, "consequent"))
            while self.is_sym("|"):
                self.take()
                consequent.append(self._parse_literal(cons_used, "consequent"))
        weight = self._finish()
        return Rule(tuple(antecedent), tuple(consequent), weight, source)

    def _parse_mutex(self, source: RuleSource) -> list[Rule]:
        self.take()  # MUTEX
        self.take()  # '('
        labels: list[int] = []
        used: set[int] = set()
        while True:
            name, tok = self._parse_name("inside MUTEX")
            label = self.resolve(name, self.line, tok.column)
            if label in used:
                raise DuplicateLiteralError(
                    f"label {name} listed twice in MUTEX", self.line, tok.column
                )
            used.add(label)
            labels.append(label)
            if self.is_sym(","):
                self.take()
                continue
            break
        tok = self.peek()
        if tok is None or tok.kind != "sym" or tok.value != ")":
            self.fail("expected ',' or ')' in MUTEX", tok)
        self.take()
        if len(labels) < 2:
            self.fail("MUTEX needs at least two labels", tok)
        weight = self._finish()
        return [
            Rule((Literal(a),), (Literal(b, negated=True),), weight, source)
            for i, a in enumerate(labels)
            for b in labels[i + 1 :]
        ]


def parse_rules(text: str, vocab: LabelVocabulary | None = None) -> RuleSet:
    """Parse rule-file text into a RuleSet.

    With `vocab` given every identifier must already be in it; otherwise the
    vocabulary is built from identifiers in order of first appearance.
    Structurally duplicate rules are kept but warned about.
    """
    fixed = vocab
    order: dict[str, int] = {}

    def resolve(name: str, line: int, column: int) -> int:
        if fixed is not None:
            idx = fixed.index.get(name)
            if idx is None:
                raise UnknownLabelError(f"unknown label {name!r}", line, column)
            return idx
        return order.setdefault(name, len(order))

    rules: list[Rule] = []
    seen_clauses: dict[tuple, int] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]  # strip comments, keep columns
        if not body.strip():
            continue
        tokens = _lex(body, line_no)
        parser = _LineParser(tokens, line_no, len(body), resolve)
        for rule in parser.parse(RuleSource(line_no, raw)):
            key = (tuple(sorted(rule.antecedent)), tuple(sorted(rule.consequent)))
            if key in seen_clauses:
                warnings.warn(
                    f"duplicate rule at line {line_no} "
                    f"(first seen at line {seen_clauses[key]}): {raw.strip()}",
                    stacklevel=2,
                )
            else:
                seen_clauses[key] = line_no
            rules.append(rule)
    if fixed is None:
        if not order:
            raise RuleError("rule text defines no labels and no vocabulary was given")
        vocab = LabelVocabulary(order)
    return RuleSet(vocab, tuple(rules))


# ---- crisp evaluation ----


def _check_binary(arr: np.ndarray, what: str) -> np.ndarray:
    if not ((arr == 0) | (arr == 1)).all():
        raise ValueError(f"{what} entries must be 0 or 1")
    return arr.astype(np.int64)


def _rule_satisfied(rule: Rule, y: np.ndarray) -> bool:
    for lit in rule.antecedent:
        if not lit.holds(y[lit.label]):
            return True
    for lit in rule.consequent:
        if lit.holds(y[lit.label]):
            return True
    return False


def hard_satisfied(rule: Rule, y) -> bool:
    """Crisp semantics: satisfied unless all antecedent literals hold and no consequent literal does."""
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise ValueError(f"label vector must be 1-D, got shape {arr.shape}")
    arr = _check_binary(arr, "label vector")
    top = max(lit.label for lit in rule.antecedent + rule.consequent)
    if top >= arr.shape[0]:
        raise ValueError(f"label vector of length {arr.shape[0]} too short for label index {top}")
    return _rule_satisfied(rule, arr)


def violated_rules(rs: RuleSet, y) -> list[int]:
    """Indices of rules the label vector violates, ascending."""
    arr = np.asarray(y)
    if arr.ndim != 1 or arr.shape[0] != len(rs.vocabulary):
        raise ValueError(
            f"label vector has shape {arr.shape}, expected ({len(rs.vocabulary)},)"
        )
    arr = _check_binary(arr, "label vector")
    return [i for i, rule in enumerate(rs.rules) if not _rule_satisfied(rule, arr)]


def violation_matrix(rs: RuleSet, Y) -> np.ndarray:
    """Boolean matrix (samples x rules), True where a sample's labels violate a rule."""
    arr = np.asarray(Y)
    if arr.ndim != 2 or arr.shape[1] != len(rs.vocabulary):
        raise ValueError(
            f"label matrix has shape {arr.shape}, expected (n, {len(rs.vocabulary)})"
        )
    arr = _check_binary(arr, "label matrix")
    n = arr.shape[0]
    out = np.zeros((n, len(rs.rules)), dtype=bool)
    for r, rule in enumerate(rs.rules):
        ant = np.ones(n, dtype=bool)
        for lit in rule.antecedent:
            ant &= arr[:, lit.label] == (0 if lit.negated else 1)
        cons = np.zeros(n, dtype=bool)
        for lit in rule.consequent:
            cons |= arr[:, lit.label] == (0 if lit.negated else 1)
        out[:, r] = ant & ~cons
    return out


# ---- formatting ----


def format_rule(rule: Rule, vocab: LabelVocabulary) -> str:
    """Canonical text form: literals sorted by label index, weight omitted when 1."""

    def fmt(lit: Literal) -> str:
        return ("!" if lit.negated else "") + vocab.names[lit.label]

    ant = " & ".join(fmt(lit) for lit in sorted(rule.antecedent))
    cons = " | ".join(fmt(lit) for lit in sorted(rule.consequent)) if rule.consequent else "FALSE"
    text = f"{ant} => {cons}"
    if rule.weight != 1.0:
        text += f" @ {rule.weight!r}"
    return text


def reindex_ruleset(rs: RuleSet, vocab: LabelVocabulary) -> RuleSet:
    """Remap rule literals onto `vocab` by label name; the name sets must match."""
    if rs.vocabulary == vocab:
        return rs
    if set(rs.vocabulary.names) != set(vocab.names):
        ours = sorted(set(rs.vocabulary.names) ^ set(vocab.names))
        raise RuleError(f"vocabulary mismatch, labels not shared: {', '.join(ours)}")
    mapping = [vocab.index[name] for name in rs.vocabulary.names]

    def remap(lits: tuple[Literal, ...]) -> tuple[Literal, ...]:
        return tuple(Literal(mapping[lit.label], lit.negated) for lit in lits)

    rules = tuple(
        Rule(remap(r.antecedent), remap(r.consequent), r.weight, r.source) for r in rs.rules
    )
    return RuleSet(vocab, rules)
