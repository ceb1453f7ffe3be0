"""STL formula AST, concrete syntax, and syntactic transformations.

Formulas are immutable trees of frozen dataclasses. The concrete syntax is::

    phi  ::= "true" | "false" | pred | "{" pset "}" | "!" phi | "X" phi
           | "[]" intv? phi | "<>" intv? phi
           | phi "U" intv? phi | phi "R" intv? phi
           | phi "&&" phi | phi "||" phi | phi "->" phi | "(" phi ")"
    intv ::= "_" ("[" | "(") num "," (num | "inf") ("]" | ")")
    pred ::= linexpr rel linexpr | IDENT
    pset ::= clause ("||" clause)*       (empty braces denote the empty set)
    clause ::= "true" | pred ("&&" pred)*

Precedence from tightest: unary, U/R, &&, ||, ->. A missing interval
means [0, inf).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

INF = math.inf
RELATIONS = (">=", ">", "<=", "<")
# Slack used when deciding whether a time difference lies in an interval.
TIME_TOL = 1e-9


class ParseError(ValueError):
    """Syntax or name error in formula text, with 1-based line/column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.message = message
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Interval:
    lower: float = 0.0
    upper: float = INF
    lower_closed: bool = True
    upper_closed: bool = False

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("interval bounds must not be NaN")
        if lo < 0 or math.isinf(lo):
            raise ValueError(f"interval lower bound must be finite and >= 0, got {lo}")
        if lo > hi:
            raise ValueError(f"malformed interval: lower {lo} > upper {hi}")
        if math.isinf(hi):
            object.__setattr__(self, "upper_closed", False)
        if lo == hi and not (self.lower_closed and self.upper_closed):
            raise ValueError("degenerate interval must be closed on both ends")

    @property
    def is_default(self) -> bool:
        return self.lower == 0.0 and self.lower_closed and math.isinf(self.upper)

    def contains(self, d: float) -> bool:
        if self.lower_closed:
            ok_lo = d >= self.lower - TIME_TOL
        else:
            ok_lo = d > self.lower + TIME_TOL
        if math.isinf(self.upper):
            return ok_lo
        if self.upper_closed:
            return ok_lo and d <= self.upper + TIME_TOL
        return ok_lo and d < self.upper - TIME_TOL

    def __str__(self) -> str:
        lb = "[" if self.lower_closed else "("
        rb = "]" if self.upper_closed else ")"
        hi = "inf" if math.isinf(self.upper) else _num(self.upper)
        return f"_{lb}{_num(self.lower)},{hi}{rb}"


@dataclass(frozen=True)
class Predicate:
    """Linear inequality ``sum(coef * channel) rel bound``, or a Boolean channel.

    Coefficients are kept sorted by channel name with zeros dropped, so two
    predicates over the same expression compare equal.
    """

    coeffs: tuple[tuple[str, float], ...] = ()
    relation: str = ">="
    bound: float = 0.0
    channel: str | None = None

    def __post_init__(self):
        if self.channel is not None:
            if self.coeffs:
                raise ValueError("predicate is either linear or a Boolean channel, not both")
            return
        if self.relation not in RELATIONS:
            raise ValueError(f"unknown relation {self.relation!r}")
        merged: dict[str, float] = {}
        for name, c in self.coeffs:
            merged[name] = merged.get(name, 0.0) + float(c)
        object.__setattr__(
            self, "coeffs", tuple(sorted((n, c) for n, c in merged.items() if c != 0.0))
        )
        object.__setattr__(self, "bound", float(self.bound))

    @property
    def is_boolean(self) -> bool:
        return self.channel is not None

    def channels(self) -> tuple[str, ...]:
        if self.channel is not None:
            return (self.channel,)
        return tuple(n for n, _ in self.coeffs)

    def halfspace(self) -> tuple[dict[str, float], float, bool]:
        """Return ``(a, c, strict)`` such that the predicate reads ``a.x >= c``
        (``>`` when strict)."""
        if self.channel is not None:
            return {self.channel: 1.0}, 0.0, False
        a = dict(self.coeffs)
        if self.relation in (">=", ">"):
            return a, self.bound, self.relation == ">"
        return {k: -v for k, v in a.items()}, -self.bound, self.relation == "<"

    def holds(self, point) -> bool:
        if self.channel is not None:
            return point[self.channel] >= 0
        lhs = sum(c * point[n] for n, c in self.coeffs)
        return {
            ">=": lhs >= self.bound,
            ">": lhs > self.bound,
            "<=": lhs <= self.bound,
            "<": lhs < self.bound,
        }[self.relation]

    def __str__(self) -> str:
        if self.channel is not None:
            return self.channel
        if not self.coeffs:
            expr = "0"
        else:
            parts = []
            for k, (name, c) in enumerate(self.coeffs):
                mag = abs(c)
                term = name if mag == 1.0 else f"{_num(mag)}*{name}"
                if k == 0:
                    parts.append(term if c > 0 else f"-{term}")
                else:
                    parts.append(f"+ {term}" if c > 0 else f"- {term}")
            expr = " ".join(parts)
        return f"{expr} {self.relation} {_num(self.bound)}"


@dataclass(frozen=True)
class PredicateSet:
    """Union of conjunctions of predicates (disjunctive normal form)."""

    clauses: tuple[tuple[Predicate, ...], ...]

    def channels(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for clause in self.clauses:
            for p in clause:
                for ch in p.channels():
                    seen.setdefault(ch)
        return tuple(seen)

    def contains(self, point) -> bool:
        return any(all(p.holds(point) for p in clause) for clause in self.clauses)

    def __str__(self) -> str:
        if len(self.clauses) == 1 and len(self.clauses[0]) == 1:
            return str(self.clauses[0][0])
        body = " || ".join(
            " && ".join(str(p) for p in clause) if clause else "true" for clause in self.clauses
        )
        return "{" + body + "}"


# ---------------------------------------------------------------------------
# Formula nodes


class Formula:
    __slots__ = ()

    def __str__(self) -> str:
        return format_formula(self)


@dataclass(frozen=True)
class Top(Formula):
    pass


@dataclass(frozen=True)
class Pred(Formula):
    pset: PredicateSet


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Next(Formula):
    arg: Formula


@dataclass(frozen=True)
class Until(Formula):
    interval: Interval
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Release(Formula):
    interval: Interval
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Eventually(Formula):
    interval: Interval
    arg: Formula


@dataclass(frozen=True)
class Always(Formula):
    interval: Interval
    arg: Formula


CORE_NODES = (Top, Pred, Not, And, Or, Next, Until)
_BINARY = (And, Or, Implies)
_UNTIL_LIKE = (Until, Release)
_UNARY_TEMPORAL = (Eventually, Always)


# Convenience constructors ---------------------------------------------------


def linear(coeffs: dict[str, float], relation: str, bound: float) -> Pred:
    return Pred(PredicateSet(((Predicate(tuple(coeffs.items()), relation, bound),),)))


def atom(channel: str, relation: str, bound: float) -> Pred:
    return linear({channel: 1.0}, relation, bound)


def boolean(channel: str) -> Pred:
    return Pred(PredicateSet(((Predicate(channel=channel),),)))


def conjunction(items: Iterable[Formula]) -> Formula:
    items = list(items)
    if not items:
        return Top()
    out = items[0]
    for f in items[1:]:
        out = And(out, f)
    return out


def children(f: Formula) -> tuple[Formula, ...]:
    if isinstance(f, (Top, Pred)):
        return ()
    if isinstance(f, (Not, Next)):
        return (f.arg,)
    if isinstance(f, _UNARY_TEMPORAL):
        return (f.arg,)
    return (f.left, f.right)


def walk(f: Formula) -> Iterator[Formula]:
    stack = [f]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


# ---------------------------------------------------------------------------
# Syntactic operations


def desugar(f: Formula) -> Formula:
    """Rewrite derived operators into the core {true, pred, !, &&, ||, X, U}."""
    if isinstance(f, (Top, Pred)):
        return f
    if isinstance(f, Not):
        return Not(desugar(f.arg))
    if isinstance(f, Next):
        return Next(desugar(f.arg))
    if isinstance(f, And):
        return And(desugar(f.left), desugar(f.right))
    if isinstance(f, Or):
        return Or(desugar(f.left), desugar(f.right))
    if isinstance(f, Implies):
        return Or(Not(desugar(f.left)), desugar(f.right))
    if isinstance(f, Until):
        return Until(f.interval, desugar(f.left), desugar(f.right))
    if isinstance(f, Release):
        return Not(Until(f.interval, Not(desugar(f.left)), Not(desugar(f.right))))
    if isinstance(f, Eventually):
        return Until(f.interval, Top(), desugar(f.arg))
    if isinstance(f, Always):
        return Not(Until(f.interval, Top(), Not(desugar(f.arg))))
    raise TypeError(f"not a formula: {f!r}")


def formula_horizon(f: Formula) -> float:
    """Seconds of trace needed past the evaluation point (inf if unbounded).

    Next operators are not counted here; see :func:`next_depth`.
    """
    if isinstance(f, (Top, Pred)):
        return 0.0
    if isinstance(f, (Not, Next)):
        return formula_horizon(f.arg)
    if isinstance(f, _BINARY):
        return max(formula_horizon(f.left), formula_horizon(f.right))
    if isinstance(f, _UNTIL_LIKE):
        return f.interval.upper + max(formula_horizon(f.left), formula_horizon(f.right))
    return f.interval.upper + formula_horizon(f.arg)


def next_depth(f: Formula) -> int:
    """Maximum number of nested Next operators along any path."""
    own = 1 if isinstance(f, Next) else 0
    return own + max((next_depth(c) for c in children(f)), default=0)


def free_channels(f: Formula) -> tuple[str, ...]:
    names: set[str] = set()
    for node in walk(f):
        if isinstance(node, Pred):
            names.update(node.pset.channels())
    return tuple(sorted(names))


# ---------------------------------------------------------------------------
# Printing


def _num(x: float) -> str:
    if float(x).is_integer() and abs(x) < 1e16:
        return str(int(x))
    return repr(float(x))


def format_formula(f: Formula) -> str:
    if isinstance(f, Top):
        return "true"
    if isinstance(f, Pred):
        return str(f.pset)
    if isinstance(f, Not):
        return f"!{_wrap(f.arg)}"
    if isinstance(f, Next):
        return f"X {_wrap(f.arg)}"
    if isinstance(f, Always):
        iv = "" if f.interval.is_default else str(f.interval)
        return f"[]{iv} {_wrap(f.arg)}"
    if isinstance(f, Eventually):
        iv = "" if f.interval.is_default else str(f.interval)
        return f"<>{iv} {_wrap(f.arg)}"
    if isinstance(f, _UNTIL_LIKE):
        op = "U" if isinstance(f, Until) else "R"
        iv = "" if f.interval.is_default else str(f.interval)
        return f"{_wrap(f.left)} {op}{iv} {_wrap(f.right)}"
    op = {And: "&&", Or: "||", Implies: "->"}[type(f)]
    return f"{_wrap(f.left)} {op} {_wrap(f.right)}"


def _wrap(f: Formula) -> str:
    if isinstance(f, Top) or (isinstance(f, Pred) and str(f.pset).startswith("{")):
        return format_formula(f)
    if isinstance(f, Pred) and f.pset.clauses[0][0].is_boolean:
        return format_formula(f)
    return f"({format_formula(f)})"


# ---------------------------------------------------------------------------
# Parsing

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<op>\[\]|<>|->|&&|\|\||>=|<=|[<>!()\[\],_*+\-{}])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
    """,
    re.VERBOSE,
)
_KEYWORDS = {"true", "false", "X", "U", "R", "inf"}


@dataclass
class _Tok:
    kind: str  # num, op, ident, kw, eof
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        val = m.group()
        if kind == "ws":
            for k, ch in enumerate(val):
                if ch == "\n":
                    line += 1
                    line_start = pos + k + 1
        else:
            col = pos - line_start + 1
            if kind == "ident" and val in ("U_", "R_"):
                # binary temporal operator immediately followed by its interval
                toks.append(_Tok("kw", val[0], line, col))
                toks.append(_Tok("op", "_", line, col + 1))
                pos = m.end()
                continue
            if kind == "ident" and val in _KEYWORDS:
                kind = "kw"
            toks.append(_Tok(kind, val, line, col))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str, channels: set[str] | None):
        self.toks = _tokenize(text)
        self.pos = 0
        self.channels = channels

    # helpers
    @property
    def cur(self) -> _Tok:
        return self.toks[self.pos]

    def at(self, text: str) -> bool:
        t = self.cur
        return t.kind in ("op", "kw") and t.text == text

    def advance(self) -> _Tok:
        t = self.cur
        self.pos += 1
        return t

    def expect(self, text: str) -> _Tok:
        if not self.at(text):
            self.error(f"expected {text!r}")
        return self.advance()

    def error(self, msg: str, tok: _Tok | None = None):
        t = tok or self.cur
        where = "end of input" if t.kind == "eof" else repr(t.text)
        raise ParseError(f"{msg}, found {where}", t.line, t.col)

    # grammar
    def parse(self) -> Formula:
        f = self.implies()
        if self.cur.kind != "eof":
            self.error("unexpected token")
        return f

    def implies(self) -> Formula:
        left = self.disj()
        if self.at("->"):
            self.advance()
            return Implies(left, self.implies())
        return left

    def disj(self) -> Formula:
        left = self.conj()
        while self.at("||"):
            self.advance()
            left = Or(left, self.conj())
        return left

    def conj(self) -> Formula:
        left = self.until()
        while self.at("&&"):
            self.advance()
            left = And(left, self.until())
        return left

    def until(self) -> Formula:
        left = self.unary()
        if self.at("U") or self.at("R"):
            op = self.advance().text
            iv = self.interval()
            right = self.until()
            return Until(iv, left, right) if op == "U" else Release(iv, left, right)
        return left

    def unary(self) -> Formula:
        if self.at("!"):
            self.advance()
            return Not(self.unary())
        if self.at("X"):
            self.advance()
            return Next(self.unary())
        if self.at("[]"):
            self.advance()
            iv = self.interval()
            return Always(iv, self.unary())
        if self.at("<>"):
            self.advance()
            iv = self.interval()
            return Eventually(iv, self.unary())
        return self.primary()

    def primary(self) -> Formula:
        if self.at("true"):
            self.advance()
            return Top()
        if self.at("false"):
            self.advance()
            return Not(Top())
        if self.at("{"):
            return Pred(self.pset())
        if self.at("("):
            # A parenthesis may open either a sub-formula or a linear
            # expression like "(y)"; only sub-formulas are supported.
            self.advance()
            f = self.implies()
            self.expect(")")
            return f
        if self.cur.kind in ("ident", "num") or self.at("-") or self.at("+"):
            return Pred(PredicateSet(((self.predicate(),),)))
        self.error("expected a formula")

    def interval(self) -> Interval:
        if not self.at("_"):
            return Interval()
        start = self.advance()
        if self.at("["):
            lower_closed = True
        elif self.at("("):
            lower_closed = False
        else:
            self.error("expected '[' or '(' after '_'")
        self.advance()
        lo = self.signed_number()
        self.expect(",")
        if self.at("inf"):
            self.advance()
            hi = INF
        else:
            hi = self.signed_number()
        if self.at("]"):
            upper_closed = True
        elif self.at(")"):
            upper_closed = False
        else:
            self.error("expected ']' or ')'")
        self.advance()
        try:
            return Interval(lo, hi, lower_closed, upper_closed)
        except ValueError as exc:
            raise ParseError(str(exc), start.line, start.col) from None

    def signed_number(self) -> float:
        sign = 1.0
        if self.at("-"):
            self.advance()
            sign = -1.0
        if self.cur.kind != "num":
            self.error("expected a number")
        return sign * float(self.advance().text)

    def pset(self) -> PredicateSet:
        self.expect("{")
        clauses: list[tuple[Predicate, ...]] = []
        if self.at("}"):
            self.advance()
            return PredicateSet(())
        while True:
            if self.at("true"):
                self.advance()
                clauses.append(())
            else:
                clause = [self.predicate()]
                while self.at("&&"):
                    self.advance()
                    clause.append(self.predicate())
                clauses.append(tuple(clause))
            if self.at("||"):
                self.advance()
                continue
            break
        self.expect("}")
        return PredicateSet(tuple(clauses))

    def predicate(self) -> Predicate:
        start = self.cur
        lhs, lconst, n_terms = self.linexpr()
        rel = self.cur.text if self.cur.kind == "op" and self.cur.text in RELATIONS else None
        if rel is None:
            # bare identifier is a Boolean channel reference
            if n_terms == 1 and len(lhs) == 1 and lconst == 0.0 and lhs[0][1] == 1.0 and start.kind == "ident":
                return Predicate(channel=lhs[0][0])
            self.error("expected a relation (>=, >, <=, <)")
        self.advance()
        rhs, rconst, _ = self.linexpr()
        coeffs = list(lhs) + [(n, -c) for n, c in rhs]
        return Predicate(tuple(coeffs), rel, rconst - lconst)

    def linexpr(self) -> tuple[list[tuple[str, float]], float, int]:
        coeffs: list[tuple[str, float]] = []
        const = 0.0
        n = 0
        sign = 1.0
        if self.at("-"):
            self.advance()
            sign = -1.0
        elif self.at("+"):
            self.advance()
        while True:
            name, value = self.term()
            n += 1
            if name is None:
                const += sign * value
            else:
                coeffs.append((name, sign * value))
            if self.at("+"):
                self.advance()
                sign = 1.0
            elif self.at("-"):
                self.advance()
                sign = -1.0
            else:
                return coeffs, const, n

    def term(self) -> tuple[str | None, float]:
        if self.cur.kind == "num":
            value = float(self.advance().text)
            if self.at("*"):
                self.advance()
                return self.ident(), value
            return None, value
        return self.ident(), 1.0

    def ident(self) -> str:
        t = self.cur
        if t.kind != "ident":
            self.error("expected a channel name")
        self.advance()
        if self.channels is not None and t.text not in self.channels:
            raise ParseError(f"unknown channel {t.text!r}", t.line, t.col)
        return t.text


def parse_formula(text: str, space=None) -> Formula:
    """Parse formula text.

    ``space`` is a :class:`stlf.trace.SignalSpace`, an iterable of channel
    names, or None to skip the name check.
    """
    channels = None
    if space is not None:
        names = getattr(space, "names", None)
        channels = set(names() if callable(names) else (names if names is not None else space))
    return _Parser(text, channels).parse()


FormulaLike = Union[Formula, str]
