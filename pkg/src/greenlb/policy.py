"""Load-balancer policy expressions: parsing, evaluation, server selection.

A policy is a small arithmetic expression that is evaluated once per server
for every incoming request; the request is delegated to the server with the
highest value.  The language has no variables or control flow.  Leaves read
the observable state of one server (queue size, power state, the power and
transition-time constants), or produce numbers: integer literals, a fresh
uniform random draw, and named design parameters via ``dspace("name")``.
Operators are ``+ - * / mod`` plus unary minus and parentheses.

Ties between servers are broken by a non-determinism resolution mode: either
a fresh random fraction per server, or a fixed fraction ``id / numServers``
that always favours the highest server id among equals.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

__all__ = [
    "PolicyError",
    "PolicySyntaxError",
    "UnknownIdentifierError",
    "EvaluationError",
    "UndefinedDesignParamError",
    "PowerState",
    "NdResolution",
    "ServerSnapshot",
    "PolicyExpr",
    "Id",
    "NumServers",
    "QueueSize",
    "StateOn",
    "StateSleep",
    "StateSuspend",
    "StateWakeup",
    "PowerOn",
    "PowerSleep",
    "PowerSuspend",
    "PowerWakeup",
    "TimeWakeup",
    "TimeSuspend",
    "TimeOutTime",
    "IntLit",
    "Random",
    "DSpace",
    "Neg",
    "Add",
    "Sub",
    "Mul",
    "Div",
    "Mod",
    "parse_policy",
    "pretty_print",
    "format_ast",
    "evaluate",
    "compile_policy",
    "select_server",
]


class PolicyError(Exception):
    """Base class for all policy-language errors."""


class PolicySyntaxError(PolicyError):
    """Raised when policy text cannot be parsed; carries line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class UnknownIdentifierError(PolicySyntaxError):
    """Raised for an identifier that is not part of the policy vocabulary."""


class EvaluationError(PolicyError):
    """Raised when evaluating an expression fails (division or mod by zero)."""


class UndefinedDesignParamError(PolicyError):
    """Raised when ``dspace("name")`` names a parameter the run does not define."""


class PowerState(enum.Enum):
    """The four mutually exclusive power states of a server."""

    ON = "on"
    SUSPEND = "suspend"
    SLEEP = "sleep"
    WAKEUP = "wakeup"


class NdResolution(enum.Enum):
    """How ties between equally preferred servers are resolved."""

    RANDOM_FRACTION = "random"
    FIXED_ORDER = "fixed_order"


@dataclass(frozen=True, slots=True)
class ServerSnapshot:
    """Observable state of one server at the instant a request arrives.

    ``queue_size`` counts queued requests plus the one in service, if any.
    The power and time constants are per-server copies so a policy can be
    evaluated against a snapshot with no other context.
    """

    id: int
    num_servers: int
    queue_size: int
    power_state: PowerState
    power_on: float = 200.0
    power_sleep: float = 14.0
    power_suspend: float = 200.0
    power_wakeup: float = 200.0
    time_wakeup: float = 10.0
    time_suspend: float = 10.0
    timeout_time: float = 10.0
    design_params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.id < self.num_servers:
            raise ValueError(f"server id {self.id} out of range for {self.num_servers} servers")
        if self.queue_size < 0:
            raise ValueError("queue_size must be non-negative")
        for name in ("power_on", "power_sleep", "power_suspend", "power_wakeup",
                     "time_wakeup", "time_suspend", "timeout_time"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


# --- AST ---------------------------------------------------------------

class PolicyExpr:
    """Base class for policy AST nodes. Nodes are immutable and comparable."""

    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Id(PolicyExpr):
    pass


@dataclass(frozen=True, slots=True)
class NumServers(PolicyExpr):
    pass


@dataclass(frozen=True, slots=True)
class QueueSize(PolicyExpr):
    pass


@dataclass(frozen=True, slots=True)
class StateOn(PolicyExpr):
    pass


@dataclass(frozen=True, slots=True)
class StateSleep(PolicyExpr):
    pass


@dataclass(frozen=True, slots=True)
class StateSuspend(PolicyExpr):
    pass


@dataclass(frozen=True, slots=True)
class StateWakeup(PolicyExpr):
    pass


@dataclass(frozen=True, slots=True)
class PowerOn(PolicyExpr):
    pass


@dataclass(frozen=True, slots=True)
class PowerSleep(PolicyExpr):
    pass


@dataclass(frozen=True, slots=True)
class PowerSuspend(PolicyExpr):
    pass


@dataclass(frozen=True, slots=True)
class PowerWakeup(PolicyExpr):
    pass


@dataclass(frozen=True, slots=True)
class TimeWakeup(PolicyExpr):
    pass


@dataclass(frozen=True, slots=True)
class TimeSuspend(PolicyExpr):
    pass


@dataclass(frozen=True, slots=True)
class TimeOutTime(PolicyExpr):
    pass


@dataclass(frozen=True, slots=True)
class IntLit(PolicyExpr):
    value: int


@dataclass(frozen=True, slots=True)
class Random(PolicyExpr):
    pass


@dataclass(frozen=True, slots=True)
class DSpace(PolicyExpr):
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("dspace parameter name must be non-empty")


@dataclass(frozen=True, slots=True)
class Neg(PolicyExpr):
    operand: PolicyExpr


@dataclass(frozen=True, slots=True)
class Add(PolicyExpr):
    left: PolicyExpr
    right: PolicyExpr


@dataclass(frozen=True, slots=True)
class Sub(PolicyExpr):
    left: PolicyExpr
    right: PolicyExpr


@dataclass(frozen=True, slots=True)
class Mul(PolicyExpr):
    left: PolicyExpr
    right: PolicyExpr


@dataclass(frozen=True, slots=True)
class Div(PolicyExpr):
    left: PolicyExpr
    right: PolicyExpr


@dataclass(frozen=True, slots=True)
class Mod(PolicyExpr):
    left: PolicyExpr
    right: PolicyExpr


# The id leaf is accepted in both spellings; `ID` is the canonical one.
_TERMINALS: dict[str, PolicyExpr] = {
    "ID": Id(),
    "id": Id(),
    "numServers": NumServers(),
    "queueSize": QueueSize(),
    "stateOn": StateOn(),
    "stateSleep": StateSleep(),
    "stateSuspend": StateSuspend(),
    "stateWakeup": StateWakeup(),
    "powerOn": PowerOn(),
    "powerSleep": PowerSleep(),
    "powerSuspend": PowerSuspend(),
    "powerWakeup": PowerWakeup(),
    "timeWakeup": TimeWakeup(),
    "timeSuspend": TimeSuspend(),
    "timeOutTime": TimeOutTime(),
    "random": Random(),
}


# --- Lexer / parser ----------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<int>[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"[^"\n]*")
  | (?P<op>[-+*/()])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True, slots=True)
class _Token:
    kind: str  # "int" | "ident" | "string" | "op" | "eof"
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, line_start = 1, 0
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise PolicySyntaxError(
                f"unexpected character {text[pos]!r}", line, pos - line_start + 1
            )
        kind = m.lastgroup
        if kind == "newline":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tokens.append(_Token(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    tokens.append(_Token("eof", "", line, len(text) - line_start + 1))
    return tokens


class _Parser:
    """Recursive-descent parser.

    Precedence, loosest to tightest: (+ -), (* / mod), unary minus.  Binary
    operators are left-associative; parentheses group.
    """

    def __init__(self, tokens: list[_Token]):
        self._tokens = tokens
        self._pos = 0

    def _peek(self) -> _Token:
        return self._tokens[self._pos]

    def _next(self) -> _Token:
        tok = self._tokens[self._pos]
        self._pos += 1
        return tok

    def _expect_op(self, op: str) -> None:
        tok = self._next()
        if tok.kind != "op" or tok.text != op:
            raise PolicySyntaxError(
                f"expected {op!r}, found {tok.text!r}" if tok.kind != "eof"
                else f"expected {op!r}, found end of input",
                tok.line,
                tok.column,
            )

    def parse(self) -> PolicyExpr:
        expr = self._additive()
        tok = self._peek()
        if tok.kind != "eof":
            raise PolicySyntaxError(f"unexpected trailing input {tok.text!r}", tok.line, tok.column)
        return expr

    def _additive(self) -> PolicyExpr:
        expr = self._multiplicative()
        while True:
            tok = self._peek()
            if tok.kind == "op" and tok.text in "+-":
                self._next()
                right = self._multiplicative()
                expr = Add(expr, right) if tok.text == "+" else Sub(expr, right)
            else:
                return expr

    def _multiplicative(self) -> PolicyExpr:
        expr = self._unary()
        while True:
            tok = self._peek()
            if tok.kind == "op" and tok.text in "*/":
                self._next()
                right = self._unary()
                expr = Mul(expr, right) if tok.text == "*" else Div(expr, right)
            elif tok.kind == "ident" and tok.text == "mod":
                self._next()
                expr = Mod(expr, self._unary())
            else:
                return expr

    def _unary(self) -> PolicyExpr:
        tok = self._peek()
        if tok.kind == "op" and tok.text == "-":
            self._next()
            return Neg(self._unary())
        return self._atom()

    def _atom(self) -> PolicyExpr:
        tok = self._next()
        if tok.kind == "int":
            return IntLit(int(tok.text))
        if tok.kind == "op" and tok.text == "(":
            expr = self._additive()
            self._expect_op(")")
            return expr
        if tok.kind == "ident":
            if tok.text == "dspace":
                self._expect_op("(")
                name_tok = self._next()
                if name_tok.kind != "string":
                    raise PolicySyntaxError(
                        "dspace expects a quoted parameter name", name_tok.line, name_tok.column
                    )
                name = name_tok.text[1:-1]
                if not name:
                    raise PolicySyntaxError(
                        "dspace parameter name must be non-empty", name_tok.line, name_tok.column
                    )
                self._expect_op(")")
                return DSpace(name)
            leaf = _TERMINALS.get(tok.text)
            if leaf is None:
                raise UnknownIdentifierError(
                    f"unknown identifier {tok.text!r}", tok.line, tok.column
                )
            return leaf
        if tok.kind == "eof":
            raise PolicySyntaxError("unexpected end of input", tok.line, tok.column)
        raise PolicySyntaxError(f"unexpected token {tok.text!r}", tok.line, tok.column)


def parse_policy(text: str) -> PolicyExpr:
    """Parse policy text into an AST.

    ``#`` starts a line comment.  Raises :class:`PolicySyntaxError` (with
    line/column) on malformed input and :class:`UnknownIdentifierError` for
    identifiers outside the vocabulary.
    """
    return _Parser(_tokenize(text)).parse()


# --- Pretty printing ---------------------------------------------------

_PREC_ADD, _PREC_MUL, _PREC_UNARY, _PREC_ATOM = 1, 2, 3, 4

_BIN_OPS: dict[type, tuple[str, int]] = {
    Add: ("+", _PREC_ADD),
    Sub: ("-", _PREC_ADD),
    Mul: ("*", _PREC_MUL),
    Div: ("/", _PREC_MUL),
    Mod: ("mod", _PREC_MUL),
}

_LEAF_TEXT: dict[type, str] = {
    Id: "ID",
    NumServers: "numServers",
    QueueSize: "queueSize",
    StateOn: "stateOn",
    StateSleep: "stateSleep",
    StateSuspend: "stateSuspend",
    StateWakeup: "stateWakeup",
    PowerOn: "powerOn",
    PowerSleep: "powerSleep",
    PowerSuspend: "powerSuspend",
    PowerWakeup: "powerWakeup",
    TimeWakeup: "timeWakeup",
    TimeSuspend: "timeSuspend",
    TimeOutTime: "timeOutTime",
    Random: "random",
}


def _precedence(expr: PolicyExpr) -> int:
    if type(expr) in _BIN_OPS:
        return _BIN_OPS[type(expr)][1]
    if isinstance(expr, Neg):
        return _PREC_UNARY
    return _PREC_ATOM


def pretty_print(expr: PolicyExpr) -> str:
    """Render an AST back to canonical policy text (minimal parentheses).

    ``parse_policy(pretty_print(e)) == e`` for every AST ``e``.
    """
    t = type(expr)
    if t in _LEAF_TEXT:
        return _LEAF_TEXT[t]
    if isinstance(expr, IntLit):
        return str(expr.value)
    if isinstance(expr, DSpace):
        return f'dspace("{expr.name}")'
    if isinstance(expr, Neg):
        inner = pretty_print(expr.operand)
        if _precedence(expr.operand) < _PREC_UNARY:
            inner = f"({inner})"
        return f"-{inner}"
    op, prec = _BIN_OPS[t]
    left, right = expr.left, expr.right  # type: ignore[attr-defined]
    left_s = pretty_print(left)
    if _precedence(left) < prec:
        left_s = f"({left_s})"
    right_s = pretty_print(right)
    # left-associative: an equal-precedence right child needs parentheses
    if _precedence(right) <= prec:
        right_s = f"({right_s})"
    return f"{left_s} {op} {right_s}"


def format_ast(expr: PolicyExpr, indent: int = 0) -> str:
    """Render an AST as an indented tree, one node per line."""
    pad = "  " * indent
    t = type(expr)
    if isinstance(expr, IntLit):
        return f"{pad}IntLit {expr.value}"
    if isinstance(expr, DSpace):
        return f'{pad}DSpace "{expr.name}"'
    if isinstance(expr, Neg):
        return f"{pad}Neg\n{format_ast(expr.operand, indent + 1)}"
    if t in _BIN_OPS:
        left, right = expr.left, expr.right  # type: ignore[attr-defined]
        return (
            f"{pad}{t.__name__}\n"
            f"{format_ast(left, indent + 1)}\n"
            f"{format_ast(right, indent + 1)}"
        )
    return f"{pad}{t.__name__}"


# --- Evaluation --------------------------------------------------------

def evaluate(expr: PolicyExpr, snap: ServerSnapshot, rng: Any) -> float:
    """Evaluate an expression against one server snapshot.

    Subexpressions are evaluated depth-first, left before right, so every
    ``random`` leaf consumes exactly one draw from ``rng`` in a fixed order.
    The snapshot is never mutated.
    """
    t = type(expr)
    if t is QueueSize:
        return float(snap.queue_size)
    if t is IntLit:
        return float(expr.value)  # type: ignore[attr-defined]
    if t is StateOn:
        return 1.0 if snap.power_state is PowerState.ON else 0.0
    if t is StateSleep:
        return 1.0 if snap.power_state is PowerState.SLEEP else 0.0
    if t is StateSuspend:
        return 1.0 if snap.power_state is PowerState.SUSPEND else 0.0
    if t is StateWakeup:
        return 1.0 if snap.power_state is PowerState.WAKEUP else 0.0
    if t is Id:
        return float(snap.id)
    if t is NumServers:
        return float(snap.num_servers)
    if t is PowerOn:
        return snap.power_on
    if t is PowerSleep:
        return snap.power_sleep
    if t is PowerSuspend:
        return snap.power_suspend
    if t is PowerWakeup:
        return snap.power_wakeup
    if t is TimeWakeup:
        return snap.time_wakeup
    if t is TimeSuspend:
        return snap.time_suspend
    if t is TimeOutTime:
        return snap.timeout_time
    if t is Random:
        return float(rng.random())
    if t is DSpace:
        name = expr.name  # type: ignore[attr-defined]
        try:
            return float(snap.design_params[name])
        except KeyError:
            raise UndefinedDesignParamError(
                f"design parameter {name!r} is not defined for this run"
            ) from None
    if t is Neg:
        return -evaluate(expr.operand, snap, rng)  # type: ignore[attr-defined]
    left = evaluate(expr.left, snap, rng)  # type: ignore[attr-defined]
    right = evaluate(expr.right, snap, rng)  # type: ignore[attr-defined]
    if t is Add:
        return left + right
    if t is Sub:
        return left - right
    if t is Mul:
        return left * right
    if t is Div:
        if right == 0.0:
            raise EvaluationError("division by zero")
        return left / right
    if t is Mod:
        if right == 0.0:
            raise EvaluationError("mod by zero")
        return math.fmod(left, right)  # remainder keeps the dividend's sign
    raise TypeError(f"not a policy expression: {expr!r}")


Evaluator = Callable[[ServerSnapshot, Any], float]


def compile_policy(expr: PolicyExpr) -> Evaluator:
    """Compile an AST into a closure ``f(snapshot, rng) -> float``.

    Same semantics (and random-draw order) as :func:`evaluate`; used on the
    simulator's hot path where re-walking the tree per request would dominate.
    """
    t = type(expr)
    if t is IntLit:
        value = float(expr.value)  # type: ignore[attr-defined]
        return lambda snap, rng: value
    if t is QueueSize:
        return lambda snap, rng: float(snap.queue_size)
    if t in (StateOn, StateSleep, StateSuspend, StateWakeup):
        state = {
            StateOn: PowerState.ON,
            StateSleep: PowerState.SLEEP,
            StateSuspend: PowerState.SUSPEND,
            StateWakeup: PowerState.WAKEUP,
        }[t]
        return lambda snap, rng: 1.0 if snap.power_state is state else 0.0
    if t is Id:
        return lambda snap, rng: float(snap.id)
    if t is NumServers:
        return lambda snap, rng: float(snap.num_servers)
    if t in (PowerOn, PowerSleep, PowerSuspend, PowerWakeup,
             TimeWakeup, TimeSuspend, TimeOutTime):
        attr = {
            PowerOn: "power_on",
            PowerSleep: "power_sleep",
            PowerSuspend: "power_suspend",
            PowerWakeup: "power_wakeup",
            TimeWakeup: "time_wakeup",
            TimeSuspend: "time_suspend",
            TimeOutTime: "timeout_time",
        }[t]
        return lambda snap, rng: getattr(snap, attr)
    if t is Random:
        return lambda snap, rng: float(rng.random())
    if t is DSpace:
        name = expr.name  # type: ignore[attr-defined]

        def dspace_leaf(snap: ServerSnapshot, rng: Any) -> float:
            try:
                return float(snap.design_params[name])
            except KeyError:
                raise UndefinedDesignParamError(
                    f"design parameter {name!r} is not defined for this run"
                ) from None

        return dspace_leaf
    if t is Neg:
        inner = compile_policy(expr.operand)  # type: ignore[attr-defined]
        return lambda snap, rng: -inner(snap, rng)
    left = compile_policy(expr.left)  # type: ignore[attr-defined]
    right = compile_policy(expr.right)  # type: ignore[attr-defined]
    if t is Add:
        return lambda snap, rng: left(snap, rng) + right(snap, rng)
    if t is Sub:
        return lambda snap, rng: left(snap, rng) - right(snap, rng)
    if t is Mul:
        return lambda snap, rng: left(snap, rng) * right(snap, rng)
    if t is Div:

        def div(snap: ServerSnapshot, rng: Any) -> float:
            a = left(snap, rng)
            b = right(snap, rng)
            if b == 0.0:
                raise EvaluationError("division by zero")
            return a / b

        return div
    if t is Mod:

        def mod(snap: ServerSnapshot, rng: Any) -> float:
            a = left(snap, rng)
            b = right(snap, rng)
            if b == 0.0:
                raise EvaluationError("mod by zero")
            return math.fmod(a, b)

        return mod
    raise TypeError(f"not a policy expression: {expr!r}")


# --- Server selection --------------------------------------------------

def select_server(
    expr: PolicyExpr,
    snaps: Sequence[ServerSnapshot],
    nd: NdResolution,
    rng: Any,
    evaluator: Evaluator | None = None,
) -> int:
    """Pick the target server: argmax of the policy value after tie resolution.

    Servers are evaluated in ascending id order (one pass), then the
    resolution fraction is added per server, again in ascending id order:
    a fresh ``U[0,1)`` draw for ``RANDOM_FRACTION``, or ``id/numServers``
    for ``FIXED_ORDER``.  Fractions live in ``[0,1)`` so they can only break
    ties between integer-valued policies, never overturn a gap of >= 1.
    A residual exact tie goes to the lowest id.

    ``evaluator`` may supply a precompiled closure for ``expr`` (hot path);
    semantics are identical to :func:`evaluate`.
    """
    if not snaps:
        raise ValueError("select_server requires at least one snapshot")
    ordered = sorted(snaps, key=lambda s: s.id)
    n = len(ordered)
    if [s.id for s in ordered] != list(range(n)):
        raise ValueError("snapshots must carry ids 0..n-1, each exactly once")
    ev = evaluator
    if ev is None:
        ev = lambda snap, r: evaluate(expr, snap, r)
    values = [ev(snap, rng) for snap in ordered]
    if nd is NdResolution.RANDOM_FRACTION:
        values = [v + float(rng.random()) for v in values]
    else:
        values = [v + snap.id / n for v, snap in zip(values, ordered)]
    best = 0
    best_value = values[0]
    for i in range(1, n):
        if values[i] > best_value:
            best = i
            best_value = values[i]
    return best
