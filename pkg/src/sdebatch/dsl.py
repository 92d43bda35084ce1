"""Runtime expression language for drift and diffusion definitions.

Models can be changed at run time by supplying one drift template and one
diffusion template as text; the same template is applied for every equation
index ``i``.  The language covers numeric literals, the variables ``t``
(time), ``N`` (equation count) and ``i`` (equation index), indexed access
into the state ``y[...]``, parameters ``p[...]`` and noise ``n[...]``, the
operators ``+ - * / ^`` (with ``^`` real exponentiation, right associative,
binding tighter than unary minus), the functions ``sin cos tan exp ln sqrt
abs`` and an indexed sum ``sum(j, body)`` whose index runs over 0..N-1.
Angles are radians throughout.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ['^' unary]
    atom   := NUMBER | NAME | NAME '(' expr ')' | 'sum' '(' NAME ',' expr ')'
            | ('y' | 'p' | 'n') '[' expr ']' | '(' expr ')'

Evaluation is numpy-vectorised: with ``i`` unbound the template is evaluated
for all equation indices at once, and the arrays in the context may carry
leading batch dimensions (many orbits in one call).  Index sub-expressions
are restricted to integer arithmetic (integer literals, ``i``, ``N``, sum
indices, ``+ - *``).
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

__all__ = [
    "DslError", "ParseError", "ValidationError", "DomainError",
    "Num", "Var", "Index", "Neg", "BinOp", "Call", "Sum", "ExprAst",
    "EvalContext", "Diagnostic", "ModelText",
    "parse", "validate", "evaluate", "to_source", "parse_model_text", "load_model_file",
]

FUNCTIONS: dict[str, Callable] = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "ln": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
}

_RESERVED = ("t", "N", "i")
_INDEXABLE = ("y", "p", "n")


class DslError(Exception):
    """Base class for expression-language errors."""


class ParseError(DslError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__("line %d, column %d: %s" % (line, col, message))
        self.line = line
        self.col = col


class ValidationError(DslError):
    def __init__(self, diagnostics):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = list(diagnostics)


class DomainError(DslError):
    """Runtime evaluation error (ln of a non-positive value, division by zero,
    index out of range)."""

    def __init__(self, message: str, pos: tuple[int, int]):
        super().__init__("line %d, column %d: %s" % (pos[0], pos[1], message))
        self.pos = pos


# ---------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Num:
    value: float
    pos: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class Var:
    name: str
    pos: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class Index:
    base: str            # 'y', 'p' or 'n'
    index: "ExprAst"
    pos: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class Neg:
    operand: "ExprAst"
    pos: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class BinOp:
    op: str              # '+', '-', '*', '/', '^'
    left: "ExprAst"
    right: "ExprAst"
    pos: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class Call:
    func: str
    arg: "ExprAst"
    pos: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class Sum:
    var: str
    body: "ExprAst"
    pos: tuple[int, int] = (0, 0)


ExprAst = Union[Num, Var, Index, Neg, BinOp, Call, Sum]


# ---------------------------------------------------------------------------
# Tokenizer / parser

_TOKEN_RE = re.compile(
    r"(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()\[\],])"
    r"|(?P<ws>[ \t\r\n]+)"
    r"|(?P<bad>.)"
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    for match in _TOKEN_RE.finditer(source):
        kind = match.lastgroup
        text = match.group()
        if kind == "bad":
            raise ParseError("unexpected character %r" % text, line, col)
        if kind != "ws":
            tokens.append(_Token(kind, text, line, col))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
    tokens.append(_Token("end", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str, what: str) -> _Token:
        tok = self.peek()
        if tok.kind == "op" and tok.text == text:
            return self.advance()
        raise ParseError("expected %r %s, found %r" % (text, what, tok.text or "end of input"),
                         tok.line, tok.col)

    def fail(self, message: str):
        tok = self.peek()
        raise ParseError("%s, found %r" % (message, tok.text or "end of input"),
                         tok.line, tok.col)

    # expr := term (('+' | '-') term)*
    def expr(self) -> ExprAst:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            tok = self.advance()
            node = BinOp(tok.text, node, self.term(), (tok.line, tok.col))
        return node

    # term := unary (('*' | '/') unary)*
    def term(self) -> ExprAst:
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            tok = self.advance()
            node = BinOp(tok.text, node, self.unary(), (tok.line, tok.col))
        return node

    # unary := '-' unary | power
    def unary(self) -> ExprAst:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            return Neg(self.unary(), (tok.line, tok.col))
        return self.power()

    # power := atom ['^' unary]   (right associative, tighter than unary minus)
    def power(self) -> ExprAst:
        node = self.atom()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.advance()
            node = BinOp("^", node, self.unary(), (tok.line, tok.col))
        return node

    def atom(self) -> ExprAst:
        tok = self.peek()
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text), (tok.line, tok.col))
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")", "to close parenthesis")
            return node
        if tok.kind == "name":
            self.advance()
            nxt = self.peek()
            if nxt.kind == "op" and nxt.text == "[":
                if tok.text not in _INDEXABLE:
                    raise ParseError("only y, p and n can be indexed, not %r" % tok.text,
                                     tok.line, tok.col)
                self.advance()
                index = self.expr()
                self.expect("]", "to close index")
                return Index(tok.text, index, (tok.line, tok.col))
            if nxt.kind == "op" and nxt.text == "(":
                if tok.text == "sum":
                    return self._sum(tok)
                if tok.text not in FUNCTIONS:
                    raise ParseError("unknown function %r" % tok.text, tok.line, tok.col)
                self.advance()
                arg = self.expr()
                self.expect(")", "to close function call")
                return Call(tok.text, arg, (tok.line, tok.col))
            return Var(tok.text, (tok.line, tok.col))
        self.fail("expected a number, name or parenthesised expression")

    def _sum(self, tok: _Token) -> ExprAst:
        self.advance()  # '('
        idx = self.peek()
        if idx.kind != "name":
            raise ParseError("sum(index, body) expects an index name first",
                             idx.line, idx.col)
        self.advance()
        self.expect(",", "between sum index and body")
        body = self.expr()
        self.expect(")", "to close sum")
        return Sum(idx.text, body, (tok.line, tok.col))


def parse(source: str) -> ExprAst:
    """Parse expression text into an AST, or raise :class:`ParseError`."""
    parser = _Parser(_tokenize(source))
    node = parser.expr()
    tok = parser.peek()
    if tok.kind != "end":
        raise ParseError("unexpected trailing input %r" % tok.text, tok.line, tok.col)
    return node


# ---------------------------------------------------------------------------
# Validation

@dataclass(frozen=True)
class Diagnostic:
    message: str
    line: int
    col: int

    def __str__(self):
        return "line %d, column %d: %s" % (self.line, self.col, self.message)


def _dimension_of(base: str, nequat: int, nparams: int, nnoise: int) -> int:
    return {"y": nequat, "p": nparams, "n": nnoise}[base]


def _fold_index(node: ExprAst):
    """Fold an index expression to a constant int if it uses no variables."""
    if isinstance(node, Num):
        return int(node.value) if float(node.value).is_integer() else None
    if isinstance(node, Neg):
        sub = _fold_index(node.operand)
        return None if sub is None else -sub
    if isinstance(node, BinOp) and node.op in "+-*":
        left = _fold_index(node.left)
        right = _fold_index(node.right)
        if left is None or right is None:
            return None
        return {"+": left + right, "-": left - right, "*": left * right}[node.op]
    return None


def _check_index_expr(node: ExprAst, scope: set, out: list):
    """Index sub-expressions may use only integer literals, i/N/sum indices
    and the operators + - *."""
    if isinstance(node, Num):
        if not float(node.value).is_integer():
            out.append(Diagnostic("non-integer constant in index expression",
                                  node.pos[0], node.pos[1]))
    elif isinstance(node, Var):
        if node.name == "t":
            out.append(Diagnostic("t cannot appear in an index expression",
                                  node.pos[0], node.pos[1]))
        elif node.name != "N" and node.name not in scope and node.name != "i":
            out.append(Diagnostic("unknown variable %r" % node.name,
                                  node.pos[0], node.pos[1]))
    elif isinstance(node, Neg):
        _check_index_expr(node.operand, scope, out)
    elif isinstance(node, BinOp):
        if node.op not in "+-*":
            out.append(Diagnostic("operator %r not allowed in index expressions" % node.op,
                                  node.pos[0], node.pos[1]))
        _check_index_expr(node.left, scope, out)
        _check_index_expr(node.right, scope, out)
    else:
        pos = getattr(node, "pos", (0, 0))
        out.append(Diagnostic("index expressions must be integer arithmetic",
                              pos[0], pos[1]))


def validate(expr: ExprAst, nequat: int, nparams: int, nnoise: int,
             role: str = "diffusion") -> list[Diagnostic]:
    """Check an expression against the model dimensions.

    Returns a list of diagnostics; an empty list means the expression is
    valid.  ``role="drift"`` additionally rejects any use of the noise
    vector ``n[...]``.
    """
    if role not in ("drift", "diffusion"):
        raise ValueError("role must be 'drift' or 'diffusion'")
    out: list[Diagnostic] = []

    def walk(node: ExprAst, scope: set):
        if isinstance(node, Num):
            return
        if isinstance(node, Var):
            if node.name not in _RESERVED and node.name not in scope:
                out.append(Diagnostic("unknown variable %r" % node.name,
                                      node.pos[0], node.pos[1]))
            return
        if isinstance(node, Index):
            if node.base == "n" and role == "drift":
                out.append(Diagnostic("noise n[...] cannot appear in a drift expression",
                                      node.pos[0], node.pos[1]))
            _check_index_expr(node.index, scope, out)
            const = _fold_index(node.index)
            if const is not None:
                dim = _dimension_of(node.base, nequat, nparams, nnoise)
                if not 0 <= const < dim:
                    out.append(Diagnostic(
                        "index %d out of range for %s (length %d)" % (const, node.base, dim),
                        node.pos[0], node.pos[1]))
            return
        if isinstance(node, Neg):
            walk(node.operand, scope)
            return
        if isinstance(node, BinOp):
            walk(node.left, scope)
            walk(node.right, scope)
            return
        if isinstance(node, Call):
            walk(node.arg, scope)
            return
        if isinstance(node, Sum):
            if node.var in scope:
                out.append(Diagnostic("nested sums reuse index %r" % node.var,
                                      node.pos[0], node.pos[1]))
            elif node.var in _RESERVED:
                out.append(Diagnostic("sum index %r shadows a reserved name" % node.var,
                                      node.pos[0], node.pos[1]))
            walk(node.body, scope | {node.var})
            return
        raise TypeError("unknown AST node %r" % (node,))

    walk(expr, set())
    return out


# ---------------------------------------------------------------------------
# Evaluation

@dataclass
class EvalContext:
    """Values an expression is evaluated against.

    ``y``/``p``/``n`` may carry leading batch dimensions; their last axis
    must match the owning model's nequat/nparams/nnoise.  With ``i=None``
    the expression is evaluated for every equation index at once and the
    result gains a trailing axis of length N.
    """

    t: float
    N: int
    y: np.ndarray
    p: np.ndarray
    n: np.ndarray | None = None
    i: int | None = None


_BINOPS = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": np.divide,
    "^": np.power,
}


class _Evaluator:
    def __init__(self, ctx: EvalContext, strict: bool):
        self.t = float(ctx.t)
        self.N = int(ctx.N)
        self.strict = strict
        self.arrays = {
            "y": np.asarray(ctx.y, dtype=np.float64),
            "p": np.asarray(ctx.p, dtype=np.float64),
            "n": None if ctx.n is None else np.asarray(ctx.n, dtype=np.float64),
        }

    # axes: list of (name, value); value is an int or an int64 array whose
    # shape places it on its own trailing broadcast axis.
    def eval(self, node: ExprAst, axes):
        if isinstance(node, Num):
            return node.value
        if isinstance(node, Var):
            return self._var(node, axes)
        if isinstance(node, Index):
            return self._index(node, axes)
        if isinstance(node, Neg):
            return np.negative(self.eval(node.operand, axes))
        if isinstance(node, BinOp):
            left = self.eval(node.left, axes)
            right = self.eval(node.right, axes)
            return self._apply(node, _BINOPS[node.op], left, right)
        if isinstance(node, Call):
            arg = self.eval(node.arg, axes)
            return self._apply(node, FUNCTIONS[node.func], arg)
        if isinstance(node, Sum):
            return self._sum(node, axes)
        raise TypeError("unknown AST node %r" % (node,))

    def _apply(self, node, fn, *args):
        if not self.strict:
            return fn(*args)
        try:
            with np.errstate(divide="raise", invalid="raise"):
                return fn(*args)
        except (FloatingPointError, ZeroDivisionError) as exc:
            raise DomainError("domain error in %r (%s)" % (to_source(node), exc), node.pos)

    def _var(self, node, axes):
        if node.name == "t":
            return self.t
        if node.name == "N":
            return float(self.N)
        for name, value in reversed(axes):
            if name == node.name:
                return value
        raise DomainError("unknown variable %r" % node.name, node.pos)

    def _index_value(self, node, axes):
        """Integer evaluation of an index sub-expression."""
        if isinstance(node, Num):
            if not float(node.value).is_integer():
                raise DomainError("non-integer constant in index expression", node.pos)
            return int(node.value)
        if isinstance(node, Var):
            if node.name == "N":
                return self.N
            for name, value in reversed(axes):
                if name == node.name:
                    return value
            raise DomainError("unknown variable %r in index expression" % node.name, node.pos)
        if isinstance(node, Neg):
            return -self._index_value(node.operand, axes)
        if isinstance(node, BinOp) and node.op in "+-*":
            left = self._index_value(node.left, axes)
            right = self._index_value(node.right, axes)
            if node.op == "+":
                return left + right
            if node.op == "-":
                return left - right
            return left * right
        raise DomainError("index expressions must be integer arithmetic", node.pos)

    def _index(self, node, axes):
        arr = self.arrays[node.base]
        if arr is None:
            raise DomainError("noise vector is not available in this context", node.pos)
        idx = self._index_value(node.index, axes)
        dim = arr.shape[-1]
        if isinstance(idx, np.ndarray):
            if np.any((idx < 0) | (idx >= dim)):
                raise DomainError("index out of range for %s (length %d)" % (node.base, dim),
                                  node.pos)
            return np.take(arr, idx, axis=-1)
        if not 0 <= idx < dim:
            raise DomainError("index %d out of range for %s (length %d)" % (idx, node.base, dim),
                              node.pos)
        taken = np.take(arr, idx, axis=-1)
        depth = sum(1 for _, v in axes if isinstance(v, np.ndarray))
        if depth:
            return np.reshape(taken, np.shape(taken) + (1,) * depth)
        return taken

    def _sum(self, node, axes):
        depth = sum(1 for _, v in axes if isinstance(v, np.ndarray))
        widened = [
            (name, value.reshape(value.shape + (1,)) if isinstance(value, np.ndarray) else value)
            for name, value in axes
        ]
        j_values = np.arange(self.N, dtype=np.int64).reshape((1,) * depth + (self.N,))
        body = self.eval(node.body, widened + [(node.var, j_values)])
        body = np.asarray(body)
        axis_shape = (1,) * depth + (self.N,)
        full = np.broadcast_shapes(body.shape, axis_shape)
        if body.shape != full:
            body = np.broadcast_to(body, full)
        return np.sum(body, axis=-1)


def evaluate(expr: ExprAst, ctx: EvalContext, strict: bool = True):
    """Evaluate an expression in double precision.

    With a concrete ``ctx.i`` the result is a float; with ``i=None`` the
    result is an array over all equation indices (plus any batch dimensions
    of the context arrays).  In strict mode domain errors (ln of a
    non-positive value, division by zero) raise :class:`DomainError`; with
    ``strict=False`` they propagate as non-finite values for the caller to
    detect.
    """
    ev = _Evaluator(ctx, strict)
    if ctx.i is None:
        axes = [("i", np.arange(ctx.N, dtype=np.int64))]
        return ev.eval(expr, axes)
    if not 0 <= int(ctx.i) < int(ctx.N):
        raise ValueError("equation index i=%r out of range for N=%r" % (ctx.i, ctx.N))
    result = ev.eval(expr, [("i", int(ctx.i))])
    return float(result) if np.ndim(result) == 0 else result


# ---------------------------------------------------------------------------
# Printing (parse/print round-trip up to whitespace)

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _prec(node: ExprAst) -> int:
    if isinstance(node, BinOp):
        return _PRECEDENCE[node.op]
    if isinstance(node, Neg):
        return _PRECEDENCE["neg"]
    return 5


def _wrap(text: str, needed: bool) -> str:
    return "(" + text + ")" if needed else text


def to_source(node: ExprAst) -> str:
    """Render an AST back to expression text."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Index):
        return "%s[%s]" % (node.base, to_source(node.index))
    if isinstance(node, Call):
        return "%s(%s)" % (node.func, to_source(node.arg))
    if isinstance(node, Sum):
        return "sum(%s, %s)" % (node.var, to_source(node.body))
    if isinstance(node, Neg):
        return "-" + _wrap(to_source(node.operand), _prec(node.operand) < _PRECEDENCE["neg"])
    if isinstance(node, BinOp):
        prec = _PRECEDENCE[node.op]
        left = _wrap(to_source(node.left), _prec(node.left) < prec or (node.op == "^" and _prec(node.left) <= prec))
        # left-associative operators need parens around an equal-precedence
        # right child; right-associative ^ does not
        right_needs = _prec(node.right) < prec if node.op == "^" else _prec(node.right) <= prec
        right = _wrap(to_source(node.right), right_needs)
        return "%s %s %s" % (left, node.op, right)
    raise TypeError("unknown AST node %r" % (node,))


# ---------------------------------------------------------------------------
# Model file format

@dataclass
class ModelText:
    """Contents of a model definition file (templates still as text)."""

    nequat: int
    nparams: int
    nnoise: int
    drift: str
    diffusion: str
    name: str = "model"


def parse_model_text(text: str, name: str = "model") -> ModelText:
    """Parse the model file format.

    Header lines ``nequat=<int>``, ``nparams=<int>``, ``nnoise=<int>`` in any
    order, then ``drift: <expr>`` and ``diffusion: <expr>``.  Lines starting
    with ``#`` and blank lines are ignored.
    """
    headers: dict[str, int] = {}
    templates: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        matched = re.fullmatch(r"(nequat|nparams|nnoise)\s*=\s*([+-]?\d+)", line)
        if matched:
            key = matched.group(1)
            if key in headers:
                raise ParseError("duplicate header %r" % key, lineno, 1)
            headers[key] = int(matched.group(2))
            continue
        matched = re.fullmatch(r"(drift|diffusion)\s*:\s*(.+)", line)
        if matched:
            key = matched.group(1)
            if key in templates:
                raise ParseError("duplicate %r template" % key, lineno, 1)
            templates[key] = matched.group(2)
            continue
        raise ParseError("unrecognised model file line %r" % line, lineno, 1)
    for key in ("nequat", "nparams", "nnoise"):
        if key not in headers:
            raise ParseError("missing header %r" % key, 1, 1)
    for key in ("drift", "diffusion"):
        if key not in templates:
            raise ParseError("missing %r template" % key, 1, 1)
    return ModelText(
        nequat=headers["nequat"],
        nparams=headers["nparams"],
        nnoise=headers["nnoise"],
        drift=templates["drift"],
        diffusion=templates["diffusion"],
        name=name,
    )


def load_model_file(path) -> ModelText:
    """Read and parse a model definition file."""
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    return parse_model_text(text, name=os.path.splitext(os.path.basename(str(path)))[0])
