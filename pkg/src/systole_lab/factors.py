"""Constructing conformal factors from config inputs.

Two external forms: a small expression grammar over the chart variable z,
and a rectangular sample grid with bilinear interpolation.

Expression grammar (case-insensitive names):

    expr   := term (('+' | '-') term)*
    term   := pow (('*' | '/') pow)*
    pow    := unary ('^' pow)?
    unary  := ('+' | '-') unary | atom
    atom   := NUMBER | 'z' | 'pi' | '(' expr ')' | '|' expr '|'
            | ('exp' | 're' | 'im' | 'abs' | 'sqrt') '(' expr ')'

Values are complex during evaluation; the result must be real and
nonnegative on the sphere.  Example: "1 + 0.5*(abs(z)^2-1)/(abs(z)^2+1)".
"""

from __future__ import annotations

import math
import re

import numpy as np

from .errors import ConfigError
from .metrics import ConformalFactor

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?)|([A-Za-z_]+)|(.))")

_FUNCS = {
    "exp": np.exp,
    "re": lambda v: v.real + 0j,
    "im": lambda v: v.imag + 0j,
    "abs": lambda v: np.abs(v) + 0j,
    "sqrt": lambda v: np.sqrt(v),
}


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ConfigError(f"bad character in expression at {pos}")
        pos = m.end()
        num, name, sym = m.groups()
        if num is not None:
            tokens.append(("num", float(num)))
        elif name is not None:
            tokens.append(("name", name.lower()))
        elif sym.strip():
            tokens.append(("sym", sym))
    tokens.append(("end", ""))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind=None, value=None):
        tok = self.tokens[self.i]
        if kind is not None and tok[0] != kind:
            raise ConfigError(f"expected {kind}, got {tok}")
        if value is not None and tok[1] != value:
            raise ConfigError(f"expected {value!r}, got {tok}")
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            raise ConfigError(f"unexpected trailing input: {self.peek()}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() == ("sym", "+") or self.peek() == ("sym", "-"):
            op = self.take()[1]
            rhs = self.term()
            node = (lambda z, a=node, b=rhs, s=(1 if op == "+" else -1):
                    a(z) + s * b(z))
        return node

    def term(self):
        node = self.unary()
        while self.peek() == ("sym", "*") or self.peek() == ("sym", "/"):
            op = self.take()[1]
            rhs = self.unary()
            if op == "*":
                node = (lambda z, a=node, b=rhs: a(z) * b(z))
            else:
                node = (lambda z, a=node, b=rhs: a(z) / b(z))
        return node

    def unary(self):
        # the power binds tighter than a leading sign: -x^2 = -(x^2)
        if self.peek()[0] == "sym" and self.peek()[1] in "+-":
            sign = 1.0 if self.take()[1] == "+" else -1.0
            node = self.unary()
            return lambda z, a=node, s=sign: s * a(z)
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == ("sym", "^"):
            self.take()
            expo = self.unary()
            return lambda z, a=base, b=expo: a(z) ** b(z)
        return base

    def atom(self):
        kind, value = self.peek()
        if kind == "num":
            self.take()
            return lambda z, v=complex(value): np.full(np.shape(z), v)
        if kind == "name":
            self.take()
            if value == "z":
                return lambda z: z
            if value == "pi":
                return lambda z: np.full(np.shape(z), complex(math.pi))
            if value in _FUNCS:
                self.take("sym", "(")
                inner = self.expr()
                self.take("sym", ")")
                return lambda z, g=inner, fn=_FUNCS[value]: fn(g(z))
            raise ConfigError(f"unknown name {value!r} in expression")
        if (kind, value) == ("sym", "("):
            self.take()
            node = self.expr()
            self.take("sym", ")")
            return node
        if (kind, value) == ("sym", "|"):
            self.take()
            node = self.expr()
            self.take("sym", "|")
            return lambda z, g=node: np.abs(g(z)) + 0j
        raise ConfigError(f"unexpected token {self.peek()} in expression")


def factor_from_expression(text: str) -> ConformalFactor:
    node = _Parser(_tokenize(text)).parse()

    def evaluate(z: np.ndarray) -> np.ndarray:
        vals = node(np.asarray(z, dtype=complex))
        vals = np.asarray(vals, dtype=complex)
        if np.any(np.abs(vals.imag) > 1e-9 * np.maximum(np.abs(vals), 1.0)):
            raise ConfigError("expression takes non-real values on the sphere")
        return np.broadcast_to(vals.real, np.shape(z)).copy() \
            if vals.shape != np.shape(z) else vals.real

    probe = evaluate(np.asarray([0.1 + 0.2j, 1.5 - 0.3j]))
    if np.any(probe < 0):
        raise ConfigError("expression is negative on the sphere")
    return ConformalFactor(evaluate, name=f"expr({text})")


def factor_from_grid(path: str) -> ConformalFactor:
    """Bilinear factor from a CSV grid.

    First row: nx, ny, x0, x1, y0, y1.  Then ny rows of nx values, row j
    holding samples at y = y0 + j*(y1-y0)/(ny-1).  Points outside the box
    clamp to the boundary values.
    """
    with open(path) as fh:
        header = fh.readline().strip()
        parts = [p for p in header.replace(",", " ").split() if p]
        if len(parts) != 6:
            raise ConfigError("grid header must be nx, ny, x0, x1, y0, y1")
        nx, ny = int(float(parts[0])), int(float(parts[1]))
        x0, x1, y0, y1 = (float(p) for p in parts[2:])
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape != (ny, nx):
        raise ConfigError(f"grid body must be {ny} rows of {nx} values, got {data.shape}")
    if np.any(data < 0):
        raise ConfigError("grid factor must be nonnegative")
    if nx < 2 or ny < 2:
        raise ConfigError("grid needs at least 2 samples per axis")

    def evaluate(z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        gx = np.clip((z.real - x0) / (x1 - x0) * (nx - 1), 0.0, nx - 1.0)
        gy = np.clip((z.imag - y0) / (y1 - y0) * (ny - 1), 0.0, ny - 1.0)
        gx = np.nan_to_num(gx, nan=0.0, posinf=nx - 1.0, neginf=0.0)
        gy = np.nan_to_num(gy, nan=0.0, posinf=ny - 1.0, neginf=0.0)
        ix = np.minimum(gx.astype(int), nx - 2)
        iy = np.minimum(gy.astype(int), ny - 2)
        fx = gx - ix
        fy = gy - iy
        v00 = data[iy, ix]
        v01 = data[iy, ix + 1]
        v10 = data[iy + 1, ix]
        v11 = data[iy + 1, ix + 1]
        return ((1 - fy) * ((1 - fx) * v00 + fx * v01)
                + fy * ((1 - fx) * v10 + fx * v11))

    return ConformalFactor(evaluate, name=f"grid({path})")
