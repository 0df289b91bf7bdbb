"""
Vector Field Families
Builtin vector fields and the prefix expression language; every field evaluates on arrays or jets
"""
import re
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from errors import ConfigError, DomainError
from jets import jcos, jexp, jsin


class VectorField:
    """A map R^n -> R^n evaluated componentwise on a list of coordinates"""
    dimension: int
    is_zero: bool = False

    def evaluate(self, xs: Sequence) -> List:
        raise NotImplementedError


class ZeroField(VectorField):
    is_zero = True

    def __init__(self, dimension: int):
        self.dimension = dimension

    def evaluate(self, xs):
        zero = xs[0] * 0.0
        return [zero] * self.dimension


class ConstantField(VectorField):
    def __init__(self, values: Sequence[float]):
        self.values = np.asarray(values, dtype=float)
        self.dimension = self.values.size

    def evaluate(self, xs):
        zero = xs[0] * 0.0
        return [zero + c for c in self.values]


class AffineField(VectorField):
    """V(x) = A x + b; b defaults to zero (the linear family)"""

    def __init__(self, matrix, offset=None):
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        n = self.matrix.shape[0]
        if self.matrix.shape != (n, n):
            raise DomainError(f"linear field needs a square matrix, got shape {self.matrix.shape}")
        self.offset = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)
        self.dimension = n

    def evaluate(self, xs):
        out = []
        for j in range(self.dimension):
            value = xs[0] * 0.0 + self.offset[j]
            for m in range(self.dimension):
                if self.matrix[j, m] != 0.0:
                    value = value + self.matrix[j, m] * xs[m]
            out.append(value)
        return out


class PolynomialField(VectorField):
    """Each component is a sum of monomials coef * prod_m x_m^powers[m]"""

    def __init__(self, terms: Sequence[Sequence[Tuple[float, Sequence[int]]]]):
        self.dimension = len(terms)
        self.terms = []
        for component in terms:
            parsed = []
            for coef, powers in component:
                powers = tuple(int(p) for p in powers)
                if len(powers) != self.dimension or any(p < 0 for p in powers):
                    raise DomainError(f"monomial powers {powers} do not match dimension {self.dimension}")
                parsed.append((float(coef), powers))
            self.terms.append(parsed)

    def evaluate(self, xs):
        out = []
        for component in self.terms:
            value = xs[0] * 0.0
            for coef, powers in component:
                monomial = coef
                for m, p in enumerate(powers):
                    if p:
                        monomial = monomial * xs[m] ** p
                value = value + monomial
            out.append(value)
        return out


class MatrixField(VectorField):
    """Left-invariant field V(X) = X A on n x n matrices, coordinates in row-major order"""

    def __init__(self, generator):
        self.generator = np.asarray(generator, dtype=float)
        n = self.generator.shape[0]
        if self.generator.shape != (n, n):
            raise DomainError("generator must be a square matrix")
        self.size = n
        self.dimension = n * n
        self.is_zero = not np.any(self.generator)

    def evaluate(self, xs):
        n = self.size
        out = []
        for r in range(n):
            for c in range(n):
                value = xs[0] * 0.0
                for k in range(n):
                    if self.generator[k, c] != 0.0:
                        value = value + self.generator[k, c] * xs[r * n + k]
                out.append(value)
        return out


# ---- expression trees ----

_TOKEN = re.compile(r"\(|\)|[^\s()]+")
_NARY = {"+", "-", "*"}
_UNARY = {"exp": jexp, "sin": jsin, "cos": jcos}


@dataclass
class Node:
    op: str
    args: tuple = ()
    value: float = 0.0

    def evaluate(self, xs):
        if self.op == "const":
            return self.value
        if self.op == "var":
            return xs[int(self.value)]
        values = [arg.evaluate(xs) for arg in self.args]
        if self.op == "+":
            result = values[0]
            for v in values[1:]:
                result = result + v
            return result
        if self.op == "-":
            if len(values) == 1:
                return -values[0]
            result = values[0]
            for v in values[1:]:
                result = result - v
            return result
        if self.op == "*":
            result = values[0]
            for v in values[1:]:
                result = result * v
            return result
        if self.op == "^":
            return values[0] ** int(self.args[1].value)
        return _UNARY[self.op](values[0])


def _tokenize(text: str):
    return [(m.group(0), m.start() + 1) for m in _TOKEN.finditer(text)]


def parse_expression(text: str, dimension: int) -> Node:
    """
    Parse the prefix syntax, e.g. "(+ (* (const 2) (var 0)) (exp (var 1)))".

    Operators: + - * (n-ary), ^ (integer power), exp, sin, cos, const, var.
    Bare numbers are constants.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise ConfigError("empty expression", column=1)
    node, pos = _parse(tokens, 0, dimension, text)
    if pos != len(tokens):
        raise ConfigError(f"unexpected token '{tokens[pos][0]}' in '{text}'", column=tokens[pos][1])
    return node


def _parse(tokens, pos: int, dimension: int, text: str):
    if pos >= len(tokens):
        raise ConfigError(f"unexpected end of expression '{text}'", column=len(text) + 1)
    token, column = tokens[pos]
    if token != "(":
        try:
            return Node("const", value=float(token)), pos + 1
        except ValueError:
            raise ConfigError(f"expected '(' or a number, got '{token}'", column=column) from None
    if pos + 1 >= len(tokens):
        raise ConfigError(f"unexpected end of expression '{text}'", column=len(text) + 1)
    op, op_column = tokens[pos + 1]
    pos += 2

    if op in ("const", "var"):
        if pos >= len(tokens):
            raise ConfigError(f"'{op}' needs an argument", column=op_column)
        literal, lit_column = tokens[pos]
        try:
            value = float(literal) if op == "const" else int(literal)
        except ValueError:
            raise ConfigError(f"bad {op} argument '{literal}'", column=lit_column) from None
        if op == "var" and not 0 <= value < dimension:
            raise ConfigError(f"variable index {value} outside 0..{dimension - 1}", column=lit_column)
        pos += 1
        args = ()
    else:
        if op not in _NARY and op not in _UNARY and op != "^":
            raise ConfigError(f"unknown operator '{op}'", column=op_column)
        args = []
        while pos < len(tokens) and tokens[pos][0] != ")":
            child, pos = _parse(tokens, pos, dimension, text)
            args.append(child)
        args = tuple(args)
        arity_ok = (
            (op in _UNARY and len(args) == 1)
            or (op == "^" and len(args) == 2 and args[1].op == "const"
                and float(args[1].value).is_integer() and args[1].value >= 0)
            or (op in _NARY and len(args) >= 1)
        )
        if not arity_ok:
            raise ConfigError(f"wrong arguments for '{op}'", column=op_column)
        value = 0.0

    if pos >= len(tokens) or tokens[pos][0] != ")":
        raise ConfigError(f"missing ')' in '{text}'", column=column)
    return Node(op, args, value), pos + 1


class ExpressionField(VectorField):
    """Components given as prefix expressions over var 0..n-1"""

    def __init__(self, expressions: Sequence[str]):
        self.dimension = len(expressions)
        self.expressions = list(expressions)
        self.trees = [parse_expression(text, self.dimension) for text in expressions]

    def evaluate(self, xs):
        zero = xs[0] * 0.0
        return [zero + tree.evaluate(xs) for tree in self.trees]
