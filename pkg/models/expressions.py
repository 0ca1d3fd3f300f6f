"""
Expression Subset for Custom Planar Models
Recursive-descent parser over literals, x, y, + - * /, powers, sin, cos, exp,
with analytic differentiation and numpy evaluation
"""

import re
from typing import Dict, List, Tuple

import numpy as np

from core.errors import ExpressionParseError

# expression := term (('+' | '-') term)*
# term       := unary (('*' | '/') unary)*
# unary      := ('+' | '-') unary | power
# power      := atom (('^' | '**') unary)?
# atom       := number | 'pi' | variable | function '(' expression ')' | '(' expression ')'

VARIABLES = ('x', 'y')
FUNCTIONS = ('sin', 'cos', 'exp')

TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^()]))"
)


class Node:
    """Expression tree node"""

    def evaluate(self, env: Dict[str, np.ndarray]):
        raise NotImplementedError

    def diff(self, var: str) -> 'Node':
        raise NotImplementedError

    def variables(self) -> set:
        return set()


class Num(Node):
    def __init__(self, value: float):
        self.value = float(value)

    def evaluate(self, env):
        return self.value

    def diff(self, var):
        return Num(0.0)

    def __repr__(self):
        return repr(self.value)


class Var(Node):
    def __init__(self, name: str):
        self.name = name

    def evaluate(self, env):
        return env[self.name]

    def diff(self, var):
        return Num(1.0 if var == self.name else 0.0)

    def variables(self):
        return {self.name}

    def __repr__(self):
        return self.name


class BinOp(Node):
    def __init__(self, op: str, left: Node, right: Node):
        self.op = op
        self.left = left
        self.right = right

    def variables(self):
        return self.left.variables() | self.right.variables()

    def evaluate(self, env):
        a = self.left.evaluate(env)
        b = self.right.evaluate(env)
        if self.op == '+':
            return a + b
        if self.op == '-':
            return a - b
        if self.op == '*':
            return a * b
        if self.op == '/':
            return a / b
        return np.power(a, b)

    def diff(self, var):
        a, b = self.left, self.right
        da, db = a.diff(var), b.diff(var)
        if self.op == '+':
            return add(da, db)
        if self.op == '-':
            return sub(da, db)
        if self.op == '*':
            return add(mul(da, b), mul(a, db))
        if self.op == '/':
            return div(sub(mul(da, b), mul(a, db)), power(b, Num(2.0)))
        # exponent is variable-free (enforced by the parser)
        return mul(mul(b, power(a, sub(b, Num(1.0)))), da)

    def __repr__(self):
        return f"({self.left!r} {self.op} {self.right!r})"


class Neg(Node):
    def __init__(self, operand: Node):
        self.operand = operand

    def variables(self):
        return self.operand.variables()

    def evaluate(self, env):
        return -self.operand.evaluate(env)

    def diff(self, var):
        return neg(self.operand.diff(var))

    def __repr__(self):
        return f"(-{self.operand!r})"


class Call(Node):
    def __init__(self, func: str, arg: Node):
        self.func = func
        self.arg = arg

    def variables(self):
        return self.arg.variables()

    def evaluate(self, env):
        return getattr(np, self.func)(self.arg.evaluate(env))

    def diff(self, var):
        darg = self.arg.diff(var)
        if self.func == 'sin':
            outer = Call('cos', self.arg)
        elif self.func == 'cos':
            outer = Neg(Call('sin', self.arg))
        else:
            outer = Call('exp', self.arg)
        return mul(outer, darg)

    def __repr__(self):
        return f"{self.func}({self.arg!r})"


def _is_num(node: Node, value=None) -> bool:
    return isinstance(node, Num) and (value is None or node.value == value)


def add(a: Node, b: Node) -> Node:
    if _is_num(a) and _is_num(b):
        return Num(a.value + b.value)
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    return BinOp('+', a, b)


def sub(a: Node, b: Node) -> Node:
    if _is_num(a) and _is_num(b):
        return Num(a.value - b.value)
    if _is_num(b, 0.0):
        return a
    if _is_num(a, 0.0):
        return neg(b)
    return BinOp('-', a, b)


def mul(a: Node, b: Node) -> Node:
    if _is_num(a) and _is_num(b):
        return Num(a.value * b.value)
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return Num(0.0)
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    return BinOp('*', a, b)


def div(a: Node, b: Node) -> Node:
    if _is_num(a, 0.0):
        return Num(0.0)
    if _is_num(b, 1.0):
        return a
    return BinOp('/', a, b)


def power(a: Node, b: Node) -> Node:
    if _is_num(b, 1.0):
        return a
    if _is_num(b, 0.0):
        return Num(1.0)
    return BinOp('^', a, b)


def neg(a: Node) -> Node:
    if _is_num(a):
        return Num(-a.value)
    return Neg(a)


class Parser:
    """Recursive-descent parser producing a Node tree"""

    def __init__(self, text: str):
        self.text = text
        self.tokens = self._tokenize(text)
        self.pos = 0

    @staticmethod
    def _tokenize(text: str) -> List[Tuple[str, str, int]]:
        tokens = []
        i = 0
        while i < len(text):
            if text[i].isspace():
                i += 1
                continue
            m = TOKEN_RE.match(text, i)
            if not m or m.end() == i:
                raise ExpressionParseError(f"Unexpected character {text[i]!r} in {text!r}", i)
            kind = m.lastgroup
            tokens.append((kind, m.group(kind), m.start(kind)))
            i = m.end()
        tokens.append(('eof', '', len(text)))
        return tokens

    def peek(self) -> Tuple[str, str, int]:
        return self.tokens[self.pos]

    def take(self) -> Tuple[str, str, int]:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, op: str):
        kind, text, where = self.take()
        if kind != 'op' or text != op:
            raise ExpressionParseError(f"Expected {op!r} but found {text or 'end of input'!r}", where)

    def parse(self) -> Node:
        node = self.expression()
        kind, text, where = self.peek()
        if kind != 'eof':
            raise ExpressionParseError(f"Unexpected {text!r} after complete expression", where)
        return node

    def expression(self) -> Node:
        node = self.term()
        while self.peek()[0] == 'op' and self.peek()[1] in '+-':
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[0] == 'op' and self.peek()[1] in ('*', '/'):
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        kind, text, _ = self.peek()
        if kind == 'op' and text in '+-':
            self.take()
            operand = self.unary()
            return Neg(operand) if text == '-' else operand
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        kind, text, where = self.peek()
        if kind == 'op' and text in ('^', '**'):
            self.take()
            exponent = self.unary()
            if exponent.variables():
                raise ExpressionParseError("Exponents must not contain x or y", where)
            return BinOp('^', base, exponent)
        return base

    def atom(self) -> Node:
        kind, text, where = self.take()
        if kind == 'number':
            return Num(float(text))
        if kind == 'name':
            if text in VARIABLES:
                return Var(text)
            if text == 'pi':
                return Num(np.pi)
            if text in FUNCTIONS:
                self.expect('(')
                arg = self.expression()
                self.expect(')')
                return Call(text, arg)
            raise ExpressionParseError(
                f"Unknown name {text!r}; allowed are {VARIABLES + FUNCTIONS + ('pi',)}", where)
        if kind == 'op' and text == '(':
            node = self.expression()
            self.expect(')')
            return node
        raise ExpressionParseError(f"Unexpected {text or 'end of input'!r}", where)


class Expression:
    """Parsed scalar expression in x and y"""

    def __init__(self, text: str, node: Node = None):
        self.text = text
        self.node = node if node is not None else Parser(text).parse()

    def __call__(self, x, y):
        value = self.node.evaluate({'x': x, 'y': y})
        return value + np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)

    def diff(self, var: str) -> 'Expression':
        if var not in VARIABLES:
            raise ValueError(f"Can only differentiate with respect to {VARIABLES}")
        node = self.node.diff(var)
        return Expression(repr(node), node)

    def depends_on(self, var: str) -> bool:
        return var in self.node.variables()

    def __repr__(self):
        return f"Expression({self.text!r})"


def parse_expression(text: str) -> Expression:
    if not isinstance(text, str) or not text.strip():
        raise ExpressionParseError("Expression must be a non-empty string")
    return Expression(text)
