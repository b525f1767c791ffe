"""A small expression language for perturbation symbols in scenario files.

Grammar (infix, standard precedence, ^ right-associative and binding a
following unary minus, so x^-2 parses):

    expr    := term (('+' | '-') term)*
    term    := factor (('*' | '/') factor)*
    factor  := unary ('^' factor)?
    unary   := '-' unary | primary
    primary := NUMBER | 'x' | 'xi' | NAME '(' expr (',' expr)* ')'
             | '(' expr ')'

Functions: exp, sqrt, and br(...) = sqrt(1 + sum of squared arguments)
-- the Japanese-bracket weight.  The glyphs '<'...'>' may be written
directly around a comma list as a shorthand for br(...); the list may
optionally sit in parentheses, so <(x, xi)> and <x, xi> are the same.

Every parse produces both a numpy evaluator (for lattices) and a plain
math-module evaluator; the two are independent implementations and are
cross-checked when scenarios load.
"""

import math

import numpy as np

from .errors import ParseError

_FUNCS = ("exp", "sqrt", "br")


class Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col


def _tokenize(src):
    toks = []
    line, col = 1, 1
    i = 0
    while i < len(src):
        ch = src[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            col += 1
            i += 1
            continue
        if ch in "+-*/^(),":
            toks.append(Token(ch, ch, line, col))
            i += 1
            col += 1
            continue
        if ch in "<⟨":
            toks.append(Token("bra", ch, line, col))
            i += 1
            col += 1
            continue
        if ch in ">⟩":
            toks.append(Token("ket", ch, line, col))
            i += 1
            col += 1
            continue
        if ch.isdigit() or ch == ".":
            j = i
            seen_e = False
            while j < len(src) and (src[j].isdigit() or src[j] == "."
                                    or (src[j] in "eE" and not seen_e)
                                    or (src[j] in "+-" and j > i
                                        and src[j - 1] in "eE")):
                if src[j] in "eE":
                    seen_e = True
                j += 1
            text = src[i:j]
            try:
                float(text)
            except ValueError:
                raise ParseError("bad number %r" % text, line, col)
            toks.append(Token("num", text, line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < len(src) and (src[j].isalnum() or src[j] == "_"):
                j += 1
            toks.append(Token("name", src[i:j], line, col))
            col += j - i
            i = j
            continue
        raise ParseError("unexpected character %r" % ch, line, col)
    toks.append(Token("end", "", line, col))
    return toks


class _Parser:
    def __init__(self, toks):
        self.toks = toks
        self.k = 0

    def peek(self):
        return self.toks[self.k]

    def next(self):
        t = self.toks[self.k]
        self.k += 1
        return t

    def expect(self, kind):
        t = self.next()
        if t.kind != kind:
            raise ParseError("expected %r, found %r" % (kind, t.text or "end"),
                             t.line, t.col)
        return t

    def parse(self):
        e = self.expr()
        t = self.peek()
        if t.kind != "end":
            raise ParseError("trailing input %r" % t.text, t.line, t.col)
        return e

    def expr(self):
        node = self.term()
        while self.peek().kind in ("+", "-"):
            op = self.next().kind
            node = ("bin", op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek().kind in ("*", "/"):
            op = self.next().kind
            node = ("bin", op, node, self.factor())
        return node

    def factor(self):
        base = self.unary()
        if self.peek().kind == "^":
            self.next()
            return ("bin", "^", base, self.factor())
        return base

    def unary(self):
        if self.peek().kind == "-":
            self.next()
            return ("neg", self.unary())
        return self.primary()

    def primary(self):
        t = self.next()
        if t.kind == "num":
            return ("num", float(t.text))
        if t.kind == "name":
            if t.text == "x":
                return ("var", "x")
            if t.text == "xi":
                return ("var", "xi")
            if t.text in _FUNCS:
                self.expect("(")
                args = [self.expr()]
                while self.peek().kind == ",":
                    self.next()
                    args.append(self.expr())
                self.expect(")")
                if t.text in ("exp", "sqrt") and len(args) != 1:
                    raise ParseError("%s takes one argument" % t.text,
                                     t.line, t.col)
                return ("call", t.text, args)
            raise ParseError("unknown name %r (know: x, xi, %s)"
                             % (t.text, ", ".join(_FUNCS)), t.line, t.col)
        if t.kind == "bra":
            # tuple sugar: <(x, xi)> means <x, xi> -- unwrap parentheses
            # that enclose the whole comma list (detected by matching the
            # paren and checking a closing bracket follows immediately)
            if self.peek().kind == "(":
                depth, j = 0, self.k
                while j < len(self.toks):
                    kind = self.toks[j].kind
                    if kind == "(":
                        depth += 1
                    elif kind == ")":
                        depth -= 1
                        if depth == 0:
                            break
                    j += 1
                if depth == 0 and self.toks[j + 1].kind == "ket":
                    self.next()
                    args = [self.expr()]
                    while self.peek().kind == ",":
                        self.next()
                        args.append(self.expr())
                    self.expect(")")
                    self.next()          # the ket, guaranteed above
                    return ("call", "br", args)
            args = [self.expr()]
            while self.peek().kind == ",":
                self.next()
                args.append(self.expr())
            tk = self.next()
            if tk.kind != "ket":
                raise ParseError("unclosed bracket weight", t.line, t.col)
            return ("call", "br", args)
        if t.kind == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError("expected a value, found %r" % (t.text or "end"),
                         t.line, t.col)


def _eval(node, x, xi, lib):
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "var":
        return x if node[1] == "x" else xi
    if kind == "neg":
        return -_eval(node[1], x, xi, lib)
    if kind == "bin":
        _, op, a, b = node
        va = _eval(a, x, xi, lib)
        vb = _eval(b, x, xi, lib)
        if op == "+":
            return va + vb
        if op == "-":
            return va - vb
        if op == "*":
            return va * vb
        if op == "/":
            return va / vb
        return lib["pow"](va, vb)
    if kind == "call":
        _, name, args = node
        vals = [_eval(a, x, xi, lib) for a in args]
        if name == "exp":
            return lib["exp"](vals[0])
        if name == "sqrt":
            return lib["sqrt"](vals[0])
        s = 1.0
        for v in vals:
            s = s + v * v
        return lib["sqrt"](s)
    raise AssertionError(node)


_NUMPY_LIB = {"exp": np.exp, "sqrt": np.sqrt, "pow": np.power}
_MATH_LIB = {"exp": math.exp, "sqrt": math.sqrt, "pow": lambda a, b: a ** b}


class SymbolExpression:
    """Compiled symbol expression with two independent evaluators."""

    def __init__(self, text, ast):
        self.text = text
        self.ast = ast

    def __call__(self, x, xi):
        """Vectorized (numpy) evaluation."""
        return _eval(self.ast, np.asarray(x, dtype=float),
                     np.asarray(xi, dtype=float), _NUMPY_LIB)

    def eval_scalar(self, x, xi):
        """Scalar evaluation through the math module only -- the reference
        implementation the vectorized path is checked against."""
        return _eval(self.ast, float(x), float(xi), _MATH_LIB)

    def __repr__(self):
        return "SymbolExpression(%r)" % self.text


def parse_symbol_expr(text):
    if not isinstance(text, str) or not text.strip():
        raise ParseError("empty expression")
    return SymbolExpression(text, _Parser(_tokenize(text)).parse())
