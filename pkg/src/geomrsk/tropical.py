"""Subtraction-free rational expressions, semifield evaluation, tropicalization.

Expressions are hash-consed immutable nodes over {PosConst, Var, Add, Mul,
Div}; by construction no subtraction or negative constant can appear.
``eval_semifield`` evaluates through the isomorphism -h*log onto the Maslov
family (R, min_h, +), which is also the numerically stable way to compute
-h log f(e^{-x/h}).  The symbolic layer at the bottom computes the A2 chart
composite x_{i'}^{-1} o eta^{w0,e} o x_{-i} as subtraction-free expressions
via minor ratios (Cauchy-Binet over the factorization, Jacobi for the
inverse), so the string cone can be read off by tropicalizing.
"""
from __future__ import annotations

import itertools
import re
from fractions import Fraction

import numpy as np


class SubtractionNotAllowed(ValueError):
    pass


class ExprSyntaxError(ValueError):
    pass


class IrreducibleSubtraction(ArithmeticError):
    """A genuine subtraction survived a supposedly positive computation."""


# ---------------------------------------------------------------------------
# Expr

class Expr:
    __slots__ = ("kind", "value", "args", "_key")
    _intern: dict = {}

    def __new__(cls, kind, value=None, args=()):
        key = (kind, value, tuple(id(a) for a in args))
        found = cls._intern.get(key)
        if found is not None:
            return found
        self = object.__new__(cls)
        self.kind = kind
        self.value = value
        self.args = tuple(args)
        self._key = key
        cls._intern[key] = self
        return self

    def __repr__(self):
        return f"Expr({to_string(self)})"

    # ordering key for normalized commutative children
    def _order(self):
        return (self.kind, str(self.value), tuple(a._order() for a in self.args))


def const(c) -> Expr:
    c = Fraction(c) if not isinstance(c, Fraction) else c
    if c <= 0:
        raise SubtractionNotAllowed("constants must be positive")
    return Expr("const", c)


def var(name: str) -> Expr:
    return Expr("var", name)


def add(a: Expr, b: Expr) -> Expr:
    if a.kind == "const" and b.kind == "const":
        return const(a.value + b.value)
    lo, hi = sorted((a, b), key=Expr._order)
    return Expr("add", args=(lo, hi))


def mul(a: Expr, b: Expr) -> Expr:
    if a.kind == "const" and b.kind == "const":
        return const(a.value * b.value)
    if a.kind == "const" and a.value == 1:
        return b
    if b.kind == "const" and b.value == 1:
        return a
    lo, hi = sorted((a, b), key=Expr._order)
    return Expr("mul", args=(lo, hi))


def div(a: Expr, b: Expr) -> Expr:
    if b.kind == "const" and b.value == 1:
        return a
    if a is b:
        return const(1)
    if a.kind == "const" and b.kind == "const":
        return const(a.value / b.value)
    return Expr("div", args=(a, b))


ONE = const(1)


# ---------------------------------------------------------------------------
# parser / printer

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+(?:\.\d+)?)|(?P<id>[A-Za-z_][A-Za-z_0-9]*)"
                    r"|(?P<op>[+*/()]))")


def _tokenize(text: str):
    pos = 0
    out = []
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        if text[pos] == "-":
            raise SubtractionNotAllowed(f"'-' at position {pos}")
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ExprSyntaxError(f"bad token at position {pos}: {text[pos:pos+8]!r}")
        out.append((m.lastgroup, m.group(m.lastgroup), pos))
        pos = m.end()
    return out


def parse(text: str) -> Expr:
    """expr := term ('+' term)* ; term := factor (('*'|'/') factor)* ;
    factor := number | ident | '(' expr ')'."""
    toks = _tokenize(text)
    k = 0

    def peek():
        return toks[k] if k < len(toks) else (None, None, len(text))

    def expect_factor():
        nonlocal k
        kind, val, pos = peek()
        if kind == "num":
            k += 1
            return const(Fraction(val))
        if kind == "id":
            k += 1
            return var(val)
        if kind == "op" and val == "(":
            k += 1
            e = expr()
            kind_, val_, pos_ = peek()
            if val_ != ")":
                raise ExprSyntaxError(f"expected ')' at position {pos_}")
            k += 1
            return e
        raise ExprSyntaxError(f"expected factor at position {pos}")

    def term():
        nonlocal k
        e = expect_factor()
        while True:
            kind, val, _ = peek()
            if kind == "op" and val in "*/":
                k += 1
                rhs = expect_factor()
                e = mul(e, rhs) if val == "*" else div(e, rhs)
            else:
                return e

    def expr():
        nonlocal k
        e = term()
        while True:
            kind, val, _ = peek()
            if kind == "op" and val == "+":
                k += 1
                e = add(e, term())
            else:
                return e

    out = expr()
    kind, val, pos = peek()
    if kind is not None:
        raise ExprSyntaxError(f"unexpected trailing input at position {pos}")
    return out


def to_string(e: Expr) -> str:
    if e.kind == "const":
        v = e.value
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if e.kind == "var":
        return e.value
    a, b = e.args
    if e.kind == "add":
        return f"{to_string(a)} + {to_string(b)}"
    sa = to_string(a) if a.kind in ("const", "var", "mul", "div") else f"({to_string(a)})"
    sb = to_string(b) if b.kind in ("const", "var") else f"({to_string(b)})"
    op = "*" if e.kind == "mul" else "/"
    return f"{sa}{op}{sb}"


def variables(e: Expr) -> set:
    if e.kind == "var":
        return {e.value}
    out = set()
    for a in e.args:
        out |= variables(a)
    return out


# ---------------------------------------------------------------------------
# evaluation

def eval_positive(e: Expr, env: dict):
    memo = {}

    def go(x):
        r = memo.get(x)
        if r is not None:
            return r
        if x.kind == "const":
            r = float(x.value)
        elif x.kind == "var":
            r = env[x.value]
        elif x.kind == "add":
            r = go(x.args[0]) + go(x.args[1])
        elif x.kind == "mul":
            r = go(x.args[0]) * go(x.args[1])
        else:
            r = go(x.args[0]) / go(x.args[1])
        memo[x] = r
        return r

    return go(e)


def _oplus_h(a, b, h):
    lo = np.minimum(a, b)
    return lo - h * np.log1p(np.exp(-np.abs(a - b) / h))


def eval_semifield(e: Expr, env: dict, h: float):
    """Image of e under the semifield isomorphism -h*log, on quantified inputs.

    Identically equals -h log f(e^{-x/h}) for f = eval_positive, but stays
    finite for h down to ~1e-12.
    """
    if h <= 0:
        raise ValueError("h must be positive (h = 0 is served by tropicalize)")
    memo = {}

    def go(x):
        r = memo.get(x)
        if r is not None:
            return r
        if x.kind == "const":
            r = -h * np.log(float(x.value))
        elif x.kind == "var":
            r = env[x.value]
        elif x.kind == "add":
            r = _oplus_h(go(x.args[0]), go(x.args[1]), h)
        elif x.kind == "mul":
            r = go(x.args[0]) + go(x.args[1])
        else:
            r = go(x.args[0]) - go(x.args[1])
        memo[x] = r
        return r

    return go(e)


# ---------------------------------------------------------------------------
# tropicalization

class TropExpr:
    __slots__ = ("kind", "value", "args")

    def __init__(self, kind, value=None, args=()):
        self.kind = kind
        self.value = value
        self.args = tuple(args)

    def __call__(self, env: dict):
        if self.kind == "zero":
            return 0.0
        if self.kind == "var":
            return env[self.value]
        a = self.args[0](env)
        b = self.args[1](env)
        if self.kind == "min":
            return np.minimum(a, b)
        if self.kind == "plus":
            return a + b
        return a - b

    def __repr__(self):
        return f"TropExpr({trop_to_string(self)})"


def tropicalize(e: Expr) -> TropExpr:
    """Semifield morphism: + -> min, * -> +, / -> -, constants -> 0."""
    memo = {}

    def go(x):
        r = memo.get(x)
        if r is not None:
            return r
        if x.kind == "const":
            r = TropExpr("zero")
        elif x.kind == "var":
            r = TropExpr("var", x.value)
        else:
            kind = {"add": "min", "mul": "plus", "div": "minus"}[x.kind]
            r = TropExpr(kind, args=(go(x.args[0]), go(x.args[1])))
        memo[x] = r
        return r

    return go(e)


def trop_to_string(t: TropExpr) -> str:
    if t.kind == "zero":
        return "0"
    if t.kind == "var":
        return t.value
    a, b = t.args
    if t.kind == "min":
        return f"min({trop_to_string(a)}, {trop_to_string(b)})"
    sa = trop_to_string(a)
    sb = trop_to_string(b)
    if b.kind in ("min", "plus", "minus"):
        sb = f"({sb})"
    if t.kind == "minus" and a.kind in ("plus", "minus"):
        sa = f"({sa})"
    return f"{sa} {'+' if t.kind == 'plus' else '-'} {sb}"


def analytic_trop_check(e: Expr, points: list[dict], h_list) -> dict:
    """max_x |-h log f(e^{-x/h}) - [f]_trop(x)| against the O(h) bound."""
    t = tropicalize(e)
    errs = []
    for h in h_list:
        worst = 0.0
        for env in points:
            lhs = eval_semifield(e, env, h)
            rhs = t(env)
            worst = max(worst, abs(float(lhs - rhs)))
        errs.append(worst)
    h_arr = np.asarray(h_list, dtype=float)
    c_est = float(np.max(np.asarray(errs) / h_arr)) if np.any(np.asarray(errs) > 0) else 0.0
    return {"h": list(h_list), "max_err": errs, "C": c_est}


def random_expression(rng, names, depth=4) -> Expr:
    """Random subtraction-free expression (test generator)."""
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.3:
            return const(Fraction(int(rng.integers(1, 9)), int(rng.integers(1, 5))))
        return var(str(rng.choice(names)))
    op = rng.choice(["add", "mul", "div"], p=[0.45, 0.35, 0.2])
    a = random_expression(rng, names, depth - 1)
    b = random_expression(rng, names, depth - 1)
    return {"add": add, "mul": mul, "div": div}[op](a, b)


# ---------------------------------------------------------------------------
# signed symbolic matrices (A2 chart composites)

class Signed:
    """A formal signed subtraction-free quantity: sign in {-1, 0, +1}."""

    __slots__ = ("sign", "expr")

    def __init__(self, sign, expr):
        self.sign = sign
        self.expr = expr if sign != 0 else None

    @staticmethod
    def zero():
        return Signed(0, None)

    @staticmethod
    def of(expr, sign=1):
        return Signed(sign, expr)

    def __mul__(self, other):
        if self.sign == 0 or other.sign == 0:
            return Signed.zero()
        return Signed(self.sign * other.sign, mul(self.expr, other.expr))

    def __add__(self, other):
        if self.sign == 0:
            return other
        if other.sign == 0:
            return self
        if self.sign == other.sign:
            return Signed(self.sign, add(self.expr, other.expr))
        if self.expr is other.expr:
            return Signed.zero()
        raise IrreducibleSubtraction(
            f"mixed-sign addition: {to_string(self.expr)} vs {to_string(other.expr)}")

    def __neg__(self):
        return Signed(-self.sign, self.expr)

    def __truediv__(self, other):
        if other.sign == 0:
            raise ZeroDivisionError
        if self.sign == 0:
            return Signed.zero()
        return Signed(self.sign * other.sign, div(self.expr, other.expr))

    def positive(self) -> Expr:
        if self.sign != 1:
            raise IrreducibleSubtraction("expected a positive quantity")
        return self.expr


def _sym_minor_dense(mat, rows, cols):
    """Leibniz minor of a small Signed matrix; cancellation must be trivial."""
    k = len(rows)
    total = Signed.zero()
    for perm in itertools.permutations(range(k)):
        sgn = 1
        for a in range(k):
            for b in range(a + 1, k):
                if perm[a] > perm[b]:
                    sgn = -sgn
        term = Signed.of(ONE, sgn)
        for a in range(k):
            term = term * mat[rows[a]][cols[perm[a]]]
            if term.sign == 0:
                break
        total = total + term
    return total


class FactoredMatrix:
    """Product of small Signed matrices with Cauchy-Binet minors."""

    def __init__(self, n, factors):
        self.n = n
        self.factors = list(factors)

    def minor(self, rows, cols) -> Signed:
        n = self.n
        acc = {tuple(rows): Signed.of(ONE)}
        for f in self.factors:
            new = {}
            for mid, val in acc.items():
                for nxt in itertools.combinations(range(n), len(rows)):
                    m = _sym_minor_dense(f, mid, nxt)
                    if m.sign == 0:
                        continue
                    contrib = val * m
                    cur = new.get(nxt)
                    new[nxt] = contrib if cur is None else cur + contrib
            acc = new
        out = acc.get(tuple(cols))
        return out if out is not None else Signed.zero()


def _sym_x_upper(n, i, t: Expr):
    m = [[Signed.zero() for _ in range(n)] for _ in range(n)]
    for k in range(n):
        m[k][k] = Signed.of(ONE)
    m[i - 1][i] = Signed.of(t)
    return m


def _sym_x_minus(n, i, c: Expr):
    m = [[Signed.zero() for _ in range(n)] for _ in range(n)]
    for k in range(n):
        m[k][k] = Signed.of(ONE)
    m[i - 1][i - 1] = Signed.of(div(ONE, c))
    m[i][i] = Signed.of(c)
    m[i][i - 1] = Signed.of(ONE)
    return m


_W0_SL3 = [[0, 0, 1], [0, -1, 0], [1, 0, 0]]  # sbar_1 sbar_2 sbar_1


def _sl3_inverse_minors(v: FactoredMatrix):
    """All leading-row minors of g = (w0bar v^T)^{-1} as Signed quantities.

    Jacobi: minor_{I,J}(g) = (-1)^{sum I + sum J} minor_{J^c, I^c}(w0bar v^T)
    for det = 1; and rows of w0bar v^T are signed permuted columns of v.
    """
    def minor_w0vT(rows, cols):
        sgn = 1
        prows = []
        for r in rows:
            c_idx = next(k for k in range(3) if _W0_SL3[r][k] != 0)
            if _W0_SL3[r][c_idx] < 0:
                sgn = -sgn
            prows.append(c_idx)
        order = tuple(sorted(range(len(prows)), key=lambda a: prows[a]))
        for a in range(len(order)):
            for b in range(a + 1, len(order)):
                if order[a] > order[b]:
                    sgn = -sgn
        srows = tuple(sorted(prows))
        # minor of v^T on (srows, cols) = minor of v on (cols, srows)
        m = v.minor(tuple(cols), srows)
        return Signed(m.sign * sgn, m.expr) if m.sign != 0 else m

    full = list(range(3))

    def g_minor(rows, cols):
        rc = tuple(sorted(set(full) - set(rows)))
        cc = tuple(sorted(set(full) - set(cols)))
        sgn = (-1) ** (sum(rows) + sum(cols))
        m = minor_w0vT(cc, rc)
        return Signed(m.sign * sgn, m.expr) if m.sign != 0 else m

    return g_minor


def _coords_from_leading_minors(g_minor, word):
    """SL3 Lusztig coordinates of [g]_+ as minor ratios of g."""
    m1_1 = g_minor((0,), (0,))
    m1_2 = g_minor((0,), (1,))
    m1_3 = g_minor((0,), (2,))
    m12_12 = g_minor((0, 1), (0, 1))
    m12_13 = g_minor((0, 1), (0, 2))
    m12_23 = g_minor((0, 1), (1, 2))
    u12 = m1_2 / m1_1
    u13 = m1_3 / m1_1
    u23 = m12_13 / m12_12
    u_2x2 = m12_23 / m12_12  # minor rows{1,2} cols{2,3} of [g]_+
    if tuple(word) == (1, 2, 1):
        t1 = u13 / u23
        t2 = u23
        t3 = u_2x2 / u23
    elif tuple(word) == (2, 1, 2):
        t1 = u_2x2 / u12
        t2 = u12
        t3 = u13 / u12
    else:
        raise ValueError("A2 words only")
    return [t1.positive(), t2.positive(), t3.positive()]


def symbolic_chart_composite(word_i, word_iprime, varname="c") -> list[Expr]:
    """x_{i'}^{-1} o eta^{w0,e} o x_{-i} on A2, as subtraction-free Exprs."""
    cs = [var(f"{varname}{j + 1}") for j in range(3)]
    v = FactoredMatrix(3, [_sym_x_minus(3, i, c) for i, c in zip(word_i, cs)])
    g_minor = _sl3_inverse_minors(v)
    return _coords_from_leading_minors(g_minor, word_iprime)


def symbolic_lusztig_chart_change(word_i, word_iprime, varname="t") -> list[Expr]:
    """x_{i'}^{-1} o x_{i} on A2 Lusztig coordinates, subtraction-free."""
    ts = [var(f"{varname}{j + 1}") for j in range(3)]
    u = FactoredMatrix(3, [_sym_x_upper(3, i, t) for i, t in zip(word_i, ts)])

    def g_minor(rows, cols):
        return u.minor(rows, cols)

    return _coords_from_leading_minors(g_minor, word_iprime)


# ---------------------------------------------------------------------------
# string cone

def string_cone_predicate(word_i, word_iprime=(1, 2, 1)):
    """Membership predicate of the string cone from the tropicalized composite."""
    comps = [tropicalize(e) for e in symbolic_chart_composite(word_i, word_iprime)]

    def member(c, tol=0.0):
        env = {f"c{j + 1}": np.asarray(c)[..., j] for j in range(3)}
        vals = [t(env) for t in comps]
        return np.all(np.stack([np.asarray(v) >= -tol for v in vals], axis=0), axis=0)

    member.components = comps
    return member


def string_cone_inequalities(word_i, rng=None, n_samples=4000):
    """Empirical H-description: candidate facets confirmed by sampling."""
    if rng is None:
        rng = np.random.default_rng(0)
    member = string_cone_predicate(word_i)
    pts = rng.uniform(-3, 3, size=(n_samples, 3))
    inside = member(pts)
    # candidate normals: gradients of active linear pieces, found numerically
    cands = set()
    for t in member.components:
        for p in pts[inside][:200]:
            g = np.zeros(3)
            env0 = {f"c{j + 1}": p[j] for j in range(3)}
            base = t(env0)
            for j in range(3):
                env = dict(env0)
                env[f"c{j + 1}"] = p[j] + 1e-6
                g[j] = (t(env) - base) / 1e-6
            cands.add(tuple(np.round(g, 6)))
    out = []
    for c in sorted(cands):
        n = np.array(c)
        vals = pts[inside] @ n
        if np.all(vals >= -1e-9) and np.min(vals) < 0.3:
            out.append(n)
    # drop duplicates up to positive scaling
    uniq = []
    for n in out:
        scale = np.max(np.abs(n))
        if scale == 0:
            continue
        key = tuple(np.round(n / scale, 6))
        if key not in [tuple(np.round(u / np.max(np.abs(u)), 6)) for u in uniq]:
            uniq.append(n)
    return uniq
