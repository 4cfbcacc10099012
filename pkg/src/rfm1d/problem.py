"""Two-point boundary-value problems with manufactured solutions.

The differential operator is

    L u = a(x) u'' + b(x) u' + c(x) u        on (-R, R),

with the boundary operator B u = g1 u' + g2 u applied at the two endpoints.
Solutions are built from a small closed algebra of expressions
(cos(w x), sin(w x), exp(w x), x^k, constants, sums, products, scalings)
whose members carry

  * exact derivatives of arbitrary order,
  * exact derivative values at x = 0, and
  * a certified derivative-growth envelope  |u^(n)(x)| <= M C^n (n!)^s
    valid on the closed interval [-R, R].

The envelope calculus follows the closure rules of the class: scaling by a
keeps C and multiplies M by |a|; sums take M1+M2 and max(C1, C2); products
take M1*M2 and C1+C2; differentiation maps (M, C) to (M*C, 2^s C).  Mixed
indices combine with s = max(s1, s2), which is sound because the class with
the smaller index embeds in the larger one.

`parse_expression` turns a config string such as ``"sin(3*x) + exp(x)"``
into a solution object, which is how manufactured problems are described in
experiment configs.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "Domain",
    "ScalarField",
    "BoundaryOperator",
    "PDEProblem",
    "GevreyEnvelope",
    "ManufacturedSolution",
    "cosine",
    "sine",
    "exponential",
    "monomial",
    "constant",
    "power_cusp",
    "envelope_primitive",
    "envelope_combine",
    "apply_L",
    "make_manufactured",
    "parse_expression",
    "field_from_expression",
]


# ---------------------------------------------------------------------------
# Domain and envelope
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Domain:
    """Symmetric interval (-R, R)."""

    R: float

    def __post_init__(self) -> None:
        if not self.R > 0:
            raise ValueError(f"domain half-width must be positive, got R={self.R}")

    def require(self, x) -> None:
        """Raise if any point lies outside the closed interval [-R, R]."""
        x = np.asarray(x, dtype=float)
        if np.any(np.abs(x) > self.R * (1 + 1e-12)):
            raise ValueError(f"point outside [-{self.R}, {self.R}]")


@dataclass(frozen=True)
class GevreyEnvelope:
    """Certified derivative growth: |f^(n)(x)| <= M * C**n * (n!)**s on the domain."""

    M: float
    C: float
    s: float

    def __post_init__(self) -> None:
        if self.M < 0 or self.C < 0 or self.s < 0:
            raise ValueError("envelope parameters must be nonnegative")

    def bound(self, n: int) -> float:
        """The envelope value M C^n (n!)^s at derivative order n."""
        return self.M * self.C**n * math.exp(self.s * math.lgamma(n + 1))


def envelope_primitive(kind: str, *, w: float | None = None, k: int | None = None,
                       mass: float | None = None, S: float | None = None,
                       R: float) -> GevreyEnvelope:
    """Envelope for a primitive function on [-R, R].

    kind "cos"/"sin" need w; "exp" needs w; "monomial" needs degree k;
    "bandlimited" needs the user-supplied transform mass and cutoff S (no
    transform is computed here).  All primitives have index s = 0.
    """
    if R <= 0:
        raise ValueError("R must be positive")
    if kind in ("cos", "sin"):
        if w is None:
            raise ValueError("cos/sin envelope needs w")
        return GevreyEnvelope(1.0, abs(w), 0.0)
    if kind == "exp":
        if w is None:
            raise ValueError("exp envelope needs w")
        return GevreyEnvelope(math.exp(abs(w) * R), abs(w), 0.0)
    if kind == "monomial":
        if k is None or k < 0:
            raise ValueError("monomial envelope needs degree k >= 0")
        return GevreyEnvelope(R**k, k / R, 0.0)
    if kind == "bandlimited":
        if mass is None or S is None:
            raise ValueError("bandlimited envelope needs mass and S")
        return GevreyEnvelope(float(mass), float(S), 0.0)
    raise ValueError(f"unknown primitive kind {kind!r}")


def envelope_combine(op: str, e1: GevreyEnvelope, e2: GevreyEnvelope | None = None,
                     factor: float | None = None) -> GevreyEnvelope:
    """Combine envelopes under scale/sum/product/derivative."""
    if op == "scale":
        if factor is None:
            raise ValueError("scale needs a factor")
        return GevreyEnvelope(abs(factor) * e1.M, e1.C, e1.s)
    if op == "derivative":
        return GevreyEnvelope(e1.M * e1.C, 2.0**e1.s * e1.C, e1.s)
    if e2 is None:
        raise ValueError(f"{op} needs two envelopes")
    s = max(e1.s, e2.s)
    if op == "sum":
        return GevreyEnvelope(e1.M + e2.M, max(e1.C, e2.C), s)
    if op == "product":
        return GevreyEnvelope(e1.M * e2.M, e1.C + e2.C, s)
    raise ValueError(f"unknown combination {op!r}")


# ---------------------------------------------------------------------------
# Solution expressions with exact derivatives
# ---------------------------------------------------------------------------

class ManufacturedSolution:
    """A solution expression with exact derivatives and an optional envelope.

    Subclasses implement `deriv(x, order)` (vectorised over x) and
    `deriv_at_zero(order)` (exact, used by the Taylor-matching machinery).
    The `envelope` is None for members outside the smooth algebra, such as
    the power-cusp profiles used in roughness experiments.
    """

    envelope: Optional[GevreyEnvelope] = None

    def deriv(self, x, order: int = 0):
        raise NotImplementedError

    def deriv_at_zero(self, order: int) -> float:
        return float(self.deriv(0.0, order))

    def __call__(self, x):
        return self.deriv(x, 0)

    # -- algebra ------------------------------------------------------------
    def __add__(self, other: "ManufacturedSolution") -> "ManufacturedSolution":
        return _Sum(self, other)

    def __sub__(self, other: "ManufacturedSolution") -> "ManufacturedSolution":
        return _Sum(self, _Scaled(-1.0, other))

    def __mul__(self, other):
        if isinstance(other, ManufacturedSolution):
            return _Product(self, other)
        return _Scaled(float(other), self)

    __rmul__ = __mul__

    def __neg__(self) -> "ManufacturedSolution":
        return _Scaled(-1.0, self)


class _Cosine(ManufacturedSolution):
    def __init__(self, w: float):
        self.w = float(w)
        self.envelope = envelope_primitive("cos", w=w, R=1.0)

    def deriv(self, x, order: int = 0):
        x = np.asarray(x, dtype=float)
        return self.w**order * np.cos(self.w * x + order * math.pi / 2)

    def deriv_at_zero(self, order: int) -> float:
        return self.w**order * (1.0, 0.0, -1.0, 0.0)[order % 4]


class _Sine(ManufacturedSolution):
    def __init__(self, w: float):
        self.w = float(w)
        self.envelope = envelope_primitive("sin", w=w, R=1.0)

    def deriv(self, x, order: int = 0):
        x = np.asarray(x, dtype=float)
        return self.w**order * np.sin(self.w * x + order * math.pi / 2)

    def deriv_at_zero(self, order: int) -> float:
        return self.w**order * (0.0, 1.0, 0.0, -1.0)[order % 4]


class _Exponential(ManufacturedSolution):
    def __init__(self, w: float, R: float):
        self.w = float(w)
        self.envelope = envelope_primitive("exp", w=w, R=R)

    def deriv(self, x, order: int = 0):
        x = np.asarray(x, dtype=float)
        return self.w**order * np.exp(self.w * x)

    def deriv_at_zero(self, order: int) -> float:
        return self.w**order


class _Monomial(ManufacturedSolution):
    def __init__(self, k: int, R: float):
        if k < 0:
            raise ValueError("monomial degree must be >= 0")
        self.k = int(k)
        self.envelope = envelope_primitive("monomial", k=k, R=R)

    def deriv(self, x, order: int = 0):
        x = np.asarray(x, dtype=float)
        if order > self.k:
            return np.zeros_like(x)
        return float(math.perm(self.k, order)) * x ** (self.k - order)

    def deriv_at_zero(self, order: int) -> float:
        return float(math.factorial(self.k)) if order == self.k else 0.0


class _Constant(ManufacturedSolution):
    def __init__(self, c: float):
        self.c = float(c)
        self.envelope = GevreyEnvelope(abs(self.c), 0.0, 0.0)

    def deriv(self, x, order: int = 0):
        x = np.asarray(x, dtype=float)
        return np.full_like(x, self.c) if order == 0 else np.zeros_like(x)

    def deriv_at_zero(self, order: int) -> float:
        return self.c if order == 0 else 0.0


class _Sum(ManufacturedSolution):
    def __init__(self, f: ManufacturedSolution, g: ManufacturedSolution):
        self.f, self.g = f, g
        if f.envelope is not None and g.envelope is not None:
            self.envelope = envelope_combine("sum", f.envelope, g.envelope)

    def deriv(self, x, order: int = 0):
        return self.f.deriv(x, order) + self.g.deriv(x, order)

    def deriv_at_zero(self, order: int) -> float:
        return self.f.deriv_at_zero(order) + self.g.deriv_at_zero(order)


class _Product(ManufacturedSolution):
    def __init__(self, f: ManufacturedSolution, g: ManufacturedSolution):
        self.f, self.g = f, g
        if f.envelope is not None and g.envelope is not None:
            self.envelope = envelope_combine("product", f.envelope, g.envelope)

    def deriv(self, x, order: int = 0):
        total = 0.0
        for j in range(order + 1):
            total = total + math.comb(order, j) * self.f.deriv(x, j) * self.g.deriv(x, order - j)
        return total

    def deriv_at_zero(self, order: int) -> float:
        return sum(math.comb(order, j) * self.f.deriv_at_zero(j) * self.g.deriv_at_zero(order - j)
                   for j in range(order + 1))


class _Scaled(ManufacturedSolution):
    def __init__(self, a: float, f: ManufacturedSolution):
        self.a, self.f = float(a), f
        if f.envelope is not None:
            self.envelope = envelope_combine("scale", f.envelope, factor=a)

    def deriv(self, x, order: int = 0):
        return self.a * self.f.deriv(x, order)

    def deriv_at_zero(self, order: int) -> float:
        return self.a * self.f.deriv_at_zero(order)


class _PowerCusp(ManufacturedSolution):
    """|x - x0|^q profile with finite-smoothness content; derivatives to order 2 only."""

    def __init__(self, q: float, x0: float):
        if q <= 2:
            raise ValueError("cusp exponent must exceed 2 for a square-integrable residual")
        self.q, self.x0 = float(q), float(x0)
        self.envelope = None

    def deriv(self, x, order: int = 0):
        t = np.asarray(x, dtype=float) - self.x0
        r = np.abs(t)
        if order == 0:
            return r**self.q
        if order == 1:
            return self.q * np.sign(t) * r ** (self.q - 1)
        if order == 2:
            return self.q * (self.q - 1) * r ** (self.q - 2)
        raise ValueError("power cusp has exact derivatives only up to order 2")

    def deriv_at_zero(self, order: int) -> float:
        if self.x0 == 0.0:
            raise ValueError("power cusp is not smooth at its center")
        return float(self.deriv(0.0, order))


def cosine(w: float) -> ManufacturedSolution:
    return _Cosine(w)


def sine(w: float) -> ManufacturedSolution:
    return _Sine(w)


def exponential(w: float, R: float) -> ManufacturedSolution:
    return _Exponential(w, R)


def monomial(k: int, R: float) -> ManufacturedSolution:
    return _Monomial(k, R)


def constant(c: float) -> ManufacturedSolution:
    return _Constant(c)


def power_cusp(q: float, x0: float) -> ManufacturedSolution:
    return _PowerCusp(q, x0)


# ---------------------------------------------------------------------------
# Coefficient fields, boundary operator, problem
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ScalarField:
    """Coefficient or data field on [-R, R] with a certified sup-norm bound."""

    value: Callable
    sup_bound: float
    deriv1: Optional[Callable] = None
    deriv2: Optional[Callable] = None

    def __call__(self, x):
        return np.asarray(self.value(np.asarray(x, dtype=float)), dtype=float)

    @classmethod
    def constant(cls, c: float) -> "ScalarField":
        c = float(c)
        return cls(value=lambda x: np.full_like(np.asarray(x, dtype=float), c),
                   sup_bound=abs(c))

    @classmethod
    def from_solution(cls, u: ManufacturedSolution, sup_bound: float | None = None) -> "ScalarField":
        if sup_bound is None:
            if u.envelope is None:
                raise ValueError("sup_bound required for fields without an envelope")
            sup_bound = u.envelope.bound(0)
        return cls(value=lambda x: u.deriv(x, 0), sup_bound=float(sup_bound),
                   deriv1=lambda x: u.deriv(x, 1), deriv2=lambda x: u.deriv(x, 2))


@dataclass(frozen=True)
class BoundaryOperator:
    """B u = g1 u' + g2 u at the two endpoints, with target values g."""

    g1_left: float
    g1_right: float
    g2_left: float
    g2_right: float
    g_left: float = 0.0
    g_right: float = 0.0

    @classmethod
    def dirichlet(cls, g_left: float = 0.0, g_right: float = 0.0) -> "BoundaryOperator":
        return cls(0.0, 0.0, 1.0, 1.0, g_left, g_right)

    @property
    def g1_norm(self) -> float:
        """Two-point L2 norm of the derivative weight."""
        return math.hypot(self.g1_left, self.g1_right)

    @property
    def g2_norm(self) -> float:
        return math.hypot(self.g2_left, self.g2_right)

    def apply(self, u_value: float, u_deriv: float, side: str) -> float:
        if side == "left":
            return self.g1_left * u_deriv + self.g2_left * u_value
        if side == "right":
            return self.g1_right * u_deriv + self.g2_right * u_value
        raise ValueError("side must be 'left' or 'right'")


@dataclass(frozen=True, eq=False)
class PDEProblem:
    """L u = f on (-R, R) with B u = g at the endpoints and penalty gamma."""

    domain: Domain
    a: ScalarField
    b: ScalarField
    c: ScalarField
    f: ScalarField
    boundary: BoundaryOperator
    gamma: float = 1.0
    solution: Optional[ManufacturedSolution] = None

    def __post_init__(self) -> None:
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")


def apply_L(problem: PDEProblem, u: ManufacturedSolution, x):
    """a(x) u''(x) + b(x) u'(x) + c(x) u(x); x must lie in [-R, R]."""
    x = np.asarray(x, dtype=float)
    problem.domain.require(x)
    return (problem.a(x) * u.deriv(x, 2)
            + problem.b(x) * u.deriv(x, 1)
            + problem.c(x) * u.deriv(x, 0))


def make_manufactured(u: ManufacturedSolution, a: ScalarField, b: ScalarField,
                      c: ScalarField, boundary: BoundaryOperator, domain: Domain,
                      gamma: float = 1.0) -> PDEProblem:
    """Build the problem whose exact solution is u: f := L u, g := B u at +-R."""
    R = domain.R

    def f_value(x):
        return a(x) * u.deriv(x, 2) + b(x) * u.deriv(x, 1) + c(x) * u.deriv(x, 0)

    if u.envelope is not None:
        e = u.envelope
        f_sup = a.sup_bound * e.bound(2) + b.sup_bound * e.bound(1) + c.sup_bound * e.bound(0)
    else:
        f_sup = math.inf
    f = ScalarField(value=f_value, sup_bound=f_sup)

    g_left = boundary.apply(float(u.deriv(-R, 0)), float(u.deriv(-R, 1)), "left")
    g_right = boundary.apply(float(u.deriv(R, 0)), float(u.deriv(R, 1)), "right")
    bc = BoundaryOperator(boundary.g1_left, boundary.g1_right,
                          boundary.g2_left, boundary.g2_right, g_left, g_right)
    return PDEProblem(domain=domain, a=a, b=b, c=c, f=f, boundary=bc,
                      gamma=gamma, solution=u)


# ---------------------------------------------------------------------------
# Expression grammar for configs
# ---------------------------------------------------------------------------
#
#   expr   := term (('+'|'-') term)*
#   term   := unary ('*' unary)*
#   unary  := '-' unary | atom
#   atom   := NUMBER | 'x' ['^' INT] | ('cos'|'sin'|'exp') '(' inner ')'
#           | '(' expr ')'
#   inner  := ['-'] [NUMBER '*'] 'x'
#
# Covers products and sums of cos(w*x), sin(w*x), exp(w*x), x^k and constants.

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?)|([A-Za-z_]\w*)|([()+\-*^]))")


def _tokenize(text: str):
    pos, out = 0, []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"bad expression near {text[pos:pos + 10]!r}")
        num, name, sym = m.groups()
        if num is not None:
            out.append(("num", float(num)))
        elif name is not None:
            out.append(("name", name))
        else:
            out.append(("sym", sym))
        pos = m.end()
    out.append(("end", None))
    return out


class _Parser:
    def __init__(self, tokens, R: float):
        self.toks = tokens
        self.i = 0
        self.R = R

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None, value=None):
        tok = self.toks[self.i]
        if kind is not None and tok[0] != kind:
            raise ValueError(f"expected {kind}, got {tok}")
        if value is not None and tok[1] != value:
            raise ValueError(f"expected {value!r}, got {tok}")
        self.i += 1
        return tok

    def parse(self) -> ManufacturedSolution:
        node = self.expr()
        self.take("end")
        return node

    def expr(self):
        node = self.term()
        while self.peek() == ("sym", "+") or self.peek() == ("sym", "-"):
            op = self.take("sym")[1]
            rhs = self.term()
            node = node + rhs if op == "+" else node - rhs
        return node

    def term(self):
        node = self.unary()
        while self.peek() == ("sym", "*"):
            self.take("sym", "*")
            node = node * self.unary()
        return node

    def unary(self):
        if self.peek() == ("sym", "-"):
            self.take("sym", "-")
            return -self.unary()
        return self.atom()

    def atom(self):
        kind, val = self.peek()
        if kind == "num":
            self.take()
            return constant(val)
        if kind == "sym" and val == "(":
            self.take()
            node = self.expr()
            self.take("sym", ")")
            return node
        if kind == "name" and val == "x":
            self.take()
            if self.peek() == ("sym", "^"):
                self.take()
                k = self.take("num")[1]
                if k != int(k) or k < 0:
                    raise ValueError("x^k needs a nonnegative integer exponent")
                return monomial(int(k), self.R)
            return monomial(1, self.R)
        if kind == "name" and val in ("cos", "sin", "exp"):
            self.take()
            self.take("sym", "(")
            w = self.inner_freq()
            self.take("sym", ")")
            if val == "cos":
                return cosine(w)
            if val == "sin":
                return sine(w)
            return exponential(w, self.R)
        raise ValueError(f"unexpected token {self.peek()}")

    def inner_freq(self) -> float:
        sign = 1.0
        if self.peek() == ("sym", "-"):
            self.take()
            sign = -1.0
        kind, val = self.peek()
        if kind == "num":
            self.take()
            self.take("sym", "*")
            self.take("name", "x")
            return sign * val
        self.take("name", "x")
        return sign


def parse_expression(text: str, R: float) -> ManufacturedSolution:
    """Parse a config expression such as "sin(3*x) + exp(x)" into a solution."""
    return _Parser(_tokenize(text), R).parse()


def field_from_expression(text: str, R: float) -> ScalarField:
    """Parse an expression into a coefficient field with a certified sup bound."""
    node = parse_expression(text, R)
    return ScalarField.from_solution(node)
