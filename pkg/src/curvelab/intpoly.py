"""Exact multivariate integer polynomial arithmetic.

Polynomials are sparse maps from exponent tuples to nonzero integer
coefficients.  All arithmetic is exact: Python integers widen as needed,
so no operation here can overflow or round.  On top of the ring
operations the module provides the difference-quotient constructions
used by the counting arguments elsewhere in the package:

* ``quotient_psi``: the bivariate quotient (phi(x) - phi(y)) / (x - y);
* ``quotient_psi3``: the trivariate quotient of
  phi(x1) - phi(y1) + phi(x2) - phi(x1 - y1 + x2)
  by (x1 - y1)(x2 - y1), obtained by two exact linear divisions;
* ``difference``: first and second order difference polynomials of a
  univariate polynomial;
* ``count_zeros``: exact zero counts over finite grids together with
  the degree * A**(s-1) ceiling;
* ``derivatives_independent``: exact rational linear independence of
  derivative coefficient vectors.

Canonical text form: one variable prints as ``x``, d variables print as
``x0 .. x<d-1>``; terms are listed leading-degree first.  ``parse``
round-trips anything ``str`` produces.
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass
from itertools import product as _cartesian
from typing import Iterable, Mapping, Sequence

import numpy as np

Exponents = tuple[int, ...]


class ExactDivisionError(ArithmeticError):
    """A division that must be exact left a nonzero remainder."""


def _clean(terms: Mapping[Exponents, int], nvars: int) -> dict[Exponents, int]:
    out: dict[Exponents, int] = {}
    for exps, coeff in terms.items():
        if coeff == 0:
            continue
        exps = tuple(int(e) for e in exps)
        if len(exps) != nvars or any(e < 0 for e in exps):
            raise ValueError(f"bad exponent tuple {exps!r} for {nvars} variables")
        out[exps] = out.get(exps, 0) + int(coeff)
        if out[exps] == 0:
            del out[exps]
    return out


class IntPolynomial:
    """Sparse integer polynomial in a fixed number of variables."""

    __slots__ = ("variables", "terms")

    def __init__(self, variables: int, terms: Mapping[Exponents, int]):
        if variables < 1:
            raise ValueError("need at least one variable")
        self.variables = int(variables)
        self.terms = _clean(terms, self.variables)

    # -- constructors -------------------------------------------------

    @classmethod
    def zero(cls, variables: int = 1) -> "IntPolynomial":
        return cls(variables, {})

    @classmethod
    def constant(cls, c: int, variables: int = 1) -> "IntPolynomial":
        return cls(variables, {(0,) * variables: int(c)})

    @classmethod
    def variable(cls, index: int = 0, variables: int = 1) -> "IntPolynomial":
        if not 0 <= index < variables:
            raise ValueError("variable index out of range")
        exps = [0] * variables
        exps[index] = 1
        return cls(variables, {tuple(exps): 1})

    @classmethod
    def from_coefficients(cls, coeffs: Sequence[int]) -> "IntPolynomial":
        """Univariate polynomial from [c0, c1, ...] = c0 + c1*x + ..."""
        return cls(1, {(k,): c for k, c in enumerate(coeffs)})

    # -- ring operations ----------------------------------------------

    def _check_same_space(self, other: "IntPolynomial") -> None:
        if self.variables != other.variables:
            raise ValueError("polynomials live in different variable spaces")

    def __add__(self, other):
        other = self._coerce(other)
        self._check_same_space(other)
        merged = dict(self.terms)
        for e, c in other.terms.items():
            merged[e] = merged.get(e, 0) + c
        return IntPolynomial(self.variables, merged)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    __radd__ = __add__

    def __neg__(self):
        return IntPolynomial(self.variables, {e: -c for e, c in self.terms.items()})

    def __mul__(self, other):
        other = self._coerce(other)
        self._check_same_space(other)
        out: dict[Exponents, int] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return IntPolynomial(self.variables, out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power")
        result = IntPolynomial.constant(1, self.variables)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def _coerce(self, other) -> "IntPolynomial":
        if isinstance(other, IntPolynomial):
            return other
        if isinstance(other, int):
            return IntPolynomial.constant(other, self.variables)
        raise TypeError(f"cannot combine IntPolynomial with {type(other)!r}")

    # -- queries -------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(sum(e) == 0 for e in self.terms)

    def degree(self) -> int | None:
        """Total degree; None for the zero polynomial."""
        if not self.terms:
            return None
        return max(sum(e) for e in self.terms)

    def coefficient(self, exps: Exponents) -> int:
        return self.terms.get(tuple(exps), 0)

    def univariate_coefficients(self) -> list[int]:
        """Dense [c0, c1, ...] list; polynomial must be univariate."""
        if self.variables != 1:
            raise ValueError("not univariate")
        deg = self.degree()
        if deg is None:
            return [0]
        out = [0] * (deg + 1)
        for (k,), c in self.terms.items():
            out[k] = c
        return out

    def evaluate(self, point: Sequence[int]) -> int:
        """Exact value at an integer point."""
        if len(point) != self.variables:
            raise ValueError(f"expected {self.variables} coordinates")
        total = 0
        for exps, coeff in self.terms.items():
            v = coeff
            for x, e in zip(point, exps):
                if e:
                    v *= int(x) ** e
            total += v
        return total

    def derivative(self, var: int = 0) -> "IntPolynomial":
        if not 0 <= var < self.variables:
            raise ValueError("variable index out of range")
        out: dict[Exponents, int] = {}
        for exps, coeff in self.terms.items():
            e = exps[var]
            if e == 0:
                continue
            new = list(exps)
            new[var] = e - 1
            key = tuple(new)
            out[key] = out.get(key, 0) + coeff * e
        return IntPolynomial(self.variables, out)

    def substitute(self, args: Sequence["IntPolynomial"]) -> "IntPolynomial":
        """Evaluate at polynomial arguments (all in one target space)."""
        if len(args) != self.variables:
            raise ValueError(f"expected {self.variables} arguments")
        space = args[0].variables
        if any(a.variables != space for a in args):
            raise ValueError("substitution arguments disagree on variable count")
        result = IntPolynomial.zero(space)
        for exps, coeff in self.terms.items():
            term = IntPolynomial.constant(coeff, space)
            for a, e in zip(args, exps):
                if e:
                    term = term * (a ** e)
            result = result + term
        return result

    # -- comparison / hashing ------------------------------------------

    def __eq__(self, other) -> bool:
        if isinstance(other, int):
            other = IntPolynomial.constant(other, self.variables)
        if not isinstance(other, IntPolynomial):
            return NotImplemented
        return self.variables == other.variables and self.terms == other.terms

    def __hash__(self):
        return hash((self.variables, frozenset(self.terms.items())))

    # -- text form -----------------------------------------------------

    def _var_name(self, i: int) -> str:
        return "x" if self.variables == 1 else f"x{i}"

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        ordered = sorted(self.terms.items(), key=lambda t: (sum(t[0]), t[0]), reverse=True)
        pieces: list[str] = []
        for exps, coeff in ordered:
            factors = []
            for i, e in enumerate(exps):
                if e == 1:
                    factors.append(self._var_name(i))
                elif e > 1:
                    factors.append(f"{self._var_name(i)}^{e}")
            mag = abs(coeff)
            if not factors:
                body = str(mag)
            elif mag == 1:
                body = "*".join(factors)
            else:
                body = "*".join([str(mag)] + factors)
            if not pieces:
                pieces.append(body if coeff > 0 else f"-{body}")
            else:
                pieces.append(("+ " if coeff > 0 else "- ") + body)
        return " ".join(pieces)

    def __repr__(self) -> str:
        return f"IntPolynomial({self!s})"

    @classmethod
    def parse(cls, text: str, variables: int | None = None) -> "IntPolynomial":
        return parse_polynomial(text, variables)


def parse_polynomial(text: str, variables: int | None = None) -> IntPolynomial:
    """Parse canonical ASCII form: integers, x or x<k>, +, -, *, ^, ().

    The variable count is max(index)+1 unless given explicitly; plain
    ``x`` means one variable.  Juxtaposition like ``2x`` means ``2*x``.
    Round-trips ``str(poly)`` exactly.
    """
    src = text.replace("^", "**").strip()
    src = re.sub(r"(\d)\s*([A-Za-z(])", r"\1*\2", src)
    if not src:
        raise ValueError("empty polynomial text")
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse polynomial {text!r}: {exc}") from None

    names: set[str] = {
        node.id for node in ast.walk(tree) if isinstance(node, ast.Name)
    }
    indices: dict[str, int] = {}
    for name in names:
        if name == "x":
            indices[name] = 0
        elif name.startswith("x") and name[1:].isdigit():
            indices[name] = int(name[1:])
        else:
            raise ValueError(f"unknown variable {name!r} (use x or x0, x1, ...)")
    if "x" in indices and len(indices) > 1:
        raise ValueError("mixing 'x' with indexed variables is ambiguous")
    nvars = variables if variables is not None else max(indices.values(), default=0) + 1
    if indices and max(indices.values()) >= nvars:
        raise ValueError("variable index exceeds declared variable count")

    def build(node) -> IntPolynomial:
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant):
            if not isinstance(node.value, int):
                raise ValueError("coefficients must be integers")
            return IntPolynomial.constant(node.value, nvars)
        if isinstance(node, ast.Name):
            return IntPolynomial.variable(indices[node.id], nvars)
        if isinstance(node, ast.UnaryOp):
            inner = build(node.operand)
            if isinstance(node.op, ast.USub):
                return -inner
            if isinstance(node.op, ast.UAdd):
                return inner
            raise ValueError("unsupported unary operator")
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Pow):
                base = build(node.left)
                if not (isinstance(node.right, ast.Constant) and isinstance(node.right.value, int)):
                    raise ValueError("exponent must be a literal integer")
                return base ** node.right.value
            left, right = build(node.left), build(node.right)
            if isinstance(node.op, ast.Add):
                return left + right
            if isinstance(node.op, ast.Sub):
                return left - right
            if isinstance(node.op, ast.Mult):
                return left * right
            raise ValueError("unsupported operator (only +, -, *, ^)")
        raise ValueError(f"unsupported syntax in polynomial text: {ast.dump(node)}")

    return build(tree)


# -- difference quotients ---------------------------------------------


def quotient_psi(phi: IntPolynomial) -> IntPolynomial:
    """Bivariate psi with (x0 - x1) * psi(x0, x1) = phi(x0) - phi(x1).

    Exact for every univariate phi since x^k - y^k always carries the
    factor (x - y).
    """
    if phi.variables != 1:
        raise ValueError("phi must be univariate")
    out: dict[Exponents, int] = {}
    for (k,), coeff in phi.terms.items():
        for i in range(k):  # x^k - y^k = (x-y) * sum x^i y^(k-1-i)
            key = (i, k - 1 - i)
            out[key] = out.get(key, 0) + coeff
    psi = IntPolynomial(2, out)
    x, y = (IntPolynomial.variable(i, 2) for i in range(2))
    if (x - y) * psi != phi.substitute([x]) - phi.substitute([y]):
        raise ExactDivisionError("internal check failed in quotient_psi")
    return psi


def divide_linear(f: IntPolynomial, u: int, v: int) -> IntPolynomial:
    """Exact division of f by (x_u - x_v); raises if a remainder is left.

    Synthetic division in x_u with polynomial coefficients: writing
    f = sum a_i * x_u^i, the quotient coefficients follow the Horner
    recursion b_(i-1) = a_i + x_v * b_i and the remainder is f at
    x_u = x_v.
    """
    if u == v or not (0 <= u < f.variables and 0 <= v < f.variables):
        raise ValueError("need two distinct variable indices")
    nv = f.variables
    layers: dict[int, dict[Exponents, int]] = {}
    for exps, coeff in f.terms.items():
        i = exps[u]
        rest = list(exps)
        rest[u] = 0
        layers.setdefault(i, {})[tuple(rest)] = coeff
    if not layers:
        return IntPolynomial.zero(nv)
    top = max(layers)
    x_v = IntPolynomial.variable(v, nv)
    quotient: dict[Exponents, int] = {}
    carry = IntPolynomial.zero(nv)  # b_i while scanning i = top .. 1
    for i in range(top, 0, -1):
        a_i = IntPolynomial(nv, layers.get(i, {}))
        b = a_i + x_v * carry
        for exps, coeff in b.terms.items():
            key = list(exps)
            key[u] = i - 1
            key = tuple(key)
            quotient[key] = quotient.get(key, 0) + coeff
        carry = b
    remainder = IntPolynomial(nv, layers.get(0, {})) + x_v * carry
    if not remainder.is_zero():
        raise ExactDivisionError(
            f"division by (x{u} - x{v}) leaves remainder {remainder}"
        )
    return IntPolynomial(nv, quotient)


def quotient_psi3(phi: IntPolynomial) -> IntPolynomial:
    """Trivariate psi(x0, x1, x2), variables read as (x1, y1, x2), with

        (x1 - y1)(x2 - y1) * psi = phi(x1) - phi(y1) + phi(x2) - phi(x1 - y1 + x2).

    Built by two successive exact linear divisions; a nonzero remainder
    in either raises ExactDivisionError (it cannot happen for genuine
    univariate phi, so it guards internal bugs).
    """
    if phi.variables != 1:
        raise ValueError("phi must be univariate")
    x1, y1, x2 = (IntPolynomial.variable(i, 3) for i in range(3))
    f = (
        phi.substitute([x1])
        - phi.substitute([y1])
        + phi.substitute([x2])
        - phi.substitute([x1 - y1 + x2])
    )
    if f.is_zero():
        # degree <= 1 phi: the combination vanishes identically
        return IntPolynomial.zero(3)
    q1 = divide_linear(f, 0, 1)
    psi = divide_linear(q1, 2, 1)
    if (x1 - y1) * (x2 - y1) * psi != f:
        raise ExactDivisionError("internal check failed in quotient_psi3")
    return psi


def difference(phi: IntPolynomial, order: int) -> IntPolynomial:
    """First or second order difference polynomial of univariate phi.

    order 1: phi(y + e) - phi(y) in variables (y, e).
    order 2: phi(y + e1 + e2) - phi(y + e1) - phi(y + e2) + phi(y)
             in variables (y, e1, e2).
    """
    if phi.variables != 1:
        raise ValueError("phi must be univariate")
    if order == 1:
        y, e = (IntPolynomial.variable(i, 2) for i in range(2))
        return phi.substitute([y + e]) - phi.substitute([y])
    if order == 2:
        y, e1, e2 = (IntPolynomial.variable(i, 3) for i in range(3))
        return (
            phi.substitute([y + e1 + e2])
            - phi.substitute([y + e1])
            - phi.substitute([y + e2])
            + phi.substitute([y])
        )
    raise ValueError("order must be 1 or 2")


# -- zero counting over grids ------------------------------------------


@dataclass(frozen=True)
class ZeroCount:
    """Exact zero count of a polynomial over set^s plus the degree bound."""

    zeros: int
    bound: int
    within_bound: bool
    points: int


def _grid_values(p: IntPolynomial, vals: np.ndarray) -> np.ndarray | None:
    """Vectorized evaluation on vals^s; None if int64 could overflow."""
    deg = p.degree() or 0
    vmax = int(np.abs(vals).max(initial=0))
    ceiling = sum(abs(c) for c in p.terms.values()) * max(1, vmax) ** deg
    if ceiling >= 2 ** 62:
        return None
    s = p.variables
    total = np.zeros((len(vals),) * s, dtype=np.int64)
    for exps, coeff in p.terms.items():
        term = np.full((len(vals),) * s, coeff, dtype=np.int64)
        for i, e in enumerate(exps):
            if e:
                shape = [1] * s
                shape[i] = len(vals)
                term = term * (vals.astype(np.int64) ** e).reshape(shape)
        total += term
    return total


def count_zeros(p: IntPolynomial, points: Iterable[int]) -> ZeroCount:
    """Count zeros of p over points^s exactly; s = p.variables.

    Returns the count, the ceiling degree * A**(s-1), and whether the
    count respects it (it must, for nonzero p; the flag is asserted by
    callers, not assumed).
    """
    if p.is_zero():
        raise ValueError("zero polynomial has no zero-count ceiling")
    vals = sorted(set(int(v) for v in points))
    if not vals:
        return ZeroCount(0, 0, True, 0)
    a = len(vals)
    s = p.variables
    deg = p.degree()
    bound = deg * a ** (s - 1)
    arr = _grid_values(p, np.array(vals, dtype=np.int64))
    if arr is not None:
        zeros = int((arr == 0).sum())
    else:  # exact fallback for huge coefficients
        zeros = sum(
            1 for pt in _cartesian(vals, repeat=s) if p.evaluate(pt) == 0
        )
    return ZeroCount(zeros, bound, zeros <= bound, a ** s)


def derivatives_independent(
    p: IntPolynomial, q: IntPolynomial, order: int = 1
) -> bool:
    """True if the order-th derivatives are linearly independent over Q.

    Works on exact coefficient vectors: dependence means one vector is a
    rational multiple of the other, checked by integer cross products.
    """
    if p.variables != 1 or q.variables != 1:
        raise ValueError("expected univariate polynomials")
    if order < 0:
        raise ValueError("order must be nonnegative")
    dp, dq = p, q
    for _ in range(order):
        dp, dq = dp.derivative(), dq.derivative()
    a = dp.univariate_coefficients()
    b = dq.univariate_coefficients()
    n = max(len(a), len(b))
    a = a + [0] * (n - len(a))
    b = b + [0] * (n - len(b))
    if all(c == 0 for c in a) or all(c == 0 for c in b):
        return False  # zero vector is dependent with everything
    for i in range(n):
        for j in range(i + 1, n):
            if a[i] * b[j] - a[j] * b[i] != 0:
                return True
    return False
