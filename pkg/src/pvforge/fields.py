"""Exact coefficient arithmetic for the base field k = Q(t) and algebraic
extension towers above it.

Everything is exact: rationals are fractions.Fraction, rational functions are
pairs of integer-normalized polynomials, and extension elements are residue
polynomials modulo a monic irreducible minimal polynomial.  Each tower level
carries the unique extension of d/dt, so the derivation of any element is
available everywhere.

Factorization over Q (univariate and bivariate after denominator clearing) is
delegated to sympy; factorization over extension levels reduces to the base by
norms (multiplication-matrix determinants), so no sympy object ever leaks out
of this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce

import sympy

from .errors import (
    ParseError,
    TowerBudgetError,
    UnsupportedShapeError,
    InternalConsistencyError,
)


# ---------------------------------------------------------------------------
# domains


class RationalField:
    """Domain of plain rationals; elements are fractions.Fraction."""

    name = "Q"
    zero = Fraction(0)
    one = Fraction(1)

    def convert(self, x):
        if isinstance(x, Fraction):
            return x
        if isinstance(x, int):
            return Fraction(x)
        raise TypeError("cannot convert %r into Q" % (x,))

    def derive(self, x):
        return Fraction(0)

    def depth(self):
        return 0

    def __repr__(self):
        return "Q"


QQ = RationalField()


class RatFuncField:
    """Domain k = Q(t); elements are RatFunc."""

    name = "Q(t)"

    def __init__(self):
        self.zero = RatFunc(UPoly(QQ, ()), UPoly(QQ, (Fraction(1),)))
        self.one = RatFunc(UPoly(QQ, (Fraction(1),)), UPoly(QQ, (Fraction(1),)))
        self.gen = RatFunc(
            UPoly(QQ, (Fraction(0), Fraction(1))), UPoly(QQ, (Fraction(1),))
        )

    def convert(self, x):
        if isinstance(x, RatFunc):
            return x
        if isinstance(x, (int, Fraction)):
            return RatFunc(
                UPoly(QQ, (Fraction(x),)), UPoly(QQ, (Fraction(1),))
            )
        if isinstance(x, UPoly) and x.dom is QQ:
            return RatFunc(x, UPoly(QQ, (Fraction(1),)))
        raise TypeError("cannot convert %r into Q(t)" % (x,))

    def derive(self, x):
        num, den = x.num, x.den
        dn = num.formal_derivative()
        dd = den.formal_derivative()
        return RatFunc(dn * den - num * dd, den * den)

    def depth(self):
        return 1

    def __repr__(self):
        return "Q(t)"


class TowerLevel:
    """Simple algebraic extension of `base` by one generator.

    minpoly is monic irreducible over base; gen_deriv is the image of the
    generator under the derivation (zero exactly for constant levels, whose
    minimal polynomials are t-free).
    """

    def __init__(self, base, name, minpoly):
        self.base = base
        self.name = name
        self.minpoly = minpoly
        self.zero = TowerElem(self, UPoly(base, ()))
        self.one = TowerElem(self, UPoly(base, (base.one,)))
        self.gen = TowerElem(
            self, UPoly(base, (base.zero, base.one))
        )
        self.gen_deriv = self._compute_gen_deriv()

    def _compute_gen_deriv(self):
        # implicit differentiation of minpoly(gen) = 0:
        #   sum derive(c_i) gen^i + minpoly'(gen) * d(gen) = 0
        m = self.minpoly
        coeff_part = UPoly(self.base, tuple(self.base.derive(c) for c in m.coeffs))
        if coeff_part.is_zero():
            return self.zero
        num = TowerElem(self, coeff_part.rem(m))
        den = TowerElem(self, m.formal_derivative().rem(m))
        return -num / den

    def convert(self, x):
        if isinstance(x, TowerElem):
            if x.level is self:
                return x
            chain = _ancestor_chain(self)
            if x.level in chain:
                return TowerElem(self, UPoly(self.base, (self.base.convert(x),)))
            raise TypeError("element of unrelated tower level")
        return TowerElem(self, UPoly(self.base, (self.base.convert(x),)))

    def derive(self, x):
        rep = x.rep
        coeff_part = UPoly(self.base, tuple(self.base.derive(c) for c in rep.coeffs))
        out = TowerElem(self, coeff_part)
        if not self.gen_deriv.is_zero():
            out = out + TowerElem(self, rep.formal_derivative().rem(self.minpoly)) * self.gen_deriv
        return out

    def is_constant_level(self):
        return self.gen_deriv.is_zero()

    def depth(self):
        return self.base.depth() + 1

    def ext_degree(self):
        return self.minpoly.degree()

    def __repr__(self):
        return "%r(%s)" % (self.base, self.name)


def _ancestor_chain(dom):
    chain = [dom]
    while isinstance(dom, TowerLevel):
        dom = dom.base
        chain.append(dom)
    return chain


def domain_of(x):
    if isinstance(x, Fraction) or isinstance(x, int):
        return QQ
    if isinstance(x, RatFunc):
        return K
    if isinstance(x, TowerElem):
        return x.level
    raise TypeError("no domain for %r" % (x,))


def common_domain(a, b):
    da, db = domain_of(a), domain_of(b)
    if da is db:
        return da
    return da if da.depth() >= db.depth() else db


def coerce_pair(a, b):
    dom = common_domain(a, b)
    return dom.convert(a), dom.convert(b), dom


def derive(x):
    """Apply the derivation d/dt extended to whatever field x lives in."""
    return domain_of(x).derive(x)


def is_constant(x):
    return derive(x) == domain_of(x).zero


def as_fraction(x):
    """Return x as a Fraction when it is one, else None."""
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, Fraction):
        return x
    if isinstance(x, RatFunc):
        if x.den.degree() == 0 and x.num.degree() <= 0:
            if x.num.is_zero():
                return Fraction(0)
            return x.num.coeffs[0] / x.den.coeffs[0]
        return None
    if isinstance(x, TowerElem):
        if x.rep.degree() > 0:
            return None
        if x.rep.is_zero():
            return Fraction(0)
        return as_fraction(x.rep.coeffs[0])
    return None


# ---------------------------------------------------------------------------
# univariate polynomials over a domain


class UPoly:
    """Dense univariate polynomial over one of the domains above.

    The variable is anonymous; context supplies its meaning (t, a tower
    generator, or an auxiliary variable during factorization).
    """

    __slots__ = ("dom", "coeffs")

    def __init__(self, dom, coeffs):
        cs = list(coeffs)
        while cs and cs[-1] == dom.zero:
            cs.pop()
        self.dom = dom
        self.coeffs = tuple(cs)

    @classmethod
    def const(cls, dom, c):
        return cls(dom, (dom.convert(c),))

    @classmethod
    def gen(cls, dom):
        return cls(dom, (dom.zero, dom.one))

    def degree(self):
        return len(self.coeffs) - 1

    def is_zero(self):
        return not self.coeffs

    def leading(self):
        if not self.coeffs:
            return self.dom.zero
        return self.coeffs[-1]

    def coeff(self, i):
        if 0 <= i < len(self.coeffs):
            return self.coeffs[i]
        return self.dom.zero

    def __eq__(self, other):
        return (
            isinstance(other, UPoly)
            and self.dom is other.dom
            and self.coeffs == other.coeffs
        )

    def __hash__(self):
        return hash((id(self.dom), len(self.coeffs)))

    def __neg__(self):
        return UPoly(self.dom, tuple(-c for c in self.coeffs))

    def __add__(self, other):
        a, b = self.coeffs, other.coeffs
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for i, c in enumerate(b):
            out[i] = out[i] + c
        return UPoly(self.dom, out)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, UPoly):
            if self.is_zero() or other.is_zero():
                return UPoly(self.dom, ())
            z = self.dom.zero
            out = [z] * (len(self.coeffs) + len(other.coeffs) - 1)
            for i, a in enumerate(self.coeffs):
                if a == z:
                    continue
                for j, b in enumerate(other.coeffs):
                    out[i + j] = out[i + j] + a * b
            return UPoly(self.dom, out)
        return self.scale(other)

    def scale(self, c):
        c = self.dom.convert(c)
        return UPoly(self.dom, tuple(a * c for a in self.coeffs))

    def shift_up(self, k):
        """Multiply by var^k."""
        if self.is_zero():
            return self
        return UPoly(self.dom, (self.dom.zero,) * k + self.coeffs)

    def divmod(self, other):
        """Polynomial division; coefficient domain must be a field."""
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        q = UPoly(self.dom, ())
        r = self
        dlead = other.leading()
        dd = other.degree()
        while not r.is_zero() and r.degree() >= dd:
            c = r.leading() / dlead
            k = r.degree() - dd
            term = UPoly(self.dom, (self.dom.zero,) * k + (c,))
            q = q + term
            r = r - other.shift_up(k).scale(c)
        return q, r

    def rem(self, other):
        return self.divmod(other)[1]

    def exact_div(self, other):
        q, r = self.divmod(other)
        if not r.is_zero():
            raise InternalConsistencyError("inexact polynomial division")
        return q

    def monic(self):
        if self.is_zero():
            return self
        lead = self.leading()
        if lead == self.dom.one:
            return self
        inv = self.dom.one / lead
        return self.scale(inv)

    def formal_derivative(self):
        cs = [
            c * self.dom.convert(i)
            for i, c in enumerate(self.coeffs)
            if i >= 1
        ]
        return UPoly(self.dom, cs)

    def map_coeffs(self, fn, dom=None):
        dom = dom or self.dom
        return UPoly(dom, tuple(fn(c) for c in self.coeffs))

    def eval(self, x):
        """Horner evaluation; x may live in any domain extending self.dom."""
        if not self.coeffs:
            return domain_of(x).zero if not isinstance(x, (int, Fraction)) else Fraction(0)
        acc = None
        for c in reversed(self.coeffs):
            if acc is None:
                acc = c
            else:
                acc = acc * x + c
        # make sure a constant polynomial still lands in x's domain
        if self.degree() == 0 and not isinstance(x, (int, Fraction)):
            return domain_of(x).convert(acc)
        return acc

    def compose_linear(self, b):
        """Return self(var + b) with b in the coefficient domain."""
        b = self.dom.convert(b)
        out = UPoly(self.dom, ())
        x_plus_b = UPoly(self.dom, (b, self.dom.one))
        for c in reversed(self.coeffs):
            out = out * x_plus_b + UPoly.const(self.dom, c)
        return out

    def gcd_monic(self, other):
        a, b = self, other
        while not b.is_zero():
            a, b = b, a.rem(b)
        if a.is_zero():
            return a
        return a.monic()

    def squarefree_part(self):
        if self.degree() <= 0:
            return self.monic()
        g = self.gcd_monic(self.formal_derivative())
        return self.exact_div(g).monic()

    def yun_squarefree(self):
        """Squarefree decomposition [(g1,1),(g2,2),...] with self = lead * prod gi^i."""
        f = self.monic()
        if f.degree() <= 0:
            return []
        fp = f.formal_derivative()
        a = f.gcd_monic(fp)
        b = f.exact_div(a)
        c = fp.exact_div(a)
        d = c - b.formal_derivative()
        out = []
        i = 1
        while b.degree() > 0:
            g = b.gcd_monic(d)
            if g.degree() > 0:
                out.append((g, i))
            b2 = b.exact_div(g) if g.degree() > 0 else b
            c2 = d.exact_div(g) if g.degree() > 0 else d
            b, c = b2, c2
            d = c - b.formal_derivative()
            i += 1
        return out

    def __repr__(self):
        return "UPoly(%s)" % (format_upoly(self, "u"),)


def upoly_from_ints(dom, ints):
    return UPoly(dom, tuple(dom.convert(i) for i in ints))


# ---------------------------------------------------------------------------
# rational functions of t over Q


class RatFunc:
    """Element of k = Q(t): num/den with den monic and gcd(num, den) = 1."""

    __slots__ = ("num", "den")

    def __init__(self, num, den):
        if den.is_zero():
            raise ZeroDivisionError("rational function with zero denominator")
        if num.is_zero():
            self.num = UPoly(QQ, ())
            self.den = UPoly(QQ, (Fraction(1),))
            return
        g = num.gcd_monic(den)
        if g.degree() > 0:
            num = num.exact_div(g)
            den = den.exact_div(g)
        lead = den.leading()
        if lead != Fraction(1):
            inv = Fraction(1) / lead
            num = num.scale(inv)
            den = den.scale(inv)
        self.num = num
        self.den = den

    @classmethod
    def from_fraction(cls, q):
        return cls(UPoly.const(QQ, Fraction(q)), UPoly(QQ, (Fraction(1),)))

    @classmethod
    def t_minus(cls, a):
        """The rational function t - a."""
        return cls(
            UPoly(QQ, (Fraction(-a), Fraction(1))), UPoly(QQ, (Fraction(1),))
        )

    def is_zero(self):
        return self.num.is_zero()

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = K.convert(other)
        if not isinstance(other, RatFunc):
            return NotImplemented
        return self.num == other.num and self.den == other.den

    def __hash__(self):
        return hash((self.num.coeffs, self.den.coeffs))

    def __neg__(self):
        return RatFunc(-self.num, self.den)

    def _binary(self, other, op):
        if isinstance(other, (int, Fraction)):
            other = K.convert(other)
        elif isinstance(other, TowerElem):
            return NotImplemented
        elif not isinstance(other, RatFunc):
            return NotImplemented
        return op(self, other)

    def __add__(self, other):
        return self._binary(
            other,
            lambda a, b: RatFunc(a.num * b.den + b.num * a.den, a.den * b.den),
        )

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(
            other,
            lambda a, b: RatFunc(a.num * b.den - b.num * a.den, a.den * b.den),
        )

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        return self._binary(
            other, lambda a, b: RatFunc(a.num * b.num, a.den * b.den)
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binary(
            other, lambda a, b: RatFunc(a.num * b.den, a.den * b.num)
        )

    def __rtruediv__(self, other):
        return K.convert(other) / self

    def eval_at(self, t0):
        """Value at t = t0 (Fraction); raises on a pole."""
        d = self.den.eval(Fraction(t0))
        if d == 0:
            raise ZeroDivisionError("pole at t = %s" % (t0,))
        return self.num.eval(Fraction(t0)) / d

    def has_pole_at(self, t0):
        return self.den.eval(Fraction(t0)) == 0

    def __repr__(self):
        return format_ratfunc(self)


K = RatFuncField()


# ---------------------------------------------------------------------------
# tower elements


class TowerElem:
    """Element of a TowerLevel: residue polynomial in the generator."""

    __slots__ = ("level", "rep")

    def __init__(self, level, rep):
        if rep.degree() >= level.minpoly.degree():
            rep = rep.rem(level.minpoly)
        self.level = level
        self.rep = rep

    def is_zero(self):
        return self.rep.is_zero()

    def __eq__(self, other):
        if isinstance(other, (int, Fraction, RatFunc)):
            try:
                other = self.level.convert(other)
            except TypeError:
                return NotImplemented
        if not isinstance(other, TowerElem):
            return NotImplemented
        if self.level is other.level:
            return self.rep == other.rep
        a, b, _ = coerce_pair(self, other)
        return a.rep == b.rep

    def __hash__(self):
        return hash((id(self.level), self.rep.coeffs))

    def __neg__(self):
        return TowerElem(self.level, -self.rep)

    def _pair(self, other):
        if isinstance(other, (int, Fraction, RatFunc)):
            return self, self.level.convert(other)
        if isinstance(other, TowerElem):
            if other.level is self.level:
                return self, other
            a, b, _ = coerce_pair(self, other)
            return a, b
        return None, None

    def __add__(self, other):
        a, b = self._pair(other)
        if a is None:
            return NotImplemented
        return TowerElem(a.level, a.rep + b.rep)

    __radd__ = __add__

    def __sub__(self, other):
        a, b = self._pair(other)
        if a is None:
            return NotImplemented
        return TowerElem(a.level, a.rep - b.rep)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        a, b = self._pair(other)
        if a is None:
            return NotImplemented
        return TowerElem(a.level, (a.rep * b.rep).rem(a.level.minpoly))

    __rmul__ = __mul__

    def inv(self):
        """Inverse by the extended Euclidean algorithm against the minpoly."""
        if self.is_zero():
            raise ZeroDivisionError("inverting zero tower element")
        lvl = self.level
        base = lvl.base
        r0, r1 = lvl.minpoly, self.rep
        s0 = UPoly(base, ())
        s1 = UPoly(base, (base.one,))
        while not r1.is_zero():
            q, r = r0.divmod(r1)
            r0, r1 = r1, r
            s0, s1 = s1, s0 - q * s1
        if r0.degree() != 0:
            raise InternalConsistencyError(
                "minimal polynomial not irreducible: gcd has degree %d"
                % r0.degree()
            )
        c = base.one / r0.coeffs[0]
        return TowerElem(lvl, s0.scale(c))

    def __truediv__(self, other):
        a, b = self._pair(other)
        if a is None:
            return NotImplemented
        return a * b.inv()

    def __rtruediv__(self, other):
        return self.level.convert(other) / self

    def __repr__(self):
        return format_tower_elem(self)


# ---------------------------------------------------------------------------
# extension towers


class FieldTower:
    """Ordered chain of TowerLevels above a ground field (k = Q(t) usually;
    Q for pure constant towers).

    degree_budget caps the total extension degree; growth past it raises
    TowerBudgetError so callers can report bound exhaustion instead of
    looping.
    """

    def __init__(self, degree_budget=64, ground=None):
        self.levels = []
        self.degree_budget = degree_budget
        self.ground = ground if ground is not None else K

    @property
    def top(self):
        return self.levels[-1] if self.levels else self.ground

    def degree(self):
        d = 1
        for lvl in self.levels:
            d *= lvl.ext_degree()
        return d

    def convert(self, x):
        return self.top.convert(x)

    def next_name(self):
        return "a%d" % (len(self.levels) + 1,)

    def adjoin(self, minpoly, name=None):
        """Append a level with the given monic irreducible minpoly over top."""
        minpoly = minpoly.monic()
        if minpoly.degree() < 2:
            raise ValueError("adjoin needs degree >= 2")
        new_total = self.degree() * minpoly.degree()
        if new_total > self.degree_budget:
            raise TowerBudgetError(
                "tower degree %d exceeds budget %d" % (new_total, self.degree_budget)
            )
        lvl = TowerLevel(self.top, name or self.next_name(), minpoly)
        self.levels.append(lvl)
        return lvl.gen

    def root_of(self, poly):
        """A root of poly (UPoly over top, degree >= 1), adjoining if needed.

        Prefers a rational (no-growth) root: any linear factor gives one.
        Otherwise adjoins the lowest-degree irreducible factor.
        """
        top = self.top
        if poly.degree() < 1:
            raise ValueError("root_of needs positive degree")
        facs = [f for f, _ in factor_monic(poly.monic())]
        facs.sort(key=lambda f: f.degree())
        best = facs[0]
        if best.degree() == 1:
            return -best.coeff(0)
        gen = self.adjoin(best)
        return gen

    def lift(self, x):
        return self.top.convert(x)

    def describe(self):
        out = []
        for lvl in self.levels:
            out.append(
                (lvl.name, format_upoly(lvl.minpoly, lvl.name), format_tower_elem(lvl.gen_deriv))
            )
        return out

    def __repr__(self):
        if not self.levels:
            return "FieldTower(Q(t))"
        return "FieldTower(Q(t); %s)" % (
            ", ".join(lvl.name for lvl in self.levels),
        )


# ---------------------------------------------------------------------------
# factorization


def _sympy_from_upoly_qq(f, sym):
    expr = 0
    for i, c in enumerate(f.coeffs):
        expr += sympy.Rational(c.numerator, c.denominator) * sym**i
    return expr


def _upoly_qq_from_sympy(poly, sym):
    p = sympy.Poly(poly, sym)
    cs = [Fraction(0)] * (p.degree() + 1) if p.degree() >= 0 else []
    for (e,), c in p.terms():
        q = sympy.Rational(c)
        cs[e] = Fraction(int(q.p), int(q.q))
    return UPoly(QQ, cs)


def _factor_qq(f):
    """Irreducible monic factors (with multiplicity) of f over Q, f in Q[u]."""
    u = sympy.Symbol("u")
    expr = _sympy_from_upoly_qq(f, u)
    _, pairs = sympy.factor_list(expr, u)
    out = []
    for fac, mult in pairs:
        p = _upoly_qq_from_sympy(fac, u)
        if p.degree() >= 1:
            out.append((p.monic(), mult))
    out.sort(key=lambda pm: (pm[0].degree(), [str(c) for c in pm[0].coeffs]))
    return out


def _factor_k(f):
    """Irreducible monic factors over Q(t) of f in Q(t)[x].

    Clears denominators and factors the resulting element of Q[x, t]; factors
    without x are units of Q(t) and are dropped.
    """
    x, tsym = sympy.symbols("x __t")
    one = UPoly(QQ, (Fraction(1),))
    den = reduce(
        lambda a, b: (a * b).exact_div(a.gcd_monic(b)),
        (c.den for c in f.coeffs),
        one,
    )
    expr = 0
    for i, c in enumerate(f.coeffs):
        scaled = c.num * den.exact_div(c.den)
        expr += _sympy_from_upoly_qq(scaled, tsym) * x**i
    _, pairs = sympy.factor_list(sympy.expand(expr), x, tsym)
    out = []
    for fac, mult in pairs:
        poly2 = sympy.Poly(fac, x, tsym)
        xdeg = poly2.degree(x)
        if xdeg < 1:
            continue
        nums = [UPoly(QQ, ()) for _ in range(xdeg + 1)]
        for (ex, et), c in poly2.terms():
            q = sympy.Rational(c)
            arr = [Fraction(0)] * (et + 1)
            arr[et] = Fraction(int(q.p), int(q.q))
            nums[ex] = nums[ex] + UPoly(QQ, arr)
        cs = [RatFunc(n, one) for n in nums]
        out.append((UPoly(K, cs).monic(), mult))
    out.sort(key=lambda pm: pm[0].degree())
    return out


def _poly_matrix_det(mat):
    """Determinant of a square matrix of UPolys by cofactor expansion."""
    n = len(mat)
    if n == 1:
        return mat[0][0]
    dom = mat[0][0].dom
    if n == 2:
        return mat[0][0] * mat[1][1] - mat[0][1] * mat[1][0]
    det = UPoly(dom, ())
    for j in range(n):
        if mat[0][j].is_zero():
            continue
        minor = [row[:j] + row[j + 1 :] for row in mat[1:]]
        term = mat[0][j] * _poly_matrix_det(minor)
        det = det + term if j % 2 == 0 else det - term
    return det


def _norm_to_base(g):
    """Norm of g in L[x] down to base[x], L a TowerLevel.

    Determinant of multiplication by g on L[x] viewed over base[x] with
    basis 1, gen, ..., gen^(d-1).
    """
    lvl = g.dom
    base = lvl.base
    d = lvl.ext_degree()
    cols = []
    genj = lvl.one
    for j in range(d):
        gj = UPoly(lvl, tuple(c * genj for c in g.coeffs))
        cols.append(
            [UPoly(base, tuple(c.rep.coeff(i) for c in gj.coeffs)) for i in range(d)]
        )
        genj = genj * lvl.gen
    mat = [[cols[j][i] for j in range(d)] for i in range(d)]
    return _poly_matrix_det(mat)


def _factor_tower_squarefree(f):
    """Trager factorization of monic squarefree f over a TowerLevel."""
    lvl = f.dom
    base = lvl.base
    shifts = [0, 1, -1, 2, -2, 3, -3, 4, -4, 5, -5]
    for s in shifts:
        shift_elem = lvl.gen * lvl.convert(s)
        g = f.compose_linear(-shift_elem) if s else f
        norm = _norm_to_base(g)
        if norm.is_zero():
            continue
        norm = norm.monic()
        if norm.gcd_monic(norm.formal_derivative()).degree() != 0:
            continue
        base_factors = [p for p, _ in factor_monic(norm)]
        out = []
        for nf in base_factors:
            lifted = nf.map_coeffs(lambda c: lvl.convert(c), dom=lvl)
            gi = g.gcd_monic(lifted)
            if gi.degree() >= 1:
                fi = gi.compose_linear(shift_elem) if s else gi
                out.append(fi.monic())
        prod = UPoly.const(lvl, lvl.one)
        for fi in out:
            prod = prod * fi
        if prod == f.monic():
            out.sort(key=lambda p: p.degree())
            return out
    raise UnsupportedShapeError("norm stayed squareful for all shifts")


def factor_monic(f):
    """Full factorization of f over its coefficient field.

    Returns [(monic irreducible, multiplicity)]; the unit factor is dropped.
    """
    f = f.monic()
    if f.degree() <= 0:
        return []
    dom = f.dom
    if dom is QQ:
        return _factor_qq(f)
    if dom is K:
        out = []
        for part, mult in f.yun_squarefree():
            if part.degree() == 0:
                continue
            for p, m in _factor_k(part):
                out.append((p, m * mult))
        return _merge_factors(out)
    if isinstance(dom, TowerLevel):
        out = []
        for part, mult in f.yun_squarefree():
            if part.degree() == 0:
                continue
            for p in _factor_tower_squarefree(part):
                out.append((p, mult))
        return _merge_factors(out)
    raise TypeError("no factorization over %r" % (dom,))


def _merge_factors(pairs):
    merged = []
    for p, m in pairs:
        for i, (q, mm) in enumerate(merged):
            if q == p:
                merged[i] = (q, mm + m)
                break
        else:
            merged.append((p, m))
    merged.sort(key=lambda pm: pm[0].degree())
    return merged


def is_irreducible(f):
    facs = factor_monic(f)
    return len(facs) == 1 and facs[0][1] == 1 and facs[0][0].degree() == f.degree()


def rational_roots(f):
    """Rational roots of f over QQ (no multiplicity)."""
    return sorted(
        -p.coeff(0) for p, _ in factor_monic(f) if p.degree() == 1
    )


# ---------------------------------------------------------------------------
# partial fractions and log-derivative witnesses


@dataclass
class PolePart:
    """One irreducible denominator factor p with its numerator ladder.

    ladder maps pole order j >= 1 to a numerator of degree < deg p.
    """

    p: UPoly
    ladder: dict


@dataclass
class PartialFractions:
    poly_part: UPoly
    parts: list
    cdom: object

    def recombine(self):
        """Reassemble as (num, den) UPolys over cdom; for exactness tests."""
        num = self.poly_part
        den = UPoly.const(self.cdom, self.cdom.one)
        for part in self.parts:
            top = max(part.ladder)
            pk = UPoly.const(self.cdom, self.cdom.one)
            for _ in range(top):
                pk = pk * part.p
            local = UPoly(self.cdom, ())
            for j, nmr in part.ladder.items():
                q = pk
                for _ in range(j):
                    q = q.exact_div(part.p)
                local = local + nmr * q
            num = num * pk + local * den
            den = den * pk
        return num, den


def _as_t_poly_pair(r, tower=None):
    """Normalize r into (num, den) UPolys in t over QQ or a tower top.

    Accepts RatFunc always.  With a tower, also accepts tower elements whose
    canonical representation uses constant generators only; anything
    involving a function generator is out of scope here.
    """
    if isinstance(r, (int, Fraction)):
        r = K.convert(r)
    if isinstance(r, RatFunc):
        if tower is None or not tower.levels:
            return r.num, r.den, QQ
        top = tower.top
        num = r.num.map_coeffs(lambda c: top.convert(c), dom=top)
        den = r.den.map_coeffs(lambda c: top.convert(c), dom=top)
        return num, den, top
    if isinstance(r, TowerElem):
        num, den = _t_rational_split(r)
        return num, den, r.level
    raise TypeError("cannot treat %r as rational in t" % (r,))


def _t_rational_split(elem):
    """Write a tower element as num(t)/den(t) with constant coefficients.

    Requires every generator occurring in the canonical representation to be
    a constant generator; raises UnsupportedShapeError otherwise.
    """
    lvl = elem.level
    contribs = []

    def collect(x, mono):
        # mono: constant monomial (TowerElem at lvl) accumulated so far
        if isinstance(x, (int, Fraction)):
            contribs.append((mono, K.convert(x)))
            return
        if isinstance(x, RatFunc):
            contribs.append((mono, x))
            return
        level = x.level
        gen_l = lvl.convert(level.gen)
        gpow = lvl.one
        for i, c in enumerate(x.rep.coeffs):
            if c != level.base.zero:
                if i > 0 and not level.is_constant_level():
                    raise UnsupportedShapeError(
                        "element involves function generator %s" % level.name
                    )
                collect(c, mono * gpow)
            gpow = gpow * gen_l
        return

    collect(elem, lvl.one)
    one = UPoly(QQ, (Fraction(1),))
    common = reduce(
        lambda a, b: (a * b).exact_div(a.gcd_monic(b)),
        (rf.den for _, rf in contribs),
        one,
    )
    size = max(
        (rf.num.degree() + common.degree() - rf.den.degree() for _, rf in contribs),
        default=-1,
    )
    num_coeffs = [lvl.zero] * (size + 1)
    for mono, rf in contribs:
        scaled = rf.num * common.exact_div(rf.den)
        for i, c in enumerate(scaled.coeffs):
            num_coeffs[i] = num_coeffs[i] + mono * lvl.convert(c)
    num = UPoly(lvl, num_coeffs)
    den = common.map_coeffs(lambda c: lvl.convert(c), dom=lvl)
    return num, den


def partial_fractions(r, tower=None):
    """Exact partial fraction decomposition of r along t.

    r is a RatFunc, or (with a tower) an element expressible with constant
    coefficients; denominators factor over Q or over the tower.
    """
    num, den, cdom = _as_t_poly_pair(r, tower)
    if den.degree() == 0:
        return PartialFractions(num.scale(cdom.one / den.coeffs[0]), [], cdom)
    poly, rem = num.divmod(den)
    den_m = den.monic()
    rem = rem.scale(cdom.one / den.leading())
    parts = []
    for p, e in factor_monic(den_m):
        pe = UPoly.const(cdom, cdom.one)
        for _ in range(e):
            pe = pe * p
        cofactor = den_m.exact_div(pe)
        inv_cof = _inverse_mod(cofactor, pe)
        local = (rem * inv_cof).rem(pe)
        ladder = {}
        for j in range(e):
            digit = local.rem(p)
            local = (local - digit).exact_div(p)
            if not digit.is_zero():
                ladder[e - j] = digit
        if ladder:
            parts.append(PolePart(p, ladder))
    parts.sort(key=lambda part: (part.p.degree(), _upoly_sort_key(part.p)))
    return PartialFractions(poly, parts, cdom)


def _upoly_sort_key(p):
    return tuple(str(c) for c in p.coeffs)


def _inverse_mod(a, m):
    """Inverse of a modulo m in cdom[t]; gcd(a, m) must be 1."""
    dom = a.dom
    r0, r1 = m, a.rem(m)
    s0, s1 = UPoly(dom, ()), UPoly.const(dom, dom.one)
    while not r1.is_zero():
        q, r = r0.divmod(r1)
        r0, r1 = r1, r
        s0, s1 = s1, s0 - q * s1
    if r0.degree() != 0:
        raise InternalConsistencyError("elements not coprime in _inverse_mod")
    return s0.scale(dom.one / r0.coeffs[0]).rem(m)


@dataclass
class LogDerivWitness:
    """Certificate that r = sum q * p'/p: a formal product of irreducibles
    with rational exponents whose log-derivative is r."""

    exponents: list  # [(UPoly p over cdom, Fraction q)]
    cdom: object

    @property
    def infinity_exponent(self):
        return -sum((q * p.degree() for p, q in self.exponents), Fraction(0))

    def log_derivative_pair(self):
        """(num, den) of sum q p'/p over cdom."""
        num = UPoly(self.cdom, ())
        den = UPoly.const(self.cdom, self.cdom.one)
        for p, q in self.exponents:
            term_num = p.formal_derivative().scale(self.cdom.convert(q))
            num = num * p + term_num * den
            den = den * p
        return num, den

    def value_parts_at(self, t0):
        """[(p(t0), q)] for assembling the product value at t = t0."""
        return [
            (p.eval(self.cdom.convert(Fraction(t0))), q) for p, q in self.exponents
        ]


def is_log_derivative(r, tower=None):
    """LogDerivWitness if r is the log-derivative of a product of
    irreducibles with rational exponents, else None."""
    pf = partial_fractions(r, tower)
    if not pf.poly_part.is_zero():
        return None
    exponents = []
    for part in pf.parts:
        if set(part.ladder) != {1}:
            return None
        nmr = part.ladder[1]
        dp = part.p.formal_derivative()
        q = (nmr * _inverse_mod(dp, part.p)).rem(part.p)
        if q.degree() > 0:
            return None
        qval = as_fraction(q.coeff(0)) if not q.is_zero() else Fraction(0)
        if qval is None:
            return None
        exponents.append((part.p, qval))
    wit = LogDerivWitness(exponents, pf.cdom)
    num, den = wit.log_derivative_pair()
    rnum, rden, _ = _as_t_poly_pair(r, tower)
    if not (num * rden - rnum * den).is_zero():
        raise InternalConsistencyError("log-derivative witness failed recombination")
    return wit


# ---------------------------------------------------------------------------
# parsing and printing


def parse_ratfunc(text):
    """Parse the rational-function grammar: integers, t, + - * / ^ ()."""
    tokens = _tokenize(text)
    pos = [0]

    def peek():
        return tokens[pos[0]] if pos[0] < len(tokens) else None

    def take():
        tok = peek()
        pos[0] += 1
        return tok

    def parse_expr():
        node = parse_term()
        while peek() in ("+", "-"):
            op = take()
            rhs = parse_term()
            node = node + rhs if op == "+" else node - rhs
        return node

    def parse_term():
        node = parse_factor()
        while peek() in ("*", "/"):
            op = take()
            rhs = parse_factor()
            if op == "/":
                if rhs.is_zero():
                    raise ParseError("division by zero in %r" % (text,))
                node = node / rhs
            else:
                node = node * rhs
        return node

    def parse_factor():
        node = parse_base()
        if peek() == "^":
            take()
            neg = False
            if peek() == "-":
                take()
                neg = True
            e = take()
            if not (isinstance(e, str) and e.isdigit()):
                raise ParseError("bad exponent in %r" % (text,))
            e = int(e)
            out = K.one
            for _ in range(e):
                out = out / node if neg else out * node
            return out
        return node

    def parse_base():
        tok = take()
        if tok is None:
            raise ParseError("unexpected end of input in %r" % (text,))
        if tok == "(":
            node = parse_expr()
            if take() != ")":
                raise ParseError("unbalanced parentheses in %r" % (text,))
            return node
        if tok == "-":
            return -parse_factor()
        if tok == "+":
            return parse_factor()
        if tok == "t":
            return K.gen
        if tok.isdigit():
            return K.convert(int(tok))
        raise ParseError("unexpected token %r in %r" % (tok, text))

    node = parse_expr()
    if pos[0] != len(tokens):
        raise ParseError("trailing input in %r" % (text,))
    return node


def _tokenize(text):
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "+-*/^()":
            tokens.append(ch)
            i += 1
            continue
        if ch.isdigit():
            j = i
            while j < len(text) and text[j].isdigit():
                j += 1
            tokens.append(text[i:j])
            i = j
            continue
        if ch == "t":
            tokens.append("t")
            i += 1
            continue
        raise ParseError("bad character %r in %r" % (ch, text))
    return tokens


def format_upoly(p, var):
    """Render a UPoly with integer-friendly coefficients, highest degree first."""
    if p.is_zero():
        return "0"
    pieces = []
    for i in range(p.degree(), -1, -1):
        c = p.coeff(i)
        if c == p.dom.zero:
            continue
        cs = _coeff_str(c)
        if i == 0:
            term = cs
        else:
            v = var if i == 1 else "%s^%d" % (var, i)
            if cs == "1":
                term = v
            elif cs == "-1":
                term = "-" + v
            else:
                term = "%s*%s" % (cs, v)
        pieces.append(term)
    out = pieces[0]
    for term in pieces[1:]:
        if term.startswith("-"):
            out += " - " + term[1:]
        else:
            out += " + " + term
    return out


def _coeff_str(c):
    if isinstance(c, Fraction):
        return str(c)
    if isinstance(c, RatFunc):
        s = format_ratfunc(c)
    elif isinstance(c, TowerElem):
        s = format_tower_elem(c)
    else:
        return str(c)
    return s if _is_atom(s) else "(%s)" % s


def _is_atom(s):
    body = s[1:] if s.startswith("-") else s
    if body.isalnum():
        return True
    parts = body.split("/")
    return len(parts) == 2 and all(p.isalnum() for p in parts)


def format_ratfunc(r):
    """Canonical text: coprime integer-coefficient num/den, den monic-positive."""
    num, den = r.num, r.den
    if num.is_zero():
        return "0"
    # scale to integer coefficients
    mult = 1
    for c in list(num.coeffs) + list(den.coeffs):
        mult = mult * c.denominator // _gcd_int(mult, c.denominator)
    inum = num.scale(Fraction(mult))
    iden = den.scale(Fraction(mult))
    g = 0
    for c in list(inum.coeffs) + list(iden.coeffs):
        g = _gcd_int(g, abs(c.numerator))
    if g > 1:
        inum = inum.scale(Fraction(1, g))
        iden = iden.scale(Fraction(1, g))
    if iden.leading() < 0:
        inum, iden = -inum, -iden
    ns = format_upoly(inum, "t")
    if iden.degree() == 0 and iden.coeffs[0] == 1:
        return ns
    ds = format_upoly(iden, "t")
    if inum.degree() > 0 or len([c for c in inum.coeffs if c != 0]) > 1:
        ns = "(%s)" % ns
    if iden.degree() > 0 or len([c for c in iden.coeffs if c != 0]) > 1:
        ds = "(%s)" % ds
    return "%s/%s" % (ns, ds)


def format_tower_elem(e):
    return format_upoly(e.rep, e.level.name)


def _gcd_int(a, b):
    while b:
        a, b = b, a % b
    return a


def ratfunc_from_poly_pair(num_ints, den_ints):
    return RatFunc(upoly_from_ints(QQ, num_ints), upoly_from_ints(QQ, den_ints))
