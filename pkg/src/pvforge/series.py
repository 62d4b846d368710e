"""Truncated power series at an ordinary point t0.

Exact series (Fraction or constant-extension coefficients) support the
certificates: fundamental solution series of delta Y = A Y, evaluation of
polynomials on those series, and embeddings of extension towers into series
whose coefficients live in a pure constant tower over Q.

Fast modular series for the relation search are built here too; they reduce
every rational coefficient mod a word-size prime and work in numpy.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .errors import InternalConsistencyError, SingularPointError
from .fields import (
    QQ,
    K,
    FieldTower,
    RatFunc,
    TowerElem,
    TowerLevel,
    UPoly,
    factor_monic,
)
from .linalg import fraction_mod_p


class TruncSeries:
    """Power series in tau truncated at its own order (= len(coeffs))."""

    __slots__ = ("dom", "coeffs")

    def __init__(self, dom, coeffs):
        self.dom = dom
        self.coeffs = tuple(coeffs)

    @classmethod
    def const(cls, dom, c, order):
        cs = [dom.zero] * order
        if order:
            cs[0] = dom.convert(c)
        return cls(dom, cs)

    @classmethod
    def tau(cls, dom, order):
        cs = [dom.zero] * order
        if order > 1:
            cs[1] = dom.one
        return cls(dom, cs)

    @property
    def order(self):
        return len(self.coeffs)

    def is_zero(self):
        z = self.dom.zero
        return all(c == z for c in self.coeffs)

    def valuation(self):
        z = self.dom.zero
        for i, c in enumerate(self.coeffs):
            if c != z:
                return i
        return None

    def truncate(self, order):
        if order >= self.order:
            return self
        return TruncSeries(self.dom, self.coeffs[:order])

    def __eq__(self, other):
        if not isinstance(other, TruncSeries):
            return NotImplemented
        n = min(self.order, other.order)
        return self.coeffs[:n] == other.coeffs[:n]

    def __neg__(self):
        return TruncSeries(self.dom, tuple(-c for c in self.coeffs))

    def __add__(self, other):
        n = min(self.order, other.order)
        return TruncSeries(
            self.dom, tuple(a + b for a, b in zip(self.coeffs[:n], other.coeffs[:n]))
        )

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, TruncSeries):
            return self.scale(other)
        n = min(self.order, other.order)
        z = self.dom.zero
        out = [z] * n
        for i, a in enumerate(self.coeffs[:n]):
            if a == z:
                continue
            for j in range(n - i):
                b = other.coeffs[j]
                if b != z:
                    out[i + j] = out[i + j] + a * b
        return TruncSeries(self.dom, out)

    def scale(self, c):
        c = self.dom.convert(c)
        return TruncSeries(self.dom, tuple(a * c for a in self.coeffs))

    def inverse(self):
        if not self.coeffs or self.coeffs[0] == self.dom.zero:
            raise ZeroDivisionError("series with zero constant term")
        n = self.order
        inv0 = self.dom.one / self.coeffs[0]
        out = [inv0] + [self.dom.zero] * (n - 1)
        for k in range(1, n):
            acc = self.dom.zero
            for i in range(1, k + 1):
                acc = acc + self.coeffs[i] * out[k - i]
            out[k] = -inv0 * acc
        return TruncSeries(self.dom, out)

    def __truediv__(self, other):
        return self * other.inverse()

    def deriv(self):
        """d/dtau, one order shorter."""
        cs = [
            self.coeffs[i] * self.dom.convert(i) for i in range(1, self.order)
        ]
        return TruncSeries(self.dom, cs)

    def __repr__(self):
        return "TruncSeries(%s; O(tau^%d))" % (
            ", ".join(str(c) for c in self.coeffs[: min(4, self.order)]),
            self.order,
        )


def ratfunc_series(r, t0, order, dom=QQ):
    """Taylor series of r at t = t0 + tau; SingularPointError on a pole."""
    t0 = Fraction(t0)
    if r.den.eval(t0) == 0:
        raise SingularPointError("pole of coefficient at t = %s" % (t0,), point=t0)
    num = r.num.compose_linear(t0)
    den = r.den.compose_linear(t0)
    ncs = [dom.convert(num.coeff(i)) for i in range(order)]
    dcs = [dom.convert(den.coeff(i)) for i in range(order)]
    return TruncSeries(dom, ncs) * TruncSeries(dom, dcs).inverse()


def upoly_tau_series(p, t0, order, dom=QQ):
    """Series of a Q[t] polynomial at t0 + tau."""
    sh = p.compose_linear(Fraction(t0))
    return TruncSeries(dom, [dom.convert(sh.coeff(i)) for i in range(order)])


# ---------------------------------------------------------------------------
# fundamental solution series of delta Y = A Y


def coefficient_matrix_series(A, t0, order, dom=QQ):
    """[A_0, A_1, ...]: Taylor coefficients of the system matrix at t0."""
    n = len(A)
    entry = [[ratfunc_series(A[i][j], t0, order, dom) for j in range(n)] for i in range(n)]
    return [
        [[entry[i][j].coeffs[m] for j in range(n)] for i in range(n)]
        for m in range(order)
    ]


def fundamental_series(A, t0, order, dom=QQ, init=None):
    """Truncated fundamental solution F with F(t0) = I (or init).

    Returns a list of `order` matrices over dom: F = sum_j F_j tau^j solves
    F' = A F as series, which pins every F_j once F_0 is fixed.
    """
    n = len(A)
    Amats = coefficient_matrix_series(A, t0, order, dom)
    if init is None:
        F0 = [[dom.one if i == j else dom.zero for j in range(n)] for i in range(n)]
    else:
        F0 = [[dom.convert(x) for x in row] for row in init]
    out = [F0]
    for j in range(order - 1):
        acc = [[dom.zero] * n for _ in range(n)]
        for i in range(j + 1):
            Ai = Amats[i]
            Fj = out[j - i]
            for a in range(n):
                for b in range(n):
                    s = acc[a][b]
                    for c in range(n):
                        s = s + Ai[a][c] * Fj[c][b]
                    acc[a][b] = s
        inv = dom.one / dom.convert(j + 1)
        out.append([[x * inv for x in row] for row in acc])
    return out


def matrix_entry_series(Fmats, i, j, dom=QQ):
    return TruncSeries(dom, [Fm[i][j] for Fm in Fmats])


def det_series(Fmats, dom=QQ):
    """Determinant of a matrix of series, as a series."""
    n = len(Fmats[0])
    order = len(Fmats)
    if n == 1:
        return matrix_entry_series(Fmats, 0, 0, dom)
    series_mat = [
        [matrix_entry_series(Fmats, i, j, dom) for j in range(n)] for i in range(n)
    ]
    return _series_det(series_mat, dom, order)


def _series_det(mat, dom, order):
    n = len(mat)
    if n == 1:
        return mat[0][0]
    acc = TruncSeries.const(dom, dom.zero, order)
    for j in range(n):
        minor = [row[:j] + row[j + 1 :] for row in mat[1:]]
        term = mat[0][j] * _series_det(minor, dom, order)
        acc = acc + term if j % 2 == 0 else acc - term
    return acc


def eval_mpoly_on_series(P, images, coeff_series, order, dom=QQ):
    """Evaluate an MPoly on series images of its variables.

    images: list of TruncSeries aligned with P's ring variables.
    coeff_series: maps each coefficient into a TruncSeries over dom.
    """
    acc = TruncSeries.const(dom, dom.zero, order)
    cache = {}
    for e, c in P.terms.items():
        term = coeff_series(c).truncate(order)
        for i, k in enumerate(e):
            if not k:
                continue
            if (i, k) not in cache:
                s = images[i].truncate(order)
                out = s
                for _ in range(k - 1):
                    out = out * s
                cache[(i, k)] = out
            term = term * cache[(i, k)]
        acc = acc + term
    return acc


# ---------------------------------------------------------------------------
# embeddings of towers into series with constant-tower coefficients


class SeriesEmbedding:
    """Maps a FieldTower into Q_emb[[tau]] at t = t0 + tau.

    Q_emb is a pure constant tower over Q grown as needed to hold initial
    values of the tower generators.  Branch choices (which root of the
    reduced minimal polynomial each generator starts at) are recorded so a
    rebuild at higher order follows the same branch.
    """

    def __init__(self, tower, t0, order, choices=None):
        self.tower = tower
        self.t0 = Fraction(t0)
        self.order = order
        self.const_tower = FieldTower(degree_budget=tower.degree_budget, ground=QQ)
        self.gen_series = []
        self.choices = list(choices) if choices else []
        self._build()

    @property
    def cdom(self):
        return self.const_tower.top if self.const_tower.levels else QQ

    def _build(self):
        for idx, lvl in enumerate(self.tower.levels):
            self.gen_series.append(self._embed_level(idx, lvl))

    def _embed_level(self, idx, lvl):
        order = self.order
        # minpoly coefficients as series (they live in lower levels)
        coeff_series = [self.of(c) for c in lvl.minpoly.coeffs]
        dom = self.cdom
        coeff_series = [_retag(s, dom, order) for s in coeff_series]
        # constant term polynomial over the constant tower
        p0 = UPoly(dom, [s.coeffs[0] for s in coeff_series])
        y0 = self._pick_root(idx, p0)
        dom = self.cdom  # may have grown
        coeff_series = [_retag(s, dom, order) for s in coeff_series]
        y0 = dom.convert(y0)
        dp0 = p0.map_coeffs(dom.convert, dom=dom).formal_derivative()
        if dp0.eval(y0) == dom.zero:
            raise SingularPointError(
                "generator %s has a multiple root at t = %s" % (lvl.name, self.t0),
                point=self.t0,
            )
        # Newton lift y -> y - P(y)/P'(y), doubling the correct prefix
        dcoeff_series = [
            s.scale(dom.convert(i)) for i, s in enumerate(coeff_series)
        ][1:]
        y = TruncSeries.const(dom, y0, 1)
        prec = 1
        while prec < order:
            prec = min(2 * prec, order)
            ypad = _pad(y, prec, dom)
            P = _poly_series_eval(coeff_series, ypad, prec, dom)
            dP = _poly_series_eval(dcoeff_series, ypad, prec, dom)
            y = (ypad - P * dP.inverse()).truncate(prec)
        # safety: the minpoly must vanish on the lift to full order
        if not _poly_series_eval(coeff_series, y, order, dom).is_zero():
            raise InternalConsistencyError("Newton lift failed to kill the minpoly")
        return y

    def _pick_root(self, idx, p0):
        sq = p0.squarefree_part()
        facs = [f for f, _ in factor_monic(sq)]
        facs.sort(key=_root_preference)
        if idx < len(self.choices):
            kind, payload = self.choices[idx]
            for f in facs:
                if _factor_token(f) == payload:
                    return self._materialize_root(f)
            raise InternalConsistencyError("recorded branch disappeared")
        best = facs[0]
        self.choices.append(
            ("linear" if best.degree() == 1 else "adjoin", _factor_token(best))
        )
        return self._materialize_root(best)

    def _materialize_root(self, f):
        if f.degree() == 1:
            return -f.coeff(0)
        return self.const_tower.adjoin(
            f, name="c%d" % (len(self.const_tower.levels) + 1)
        )

    def of(self, x):
        """Series of a tower element (or RatFunc / Fraction) at t0 + tau."""
        dom = self.cdom
        if isinstance(x, (int, Fraction)):
            return TruncSeries.const(dom, dom.convert(Fraction(x)), self.order)
        if isinstance(x, RatFunc):
            return ratfunc_series(x, self.t0, self.order, dom)
        if isinstance(x, TowerElem):
            depth = _level_index(self.tower, x.level)
            gseries = _retag(self.gen_series[depth], dom, self.order)
            coeffs = [self.of(c) for c in x.rep.coeffs]
            coeffs = [_retag(s, dom, self.order) for s in coeffs]
            return _poly_series_eval(coeffs, gseries, self.order, dom)
        raise TypeError("cannot embed %r" % (x,))


def _level_index(tower, level):
    for i, lvl in enumerate(tower.levels):
        if lvl is level:
            return i
    raise InternalConsistencyError("element from a foreign tower")


def _pad(series, order, dom):
    if series.order >= order:
        return series.truncate(order)
    return TruncSeries(
        dom, series.coeffs + (dom.zero,) * (order - series.order)
    )


def _retag(series, dom, order):
    if series.dom is dom:
        return series.truncate(order)
    cs = [dom.convert(c) for c in series.coeffs[:order]]
    cs += [dom.zero] * (order - len(cs))
    return TruncSeries(dom, cs)


def _poly_series_eval(coeff_series, y, order, dom):
    acc = TruncSeries.const(dom, dom.zero, order)
    for s in reversed(coeff_series):
        acc = acc * y.truncate(order) + s.truncate(order)
    return acc


def _factor_token(f):
    from .fields import format_upoly

    return format_upoly(f, "y")


def _root_preference(f):
    """Sort key: low degree first; among rational roots prefer positive ones
    of small height, so branch choices look like the principal branch."""
    from .fields import as_fraction

    if f.degree() == 1:
        r = as_fraction(f.coeff(0))
        if r is not None:
            root = -r
            rank = 0 if root > 0 else (1 if root == 0 else 2)
            return (1, rank, abs(root), _factor_token(f))
        return (1, 3, 0, _factor_token(f))
    return (f.degree(), 0, 0, _factor_token(f))


# ---------------------------------------------------------------------------
# modular series for the relation search


def ratfunc_series_mod_p(r, t0, order, p):
    """numpy int64 coefficient vector of r at t0 + tau, mod p.

    Raises SingularPointError on an honest pole at t0 and ValueError when p
    hits a denominator (caller switches primes).
    """
    t0 = Fraction(t0)
    if r.den.eval(t0) == 0:
        raise SingularPointError("pole of coefficient at t = %s" % (t0,), point=t0)
    num = r.num.compose_linear(t0)
    den = r.den.compose_linear(t0)
    nv = np.array(
        [fraction_mod_p(num.coeff(i), p) for i in range(order)], dtype=np.int64
    )
    dv = np.array(
        [fraction_mod_p(den.coeff(i), p) for i in range(order)], dtype=np.int64
    )
    if dv[0] == 0:
        raise ValueError("denominator constant term divisible by %d" % p)
    return series_div_mod_p(nv, dv, p)


def series_mul_mod_p(a, b, p):
    n = min(len(a), len(b))
    if n > 4096:
        raise InternalConsistencyError("series too long for int64 convolution")
    return np.convolve(a[:n], b[:n])[:n] % p


def series_div_mod_p(a, b, p):
    n = min(len(a), len(b))
    inv0 = pow(int(b[0]), -1, p)
    out = np.zeros(n, dtype=np.int64)
    out[0] = int(a[0]) * inv0 % p
    for k in range(1, n):
        acc = int(a[k])
        acc -= int(np.dot(b[1 : k + 1], out[k - 1 :: -1][: k]) % p)
        out[k] = acc * inv0 % p
    return out


def fundamental_series_mod_p(A, t0, order, p):
    """Mod-p fundamental solution: array of shape (order, n, n)."""
    n = len(A)
    Aser = np.zeros((order, n, n), dtype=np.int64)
    for i in range(n):
        for j in range(n):
            if not A[i][j].is_zero():
                Aser[:, i, j] = ratfunc_series_mod_p(A[i][j], t0, order, p)
    F = np.zeros((order, n, n), dtype=np.int64)
    F[0] = np.eye(n, dtype=np.int64)
    for j in range(order - 1):
        acc = np.zeros((n, n), dtype=np.int64)
        for i in range(j + 1):
            acc = (acc + Aser[i] @ F[j - i]) % p
        F[j + 1] = acc * pow(j + 1, -1, p) % p
    return F
