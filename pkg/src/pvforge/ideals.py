"""Ideal computations in the localized coordinate rings k[X, 1/det X] and
group rings C[G, 1/det g].

The localization is handled with an explicit inverse-determinant variable d
and the ambient relation d*det(X) - 1; contraction back to k[X] eliminates
d.  Groebner bases are plain Buchberger with the coprime-criterion and
normal selection, plus full inter-reduction, which is comfortable at the
sizes the method produces.

stabilizer() realizes the group condition: substitute X -> X g with fresh
group variables, reduce modulo the ideal, and read off the coefficient
equations, expanded over powers of t so the group is cut out over the
constants.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, permutations, product

import sympy

from .errors import InternalConsistencyError, UnsupportedShapeError
from .fields import K, QQ, TowerLevel, UPoly, derive, factor_monic
from .linalg import field_rref
from .mpoly import MPoly, PolyRing


# ---------------------------------------------------------------------------
# rings and basic polynomials


def matrix_var_names(n, prefix="X"):
    return tuple("%s%d%d" % (prefix, i + 1, j + 1) for i in range(n) for j in range(n))


def system_ring(n, dom=K, order="grevlex"):
    """k[X11..Xnn, d] with d the inverse determinant."""
    return PolyRing(matrix_var_names(n) + ("d",), dom, order=order)


def group_ring(n, dom=QQ):
    """C[g11..gnn, e] with e the inverse determinant of g."""
    return PolyRing(matrix_var_names(n, "g") + ("e",), dom)


def det_poly(ring, n, base=0):
    """Determinant of the n x n block of variables starting at index base."""
    out = ring.zero
    for perm in permutations(range(n)):
        sign = _perm_sign(perm)
        e = [0] * ring.n
        for i in range(n):
            e[base + i * n + perm[i]] += 1
        out = out + MPoly(ring, {tuple(e): ring.dom.convert(sign)})
    return out


def _perm_sign(perm):
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        length = 0
        j = i
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def ambient_relation(ring, n):
    """d * det(X) - 1."""
    d_idx = ring.var_index("d")
    return ring.var(d_idx) * det_poly(ring, n) - ring.one


def mpoly_partial(p, i):
    ring = p.ring
    out = {}
    zero = ring.dom.zero
    for e, c in p.terms.items():
        k = e[i]
        if not k:
            continue
        e2 = list(e)
        e2[i] = k - 1
        e2 = tuple(e2)
        v = out.get(e2, zero) + c * ring.dom.convert(k)
        if v == zero:
            out.pop(e2, None)
        else:
            out[e2] = v
    return MPoly(ring, out)


# ---------------------------------------------------------------------------
# normal forms and Groebner bases


def _divides(a, b):
    return all(x <= y for x, y in zip(a, b))


def nf(p, G, record=False):
    """Normal form of p modulo the list G.

    With record=True also returns cofactors h with p = sum h_i G_i + r.
    """
    ring = p.ring
    rem = ring.zero
    cofs = [ring.zero] * len(G) if record else None
    lts = [g.leading() for g in G]
    work = p
    while not work.is_zero():
        e, c = work.leading()
        hit = None
        for idx, (ge, _) in enumerate(lts):
            if _divides(ge, e):
                hit = idx
                break
        if hit is None:
            mono = MPoly(ring, {e: c})
            rem = rem + mono
            work = work - mono
            continue
        ge, gc = lts[hit]
        q = MPoly(
            ring, {tuple(a - b for a, b in zip(e, ge)): c / gc}
        )
        work = work - q * G[hit]
        if record:
            cofs[hit] = cofs[hit] + q
    if record:
        return rem, cofs
    return rem


def _spair(f, g):
    ring = f.ring
    fe, fc = f.leading()
    ge, gc = g.leading()
    lcm = tuple(max(a, b) for a, b in zip(fe, ge))
    mf = MPoly(ring, {tuple(l - a for l, a in zip(lcm, fe)): ring.dom.one / fc})
    mg = MPoly(ring, {tuple(l - a for l, a in zip(lcm, ge)): ring.dom.one / gc})
    return mf * f - mg * g


def groebner(gens, ring=None):
    """Reduced Groebner basis of the given generators."""
    G = [g.monic() for g in gens if not g.is_zero()]
    if not G:
        return []
    ring = ring or G[0].ring
    pairs = {(i, j) for i in range(len(G)) for j in range(i)}
    while pairs:
        # normal selection: smallest lcm in the term order
        best = min(
            pairs,
            key=lambda ij: (
                ring.key(
                    tuple(
                        max(a, b)
                        for a, b in zip(G[ij[0]].leading()[0], G[ij[1]].leading()[0])
                    )
                ),
                ij,
            ),
        )
        pairs.discard(best)
        i, j = best
        fe = G[i].leading()[0]
        ge = G[j].leading()[0]
        if all(a == 0 or b == 0 for a, b in zip(fe, ge)):
            continue  # coprime leading monomials reduce to zero
        r = nf(_spair(G[i], G[j]), G)
        if r.is_zero():
            continue
        r = r.monic()
        G.append(r)
        k = len(G) - 1
        pairs.update((k, l) for l in range(k))
    return _reduce_basis(G, ring)


def _reduce_basis(G, ring):
    G = [g.monic() for g in G if not g.is_zero()]
    G.sort(key=lambda g: ring.key(g.leading()[0]))
    minimal = []
    for g in G:
        ge = g.leading()[0]
        if not any(_divides(h.leading()[0], ge) for h in minimal):
            minimal.append(g)
    while True:
        out = []
        changed = False
        for i, g in enumerate(minimal):
            others = out + minimal[i + 1 :]
            r = nf(g, others).monic() if others else g
            if r != g:
                changed = True
            if not r.is_zero():
                out.append(r)
        minimal = sorted(out, key=lambda g: ring.key(g.leading()[0]))
        if not changed:
            return minimal


def ideal_contains(G, p):
    """p in <G>? G should be a Groebner basis."""
    return nf(p, G).is_zero()


def ideal_equal(G1, G2):
    """Equality of ideals given two reduced Groebner bases."""
    return [g.terms for g in G1] == [g.terms for g in G2]


# ---------------------------------------------------------------------------
# elimination, intersection, contraction


def _permuted_ring(ring, front):
    """Ring with the variables in `front` moved to the start, block order."""
    rest = [i for i in range(ring.n) if i not in front]
    perm = list(front) + rest
    names = tuple(ring.names[i] for i in perm)
    newring = PolyRing(names, ring.dom, order="block", block=len(front))
    return newring, perm


def _permute_poly(p, newring, perm):
    inv = [0] * len(perm)
    for pos, src in enumerate(perm):
        inv[src] = pos
    out = {}
    for e, c in p.terms.items():
        e2 = [0] * len(e)
        for src, k in enumerate(e):
            e2[inv[src]] = k
        out[tuple(e2)] = c
    return MPoly(newring, out)


def eliminate(gens, ring, var_indices):
    """Generators of <gens> ∩ k[vars outside var_indices], in the same ring."""
    if not gens:
        return []
    front = sorted(var_indices)
    newring, perm = _permuted_ring(ring, front)
    moved = [_permute_poly(g, newring, perm) for g in gens]
    G = groebner(moved, newring)
    nelim = len(front)
    out = []
    for g in G:
        if any(g.leading()[0][:nelim]):
            continue  # block order: an elimination variable would show in the LT
        terms = {}
        for e, c in g.terms.items():
            e2 = [0] * len(e)
            for pos, src in enumerate(perm):
                e2[src] = e[pos]
            terms[tuple(e2)] = c
        out.append(MPoly(ring, terms))
    return sorted(out, key=lambda g: ring.key(g.leading()[0]))


def intersect(gens_list, ring):
    """Intersection of several ideals via the auxiliary-variable trick."""
    gens_list = [g for g in gens_list]
    if not gens_list:
        return []
    acc = gens_list[0]
    for other in gens_list[1:]:
        acc = _intersect_pair(acc, other, ring)
    return groebner(acc, ring)


def _intersect_pair(I, J, ring):
    aux = PolyRing(("u",) + ring.names, ring.dom, order="block", block=1)
    u = aux.var(0)
    lifted_I = [g.embed(aux, position=1) for g in I]
    lifted_J = [g.embed(aux, position=1) for g in J]
    gens = [u * g for g in lifted_I] + [(aux.one - u) * g for g in lifted_J]
    G = groebner(gens, aux)
    kept = [g for g in G if g.leading()[0][0] == 0]
    out = []
    for g in kept:
        terms = {e[1:]: c for e, c in g.terms.items()}
        out.append(MPoly(ring, terms))
    return out


def contract(gens, ring):
    """Contraction to the d-free subring: eliminate the variable named d."""
    d_idx = ring.var_index("d")
    return eliminate(gens, ring, [d_idx])


# ---------------------------------------------------------------------------
# dimension and degree


def dimension_of(gens, ring, assume_gb=False):
    """Krull dimension of V(gens) inside affine space of the ring's variables.

    -1 for the empty variety.  Uses the standard independent-set reading of
    the leading-term ideal of a Groebner basis.
    """
    G = gens if assume_gb else groebner(gens, ring)
    if not G:
        return ring.n
    if any(g.is_constant() for g in G):
        return -1
    lts = [g.leading()[0] for g in G]
    nvars = ring.n
    for size in range(nvars, -1, -1):
        for S in combinations(range(nvars), size):
            sset = set(S)
            if all(any(e[i] for i in range(nvars) if i not in sset) for e in lts):
                return size
    return 0


def zero_dim_degree(gens, ring, assume_gb=False):
    """Number of standard monomials (= point count with multiplicity over
    the algebraic closure) of a zero-dimensional ideal."""
    G = gens if assume_gb else groebner(gens, ring)
    if any(g.is_constant() for g in G):
        return 0
    lts = [g.leading()[0] for g in G]
    bounds = []
    for i in range(ring.n):
        pure = [e[i] for e in lts if all(k == 0 for j, k in enumerate(e) if j != i)]
        if not pure:
            raise UnsupportedShapeError("ideal is not zero-dimensional")
        bounds.append(min(pure))
    count = 0
    for current in product(*(range(b) for b in bounds)):
        if not any(_divides(lt, current) for lt in lts):
            count += 1
    return count


# ---------------------------------------------------------------------------
# differential structure


class DiffIdeal:
    """Ideal of k[X, 1/det X] with the derivation induced by delta Y = A Y.

    delta(X_ij) = sum_l A_il X_lj and delta(d) = -tr(A) d; coefficients
    derive in their own field.  gens never include the ambient relation,
    which is available separately and joins Groebner computations on demand.
    """

    def __init__(self, A, gens=(), dom=None, ring=None):
        self.n = len(A)
        self.dom = dom or K
        self.ring = ring or system_ring(self.n, self.dom)
        self.A = [[self.dom.convert(a) for a in row] for row in A]
        self.gens = list(gens)
        self._delta_vars = self._build_delta_vars()
        self._gb = None

    def _build_delta_vars(self):
        n, ring = self.n, self.ring
        out = []
        for i in range(n):
            for j in range(n):
                acc = ring.zero
                for l in range(n):
                    if self.A[i][l] != self.dom.zero:
                        acc = acc + ring.var(l * n + j).scale(self.A[i][l])
                out.append(acc)
        trace = self.dom.zero
        for i in range(n):
            trace = trace + self.A[i][i]
        d_idx = ring.var_index("d")
        out.append(ring.var(d_idx).scale(-trace))
        return out

    def delta(self, p):
        out = p.map_coeffs(derive)
        for i in range(self.ring.n):
            dp = mpoly_partial(p, i)
            if not dp.is_zero():
                out = out + dp * self._delta_vars[i]
        return out

    @property
    def ambient(self):
        return ambient_relation(self.ring, self.n)

    def groebner_basis(self, with_ambient=False):
        if with_ambient:
            return groebner(self.gens + [self.ambient], self.ring)
        if self._gb is None:
            self._gb = groebner(self.gens, self.ring)
        return self._gb

    def with_gens(self, gens):
        out = DiffIdeal(self.A, gens, dom=self.dom, ring=self.ring)
        return out


def is_delta_ideal(diff_ideal, gens=None):
    """Exact delta-stability with cofactors.

    Returns (ok, H, basis): H[i][j] are cofactors with
    delta(basis_i) = sum_j H[i][j] basis_j, or (False, None, basis) if some
    derivative fails to reduce.  Membership is tested in the localization,
    so the ambient relation joins the basis when the plain one fails.
    """
    G = gens if gens is not None else diff_ideal.groebner_basis()
    attempts = [G]
    if gens is None:
        attempts.append(diff_ideal.groebner_basis(with_ambient=True))
    last = G
    for basis in attempts:
        last = basis
        if not basis:
            return True, [], basis
        H = []
        ok = True
        for g in basis:
            r, cofs = nf(diff_ideal.delta(g), basis, record=True)
            if not r.is_zero():
                ok = False
                break
            H.append(cofs)
        if ok:
            return True, H, basis
    return False, None, last


# ---------------------------------------------------------------------------
# stabilizer


@dataclass
class GroupIdeal:
    """Defining equations of a subgroup scheme of GL_n over the constants.

    ring is C[g11..gnn, e]; gens include the ambient e*det(g) - 1.  gb is
    the reduced Groebner basis, the canonical form used for comparisons.
    """

    n: int
    ring: PolyRing
    gens: list
    gb: list = field(default_factory=list)

    def equations(self):
        """Generators other than the ambient localization relation."""
        amb = group_ambient(self.ring, self.n)
        return [g for g in self.gens if g != amb]

    def is_full_group(self):
        amb = group_ambient(self.ring, self.n)
        return ideal_equal(self.gb, groebner([amb], self.ring))

    def dimension(self):
        return dimension_of(self.gb, self.ring)

    def contains_ideal(self, other):
        """Is other's group a subgroup, i.e. these equations inside other's?"""
        return all(ideal_contains(other.gb, g) for g in self.gb)


def group_ambient(ring, n):
    e_idx = ring.var_index("e")
    return ring.var(e_idx) * det_poly(ring, n, base=0) - ring.one


def stabilizer(diff_ideal_or_gens, n=None, ring=None):
    """Stabilizer subgroup of the generated ideal inside GL_n.

    Input is a DiffIdeal or a plain generator list with its ring; the
    coefficients must live over Q(t) and the generators must be free of the
    inverse determinant.  Membership of P(Xg) is tested in k[X] itself; for
    determinant-saturated ideals (every prime the method produces) this
    agrees with membership in the localization.  The group-side saturation
    e * det(g) - 1 is always part of the output.
    """
    if isinstance(diff_ideal_or_gens, DiffIdeal):
        gens = diff_ideal_or_gens.gens
        ring = diff_ideal_or_gens.ring
        n = diff_ideal_or_gens.n
    else:
        gens = list(diff_ideal_or_gens)
        if ring is None or n is None:
            raise ValueError("need ring and n with raw generators")
    if ring.dom is not K:
        raise UnsupportedShapeError("stabilizer expects coefficients over Q(t)")
    if any(g.degree_in(v) for g in gens for v in range(n * n, ring.n)):
        raise UnsupportedShapeError(
            "stabilizer wants determinant-free generator representatives"
        )
    G = groebner(gens, ring)
    nX = ring.n
    combined = PolyRing(
        ring.names + matrix_var_names(n, "g") + ("e",),
        K,
        order="block",
        block=nX,
    )
    Gc = [g.embed(combined, position=0) for g in G]
    # X_ij -> sum_l X_il g_lj; variables past the matrix block are inert
    images = []
    for i in range(n):
        for j in range(n):
            acc = combined.zero
            for l in range(n):
                acc = acc + combined.var(i * n + l) * combined.var(nX + l * n + j)
            images.append(acc)
    for v in range(n * n, combined.n):
        images.append(combined.var(v))
    gring = group_ring(n, QQ)
    equations = {}
    for g in G:
        sub = g.embed(combined, position=0).substitute(images)
        rem = nf(sub, Gc)
        _collect_group_equations(rem, nX, n, gring, equations)
    eqs = sorted(equations.values(), key=lambda q: gring.key(q.leading()[0]))
    amb = group_ambient(gring, n)
    gens_out = eqs + [amb]
    gb = groebner(gens_out, gring)
    return GroupIdeal(n=n, ring=gring, gens=gens_out, gb=gb)


def _collect_group_equations(rem, nX, n, gring, equations):
    """Split a reduced remainder into coefficient equations over Q.

    rem lives in k[X, d, g, e]; group terms by (X, d)-monomial, clear t
    denominators, and emit one equation per power of t.
    """
    by_xmono = {}
    for e, c in rem.terms.items():
        xpart, gpart = e[:nX], e[nX:]
        by_xmono.setdefault(xpart, {})[gpart] = c
    for xpart, coeffs in by_xmono.items():
        den = UPoly(QQ, (Fraction(1),))
        for c in coeffs.values():
            den = (den * c.den).exact_div(den.gcd_monic(c.den))
        by_tpow = {}
        for gpart, c in coeffs.items():
            poly_t = c.num * den.exact_div(c.den)
            for j in range(poly_t.degree() + 1):
                q = poly_t.coeff(j)
                if q != 0:
                    by_tpow.setdefault(j, {})[gpart] = q
        for j, terms in by_tpow.items():
            eq = MPoly(gring, dict(terms)).monic()
            if not eq.is_zero():
                equations[frozenset(eq.terms.items())] = eq


# ---------------------------------------------------------------------------
# radical (supported shapes)


@dataclass
class RadicalResult:
    gens: list
    assumed: bool  # True when the input fell outside the supported shapes


def radical(gens, ring):
    """Radical for the shapes the method produces.

    Handles: the zero ideal; ideals that reduce, after eliminating variables
    that occur in some generator as a pure linear term, to zero, to a single
    polynomial (squarefree part taken exactly), or to a monomial ideal.
    Anything else is returned unchanged with assumed=True.
    """
    G = groebner(gens, ring)
    if not G:
        return RadicalResult([], False)
    if any(g.is_constant() for g in G):
        return RadicalResult([ring.one], False)
    subs, residual = _linear_eliminate(G, ring)
    linear_part = [ring.var(i) - r for i, r in subs]
    if not residual:
        return RadicalResult(groebner(linear_part, ring), False)
    if all(len(g.terms) == 1 for g in residual):
        mono = [_squarefree_monomial(g) for g in residual]
        return RadicalResult(groebner(linear_part + mono, ring), False)
    if len(residual) == 1:
        f = residual[0]
        red = _squarefree_part(f, ring)
        if red is not None:
            return RadicalResult(groebner(linear_part + [red], ring), False)
    return RadicalResult(G, True)


def _linear_eliminate(G, ring):
    """Repeatedly solve generators that are linear in some variable that
    appears nowhere else in them; returns (substitutions, residual gens)."""
    work = list(G)
    subs = []
    while True:
        found = None
        for g in sorted(work, key=lambda p: (len(p.terms), ring.key(p.leading()[0]))):
            for i in range(ring.n):
                if g.degree_in(i) != 1:
                    continue
                lin = {e: c for e, c in g.terms.items() if e[i] == 1}
                if len(lin) != 1:
                    continue
                e0, c0 = next(iter(lin.items()))
                if any(e0[j] for j in range(ring.n) if j != i):
                    continue  # the linear term must be c * x alone
                rest = MPoly(ring, {e: c for e, c in g.terms.items() if e[i] == 0})
                found = (g, i, rest.scale(-(ring.dom.one / c0)))
                break
            if found:
                break
        if not found:
            return subs, [g for g in work if not g.is_zero()]
        g, i, repl = found
        subs.append((i, repl))
        images = [ring.var(j) for j in range(ring.n)]
        images[i] = repl
        out = []
        for h in work:
            if h is g:
                continue
            h2 = h.substitute(images)
            if not h2.is_zero():
                out.append(h2)
        # substitutions can re-trigger earlier ones; also fold into recorded subs
        subs = [(j, r.substitute(images)) for j, r in subs[:-1]] + [subs[-1]]
        work = out


def _squarefree_monomial(g):
    ring = g.ring
    (e, _), = g.terms.items()
    return MPoly(ring, {tuple(1 if k else 0 for k in e): ring.dom.one})


def _support_vars(f):
    out = set()
    for e in f.terms:
        for i, k in enumerate(e):
            if k:
                out.add(i)
    return sorted(out)


def _as_univariate(f, i):
    """f as UPoly in variable i; None if other variables occur."""
    ring = f.ring
    deg = f.degree_in(i)
    cs = [ring.dom.zero] * (deg + 1)
    for e, c in f.terms.items():
        if any(e[j] for j in range(ring.n) if j != i):
            return None
        cs[e[i]] = c
    return UPoly(ring.dom, cs)


def _from_univariate(p, i, ring):
    out = {}
    for k, c in enumerate(p.coeffs):
        if c != ring.dom.zero:
            e = [0] * ring.n
            e[i] = k
            out[tuple(e)] = c
    return MPoly(ring, out)


def _squarefree_part(f, ring):
    """Exact squarefree part of one polynomial, or None if out of scope."""
    sup = _support_vars(f)
    if len(sup) == 1:
        p = _as_univariate(f, sup[0])
        return _from_univariate(p.squarefree_part(), sup[0], ring)
    if ring.dom is K:
        return _sympy_squarefree_over_k(f, ring)
    return None


def _sympy_squarefree_over_k(f, ring):
    """Multivariate squarefree part over Q(t) by factoring in Q[X.., t]."""
    syms = [sympy.Symbol("v%d" % i) for i in range(ring.n)]
    tsym = sympy.Symbol("__t")
    den = UPoly(QQ, (Fraction(1),))
    for c in f.terms.values():
        den = (den * c.den).exact_div(den.gcd_monic(c.den))
    expr = 0
    for e, c in f.terms.items():
        num = c.num * den.exact_div(c.den)
        texpr = sum(
            sympy.Rational(q.numerator, q.denominator) * tsym**j
            for j, q in enumerate(num.coeffs)
        )
        mono = 1
        for i, k in enumerate(e):
            if k:
                mono *= syms[i] ** k
        expr += texpr * mono
    _, pairs = sympy.factor_list(sympy.expand(expr), *syms, tsym)
    acc = ring.one
    for fac, _mult in pairs:
        poly = sympy.Poly(fac, *syms, tsym)
        if all(poly.degree(s) < 1 for s in syms):
            continue  # a unit of Q(t)
        tpows = {}
        for exps, coeff in poly.terms():
            q = sympy.Rational(coeff)
            tpows.setdefault(tuple(exps[:-1]), {})[exps[-1]] = Fraction(
                int(q.p), int(q.q)
            )
        part = ring.zero
        for xexp, by_t in tpows.items():
            top = max(by_t)
            num = UPoly(QQ, [by_t.get(j, Fraction(0)) for j in range(top + 1)])
            part = part + MPoly(ring, {xexp: K.convert(num)})
        acc = acc * part
    return acc.monic() if not acc.is_zero() else None


# ---------------------------------------------------------------------------
# prime decomposition (supported shapes)


def prime_decompose(gens, ring):
    """Minimal components of a radical ideal, for the shapes that appear.

    Supported after pure-linear elimination: the zero residual (one
    component), one polynomial in a single variable (factor it), one
    absolutely irreducible quadric (rank of the homogenized form >= 3, one
    component), a homogeneous binary quadric (factor it), squarefree
    monomial residuals, and triangular chains handled by factoring over
    successive extensions.  Everything else raises UnsupportedShapeError.
    """
    G = groebner(gens, ring)
    if not G:
        return [[]]
    if any(g.is_constant() for g in G):
        return []
    subs, residual = _linear_eliminate(G, ring)
    linear_part = [ring.var(i) - r for i, r in subs]
    comps = _decompose_residual(residual, ring)
    out = []
    for comp in comps:
        out.append(groebner(linear_part + comp, ring))
    # sanity: every component contains the input ideal
    for comp in out:
        for g in G:
            if not nf(g, comp).is_zero():
                raise InternalConsistencyError("component lost the ideal")
    return out


def _decompose_residual(residual, ring):
    if not residual:
        return [[]]
    if all(len(g.terms) == 1 for g in residual):
        return _monomial_components(residual, ring)
    if len(residual) == 1:
        f = residual[0]
        sup = _support_vars(f)
        if len(sup) == 1:
            p = _as_univariate(f, sup[0])
            return [
                [_from_univariate(q, sup[0], ring)] for q, _ in factor_monic(p)
            ]
        if f.total_degree() == 2:
            return _quadric_components(f, ring)
        raise UnsupportedShapeError(
            "single residual generator outside supported shapes"
        )
    chain = _try_triangular_chain(residual, ring)
    if chain is not None:
        return chain
    raise UnsupportedShapeError("residual system outside supported shapes")


def _monomial_components(residual, ring):
    """Minimal primes of a squarefree monomial ideal: minimal covers."""
    supports = [frozenset(_support_vars(g)) for g in residual]
    nvars = sorted(set().union(*supports))
    covers = []
    for size in range(1, len(nvars) + 1):
        for S in combinations(nvars, size):
            sset = set(S)
            if all(sset & sup for sup in supports):
                if not any(set(c) <= sset for c in covers):
                    covers.append(S)
    return [[ring.var(i) for i in S] for S in covers]


def _quadric_components(f, ring):
    """Components of one quadratic polynomial.

    Homogenized symmetric rank >= 3 means absolutely irreducible.  The
    homogeneous binary case factors through its dehomogenization.  Other
    rank <= 2 shapes are out of scope.
    """
    sup = _support_vars(f)
    m = len(sup)
    dom = ring.dom
    idx = {v: a for a, v in enumerate(sup)}
    size = m + 1  # last slot is the homogenizing variable
    gram = [[dom.zero] * size for _ in range(size)]
    half = dom.one / dom.convert(2)
    for e, c in f.terms.items():
        vars_in = [(i, k) for i, k in enumerate(e) if k]
        tot = sum(k for _, k in vars_in)
        if tot == 2:
            if len(vars_in) == 1:
                a = idx[vars_in[0][0]]
                gram[a][a] = gram[a][a] + c
            else:
                a, b = idx[vars_in[0][0]], idx[vars_in[1][0]]
                gram[a][b] = gram[a][b] + c * half
                gram[b][a] = gram[b][a] + c * half
        elif tot == 1:
            a = idx[vars_in[0][0]]
            gram[a][m] = gram[a][m] + c * half
            gram[m][a] = gram[m][a] + c * half
        else:
            gram[m][m] = gram[m][m] + c
    _, pivots = field_rref(gram, dom)
    rank = len(pivots)
    if rank >= 3:
        return [[f.monic()]]
    if m == 2 and all(sum(k for k in e) == 2 for e in f.terms):
        x, y = sup
        # f = a x^2 + b xy + c y^2: factor a u^2 + b u + c
        a = f.coeff_of(tuple(2 if i == x else 0 for i in range(ring.n)))
        b = f.coeff_of(
            tuple(1 if i in (x, y) else 0 for i in range(ring.n))
        )
        cc = f.coeff_of(tuple(2 if i == y else 0 for i in range(ring.n)))
        if a == dom.zero:
            # x missing as square: f = y (b x + c y)
            return [
                [ring.var(y)],
                [ring.var(x).scale(b) + ring.var(y).scale(cc)],
            ]
        p = UPoly(dom, (cc / a, b / a, dom.one))
        facs = factor_monic(p)
        if len(facs) == 1 and facs[0][0].degree() == 2:
            return [[f.monic()]]
        comps = []
        for q, _ in facs:
            root = -q.coeff(0)
            comps.append([ring.var(x) - ring.var(y).scale(root)])
        return comps
    raise UnsupportedShapeError("rank <= 2 quadric outside the binary case")


def _try_triangular_chain(residual, ring):
    """Decompose a chain g1(x1), g2(x1, x2), ... by factoring each link over
    the extension the earlier links define.  Linear factors bind their
    variable to a field element; nonlinear factors extend the field and the
    variable becomes the new generator.  None if the gens form no chain."""
    order = []
    seen = set()
    work = sorted(
        residual, key=lambda g: (len(_support_vars(g)), ring.key(g.leading()[0]))
    )
    for g in work:
        new = [v for v in _support_vars(g) if v not in seen]
        if len(new) != 1:
            return None
        order.append((g, new[0]))
        seen.add(new[0])

    base_dom = ring.dom
    chains = []

    def rec(level_dom, values, gen_vars, chain, rest):
        if not rest:
            chains.append(list(chain))
            return True
        g, v = rest[0]
        p = _chain_univariate(g, v, values, level_dom)
        if p is None or p.is_zero():
            return False
        for q, _ in factor_monic(p.monic()):
            entry = (v, q, tuple(gen_vars))
            if q.degree() == 1:
                vals2 = dict(values)
                vals2[v] = -q.coeff(0)
                ok = rec(level_dom, vals2, gen_vars, chain + [entry], rest[1:])
            else:
                lvl = TowerLevel(level_dom, "w%d" % (len(gen_vars) + 1), q)
                vals2 = {w: lvl.convert(x) for w, x in values.items()}
                vals2[v] = lvl.gen
                ok = rec(lvl, vals2, gen_vars + [v], chain + [entry], rest[1:])
            if not ok:
                return False
        return True

    if not rec(base_dom, {}, [], [], order):
        return None
    comps = []
    for chain in chains:
        comps.append(
            [_chain_poly_to_mpoly(v, q, gvars, ring) for v, q, gvars in chain]
        )
    return comps


def _chain_univariate(g, v, values, level_dom):
    """g as a UPoly in variable v over level_dom, with every other variable
    replaced by its bound value; None when an unbound variable occurs."""
    ring = g.ring
    deg = g.degree_in(v)
    cs = [level_dom.zero] * (deg + 1)
    for e, c in g.terms.items():
        coeff = level_dom.convert(c)
        for i, k in enumerate(e):
            if i == v or not k:
                continue
            if i not in values:
                return None
            coeff = coeff * values[i] ** k
        cs[e[v]] = cs[e[v]] + coeff
    return UPoly(level_dom, cs)


def _chain_poly_to_mpoly(v, q, gen_vars, ring):
    """A chain factor back in the ambient ring: the tower generator at
    relative depth j reads as the chain variable gen_vars[j]."""
    base_dom = ring.dom

    def rel_depth(dom):
        d = 0
        node = dom
        while node is not base_dom:
            node = node.base
            d += 1
        return d

    def conv(elem, depth):
        if depth == 0:
            return ring.const(elem)
        out = ring.zero
        var = ring.var(gen_vars[depth - 1])
        for k, c in enumerate(elem.rep.coeffs):
            out = out + conv(c, depth - 1) * var**k
        return out

    depth = rel_depth(q.dom)
    out = ring.zero
    var = ring.var(v)
    for k, c in enumerate(q.coeffs):
        term = conv(c, depth) if depth else ring.const(c)
        out = out + term * var**k
    return out
