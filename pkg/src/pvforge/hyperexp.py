"""Maximal differential ideal over the algebraic closure.

The relation ideal of delta Y = A Y is radical but rarely prime.  The route
to a maximal differential ideal goes through three stages: pick the prime
component the chosen fundamental solution actually lies on (a truncated
series test), anchor it at a matrix point with entries in a finite
extension, then enlarge it by one generator per multiplicative relation
among the hyperexponential elements of the quotient.

Hyperexponential elements (delta h = u h) are found through a companion
system.  The span of standard monomials up to a degree cap is stable under
delta because the term order is graded, so delta acts there by a matrix B,
and elements with delta h = u h correspond to solutions of delta w = M w
for M = -B^T, with certificate -u.  Certificate candidates are pinned by
residues at the finite poles and leading behaviour at infinity; integer
relations among the surviving certificates come from an exact integer
kernel.  Every candidate-driven step hands back a checkable witness, so
what is returned is certified even where the candidate generation itself is
restricted; shapes outside the supported classes raise
UnsupportedShapeError rather than guessing.
"""

from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from math import gcd

import numpy as np
import sympy

from .errors import (
    BoundExhaustedError,
    InternalConsistencyError,
    SingularPointError,
    UnsupportedShapeError,
)
from .fields import (
    K,
    QQ,
    FieldTower,
    RatFunc,
    TowerElem,
    TowerLevel,
    UPoly,
    _norm_to_base,
    _t_rational_split,
    as_fraction,
    derive,
    factor_monic,
    is_constant,
    is_log_derivative,
    partial_fractions,
    rational_roots,
)
from .ideals import (
    DiffIdeal,
    ambient_relation,
    groebner,
    ideal_contains,
    is_delta_ideal,
    nf,
    prime_decompose,
    radical,
    system_ring,
)
from .linalg import (
    char_poly_hessenberg,
    char_poly_mod_p,
    field_nullspace,
    fraction_mod_p,
    hnf_row_basis,
    integer_kernel,
    mat_det,
    mat_mul,
    mat_vec,
    modular_kernel,
    pencil_det_poly,
    poly_roots_mod_p,
    rational_eigenvalues,
    reconstruct_fraction,
    transpose,
)
from .mpoly import MPoly, PolyRing
from .relations import monomial_basis
from .series import (
    SeriesEmbedding,
    TruncSeries,
    det_series,
    eval_mpoly_on_series,
    fundamental_series,
    ratfunc_series_mod_p,
)

POINT_CANDIDATES = [Fraction(v) for v in (1, 0, -1, 2, -2, 3, -3)]
COMBO_CAP = 64
REDUCTION_ROUNDS = 2


def _ring_over(ring, dom):
    return PolyRing(ring.names, dom, order=ring.order, block=ring.block)


def _gens_over(gens, ring):
    return [g.map_coeffs(ring.dom.convert, ring=ring) for g in gens]


def _matrix_size(ring):
    n = 1
    while n * n + 1 < ring.n:
        n += 1
    if n * n + 1 != ring.n:
        raise InternalConsistencyError("ring is not a system ring")
    return n


def _divides_exp(a, b):
    return all(x <= y for x, y in zip(a, b))


def _t_in(dom):
    if dom is K:
        return K.gen
    return dom.convert(K.gen)


def _dom_int_pow(x, k):
    dom = K if isinstance(x, RatFunc) else x.level
    out = dom.one
    base = x if k > 0 else dom.one / x
    for _ in range(abs(k)):
        out = out * base
    return out


def _eval_at_point(p, vals, dom):
    """Value of an MPoly at a point given as a list of domain elements."""
    acc = dom.zero
    for e, c in p.terms.items():
        term = c
        for i, k in enumerate(e):
            for _ in range(k):
                term = term * vals[i]
        acc = acc + term
    return acc


# ---------------------------------------------------------------------------
# anchoring: the component through the solution, and a point on it


@dataclass
class AnchorPoint:
    """A prime component of the relation ideal with a matrix point on it.

    entries holds the n*n matrix coordinates (row-major) in ring.dom, which
    is the tower top; the determinant is nonzero by construction.
    """

    tower: FieldTower
    ring: PolyRing
    component: list
    entries: list
    n: int

    @property
    def dom(self):
        return self.ring.dom

    def matrix(self):
        n = self.n
        return [[self.entries[i * n + j] for j in range(n)] for i in range(n)]

    def point_values(self):
        """Coordinates for all ring variables, inverse determinant last."""
        det = mat_det(self.matrix(), self.dom)
        return list(self.entries) + [self.dom.one / det]


def _solution_images(A, t0, order, emb):
    # series of the normalized fundamental matrix, entry by entry, then the
    # inverse determinant for the localization variable
    dom = emb.cdom
    F = fundamental_series(A, t0, order, dom=dom)
    n = len(A)
    images = []
    for i in range(n):
        for j in range(n):
            images.append(TruncSeries(dom, [Fm[i][j] for Fm in F]))
    images.append(det_series(F, dom).inverse())
    return images


def _vanishes_on_solution(gens, images, emb, order):
    for g in gens:
        val = eval_mpoly_on_series(g, images, emb.of, order, dom=emb.cdom)
        if not val.is_zero():
            return False
    return True


def _select_component(comps, A, t0, tower, order=24, max_order=192):
    if len(comps) == 1:
        return comps[0]
    while True:
        emb = SeriesEmbedding(tower, t0, order)
        images = _solution_images(A, t0, order, emb)
        hits = [c for c in comps if _vanishes_on_solution(c, images, emb, order)]
        if len(hits) == 1:
            return hits[0]
        if not hits:
            raise InternalConsistencyError(
                "no prime component vanishes on the fundamental solution"
            )
        if order >= max_order:
            raise BoundExhaustedError(
                "prime components indistinguishable at series order %d" % order
            )
        order *= 2


def _try_identity(comp, ring, n):
    dom = ring.dom
    vals = [dom.one if i // n == i % n else dom.zero for i in range(n * n)]
    vals.append(dom.one)
    for g in comp:
        if _eval_at_point(g, vals, dom) != dom.zero:
            return None
    return vals[: n * n]


class _TowerGrew(Exception):
    pass


def _support_vars(p):
    out = set()
    for e in p.terms:
        for i, k in enumerate(e):
            if k:
                out.add(i)
    return out


def _as_univariate(p, v, dom):
    cs = [dom.zero] * (p.degree_in(v) + 1)
    for e, c in p.terms.items():
        cs[e[v]] = cs[e[v]] + c
    return UPoly(dom, cs)


def _point_dfs(gens, values, ring, n, tower, budget):
    if budget[0] <= 0:
        raise BoundExhaustedError("point search budget exhausted")
    budget[0] -= 1
    dom = ring.dom
    images = [
        ring.const(values[v]) if v in values else ring.var(v) for v in range(ring.n)
    ]
    work = []
    for g in gens:
        g2 = g.substitute(images)
        if g2.is_zero():
            continue
        if g2.is_constant():
            return None
        work.append(g2)
    if not work:
        full = dict(values)
        for v in range(n * n):
            full.setdefault(v, dom.one if v // n == v % n else dom.zero)
        mat = [[full[i * n + j] for j in range(n)] for i in range(n)]
        if mat_det(mat, dom) == dom.zero:
            return None
        return full
    # a generator that pins one variable linearly
    for g in work:
        if g.total_degree() != 1:
            continue
        lin = [(e, c) for e, c in g.terms.items() if sum(e) == 1]
        if len(lin) != 1:
            continue
        e, c = lin[0]
        v = next(i for i, k in enumerate(e) if k)
        rest = g.coeff_of((0,) * ring.n)
        vals2 = dict(values)
        vals2[v] = -rest / c
        return _point_dfs(gens, vals2, ring, n, tower, budget)
    # a generator in a single variable: read values off its linear factors,
    # adjoining a root when none exists yet
    for g in work:
        sup = _support_vars(g)
        if len(sup) != 1:
            continue
        v = sup.pop()
        up = _as_univariate(g, v, dom).monic()
        linear = []
        other = []
        for f, _ in factor_monic(up):
            (linear if f.degree() == 1 else other).append(f)
        for f in linear:
            vals2 = dict(values)
            vals2[v] = -f.coeff(0)
            res = _point_dfs(gens, vals2, ring, n, tower, budget)
            if res is not None:
                return res
        if other:
            other.sort(key=lambda f: f.degree())
            tower.adjoin(other[0])
            raise _TowerGrew()
        return None
    # free choice on the lowest unassigned variable still present
    v = min(min(_support_vars(g)) for g in work)
    for cand in POINT_CANDIDATES:
        vals2 = dict(values)
        vals2[v] = dom.convert(cand)
        res = _point_dfs(gens, vals2, ring, n, tower, budget)
        if res is not None:
            return res
    return None


def anchor_component(toric_gens, A, t0, tower=None, max_rounds=6, point_budget=400):
    """Prime component through the fundamental solution, plus a point on it.

    Decomposes over the current coefficient field, picks the component the
    solution lies on, and searches for an invertible matrix point with
    coordinates in a finite extension.  Any coordinate forced to satisfy an
    irreducible nonlinear equation grows the tower, which restarts the
    decomposition over the larger field.
    """
    n = len(A)
    tower = tower if tower is not None else FieldTower()
    base_ring = toric_gens[0].ring if toric_gens else system_ring(n)
    for g in toric_gens:
        if g.degree_in(base_ring.n - 1):
            raise InternalConsistencyError("relation generators must be d-free")
    for _ in range(max_rounds):
        dom = tower.top
        ring = _ring_over(base_ring, dom)
        gens = _gens_over(toric_gens, ring)
        comps = prime_decompose(gens, ring)
        if not comps:
            raise InternalConsistencyError("relation ideal has no components")
        comp = _select_component(comps, A, t0, tower)
        ident = _try_identity(comp, ring, n)
        if ident is not None:
            return AnchorPoint(tower, ring, comp, ident, n)
        try:
            full = _point_dfs(comp, {}, ring, n, tower, [point_budget])
        except _TowerGrew:
            continue
        if full is None:
            raise BoundExhaustedError("no usable point found on the component")
        return AnchorPoint(tower, ring, comp, [full[v] for v in range(n * n)], n)
    raise BoundExhaustedError("component anchoring exceeded %d rounds" % max_rounds)


# ---------------------------------------------------------------------------
# the companion system on the standard-monomial span


@dataclass
class QuotientConnection:
    """Action of delta on the standard monomials of the component.

    basis lists exponent tuples (inverse-determinant slot zero); M is the
    companion matrix -B^T, so hyperexponential solutions of delta w = M w
    with certificate u correspond to quotient elements with certificate -u.
    """

    ring: PolyRing
    n: int
    degree_cap: int
    gb: list
    basis: list
    M: list
    diff_ideal: DiffIdeal

    @property
    def dom(self):
        return self.ring.dom

    def basis_polys(self):
        return [self.ring.monomial(e) for e in self.basis]


def quotient_connection(component, A, ring, degree_cap):
    """Connection matrix of delta on standard monomials up to degree_cap.

    The span is delta-stable: the derivation preserves total degree and
    normal forms against a graded basis never raise it.
    """
    if ring.order != "grevlex":
        raise InternalConsistencyError("quotient span needs a graded order")
    dom = ring.dom
    n = _matrix_size(ring)
    gb = groebner(list(component), ring)
    di = DiffIdeal(A, gens=gb, dom=dom, ring=ring)
    lts = [g.leading()[0] for g in gb]
    basis = []
    for e in monomial_basis(n, degree_cap):
        full = e + (0,)
        if not any(_divides_exp(lt, full) for lt in lts):
            basis.append(full)
    index = {e: i for i, e in enumerate(basis)}
    s = len(basis)
    B = [[dom.zero] * s for _ in range(s)]
    for i, e in enumerate(basis):
        rem = nf(di.delta(ring.monomial(e)), gb)
        for e2, c in rem.terms.items():
            j = index.get(e2)
            if j is None:
                raise InternalConsistencyError(
                    "derivation left the standard-monomial span"
                )
            B[i][j] = c
    M = [[-B[j][i] for j in range(s)] for i in range(s)]
    return QuotientConnection(ring, n, degree_cap, gb, basis, M, di)


# ---------------------------------------------------------------------------
# hyperexponential solutions of delta w = M w


@dataclass
class HyperexpSolution:
    """w = exp(int u) * vector solves delta w = M w; the vector satisfies
    delta v = (M - u) v and is what the caller actually manipulates."""

    certificate: object
    vector: list


def _check_hyperexp(M, u, vec, dom):
    s = len(vec)
    for i in range(s):
        acc = -(u * vec[i])
        for j in range(s):
            acc = acc + M[i][j] * vec[j]
        if derive(vec[i]) != acc:
            raise InternalConsistencyError(
                "hyperexponential solution failed its certificate"
            )


def hyperexp_solutions(M, dom, poly_degree_cap=None):
    """One representative per hyperexponential solution class of delta w = M w.

    Constant matrices work over any coefficient domain through generalized
    kernels of their rational eigenvalues.  Non-constant matrices are
    supported over Q(t) when every finite pole is simple and the exponential
    parts resolve within the leading-matrix reduction budget; anything else
    raises UnsupportedShapeError.  Candidate completeness is inherited from
    rational_eigenvalues; every returned solution is verified exactly.
    """
    s = len(M)
    if s == 0:
        return []
    if all(is_constant(x) for row in M for x in row):
        return _constant_system_solutions(M, dom)
    if dom is not K:
        raise UnsupportedShapeError(
            "non-constant companion matrix over an extension tower"
        )
    return _rational_system_solutions(M, poly_degree_cap)


def _constant_system_solutions(M, dom):
    s = len(M)
    if dom is K:
        ratmat = [[as_fraction(x) for x in row] for row in M]
        eigen = [dom.convert(l) for l in rational_eigenvalues(ratmat)]
    else:
        char = char_poly_hessenberg(M, dom)
        eigen = sorted(
            (-f.coeff(0) for f, _ in factor_monic(char.monic()) if f.degree() == 1),
            key=str,
        )
    tgen = _t_in(dom)
    out = []
    for lam in eigen:
        N = [list(row) for row in M]
        for i in range(s):
            N[i][i] = N[i][i] - lam
        power = N
        basis = []
        prev = -1
        for _ in range(s):
            basis = field_nullspace(power, s, dom)
            if len(basis) == prev:
                break
            prev = len(basis)
            power = mat_mul(power, N, dom)
        for v0 in basis:
            # v = sum_j (t^j / j!) N^j v0, finite since v0 is in ker N^s
            vec = list(v0)
            cur = list(v0)
            fact = 1
            tpow = dom.one
            for j in range(1, s + 1):
                cur = mat_vec(N, cur, dom)
                if all(x == dom.zero for x in cur):
                    break
                fact *= j
                tpow = tpow * tgen
                scl = dom.one / dom.convert(fact)
                vec = [a + (b * tpow) * scl for a, b in zip(vec, cur)]
            else:
                raise InternalConsistencyError("nilpotent chain did not terminate")
            _check_hyperexp(M, lam, vec, dom)
            out.append(HyperexpSolution(lam, vec))
    return out


def _upoly_lcm(a, b):
    if a.is_zero() or b.is_zero():
        raise InternalConsistencyError("lcm of a zero polynomial")
    g = a.gcd_monic(b)
    return (a * b.exact_div(g)).monic()


def _rational_system_solutions(M, poly_degree_cap):
    ents = [[K.convert(x) for x in row] for row in M]
    pole_sets = _finite_pole_candidates(ents)
    combos = list(product(*[[(f, e) for e in cands] for f, cands in pole_sets]))
    if len(combos) > COMBO_CAP:
        raise UnsupportedShapeError(
            "certificate search space too large (%d pole combinations)" % len(combos)
        )
    out = []
    attempts = 0
    for choice in combos:
        twist = K.zero
        for f, e in choice:
            if e:
                twist = twist + K.convert(f.formal_derivative().scale(e)) / K.convert(f)
        tents = [list(row) for row in ents]
        for i in range(len(tents)):
            tents[i][i] = tents[i][i] - twist
        # the pole twist is a proper fraction, so the pencil route sees the
        # same quotients either way; only the p-curvature fallback needs the
        # twisted entries, which is why candidates are drawn per combination
        exp_parts = _exponential_candidates(tents, poly_degree_cap)
        attempts += max(len(exp_parts), 1)
        if attempts > COMBO_CAP:
            raise UnsupportedShapeError(
                "certificate search space too large (%d combinations)" % attempts
            )
        for q in exp_parts:
            u = twist + K.convert(q)
            for vec in _polynomial_solutions(ents, u, poly_degree_cap):
                _check_hyperexp(ents, u, vec, K)
                out.append(HyperexpSolution(u, vec))
    return out


def _finite_pole_candidates(ents):
    """Per finite pole: the irreducible factor and usable residue exponents.

    Poles must be simple.  Candidates are the rational eigenvalues of the
    residue matrix, thinned to the smallest member of each Z-coset; local
    exponents of solutions are eigenvalues, so that choice makes the vector
    part of any matching solution class polynomial.
    """
    den = UPoly.const(QQ, Fraction(1))
    for row in ents:
        for x in row:
            if not x.is_zero():
                den = _upoly_lcm(den, x.den)
    out = []
    for f, mult in factor_monic(den.monic()):
        if mult >= 2:
            raise UnsupportedShapeError(
                "finite pole of order %d; only simple poles are supported" % mult
            )
        if f.degree() == 1:
            root = -f.coeff(0)
            R = []
            for row in ents:
                r2 = []
                for x in row:
                    if not x.is_zero() and x.den.rem(f).is_zero():
                        d1 = x.den.exact_div(f)
                        r2.append(x.num.eval(root) / d1.eval(root))
                    else:
                        r2.append(Fraction(0))
                R.append(r2)
            eigs = rational_eigenvalues(R)
        else:
            lvl = TowerLevel(QQ, "w", f)
            theta = lvl.gen
            R = []
            for row in ents:
                r2 = []
                for x in row:
                    if not x.is_zero() and x.den.rem(f).is_zero():
                        num_l = x.num.map_coeffs(lvl.convert, dom=lvl)
                        d1 = x.den.exact_div(f).map_coeffs(lvl.convert, dom=lvl)
                        r2.append(num_l.eval(theta) / d1.eval(theta))
                    else:
                        r2.append(lvl.zero)
                R.append(r2)
            char = char_poly_hessenberg(R, lvl)
            eigs = []
            for cand in rational_roots(_norm_to_base(char)):
                if char.eval(lvl.convert(cand)) == lvl.zero:
                    eigs.append(cand)
        coset = {}
        for lam in eigs:
            key = lam % 1
            if key not in coset or lam < coset[key]:
                coset[key] = lam
        out.append((f, sorted(coset.values())))
    return out


def _infinity_degree(ents):
    r = None
    for row in ents:
        for x in row:
            if not x.is_zero():
                d = x.num.degree() - x.den.degree()
                r = d if r is None else max(r, d)
    return r


def _infinity_coeff(ents, k):
    # t^k coefficient of the expansion at infinity for k >= 0: only the
    # polynomial quotient contributes
    out = []
    for row in ents:
        r2 = []
        for x in row:
            if x.is_zero():
                r2.append(Fraction(0))
            else:
                q, _ = x.num.divmod(x.den)
                r2.append(q.coeff(k))
        out.append(r2)
    return out


def _twist_diag(ents, mono):
    u = K.convert(mono)
    out = [list(row) for row in ents]
    for i in range(len(out)):
        out[i][i] = out[i][i] - u
    return out


def _rational_kernel(mat):
    return field_nullspace(mat, len(mat[0]), QQ)


def _qmat_mul(A, B):
    return [
        [sum((a * b for a, b in zip(row, col)), Fraction(0)) for col in zip(*B)]
        for row in A
    ]


def _exponential_candidates(ents, poly_cap=None):
    """Candidate polynomial parts of certificates, from behaviour at infinity.

    Nonzero rational eigenvalues of the leading matrix at t^r branch into
    twisted systems (at most REDUCTION_ROUNDS times); the branch where the
    exponential part stops below degree r is complete only for r = 1, where
    matching the top two t-degrees of a would-be polynomial solution forces
    det(L (C0 - c) Ker) = 0 with Ker, L the right and left kernels of the
    leading matrix.  That condition does not involve the solution degree, so
    its rational roots are the complete constant candidate set.  When the
    pencil is degenerate the matching never pins c at any depth that avoids
    the degree, and the constant candidates come from the p-curvature
    instead.
    """
    found = set()
    _exp_search(ents, REDUCTION_ROUNDS, UPoly(QQ, ()), found, poly_cap)
    return [UPoly(QQ, cs) for cs in sorted(found)]


def _exp_search(ents, rounds, prefix, found, poly_cap):
    r = _infinity_degree(ents)
    if r is None or r <= -1:
        found.add(prefix.coeffs)
        return
    if r == 0:
        C0 = _infinity_coeff(ents, 0)
        for lam in rational_eigenvalues(C0):
            found.add((prefix + UPoly(QQ, (lam,))).coeffs)
        return
    Cr = _infinity_coeff(ents, r)
    branches = [lam for lam in rational_eigenvalues(Cr) if lam != 0]
    if branches and rounds == 0:
        raise UnsupportedShapeError(
            "exponential parts need more than %d leading-matrix reductions"
            % REDUCTION_ROUNDS
        )
    for lam in branches:
        mono = UPoly(QQ, (Fraction(0),) * r + (lam,))
        _exp_search(_twist_diag(ents, mono), rounds - 1, prefix + mono, found, poly_cap)
    kern = _rational_kernel(Cr)
    if not kern:
        return
    if r >= 2:
        raise UnsupportedShapeError(
            "singular leading matrix at infinity beyond the pencil case"
        )
    left = _rational_kernel(transpose(Cr))
    C0 = _infinity_coeff(ents, 0)
    kmat = transpose(kern)
    N0 = _qmat_mul(_qmat_mul(left, C0), kmat)
    N1 = _qmat_mul(left, kmat)
    dp = pencil_det_poly(N0, N1)
    if dp.is_zero():
        for c in _pcurvature_constants(ents, poly_cap):
            found.add((prefix + UPoly(QQ, (c,))).coeffs)
        return
    for c in rational_roots(dp):
        found.add((prefix + UPoly(QQ, (c,))).coeffs)


def _pcurvature_constants(ents, poly_cap):
    """Constant certificate candidates through the p-curvature.

    A polynomial solution of v' = (M - c) v with degree below an odd prime p
    survives reduction mod p (take it primitive over Z), and its p-th
    derivative vanishes, so the matrix A_p with w^(p) = A_p w on solutions
    is singular after the twist: by the Frobenius binomial the twist only
    shifts A_p by c^p = c, hence det(A_p(t) - c I) = 0 identically and in
    particular at any ordinary point.  Char-poly roots at two points per
    prime, intersected, then lifted from two primes and screened by a third.
    Every lift is verified downstream; completeness carries the usual
    reconstruction caveat, heights up to about the geometric mean of two
    primes sitting just above the degree cap.
    """
    s = len(ents)
    den = UPoly.const(QQ, Fraction(1))
    for row in ents:
        for x in row:
            if not x.is_zero():
                den = _upoly_lcm(den, x.den)
    du = den.degree()
    dn = -1
    for row in ents:
        for x in row:
            if not x.is_zero():
                dn = max(dn, x.num.degree() + du - x.den.degree())
    # after the constant twist numerator degrees stay within max(dn, du),
    # so this cap dominates the one the polynomial solver will use
    cap = 2 * s + 4 * (max(dn, du) + 1) + 32
    if poly_cap is not None:
        cap = max(cap, poly_cap)
    root_sets = []
    primes = []
    p = int(sympy.nextprime(max(cap, 64)))
    misses = 0
    while len(root_sets) < 3:
        if misses > 8:
            raise BoundExhaustedError("no usable primes for the p-curvature")
        rs = None
        got = 0
        t0 = 0
        tries = 0
        while got < 2 and tries < du + 10:
            tries += 1
            try:
                Ap = _pcurvature_matrix(ents, Fraction(t0), p)
            except (SingularPointError, ValueError):
                t0 += 1
                continue
            cur = set(poly_roots_mod_p(char_poly_mod_p(Ap, p), p))
            rs = cur if rs is None else rs & cur
            got += 1
            t0 += 1
        if got == 2:
            root_sets.append(rs)
            primes.append(p)
        else:
            misses += 1
        p = int(sympy.nextprime(p))
    out = set()
    for r1 in root_sets[0]:
        for r2 in root_sets[1]:
            c = reconstruct_fraction([r1, r2], [primes[0], primes[1]])
            if c is None:
                continue
            try:
                if fraction_mod_p(c, primes[2]) not in root_sets[2]:
                    continue
            except ValueError:
                pass
            out.add(c)
    return sorted(out)


def _pcurvature_matrix(ents, t0, p):
    """A_p(t0) mod p for the iterates w^(k) = A_k w of w' = M w.

    The fundamental solution at an ordinary t0 starts at the identity, so
    A_p(t0) is its p-th derivative there, and in factorial coordinates
    wm~ = m! wm the series recursion wm~+1 = sum_j falling(m, j) M_j wm~-j
    never divides by the step index, keeping order p reachable mod p.
    """
    s = len(ents)
    order = p + 1
    Aser = np.zeros((order, s, s), dtype=np.int64)
    for i in range(s):
        for j in range(s):
            if not ents[i][j].is_zero():
                Aser[:, i, j] = ratfunc_series_mod_p(ents[i][j], t0, order, p)
    nz = order
    while nz > 1 and not Aser[nz - 1].any():
        nz -= 1
    hist = [np.eye(s, dtype=np.int64)]
    for m in range(p):
        acc = np.zeros((s, s), dtype=np.int64)
        ff = 1
        for j in range(min(m, nz - 1) + 1):
            if j:
                ff = ff * (m - j + 1) % p
            if Aser[j].any():
                acc = (acc + ff * (Aser[j] @ hist[m - j])) % p
        hist.append(acc)
    return hist[p]


def _ordinary_point(den):
    k = 0
    while True:
        for tc in ([0] if k == 0 else [k, -k]):
            if den.eval(Fraction(tc)) != 0:
                return tc
        k += 1


def _polynomial_solutions(ents, u, degree_cap=None):
    """Polynomial vectors v with v' = (M - u) v, complete up to the cap.

    The common-denominator recurrence determines every series coefficient
    from the seed v(tc) at an ordinary point tc, so polynomial solutions are
    the seeds whose transfer window past the cap vanishes.  The window is
    found modulo primes and the reconstructed seeds are re-propagated over Q
    and verified against the differential system itself.
    """
    s = len(ents)
    zero = UPoly(QQ, ())
    mu = [
        [ents[i][j] - (u if i == j else K.zero) for j in range(s)] for i in range(s)
    ]
    den = UPoly.const(QQ, Fraction(1))
    for row in mu:
        for x in row:
            if not x.is_zero():
                den = _upoly_lcm(den, x.den)
    num = [
        [zero if x.is_zero() else x.num * den.exact_div(x.den) for x in row]
        for row in mu
    ]
    tc = _ordinary_point(den)
    if tc:
        den = den.compose_linear(Fraction(tc))
        num = [[p.compose_linear(Fraction(tc)) for p in row] for row in num]
    du = den.degree()
    dn = max((p.degree() for row in num for p in row), default=-1)
    band = max(du, dn + 1, 1)
    cap = degree_cap if degree_cap is not None else 2 * s + 4 * band + 32
    steps = cap + band
    dcoef = list(den.coeffs)
    ncoef = [
        [[p.coeff(b) for b in range(dn + 1)] for p in row] for row in num
    ]

    def build(p):
        ud = [fraction_mod_p(c, p) for c in dcoef]
        nmats = []
        for b in range(dn + 1):
            mat = np.zeros((s, s), dtype=np.int64)
            for i in range(s):
                for j in range(s):
                    mat[i, j] = fraction_mod_p(ncoef[i][j][b], p)
            nmats.append(mat)
        T = [np.eye(s, dtype=np.int64)]
        for m in range(steps):
            acc = np.zeros((s, s), dtype=np.int64)
            for b in range(min(dn, m) + 1):
                acc = (acc + nmats[b] @ T[m - b]) % p
            for a in range(1, min(du, m + 1) + 1):
                idx = m + 1 - a
                coef = (ud[a] * (idx % p)) % p
                if coef:
                    acc = (acc - coef * T[idx]) % p
            lead = (ud[0] * ((m + 1) % p)) % p
            if lead == 0:
                raise ValueError("prime divides a recurrence pivot")
            T.append((acc * pow(lead, -1, p)) % p)
        return np.concatenate([T[cap + 1 + i] for i in range(band)], axis=0)

    kernel, _, _ = modular_kernel(build)
    sols = []
    for seed in kernel:
        coeffs = _propagate_exact(dcoef, ncoef, seed, s, du, dn, cap, steps)
        if coeffs is None:
            raise InternalConsistencyError("modular seed failed exact propagation")
        vec = []
        for i in range(s):
            pol = UPoly(QQ, [coeffs[m][i] for m in range(len(coeffs))])
            if tc:
                pol = pol.compose_linear(Fraction(-tc))
            vec.append(K.convert(pol))
        sols.append(vec)
    return sols


def _propagate_exact(dcoef, ncoef, seed, s, du, dn, cap, steps):
    vs = [[Fraction(q) for q in seed]]
    for m in range(steps):
        acc = [Fraction(0)] * s
        for b in range(min(dn, m) + 1):
            vm = vs[m - b]
            for i in range(s):
                row = ncoef[i]
                acc[i] += sum(row[j][b] * vm[j] for j in range(s) if vm[j])
        for a in range(1, min(du, m + 1) + 1):
            c = dcoef[a] * (m + 1 - a)
            if c:
                vm = vs[m + 1 - a]
                for i in range(s):
                    acc[i] -= c * vm[i]
        lead = dcoef[0] * (m + 1)
        vs.append([x / lead for x in acc])
    for m in range(cap + 1, steps + 1):
        if any(vs[m]):
            return None
    return vs[: cap + 1]


# ---------------------------------------------------------------------------
# characters of the quotient


@dataclass
class Character:
    """Quotient element h with delta h = certificate * h modulo the
    component."""

    element: MPoly
    certificate: object


def characters_from_solutions(qc, sols):
    """Hyperexponential quotient elements from companion-system solutions."""
    dom = qc.dom
    out = []
    for sol in sols:
        terms = {}
        for e, v in zip(qc.basis, sol.vector):
            if v != dom.zero:
                terms[e] = v
        h = nf(MPoly(qc.ring, terms), qc.gb)
        if h.is_zero():
            continue
        cert = dom.zero - dom.convert(sol.certificate)
        check = nf(qc.diff_ideal.delta(h) - h.scale(cert), qc.gb)
        if not check.is_zero():
            raise InternalConsistencyError("character failed its certificate")
        out.append(Character(h, cert))
    return out


def normalize_characters(chars, qc, anchor):
    """Scale characters to value one at the anchor point and prune.

    Characters must be invertible in the localized quotient (units on the
    solution component); non-units are discarded.  Scaling by the anchor
    value shifts the certificate by a log-derivative, which keeps later
    lattice relations honest.  Duplicates, constants, and inverses of kept
    characters carry no new relation and are dropped.
    """
    dom = qc.dom
    point = anchor.point_values()
    amb = ambient_relation(qc.ring, qc.n)
    scaled = []
    for ch in chars:
        gate = groebner(qc.gb + [ch.element, amb], qc.ring)
        if not ideal_contains(gate, qc.ring.one):
            continue
        val = _eval_at_point(ch.element, point, dom)
        if val == dom.zero:
            raise InternalConsistencyError(
                "invertible character vanishes at the anchor point"
            )
        h = nf(ch.element.scale(dom.one / val), qc.gb)
        cert = ch.certificate - derive(val) / val
        scaled.append(Character(h, cert))
    seen = set()
    uniq = []
    for ch in scaled:
        key = frozenset(ch.element.terms.items())
        if key in seen or ch.element.is_constant():
            continue
        seen.add(key)
        uniq.append(ch)
    kept = []
    for ch in uniq:
        if any(nf(ch.element * k.element, qc.gb).is_constant() for k in kept):
            continue
        kept.append(ch)
    return kept


# ---------------------------------------------------------------------------
# integer relations among certificates


@dataclass
class LatticeRelation:
    """Integer vector m with sum m_i u_i = (log f)' for rational f; the
    witness carries f as a product of irreducibles with integer exponents."""

    vector: list
    witness: object


def _q_coordinates(x, path=(), out=None):
    if out is None:
        out = {}
    if isinstance(x, int):
        x = Fraction(x)
    if isinstance(x, Fraction):
        if x:
            out[path] = out.get(path, Fraction(0)) + x
        return out
    if isinstance(x, RatFunc):
        fr = as_fraction(x)
        if fr is None:
            raise UnsupportedShapeError("non-constant coefficient in a certificate")
        if fr:
            out[path] = out.get(path, Fraction(0)) + fr
        return out
    if isinstance(x, TowerElem):
        for i, c in enumerate(x.rep.coeffs):
            _q_coordinates(c, path + ((x.level.name, i),), out)
        return out
    raise InternalConsistencyError("unexpected coefficient %r" % (x,))


def exponent_lattice(certs, tower=None):
    """Basis of {m : sum m_i u_i is the log-derivative of a rational f}.

    Partial fractions reduce the condition to a homogeneous linear system
    over Q with one integer slack per pole (the multiplicity of that pole in
    f): polynomial parts and pole digits of order two and higher cancel
    outright, order-one digits match an integer multiple of p'.  Each basis
    vector is re-verified through is_log_derivative, whose witness supplies
    f for the constants stage.
    """
    r = len(certs)
    if r == 0:
        return []
    top = tower.top if (tower is not None and tower.levels) else None
    norm = [top.convert(u) if top is not None else K.convert(u) for u in certs]
    pfs = [partial_fractions(u, tower) for u in norm]
    poles = []
    for pf in pfs:
        for part in pf.parts:
            if part.p not in poles:
                poles.append(part.p)
    cols = r + len(poles)
    rows = {}

    def add(key, col, val):
        row = rows.setdefault(key, [Fraction(0)] * cols)
        row[col] += val

    for i, pf in enumerate(pfs):
        for j, c in enumerate(pf.poly_part.coeffs):
            for path, val in _q_coordinates(c).items():
                add(("poly", j, path), i, val)
        for part in pf.parts:
            pi = poles.index(part.p)
            for order, digit in part.ladder.items():
                for cx, c in enumerate(digit.coeffs):
                    for path, val in _q_coordinates(c).items():
                        if order >= 2:
                            add(("high", pi, order, cx, path), i, val)
                        else:
                            add(("res", pi, cx, path), i, val)
    for pi, p in enumerate(poles):
        dp = p.formal_derivative()
        for cx, c in enumerate(dp.coeffs):
            for path, val in _q_coordinates(c).items():
                add(("res", pi, cx, path), r + pi, -val)
    if rows:
        mat = []
        for key in sorted(rows, key=repr):
            row = rows[key]
            scale = 1
            for x in row:
                scale = scale * x.denominator // gcd(scale, x.denominator)
            mat.append([int(x * scale) for x in row])
    else:
        mat = [[0] * cols]
    kern = integer_kernel(mat)
    basis = hnf_row_basis([v[:r] for v in kern if any(v[:r])])
    out = []
    for m in basis:
        combo = None
        for mi, u in zip(m, norm):
            if mi:
                term = u * mi
                combo = term if combo is None else combo + term
        wit = is_log_derivative(combo, tower)
        if wit is None:
            raise InternalConsistencyError("lattice vector is not a relation")
        if any(q.denominator != 1 for _, q in wit.exponents):
            raise InternalConsistencyError("fractional exponent in a lattice witness")
        out.append(LatticeRelation(list(m), wit))
    return out


# ---------------------------------------------------------------------------
# constants and the assembled ideal


def _scalar_at(v, t0, dom):
    """Nonzero value of a coefficient-field element at t = t0, back in the
    field; zero or a pole raises SingularPointError so the caller can move
    the expansion point."""
    if isinstance(v, (int, Fraction)):
        if v == 0:
            raise SingularPointError("character value vanishes at t0", point=t0)
        return dom.convert(v)
    if isinstance(v, RatFunc):
        if v.has_pole_at(t0):
            raise SingularPointError("character value has a pole at t0", point=t0)
        val = v.eval_at(t0)
        if val == 0:
            raise SingularPointError("character value vanishes at t0", point=t0)
        return dom.convert(val)
    num, den = _t_rational_split(v)
    lvl = v.level
    t0e = lvl.convert(Fraction(t0))
    dv = den.eval(t0e)
    if dv == lvl.zero:
        raise SingularPointError("character value has a pole at t0", point=t0)
    nv = num.eval(t0e)
    if nv == lvl.zero:
        raise SingularPointError("character value vanishes at t0", point=t0)
    return dom.convert(nv / dv)


def _t_poly_to_dom(p, dom):
    t = _t_in(dom)
    acc = dom.zero
    tp = dom.one
    for c in p.coeffs:
        acc = acc + dom.convert(c) * tp
        tp = tp * t
    return acc


def _nf_pow(h, k, gb):
    out = h.ring.one
    for _ in range(k):
        out = nf(out * h, gb)
    return out


def lattice_constants(chars, relations, qc, t0):
    """Constant and ideal generator for each lattice relation.

    The fundamental solution is the identity at t0, so the constant in
    prod h_i^{m_i} = c f along the solution is the product of the character
    values at the identity matrix, evaluated at t0, divided by f(t0).  The
    generator clears denominators: f_den prod_+ h^m - c f_num prod_- h^m.
    """
    dom = qc.dom
    n = qc.n
    ident = [dom.one if i // n == i % n else dom.zero for i in range(n * n)]
    ident.append(dom.one)
    consts = []
    gens = []
    for rel in relations:
        cval = dom.one
        for mi, ch in zip(rel.vector, chars):
            if mi:
                v = _eval_at_point(ch.element, ident, dom)
                cval = cval * _dom_int_pow(_scalar_at(v, t0, dom), mi)
        fval = dom.one
        fnum = dom.one
        fden = dom.one
        for p, q in rel.witness.exponents:
            pt0 = p.eval(rel.witness.cdom.convert(Fraction(t0)))
            if pt0 == rel.witness.cdom.zero:
                raise SingularPointError("relation witness vanishes at t0", point=t0)
            fval = fval * _dom_int_pow(dom.convert(pt0), int(q))
            pd = _t_poly_to_dom(p, dom)
            if q > 0:
                fnum = fnum * _dom_int_pow(pd, int(q))
            else:
                fden = fden * _dom_int_pow(pd, -int(q))
        c = cval / fval
        consts.append(c)
        gplus = qc.ring.one
        gminus = qc.ring.one
        for mi, ch in zip(rel.vector, chars):
            if mi > 0:
                gplus = nf(gplus * _nf_pow(ch.element, mi, qc.gb), qc.gb)
            elif mi < 0:
                gminus = nf(gminus * _nf_pow(ch.element, -mi, qc.gb), qc.gb)
        g = gplus.scale(fden) - gminus.scale(c * fnum)
        gens.append(nf(g, qc.gb))
    return consts, gens


def assemble_maximal_ideal(qc, extra_gens):
    """Component plus the lattice generators, radical-closed and certified
    delta-stable."""
    gens = list(qc.gb) + [g for g in extra_gens if not g.is_zero()]
    rad = radical(gens, qc.ring)
    gb = groebner(list(rad.gens), qc.ring)
    di = qc.diff_ideal.with_gens(gb)
    ok, _, basis = is_delta_ideal(di)
    if not ok:
        if rad.assumed:
            raise UnsupportedShapeError(
                "radical outside the supported shapes; stability not certified"
            )
        raise InternalConsistencyError("assembled ideal is not differential")
    return gb


@dataclass
class KbarIdeal:
    """Everything the closure stage produced: the anchored component, the
    characters with their lattice, and the certified maximal ideal."""

    tower: FieldTower
    ring: PolyRing
    anchor: AnchorPoint
    connection: QuotientConnection
    characters: list
    relations: list
    constants: list
    gens: list


def maximal_ideal_kbar(
    toric_gens,
    A,
    t0,
    degree_cap,
    tower=None,
    poly_degree_cap=None,
    point_budget=400,
):
    """Maximal differential ideal over the closure, from the relation ideal.

    Anchors the component carrying the fundamental solution, computes the
    character group of the quotient up to degree_cap, and adds one generator
    per integer relation among the character certificates.  The result is
    radical-closed and certified delta-stable before it is returned.
    """
    anchor = anchor_component(toric_gens, A, t0, tower=tower, point_budget=point_budget)
    qc = quotient_connection(anchor.component, A, anchor.ring, degree_cap)
    sols = hyperexp_solutions(qc.M, qc.dom, poly_degree_cap=poly_degree_cap)
    chars = characters_from_solutions(qc, sols)
    chars = normalize_characters(chars, qc, anchor)
    rels = exponent_lattice([ch.certificate for ch in chars], anchor.tower)
    consts, extra = lattice_constants(chars, rels, qc, t0)
    gens = assemble_maximal_ideal(qc, extra)
    return KbarIdeal(
        anchor.tower, qc.ring, anchor, qc, chars, rels, consts, gens
    )
