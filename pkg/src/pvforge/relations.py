"""Algebraic relations among the entries of a fundamental solution matrix.

relation_space(A, nu, t0) computes generators for the ideal of relations of
degree at most nu, with coefficients in Q(t), satisfied by the fundamental
solution normalized to the identity at t0.  Candidate relations are found
as the kernel of a truncated-series evaluation matrix modulo primes and
reconstructed over Q; exactness does not rest on the numerics but on a
certificate of the produced ideal: it is closed under the derivation with
cofactors regular at t0 and every basis element vanishes at the initial
point, which forces every basis element to vanish on the solution
identically, coefficient by coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import BoundExhaustedError, SingularPointError
from .fields import K, QQ, UPoly, derive
from .ideals import DiffIdeal, groebner, is_delta_ideal, nf, system_ring
from .linalg import (
    ModPSpan,
    field_nullspace,
    field_rref,
    fraction_mod_p,
    modular_kernel,
    nullspace_mod_p,
    primes_stream,
)
from .mpoly import MPoly
from .series import fundamental_series_mod_p, series_mul_mod_p


def monomial_basis(n, nu):
    """Exponent tuples over the n*n matrix entries, total degree <= nu,
    sorted by the ring's graded order."""
    ring = system_ring(n)

    def gen(slots, budget):
        if slots == 0:
            yield ()
            return
        for head in range(budget + 1):
            for tail in gen(slots - 1, budget - head):
                yield (head,) + tail

    mons = list(gen(n * n, nu))
    mons.sort(key=lambda e: ring.key(e + (0,)))
    return mons


def connection_rows(A, mons, dom=K):
    """Sparse rows B with delta(m_i) = sum_j B[i][j] m_j.

    The derivation fixes total degree, so B is block diagonal over degrees.
    """
    n = len(A)
    Ad = [[dom.convert(a) for a in row] for row in A]
    index = {e: i for i, e in enumerate(mons)}
    rows = []
    for e in mons:
        row = {}
        for slot, k in enumerate(e):
            if not k:
                continue
            r, c = divmod(slot, n)
            for m in range(n):
                coeff = Ad[r][m]
                if coeff == dom.zero:
                    continue
                e2 = list(e)
                e2[slot] -= 1
                e2[m * n + c] += 1
                j = index[tuple(e2)]
                val = row.get(j, dom.zero) + coeff * dom.convert(k)
                if val == dom.zero:
                    row.pop(j, None)
                else:
                    row[j] = val
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# the modular kernel of truncated evaluations


def _monomial_series_mod_p(F, mons, p):
    """Series of each basis monomial evaluated on the fundamental matrix.

    F has shape (order, n, n); monomials are built one variable at a time,
    reusing the series of the exponent with one entry lowered.
    """
    order = F.shape[0]
    cache = {}
    zero_exp = mons[0]
    one = np.zeros(order, dtype=np.int64)
    one[0] = 1
    cache[zero_exp] = one
    out = []
    for e in mons:
        if e in cache:
            out.append(cache[e])
            continue
        slot = next(i for i, k in enumerate(e) if k)
        e2 = list(e)
        e2[slot] -= 1
        prev = cache[tuple(e2)]
        n = F.shape[1]
        ser = series_mul_mod_p(prev, F[:, slot // n, slot % n], p)
        cache[e] = ser
        out.append(ser)
    return out


def _evaluation_matrix_mod_p(A, mons, D, t0, order, p):
    """Columns indexed by (monomial, tau-power); rows by series coefficient."""
    F = fundamental_series_mod_p(A, t0, order, p)
    series = _monomial_series_mod_p(F, mons, p)
    s = len(mons)
    cols = np.zeros((order, s * (D + 1)), dtype=np.int64)
    for i, ser in enumerate(series):
        base = i * (D + 1)
        cols[:, base] = ser
        for a in range(1, D + 1):
            cols[a:, base + a] = ser[: order - a]
    return cols


def _kernel_dim_mod_p(A, mons, D, t0, order, p):
    mat = _evaluation_matrix_mod_p(A, mons, D, t0, order, p)
    _, free, _ = nullspace_mod_p(mat, p)
    return len(free)


# ---------------------------------------------------------------------------
# generator selection


def _row_order_key(row, mons, D):
    maxdeg = 0
    maxa = 0
    nnz = 0
    for i, e in enumerate(mons):
        for a in range(D + 1):
            if row[i * (D + 1) + a] != 0:
                nnz += 1
                maxdeg = max(maxdeg, sum(e))
                maxa = max(maxa, a)
    return (maxdeg, maxa, nnz)


def _pick_prime_for(rows):
    """A prime dividing no denominator appearing in the kernel rows."""
    for p in primes_stream():
        if all(v.denominator % p for row in rows for v in row if v != 0):
            return p
    raise BoundExhaustedError("no usable prime for the span filter")


def _row_mod_p(row, p):
    return np.array([fraction_mod_p(v, p) for v in row], dtype=np.int64)


def _shifted_multiple(row, mons, index, D, mu, b):
    """The kernel vector of (t-t0)^b * X^mu * relation, or None if a support
    monomial leaves the degree-nu basis."""
    out = [Fraction(0)] * len(row)
    for i, e in enumerate(mons):
        for a in range(D + 1):
            v = row[i * (D + 1) + a]
            if v == 0:
                continue
            if a + b > D:
                return None
            target = tuple(x + y for x, y in zip(e, mu))
            j = index.get(target)
            if j is None:
                return None
            out[j * (D + 1) + a + b] += v
    return out


def _greedy_generators(kernel, mons, D, nu, n):
    """A small subset of kernel rows whose monomial- and tau-multiples span
    the rest mod p; exact completeness is re-checked with normal forms."""
    if not kernel:
        return []
    index = {e: i for i, e in enumerate(mons)}
    p = _pick_prime_for(kernel)
    span = ModPSpan(len(kernel[0]), p)
    ordered = sorted(
        range(len(kernel)), key=lambda r: (_row_order_key(kernel[r], mons, D), r)
    )
    kept = []
    for r in ordered:
        row = kernel[r]
        vec = _row_mod_p(row, p)
        if span.contains(vec):
            continue
        kept.append(row)
        span.add(vec)
        maxdeg, maxa, _ = _row_order_key(row, mons, D)
        for mu in monomial_basis(n, nu - maxdeg):
            for b in range(D - maxa + 1):
                if sum(mu) == 0 and b == 0:
                    continue
                mult = _shifted_multiple(row, mons, index, D, mu, b)
                if mult is not None:
                    span.add(_row_mod_p(mult, p))
    return kept


def _row_to_mpoly(row, mons, D, t0, ring):
    terms = {}
    for i, e in enumerate(mons):
        cs = [row[i * (D + 1) + a] for a in range(D + 1)]
        if not any(cs):
            continue
        poly = UPoly(QQ, cs).compose_linear(Fraction(-t0))
        terms[e + (0,)] = K.convert(poly)
    return MPoly(ring, terms)


# ---------------------------------------------------------------------------
# the certificate


@dataclass
class CertificateReport:
    delta_ok: bool
    cofactors_regular: bool
    vanishes_at_point: bool
    basis: list

    def accepted(self):
        return self.delta_ok and self.cofactors_regular and self.vanishes_at_point


def _value_at_identity(g, t0, n):
    """g evaluated at X = identity, d = 1, t = t0; None on a pole."""
    total = Fraction(0)
    for e, c in g.terms.items():
        off = any(
            e[i * n + j] for i in range(n) for j in range(n) if i != j
        )
        if off:
            continue
        if c.has_pole_at(t0):
            return None
        total += c.eval_at(t0)
    return total


def certify_ideal(diff_ideal, basis, t0):
    """The exactness certificate for a relation ideal.

    If the ideal is delta-closed with cofactors regular at t0 and the basis
    vanishes at (X, t) = (identity, t0), then u_i(tau) = basis_i(F(t0+tau))
    solves u' = H u with u(0) = 0, hence u = 0: the ideal consists of
    relations.
    """
    ok, H, used = is_delta_ideal(diff_ideal, gens=basis)
    if not ok:
        return CertificateReport(False, False, False, basis)
    regular = True
    for row in H:
        for h in row:
            for c in h.terms.values():
                if c.has_pole_at(t0):
                    regular = False
    for g in used:
        for c in g.terms.values():
            if c.has_pole_at(t0):
                regular = False
    vanish = True
    for g in used:
        val = _value_at_identity(g, t0, diff_ideal.n)
        if val is None:
            regular = False
            vanish = False
        elif val != 0:
            vanish = False
    return CertificateReport(True, regular, vanish, used)


# ---------------------------------------------------------------------------
# the main entry point


@dataclass
class RelationSpace:
    n: int
    nu: int
    coeff_degree: int
    t0: Fraction
    mons: list
    gens: list
    kernel_dim: int
    certificate: CertificateReport
    ideal: DiffIdeal

    @property
    def ring(self):
        return self.ideal.ring


def relation_space(A, nu, t0=0, coeff_degree=None, margin=16, max_rounds=3):
    """Reduced Groebner basis of the relation ideal of degree <= nu.

    Raises SingularPointError when t0 is a pole of A or when the certificate
    hits a pole there (the caller re-centers), and BoundExhaustedError when
    escalation runs out of rounds.
    """
    A = [[K.convert(a) for a in row] for row in A]
    t0 = Fraction(t0)
    n = len(A)
    for row in A:
        for a in row:
            if a.has_pole_at(t0):
                raise SingularPointError(
                    "expansion point t = %s is a pole of the system" % t0,
                    point=t0,
                )
    ring = system_ring(n)
    mons = monomial_basis(n, nu)
    s = len(mons)
    D = coeff_degree if coeff_degree is not None else nu
    order = s * (D + 1) + margin
    for _ in range(max_rounds):
        # cheap dimension-stability probe before the exact reconstruction
        d1 = d2 = None
        for probe in primes_stream():
            try:
                d1 = _kernel_dim_mod_p(A, mons, D, t0, order, probe)
                d2 = _kernel_dim_mod_p(A, mons, D, t0, order + 64, probe)
                break
            except ValueError:
                continue  # the prime hit a denominator
        if d1 != d2:
            order *= 2
            continue
        kernel, _, _ = modular_kernel(
            lambda p: _evaluation_matrix_mod_p(A, mons, D, t0, order, p)
        )
        kept = _greedy_generators(kernel, mons, D, nu, n)
        gens = [_row_to_mpoly(row, mons, D, t0, ring) for row in kept]
        G = groebner(gens, ring)
        # exact completeness: every kernel vector must lie in the ideal
        all_polys = [_row_to_mpoly(row, mons, D, t0, ring) for row in kernel]
        while True:
            missing = [p for p in all_polys if not nf(p, G).is_zero()]
            if not missing:
                break
            gens.extend(missing)
            G = groebner(gens, ring)
        ideal = DiffIdeal(A, gens=G, ring=ring)
        cert = certify_ideal(ideal, G, t0)
        if cert.accepted():
            return RelationSpace(
                n=n,
                nu=nu,
                coeff_degree=D,
                t0=t0,
                mons=mons,
                gens=G,
                kernel_dim=len(kernel),
                certificate=cert,
                ideal=ideal,
            )
        if cert.delta_ok and not (cert.cofactors_regular and cert.vanishes_at_point):
            raise SingularPointError(
                "relation certificate hit a pole at t = %s" % t0, point=t0
            )
        # delta-closure failed: the truncation admitted spurious vectors or
        # the coefficient degree was too small for a closed basis
        order *= 2
        D = 2 * D + 2
        order = max(order, s * (D + 1) + margin)
    raise BoundExhaustedError(
        "relation space did not stabilize at degree %d" % nu
    )


# ---------------------------------------------------------------------------
# exact stability refinement


def stability_refine(rows, A, mons, dom=K):
    """Largest delta-stable subspace of the row space, exactly.

    Vectors are relation candidates c with nabla(c)_j = c_j' + sum_i c_i
    B_ij.  Inside a fixed subspace V the refinement V -> {c in V :
    nabla(c) in V} is a linear condition on the coordinates, because basis
    elements reduce to zero and the derivative terms drop out.
    """
    B = connection_rows(A, mons, dom)
    s = len(mons)

    def nabla(vec):
        out = [derive(v) for v in vec]
        for i, v in enumerate(vec):
            if v == dom.zero:
                continue
            for j, coeff in B[i].items():
                out[j] = out[j] + v * coeff
        return out

    def reduce_vec(vec, R, pivots):
        v = list(vec)
        for row, c in zip(R, pivots):
            if v[c] != dom.zero:
                f = v[c]
                v = [a - f * b for a, b in zip(v, row)]
        return v

    current = [list(r) for r in rows]
    while True:
        R, pivots = field_rref(current, dom)
        R = [row for row in R if any(x != dom.zero for x in row)]
        if not R:
            return []
        residues = [reduce_vec(nabla(r), R, pivots) for r in R]
        if all(all(x == dom.zero for x in row) for row in residues):
            return R
        # solve sum_i a_i residues_i = 0 for the coefficient vectors a
        transposed = [[residues[i][j] for i in range(len(R))] for j in range(s)]
        sols = field_nullspace(transposed, len(R), dom)
        if not sols:
            return []
        current = []
        for a in sols:
            vec = [dom.zero] * s
            for ai, r in zip(a, R):
                if ai != dom.zero:
                    for j in range(s):
                        vec[j] = vec[j] + ai * r[j]
            current.append(vec)
