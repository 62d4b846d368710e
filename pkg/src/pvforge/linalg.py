"""Linear algebra support: modular kernels over word-size primes with CRT
and rational reconstruction, exact elimination over any of the package's
coefficient fields, and integer lattice kernels via column reduction.

Primes stay below 2^25 so numpy int64 products (< 2^50) survive row
operations and convolutions of several thousand terms without overflow.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd, isqrt

import numpy as np
import sympy

import random

from .errors import BoundExhaustedError, InternalConsistencyError
from .fields import QQ, UPoly, _poly_matrix_det

PRIME_CEILING = 1 << 25


def primes_stream():
    """Descending primes below 2^25."""
    p = sympy.prevprime(PRIME_CEILING)
    while True:
        yield p
        p = sympy.prevprime(p)


def fraction_mod_p(x, p):
    """Image of a Fraction or int in F_p; ValueError if the denominator dies."""
    if isinstance(x, int):
        return x % p
    num, den = x.numerator, x.denominator
    d = den % p
    if d == 0:
        raise ValueError("denominator divisible by %d" % p)
    return (num % p) * pow(d, -1, p) % p


# ---------------------------------------------------------------------------
# modular elimination (numpy int64)


def rref_mod_p(mat, p):
    """Reduced row echelon form mod p. Returns (R, pivot_columns)."""
    R = np.array(mat, dtype=np.int64) % p
    if R.ndim != 2:
        raise ValueError("need a 2d array")
    nrows, ncols = R.shape
    pivots = []
    r = 0
    for c in range(ncols):
        if r >= nrows:
            break
        nz = np.nonzero(R[r:, c])[0]
        if nz.size == 0:
            continue
        piv = r + int(nz[0])
        if piv != r:
            R[[r, piv]] = R[[piv, r]]
        inv = pow(int(R[r, c]), -1, p)
        R[r] = R[r] * inv % p
        col = R[:, c].copy()
        col[r] = 0
        R = (R - np.outer(col, R[r])) % p
        pivots.append(c)
        r += 1
    return R, pivots


def rank_mod_p(mat, p):
    return len(rref_mod_p(mat, p)[1])


def nullspace_mod_p(mat, p):
    """Kernel basis in RREF pattern: (pivots, free_cols, basis).

    basis[i] is the kernel vector with 1 in free_cols[i], pivot entries
    filled from the reduced rows.
    """
    R, pivots = rref_mod_p(mat, p)
    ncols = R.shape[1]
    free = [c for c in range(ncols) if c not in set(pivots)]
    basis = np.zeros((len(free), ncols), dtype=np.int64)
    for i, f in enumerate(free):
        basis[i, f] = 1
        for r, c in enumerate(pivots):
            basis[i, c] = (-int(R[r, f])) % p
    return pivots, free, basis


class ModPSpan:
    """Incremental row span mod p with membership tests."""

    def __init__(self, dim, p):
        self.p = p
        self.dim = dim
        self.rows = np.zeros((0, dim), dtype=np.int64)
        self.pivots = []

    def _reduce(self, vec):
        v = np.array(vec, dtype=np.int64) % self.p
        for row, c in zip(self.rows, self.pivots):
            if v[c]:
                v = (v - int(v[c]) * row) % self.p
        return v

    def contains(self, vec):
        return not self._reduce(vec).any()

    def add(self, vec):
        """Insert if independent; returns True when the span grew."""
        v = self._reduce(vec)
        nz = np.nonzero(v)[0]
        if nz.size == 0:
            return False
        c = int(nz[0])
        v = v * pow(int(v[c]), -1, self.p) % self.p
        # clear the new pivot column from stored rows
        if len(self.rows):
            col = self.rows[:, c].copy()
            self.rows = (self.rows - np.outer(col, v)) % self.p
        self.rows = np.vstack([self.rows, v])
        self.pivots.append(c)
        return True

    def rank(self):
        return len(self.pivots)


# ---------------------------------------------------------------------------
# CRT and rational reconstruction


def crt_list(residues, moduli):
    """Combine residues into (a, M) with a in [0, M)."""
    a, m = 0, 1
    for r, p in zip(residues, moduli):
        # solve x = a (mod m), x = r (mod p)
        diff = (r - a) % p
        a = a + m * (diff * pow(m % p, -1, p) % p)
        m *= p
    return a % m, m


def rational_reconstruct(a, m):
    """Fraction n/d with |n|, d <= sqrt(m/2) congruent to a mod m, or None."""
    a %= m
    if a == 0:
        return Fraction(0)
    bound = isqrt(m // 2)
    r0, r1 = m, a
    s0, s1 = 0, 1
    while r1 > bound:
        q = r0 // r1
        r0, r1 = r1, r0 - q * r1
        s0, s1 = s1, s0 - q * s1
    if r1 == 0 or s1 == 0 or abs(s1) > bound:
        return None
    if gcd(r1, abs(s1)) != 1:
        return None
    return Fraction(r1, s1) if s1 > 0 else Fraction(-r1, -s1)


def reconstruct_fraction(residues, primes):
    a, m = crt_list(residues, primes)
    return rational_reconstruct(a, m)


def modular_kernel(build, agree=2, max_primes=24):
    """Rational kernel of a matrix only available modulo primes.

    build(p) returns the matrix reduced mod p (numpy int64) or raises
    ValueError when p divides a denominator.  The kernel over Q maps to a
    subspace of each mod-p kernel, so the honest pattern is the one with the
    most pivots; primes whose pattern agrees get CRT-combined and the result
    is rationally reconstructed, then checked against one fresh prime.

    Returns (kernel_rows as list[list[Fraction]], pivots, free_cols).
    """
    stream = primes_stream()
    seen = {}
    for _ in range(max_primes):
        p = next(stream)
        try:
            M = build(p)
            pivots, free, basis = nullspace_mod_p(M, p)
        except ValueError:
            continue
        key = (tuple(pivots), tuple(free))
        seen.setdefault(key, []).append((p, basis))
        best = max(seen, key=lambda k: len(k[0]))
        if len(seen[best]) < agree:
            continue
        group = seen[best]
        primes = [p_ for p_, _ in group]
        bases = [b for _, b in group]
        nvec, ncols = bases[0].shape
        out = []
        ok = True
        for i in range(nvec):
            row = []
            for j in range(ncols):
                q = reconstruct_fraction([int(b[i, j]) for b in bases], primes)
                if q is None:
                    ok = False
                    break
                row.append(q)
            if not ok:
                break
            out.append(row)
        if not ok:
            continue
        # independent check against a fresh prime
        if not _check_kernel_mod_fresh(build, stream, out):
            continue
        return out, list(best[0]), list(best[1])
    raise BoundExhaustedError("modular kernel did not stabilize within prime budget")


def _check_kernel_mod_fresh(build, stream, kernel):
    if not kernel:
        return True
    for _ in range(6):
        p = next(stream)
        try:
            M = build(p)
            V = np.array(
                [[fraction_mod_p(q, p) for q in row] for row in kernel],
                dtype=np.int64,
            )
        except ValueError:
            continue
        prod = M @ V.T % p
        return not prod.any()
    raise BoundExhaustedError("no usable verification prime")


# ---------------------------------------------------------------------------
# exact elimination over a coefficient field


def field_rref(rows, dom):
    """Exact RREF of rows over a field domain. Returns (rref_rows, pivots)."""
    R = [list(row) for row in rows]
    if not R:
        return [], []
    ncols = len(R[0])
    zero = dom.zero
    pivots = []
    r = 0
    for c in range(ncols):
        if r >= len(R):
            break
        piv = None
        for i in range(r, len(R)):
            if R[i][c] != zero:
                piv = i
                break
        if piv is None:
            continue
        R[r], R[piv] = R[piv], R[r]
        inv = dom.one / R[r][c]
        R[r] = [x * inv for x in R[r]]
        for i in range(len(R)):
            if i != r and R[i][c] != zero:
                f = R[i][c]
                R[i] = [a - f * b for a, b in zip(R[i], R[r])]
        pivots.append(c)
        r += 1
    R = [row for row in R if any(x != zero for x in row)]
    return R, pivots


def field_nullspace(rows, ncols, dom):
    """Kernel basis over a field domain, RREF pattern."""
    R, pivots = field_rref(rows, dom)
    pivset = set(pivots)
    free = [c for c in range(ncols) if c not in pivset]
    basis = []
    for f in free:
        v = [dom.zero] * ncols
        v[f] = dom.one
        for r, c in enumerate(pivots):
            v[c] = -R[r][f]
        basis.append(v)
    return basis


def field_solve(A, b, dom):
    """One solution of A x = b over a field domain (free vars zero), or None."""
    aug = [list(row) + [bb] for row, bb in zip(A, b)]
    R, pivots = field_rref(aug, dom)
    n = len(A[0]) if A else 0
    if n in pivots:
        return None
    x = [dom.zero] * n
    for r, c in enumerate(pivots):
        x[c] = R[r][n]
    return x


# ---------------------------------------------------------------------------
# small dense matrices of field elements


def identity_mat(n, dom):
    return [
        [dom.one if i == j else dom.zero for j in range(n)] for i in range(n)
    ]


def mat_mul(A, B, dom):
    n, m, k = len(A), len(B[0]), len(B)
    out = []
    for i in range(n):
        row = []
        for j in range(m):
            acc = dom.zero
            for l in range(k):
                acc = acc + A[i][l] * B[l][j]
            row.append(acc)
        out.append(row)
    return out


def mat_vec(A, v, dom):
    out = []
    for row in A:
        acc = dom.zero
        for a, x in zip(row, v):
            acc = acc + a * x
        out.append(acc)
    return out


def mat_sub(A, B):
    return [[a - b for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def transpose(A):
    return [list(col) for col in zip(*A)]


def char_poly(M, dom):
    """det(x I - M) as a UPoly over dom."""
    n = len(M)
    entries = []
    for i in range(n):
        row = []
        for j in range(n):
            if i == j:
                row.append(UPoly(dom, (-M[i][j], dom.one)))
            else:
                row.append(UPoly(dom, (-M[i][j],)) if M[i][j] != dom.zero else UPoly(dom, ()))
        entries.append(row)
    return _poly_matrix_det(entries)


def mat_det(M, dom):
    """Exact determinant by cofactor expansion; fine at desk sizes."""
    n = len(M)
    if n == 0:
        return dom.one
    if n == 1:
        return M[0][0]
    det = dom.zero
    for j in range(n):
        if M[0][j] == dom.zero:
            continue
        minor = [row[:j] + row[j + 1 :] for row in M[1:]]
        term = M[0][j] * mat_det(minor, dom)
        det = det + term if j % 2 == 0 else det - term
    return det


# ---------------------------------------------------------------------------
# characteristic polynomials and eigenvalue candidates


def det_mod_p(mat, p):
    """Determinant mod p of a square int64 array (consumed destructively safe)."""
    A = np.array(mat, dtype=np.int64) % p
    n = A.shape[0]
    det = 1
    for c in range(n):
        nz = np.nonzero(A[c:, c])[0]
        if nz.size == 0:
            return 0
        piv = c + int(nz[0])
        if piv != c:
            A[[c, piv]] = A[[piv, c]]
            det = -det
        det = det * int(A[c, c]) % p
        inv = pow(int(A[c, c]), -1, p)
        if c + 1 < n:
            factors = A[c + 1 :, c] * inv % p
            A[c + 1 :] = (A[c + 1 :] - np.outer(factors, A[c])) % p
    return det % p


def char_poly_mod_p(mat, p):
    """Ascending coefficients of det(xI - M) mod p, by Faddeev-LeVerrier.

    Needs p > n for the trace divisions; our primes sit near 2^25 so any
    desk-size matrix qualifies.
    """
    A = np.array(mat, dtype=np.int64) % p
    n = A.shape[0]
    if n == 0:
        return [1]
    if n >= (1 << 12):
        raise ValueError("matrix too large for int64 accumulation")
    eye = np.eye(n, dtype=np.int64)
    M = A.copy()
    desc = [1]
    for k in range(1, n + 1):
        ck = (-int(np.trace(M))) % p * pow(k, -1, p) % p
        desc.append(ck)
        if k < n:
            M = A @ ((M + ck * eye) % p) % p
    return desc[::-1]


def _pp_trim(a):
    i = len(a)
    while i > 0 and a[i - 1] == 0:
        i -= 1
    return a[:i]


def _pp_mul(a, b, p):
    if not a or not b:
        return []
    c = np.convolve(np.array(a, dtype=np.int64), np.array(b, dtype=np.int64)) % p
    return _pp_trim([int(x) for x in c])


def _pp_sub(a, b, p):
    out = [0] * max(len(a), len(b))
    for i, x in enumerate(a):
        out[i] = x
    for i, x in enumerate(b):
        out[i] = (out[i] - x) % p
    return _pp_trim(out)


def _pp_divmod(a, b, p):
    a = [x % p for x in a]
    b = _pp_trim([x % p for x in b])
    if not b:
        raise ZeroDivisionError("mod-p polynomial division by zero")
    db = len(b) - 1
    inv = pow(b[-1], -1, p)
    q = [0] * max(0, len(a) - db)
    for i in range(len(a) - 1, db - 1, -1):
        c = a[i] % p
        if c:
            c = c * inv % p
            q[i - db] = c
            for j, bj in enumerate(b):
                a[i - db + j] = (a[i - db + j] - c * bj) % p
    return _pp_trim(q), _pp_trim(a[:db])


def _pp_gcd(a, b, p):
    a, b = _pp_trim([x % p for x in a]), _pp_trim([x % p for x in b])
    while b:
        a, b = b, _pp_divmod(a, b, p)[1]
    if a:
        inv = pow(a[-1], -1, p)
        a = [x * inv % p for x in a]
    return a


def _pp_powmod(base, e, mod, p):
    result = [1]
    acc = _pp_divmod(base, mod, p)[1]
    while e:
        if e & 1:
            result = _pp_divmod(_pp_mul(result, acc, p), mod, p)[1]
        acc = _pp_divmod(_pp_mul(acc, acc, p), mod, p)[1]
        e >>= 1
    return result


def poly_roots_mod_p(coeffs, p, seed=7):
    """Distinct roots in F_p of a polynomial (ascending int coefficients)."""
    f = _pp_trim([int(c) % p for c in coeffs])
    if len(f) <= 1:
        return []
    inv = pow(f[-1], -1, p)
    f = [c * inv % p for c in f]
    roots = []
    shift = 0
    while f[0] == 0:
        shift += 1
        f = f[1:]
    if shift:
        roots.append(0)
    if len(f) > 1:
        xp = _pp_powmod([0, 1], p, f, p)
        g = _pp_gcd(_pp_sub(xp, [0, 1], p), f, p)
        if len(g) > 1:
            _cz_split(g, p, roots, random.Random(seed))
    return sorted(roots)


def _cz_split(g, p, out, rng):
    deg = len(g) - 1
    if deg == 0:
        return
    if deg == 1:
        out.append((-g[0]) * pow(g[1], -1, p) % p)
        return
    while True:
        a = rng.randrange(p)
        h = _pp_powmod([a, 1], (p - 1) // 2, g, p)
        d = _pp_gcd(_pp_sub(h, [1], p), g, p)
        if 0 < len(d) - 1 < deg:
            _cz_split(d, p, out, rng)
            q, r = _pp_divmod(g, d, p)
            if r:
                raise InternalConsistencyError("split factor failed to divide")
            _cz_split(q, p, out, rng)
            return


def _square_mod_p(M, p):
    return [[fraction_mod_p(x, p) for x in row] for row in M]


def rational_eigenvalues(M):
    """Candidate rational eigenvalues of a rational matrix.

    Characteristic-polynomial roots are found modulo two primes, paired by
    CRT, rationally reconstructed, and screened modulo a third prime.
    Complete for eigenvalues below the reconstruction height bound (~2^24);
    callers treat the output as a candidate list and verify whatever they
    build from it.
    """
    n = len(M)
    if n == 0:
        return []
    stream = primes_stream()
    data = []
    while len(data) < 3:
        p = next(stream)
        try:
            Amod = _square_mod_p(M, p)
        except ValueError:
            continue
        data.append((p, set(poly_roots_mod_p(char_poly_mod_p(Amod, p), p))))
    (p1, r1), (p2, r2), (p3, r3) = data
    candidates = set()
    for a in r1:
        for b in r2:
            q = reconstruct_fraction([a, b], [p1, p2])
            if q is None:
                continue
            if fraction_mod_p(q, p3) in r3:
                candidates.add(q)
    return sorted(candidates)


def char_poly_hessenberg(M, dom):
    """det(xI - M) over a field domain in O(n^3) field operations."""
    n = len(M)
    if n == 0:
        return UPoly.const(dom, dom.one)
    zero = dom.zero
    H = [list(row) for row in M]
    for c in range(n - 2):
        piv = None
        for r in range(c + 1, n):
            if H[r][c] != zero:
                piv = r
                break
        if piv is None:
            continue
        if piv != c + 1:
            H[piv], H[c + 1] = H[c + 1], H[piv]
            for i in range(n):
                H[i][piv], H[i][c + 1] = H[i][c + 1], H[i][piv]
        pivinv = dom.one / H[c + 1][c]
        for r in range(c + 2, n):
            if H[r][c] == zero:
                continue
            f = H[r][c] * pivinv
            row_r, row_p = H[r], H[c + 1]
            H[r] = [row_r[j] - f * row_p[j] for j in range(n)]
            for i in range(n):
                H[i][c + 1] = H[i][c + 1] + f * H[i][r]
    ps = [UPoly.const(dom, dom.one)]
    for k in range(1, n + 1):
        poly = UPoly(dom, (-H[k - 1][k - 1], dom.one)) * ps[k - 1]
        prod = dom.one
        for m in range(1, k):
            prod = prod * H[k - m][k - m - 1]
            if prod == zero:
                break
            coef = H[k - m - 1][k - 1]
            if coef != zero:
                poly = poly - ps[k - m - 1].scale(coef * prod)
        ps.append(poly)
    return ps[n]


def _pp_eval(f, x, p):
    acc = 0
    for c in reversed(f):
        acc = (acc * x + c) % p
    return acc


def _lagrange_mod_p(xs, ys, p):
    full = [1]
    for x0 in xs:
        full = _pp_mul(full, [(-x0) % p, 1], p)
    coeffs = [0] * len(xs)
    for xi, yi in zip(xs, ys):
        qpoly, _ = _pp_divmod(full, [(-xi) % p, 1], p)
        denom = _pp_eval(qpoly, xi % p, p)
        scale = yi * pow(denom, -1, p) % p
        for j, cj in enumerate(qpoly):
            coeffs[j] = (coeffs[j] + scale * cj) % p
    return coeffs


def pencil_det_poly(N0, N1, agree=2, max_primes=24):
    """det(N0 - c N1) as a UPoly over Q in the parameter c.

    Evaluation at q+1 points with Lagrange interpolation mod p, CRT across
    primes, rational reconstruction, then one fresh-prime value check.
    """
    q = len(N0)
    if q == 0:
        return UPoly.const(QQ, Fraction(1))
    pts = list(range(q + 1))
    stream = primes_stream()
    collected = []
    for _ in range(max_primes):
        p = next(stream)
        try:
            A0 = np.array(_square_mod_p(N0, p), dtype=np.int64)
            A1 = np.array(_square_mod_p(N1, p), dtype=np.int64)
        except ValueError:
            continue
        vals = [det_mod_p((A0 - c * A1) % p, p) for c in pts]
        collected.append((p, _lagrange_mod_p(pts, vals, p)))
        if len(collected) < agree:
            continue
        primes = [pp for pp, _ in collected]
        out = []
        for j in range(q + 1):
            f = reconstruct_fraction([cf[j] for _, cf in collected], primes)
            if f is None:
                out = None
                break
            out.append(f)
        if out is None:
            continue
        for _ in range(6):
            pf = next(stream)
            try:
                A0 = np.array(_square_mod_p(N0, pf), dtype=np.int64)
                A1 = np.array(_square_mod_p(N1, pf), dtype=np.int64)
                expect = [fraction_mod_p(x, pf) for x in out]
            except ValueError:
                continue
            x0 = q + 1
            got = det_mod_p((A0 - x0 * A1) % pf, pf)
            if _pp_eval(expect, x0, pf) == got:
                return UPoly(QQ, tuple(out))
            break
    raise BoundExhaustedError("pencil determinant did not stabilize")


# ---------------------------------------------------------------------------
# integer lattices


def integer_kernel(rows):
    """Basis of the saturated integer kernel {x : A x = 0} of an integer matrix.

    Column reduction by unimodular operations; the transform columns mapped
    onto zero columns of A form the kernel lattice basis.
    """
    if not rows:
        return []
    m, n = len(rows), len(rows[0])
    A = [[int(x) for x in row] for row in rows]
    U = [[1 if i == j else 0 for j in range(n)] for i in range(n)]

    def col_addmul(j_dst, j_src, q):
        for i in range(m):
            A[i][j_dst] -= q * A[i][j_src]
        for i in range(n):
            U[i][j_dst] -= q * U[i][j_src]

    def col_swap(j0, j1):
        for i in range(m):
            A[i][j0], A[i][j1] = A[i][j1], A[i][j0]
        for i in range(n):
            U[i][j0], U[i][j1] = U[i][j1], U[i][j0]

    col = 0
    for r in range(m):
        while True:
            nz = [j for j in range(col, n) if A[r][j] != 0]
            if not nz:
                break
            if len(nz) == 1:
                break
            nz.sort(key=lambda j: abs(A[r][j]))
            j0, j1 = nz[0], nz[1]
            q = A[r][j1] // A[r][j0]
            col_addmul(j1, j0, q)
        nz = [j for j in range(col, n) if A[r][j] != 0]
        if not nz:
            continue
        if nz[0] != col:
            col_swap(col, nz[0])
        col += 1
    kernel = []
    for j in range(col, n):
        if any(A[i][j] != 0 for i in range(m)):
            raise InternalConsistencyError("column reduction left a nonzero tail")
        kernel.append([U[i][j] for i in range(n)])
    return kernel


def hnf_row_basis(rows):
    """Row-style Hermite form of an integer matrix (nonzero rows only)."""
    if not rows:
        return []
    work = [list(map(int, r)) for r in rows]
    n = len(work[0])
    out = []
    col = 0
    rowi = 0
    while rowi < len(work) and col < n:
        idx = [i for i in range(rowi, len(work)) if work[i][col] != 0]
        if not idx:
            col += 1
            continue
        while len(idx) > 1:
            idx.sort(key=lambda i: abs(work[i][col]))
            i0, i1 = idx[0], idx[1]
            q = work[i1][col] // work[i0][col]
            work[i1] = [a - q * b for a, b in zip(work[i1], work[i0])]
            idx = [i for i in range(rowi, len(work)) if work[i][col] != 0]
        i0 = idx[0]
        work[rowi], work[i0] = work[i0], work[rowi]
        if work[rowi][col] < 0:
            work[rowi] = [-a for a in work[rowi]]
        # reduce rows above
        for i in range(rowi):
            q = work[i][col] // work[rowi][col]
            if q:
                work[i] = [a - q * b for a, b in zip(work[i], work[rowi])]
        rowi += 1
        col += 1
    return [r for r in work[:rowi] if any(r)]
