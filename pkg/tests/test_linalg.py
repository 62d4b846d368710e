import random
from fractions import Fraction

import numpy as np
import pytest

from pvforge.fields import K, QQ, parse_ratfunc
from pvforge.linalg import (
    ModPSpan,
    char_poly,
    crt_list,
    field_nullspace,
    field_rref,
    field_solve,
    fraction_mod_p,
    hnf_row_basis,
    integer_kernel,
    mat_det,
    mat_mul,
    modular_kernel,
    nullspace_mod_p,
    primes_stream,
    rank_mod_p,
    rational_reconstruct,
    reconstruct_fraction,
    rref_mod_p,
)


def test_rref_and_nullspace_mod_p():
    p = 10007
    M = [[1, 2, 3], [2, 4, 6], [0, 1, 1]]
    R, pivots = rref_mod_p(M, p)
    assert pivots == [0, 1]
    pivots, free, basis = nullspace_mod_p(M, p)
    assert free == [2]
    v = basis[0]
    assert (np.array(M) @ v % p == 0).all()


def test_rank_mod_p():
    p = 101
    assert rank_mod_p([[1, 0], [0, 1]], p) == 2
    assert rank_mod_p([[1, 1], [2, 2]], p) == 1


def test_crt_and_rational_reconstruct():
    rng = random.Random(5)
    ps = []
    stream = primes_stream()
    for _ in range(3):
        ps.append(next(stream))
    for _ in range(50):
        q = Fraction(rng.randint(-999, 999), rng.randint(1, 999))
        residues = [fraction_mod_p(q, p) for p in ps]
        got = reconstruct_fraction(residues, ps)
        assert got == q


def test_rational_reconstruct_rejects_oversize():
    # modulus too small to pin down 1/1000003
    assert rational_reconstruct(pow(1000003, -1, 10007), 10007) != Fraction(1, 1000003)


def test_crt_list_roundtrip():
    a, m = crt_list([3, 4], [5, 7])
    assert m == 35 and a % 5 == 3 and a % 7 == 4


def test_mod_p_span():
    p = 9973
    span = ModPSpan(3, p)
    assert span.add([1, 2, 3])
    assert not span.add([2, 4, 6])
    assert span.contains([3, 6, 9])
    assert not span.contains([0, 1, 0])
    assert span.add([0, 1, 0])
    assert span.rank() == 2


def test_modular_kernel_matches_exact():
    rows = [
        [Fraction(1), Fraction(1, 2), Fraction(1, 3), Fraction(0)],
        [Fraction(0), Fraction(2), Fraction(1), Fraction(1, 5)],
    ]

    def build(p):
        return np.array(
            [[fraction_mod_p(x, p) for x in row] for row in rows], dtype=np.int64
        )

    kernel, pivots, free = modular_kernel(build)
    exact = field_nullspace(rows, 4, QQ)
    assert len(kernel) == len(exact) == 2
    for v in kernel:
        for row in rows:
            assert sum(a * b for a, b in zip(row, v)) == 0
    assert pivots == [0, 1]


def test_field_rref_over_k():
    t = K.gen
    rows = [[t, K.one, K.zero], [t * t, t, K.zero], [K.zero, K.zero, t]]
    R, pivots = field_rref(rows, K)
    assert pivots == [0, 2]
    basis = field_nullspace(rows, 3, K)
    assert len(basis) == 1
    v = basis[0]
    for row in rows:
        acc = K.zero
        for a, b in zip(row, v):
            acc = acc + a * b
        assert acc == K.zero


def test_field_solve():
    A = [[Fraction(1), Fraction(1)], [Fraction(0), Fraction(1)]]
    x = field_solve(A, [Fraction(3), Fraction(1)], QQ)
    assert x == [Fraction(2), Fraction(1)]
    A2 = [[Fraction(1), Fraction(1)], [Fraction(1), Fraction(1)]]
    assert field_solve(A2, [Fraction(0), Fraction(1)], QQ) is None


def test_integer_kernel_saturated():
    ker = integer_kernel([[2, 4]])
    assert len(ker) == 1
    x, y = ker[0]
    assert 2 * x + 4 * y == 0
    from math import gcd

    assert gcd(abs(x), abs(y)) == 1  # saturated, not a proper sublattice
    ker2 = integer_kernel([[1, 2, 3], [0, 1, 1]])
    assert len(ker2) == 1
    v = ker2[0]
    assert v[0] + 2 * v[1] + 3 * v[2] == 0 and v[1] + v[2] == 0


def test_integer_kernel_random_membership():
    rng = random.Random(17)
    for _ in range(20):
        A = [[rng.randint(-4, 4) for _ in range(4)] for _ in range(2)]
        ker = integer_kernel(A)
        for v in ker:
            assert all(sum(a * x for a, x in zip(row, v)) == 0 for row in A)


def test_hnf_row_basis():
    H = hnf_row_basis([[2, 0], [0, 2], [1, 1]])
    assert H == [[1, 1], [0, 2]]


def test_char_poly_and_det():
    M = [[Fraction(0), Fraction(1)], [Fraction(1), Fraction(0)]]
    cp = char_poly(M, QQ)
    assert cp.coeffs == (Fraction(-1), Fraction(0), Fraction(1))
    assert mat_det(M, QQ) == Fraction(-1)
    t = K.gen
    Mk = [[t, K.one], [K.zero, t]]
    assert mat_det(Mk, K) == t * t
    prod = mat_mul(Mk, Mk, K)
    assert prod[0][1] == 2 * t
