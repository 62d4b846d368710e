from fractions import Fraction

import numpy as np
import pytest

from pvforge.errors import SingularPointError
from pvforge.fields import FieldTower, K, QQ, UPoly, parse_ratfunc
from pvforge.mpoly import PolyRing, parse_mpoly
from pvforge.series import (
    SeriesEmbedding,
    TruncSeries,
    coefficient_matrix_series,
    det_series,
    eval_mpoly_on_series,
    fundamental_series,
    fundamental_series_mod_p,
    matrix_entry_series,
    ratfunc_series,
    ratfunc_series_mod_p,
    series_div_mod_p,
    series_mul_mod_p,
)

t = K.gen


def test_truncseries_basic_ops():
    a = TruncSeries(QQ, [Fraction(1), Fraction(2), Fraction(3)])
    b = TruncSeries(QQ, [Fraction(1), Fraction(-1), Fraction(0)])
    assert (a + b).coeffs == (2, 1, 3)
    assert (a * b).coeffs == (1, 1, 1)
    assert (a * a.inverse()).coeffs == (1, 0, 0)
    assert a.deriv().coeffs == (2, 6)


def test_ratfunc_series_geometric():
    # 1/(1-t) at t0 = 0
    s = ratfunc_series(1 / (1 - t), 0, 6)
    assert s.coeffs == (1, 1, 1, 1, 1, 1)
    # derivative of the series matches series of the derivative
    from pvforge.fields import derive

    ds = ratfunc_series(derive(1 / (1 - t)), 0, 5)
    assert ds == s.deriv()


def test_ratfunc_series_pole_detection():
    with pytest.raises(SingularPointError):
        ratfunc_series(1 / t, 0, 4)


def test_fundamental_series_exp():
    # y' = y at t0 = 0: F = sum tau^j / j!
    F = fundamental_series([[K.one]], 0, 6)
    fact = 1
    for j in range(6):
        if j:
            fact *= j
        assert F[j][0][0] == Fraction(1, fact)


def test_fundamental_series_is_solution():
    # check F' = A F order by order for a 2x2 system
    A = [[K.zero, K.one], [K.one / (1 + t * t), K.zero]]
    order = 8
    F = fundamental_series(A, 0, order)
    Amats = coefficient_matrix_series(A, 0, order)
    n = 2
    for j in range(order - 1):
        rhs = [[Fraction(0)] * n for _ in range(n)]
        for i in range(j + 1):
            for a in range(n):
                for b in range(n):
                    for c in range(n):
                        rhs[a][b] += Amats[i][a][c] * F[j - i][c][b]
        for a in range(n):
            for b in range(n):
                assert F[j + 1][a][b] * (j + 1) == rhs[a][b]


def test_det_series_wronskian():
    # trace-free system: det F = 1 identically
    A = [[K.zero, K.one], [t, K.zero]]
    F = fundamental_series(A, 0, 8)
    d = det_series(F)
    assert d.coeffs[0] == 1
    assert all(c == 0 for c in d.coeffs[1:])


def test_eval_mpoly_on_series():
    A = [[K.zero, K.one], [K.one, K.zero]]
    order = 8
    F = fundamental_series(A, 0, order)
    R = PolyRing(("X11", "X12", "X21", "X22"), K)
    imgs = [
        matrix_entry_series(F, 0, 0),
        matrix_entry_series(F, 0, 1),
        matrix_entry_series(F, 1, 0),
        matrix_entry_series(F, 1, 1),
    ]

    def coeff_series(c):
        return ratfunc_series(c, 0, order)

    # cosh^2 - sinh^2 - 1 vanishes on the solution series
    p = parse_mpoly(R, "X11^2 - X12^2 - 1")
    val = eval_mpoly_on_series(p, imgs, coeff_series, order)
    assert val.is_zero()
    q = parse_mpoly(R, "X11 - X22")
    assert eval_mpoly_on_series(q, imgs, coeff_series, order).is_zero()
    r = parse_mpoly(R, "X11 - X12")
    assert not eval_mpoly_on_series(r, imgs, coeff_series, order).is_zero()


def test_series_embedding_sqrt():
    tower = FieldTower(degree_budget=16)
    z = tower.adjoin(UPoly(K, (-t, K.zero, K.one)), name="z")
    emb = SeriesEmbedding(tower, 1, 8)
    s = emb.of(z)
    # sqrt(1 + tau) = 1 + tau/2 - tau^2/8 + ...
    assert s.coeffs[0] == 1
    assert s.coeffs[1] == Fraction(1, 2)
    assert s.coeffs[2] == Fraction(-1, 8)
    assert (s * s) == emb.of(K.convert(0) + t)  # series of t itself
    # derivative of the embedding equals embedding of the derivative
    from pvforge.fields import derive

    assert s.deriv() == emb.of(derive(z)).truncate(7)


def test_series_embedding_branch_replay():
    tower = FieldTower(degree_budget=16)
    z = tower.adjoin(UPoly(K, (-t, K.zero, K.one)), name="z")
    emb = SeriesEmbedding(tower, 1, 5)
    emb2 = SeriesEmbedding(tower, 1, 9, choices=emb.choices)
    assert emb2.of(z).truncate(5) == emb.of(z)


def test_series_embedding_adjoined_constant():
    # sqrt(t) at t0 = 2: initial value sqrt(2) is irrational, so the constant
    # tower has to grow
    tower = FieldTower(degree_budget=16)
    z = tower.adjoin(UPoly(K, (-t, K.zero, K.one)), name="z")
    emb = SeriesEmbedding(tower, 2, 6)
    assert len(emb.const_tower.levels) == 1
    s = emb.of(z)
    prod = s * s
    expect = emb.of(tower.top.convert(t))
    assert prod == expect


def test_mod_p_series_match_exact():
    p = 33554393  # prime below 2^25
    r = parse_ratfunc("(t^2-1)/(2*t)")
    s = ratfunc_series(r, 1, 10)
    sp = ratfunc_series_mod_p(r, 1, 10, p)
    for a, b in zip(s.coeffs, sp):
        assert (a.numerator * pow(a.denominator, -1, p) - int(b)) % p == 0


def test_mod_p_mul_div_roundtrip():
    p = 9973
    rng = np.random.default_rng(2)
    a = rng.integers(0, p, 12)
    b = rng.integers(1, p, 12)
    prod = series_mul_mod_p(a, b, p)
    back = series_div_mod_p(prod, b, p)
    assert (back == a % p).all()


def test_fundamental_series_mod_p_matches_exact():
    p = 33554393
    A = [[K.zero, K.one], [t / (1 + t), K.zero]]
    F = fundamental_series(A, 1, 7)
    Fp = fundamental_series_mod_p(A, 1, 7, p)
    for j in range(7):
        for i in range(2):
            for l in range(2):
                q = F[j][i][l]
                assert (q.numerator * pow(q.denominator, -1, p) - int(Fp[j, i, l])) % p == 0
