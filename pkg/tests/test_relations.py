"""Relation-space finder: kernels, certificates, refinement."""

from fractions import Fraction

import pytest

from pvforge.fields import K, parse_ratfunc
from pvforge.ideals import groebner, ideal_equal
from pvforge.mpoly import parse_mpoly
from pvforge.relations import (
    connection_rows,
    monomial_basis,
    relation_space,
    stability_refine,
)


def sysmat(*entries):
    n = int(len(entries) ** 0.5)
    return [
        [parse_ratfunc(entries[i * n + j]) for j in range(n)] for i in range(n)
    ]


def test_monomial_basis_sizes():
    assert len(monomial_basis(1, 2)) == 3
    assert len(monomial_basis(2, 2)) == 15
    assert len(monomial_basis(2, 6)) == 210
    # graded: degrees never decrease along the list
    degs = [sum(e) for e in monomial_basis(2, 3)]
    assert degs == sorted(degs)


def test_exponential_has_no_relations():
    rs = relation_space(sysmat("1"), nu=2, t0=0)
    assert rs.gens == []
    assert rs.kernel_dim == 0
    assert rs.certificate.accepted()


def test_square_root_of_t():
    rs = relation_space(sysmat("1/(2*t)"), nu=2, t0=1)
    R = rs.ring
    expected = groebner([parse_mpoly(R, "X11^2 - t")], R)
    assert ideal_equal(rs.gens, expected)
    assert rs.certificate.accepted()


def test_hyperbolic_pair():
    A = sysmat("0", "1", "1", "0")
    rs = relation_space(A, nu=2, t0=0)
    R = rs.ring
    expected = groebner(
        [
            parse_mpoly(R, "X11 - X22"),
            parse_mpoly(R, "X21 - X12"),
            parse_mpoly(R, "X11^2 - X12^2 - 1"),
        ],
        R,
    )
    assert ideal_equal(rs.gens, expected)


def test_airy_degree_two_sees_only_the_determinant():
    A = sysmat("0", "1", "t", "0")
    rs = relation_space(A, nu=2, t0=0)
    R = rs.ring
    expected = groebner([parse_mpoly(R, "X11*X22 - X12*X21 - 1")], R)
    assert ideal_equal(rs.gens, expected)
    assert rs.certificate.accepted()


def test_unipotent_polynomial_entry():
    A = sysmat("0", "1", "0", "0")
    rs = relation_space(A, nu=1, t0=0)
    R = rs.ring
    expected = groebner(
        [
            parse_mpoly(R, "X11 - 1"),
            parse_mpoly(R, "X21"),
            parse_mpoly(R, "X22 - 1"),
            parse_mpoly(R, "X12 - t"),
        ],
        R,
    )
    assert ideal_equal(rs.gens, expected)


def test_logarithmic_entry_is_transcendental():
    A = sysmat("0", "1/t", "0", "0")
    rs = relation_space(A, nu=1, t0=1)
    R = rs.ring
    expected = groebner(
        [
            parse_mpoly(R, "X11 - 1"),
            parse_mpoly(R, "X21"),
            parse_mpoly(R, "X22 - 1"),
        ],
        R,
    )
    assert ideal_equal(rs.gens, expected)


def test_connection_rows_block_diagonal():
    A = sysmat("1")
    mons = monomial_basis(1, 3)
    B = connection_rows(A, mons)
    # delta fixes degree: x^k maps to k x^k
    for i, e in enumerate(mons):
        for j in B[i]:
            assert sum(mons[j]) == sum(e)
        if sum(e):
            assert B[i][i] == K.convert(e[0])


def test_stability_refine_drops_false_candidate():
    # x^2 - t is no relation for exp(t)
    A = sysmat("1")
    mons = monomial_basis(1, 2)
    t = K.gen
    rows = [[-t, K.zero, K.one]]
    assert stability_refine(rows, A, mons) == []


def test_stability_refine_keeps_true_relation():
    A = sysmat("1/(2*t)")
    mons = monomial_basis(1, 2)
    t = K.gen
    rows = [[-t, K.zero, K.one]]
    out = stability_refine(rows, A, mons)
    assert len(out) == 1
    # the surviving line is spanned by (-t, 0, 1)
    v = out[0]
    assert v[1] == K.zero
    assert v[0] / v[2] == -t
