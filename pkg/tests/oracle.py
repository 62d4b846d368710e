"""Independent expectations for the closed-form catalog.

Everything here comes from classical solutions and sympy; nothing imports
the package under test.  Run as a script to regenerate the fixture files:

    python3 tests/oracle.py

For each catalog system the fundamental matrix at the documented base
point is a matrix of closed forms.  The ideal of all polynomial relations
among its entries is the contraction of a graph ideal: adjoin one symbol
per transcendental (w for e^t, sqrt(t), or log t, plus v for e^-t where an
inverse is needed), impose the known algebraic relations among those
symbols (w^2 = t for the square root, w*v = 1 for the exponential pair,
nothing for a transcendental), and eliminate the symbols.  That the listed
relations are the only ones is the classical transcendence of e^t and
log t over Q(t).

Airy has no closed form; there the group is pinned by a Kovacic-style
case analysis (no pole and a simple zero at infinity rule out all three
Liouvillian cases, so the group is the full SL2) and the Wronskian,
which is 1 because the trace vanishes and F(0) = I.  A series check from
the classical recurrence a_{k+2} = a_{k-1}/((k+2)(k+1)) backs up the one
surviving relation.

The groups are the classical Galois groups: scaling e^t for exp, the sign
of sqrt(t) for sqrt, the hyperbola a^2 - b^2 = 1 acting on (cosh, sinh)
for y'' = y, translation of log t for log, and nothing at all for y'' = 0,
whose solutions are already rational.
"""

import os
from fractions import Fraction

import sympy as sp

t = sp.Symbol("t")
w, v = sp.symbols("w v")
X1 = sp.symbols("X11")
X2 = sp.symbols("X11 X12 X21 X22")
G1 = sp.symbols("g11 e")
G2 = sp.symbols("g11 g12 g21 g22 e")

FIXTURE_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "fixtures")


# ---------------------------------------------------------------------------
# catalog

# name -> (A as text rows, base point, X vars, graph entries, aux symbols,
#          aux relations)
CATALOG = {
    "exp": {
        "A": [["1"]],
        "point": 0,
        "xvars": (X1,),
        "entries": [w],
        "aux": (w,),
        "aux_relations": [],
    },
    "sqrt": {
        "A": [["1/(2*t)"]],
        "point": 1,
        "xvars": (X1,),
        "entries": [w],
        "aux": (w,),
        "aux_relations": [w**2 - t],
    },
    "cosh": {
        "A": [["0", "1"], ["1", "0"]],
        "point": 0,
        "xvars": X2,
        "entries": [(w + v) / 2, (w - v) / 2, (w - v) / 2, (w + v) / 2],
        "aux": (w, v),
        "aux_relations": [w * v - 1],
    },
    "airy": {
        "A": [["0", "1"], ["t", "0"]],
        "point": 0,
        "xvars": X2,
    },
    "log": {
        "A": [["0", "1/t"], ["0", "0"]],
        "point": 1,
        "xvars": X2,
        "entries": [sp.Integer(1), w, sp.Integer(0), sp.Integer(1)],
        "aux": (w,),
        "aux_relations": [],
    },
    "y2zero": {
        "A": [["0", "1"], ["0", "0"]],
        "point": 0,
        "xvars": X2,
        "entries": [sp.Integer(1), t, sp.Integer(0), sp.Integer(1)],
        "aux": (),
        "aux_relations": [],
    },
}

GROUPS = {
    # ambient (det g) * e = 1 is always included so the files describe
    # honest ideals of C[g, e]
    "exp": [G1[0] * G1[1] - 1],
    "sqrt": [G1[0] * G1[1] - 1, G1[0] ** 2 - 1],
    "cosh": [
        (G2[0] * G2[3] - G2[1] * G2[2]) * G2[4] - 1,
        G2[0] - G2[3],
        G2[1] - G2[2],
        G2[0] ** 2 - G2[1] ** 2 - 1,
    ],
    "airy": [
        (G2[0] * G2[3] - G2[1] * G2[2]) * G2[4] - 1,
        G2[0] * G2[3] - G2[1] * G2[2] - 1,
    ],
    "log": [
        (G2[0] * G2[3] - G2[1] * G2[2]) * G2[4] - 1,
        G2[0] - 1,
        G2[2],
        G2[3] - 1,
    ],
    "y2zero": [G2[0] - 1, G2[1], G2[2], G2[3] - 1, G2[4] - 1],
}


# ---------------------------------------------------------------------------
# relation ideals by elimination


def relation_basis(name):
    """Reduced grevlex basis of the ideal of relations among the entries."""
    data = CATALOG[name]
    if name == "airy":
        return airy_relation_basis()
    xvars = data["xvars"]
    gens = [x - entry for x, entry in zip(xvars, data["entries"])]
    gens += data["aux_relations"]
    aux = data["aux"]
    if aux:
        elim = sp.groebner(gens, *aux, *xvars, order="lex", field=True)
        gens = [g for g in elim.exprs if not g.has(*aux)]
    if not gens:
        return []
    return list(sp.groebner(gens, *xvars, order="grevlex", field=True).exprs)


def airy_relation_basis():
    """det X - 1 and nothing else.

    The trace of the companion matrix is zero, so the Wronskian of the
    gauge F(0) = I is constantly 1.  Kovacic's necessary conditions all
    fail for r = t, so no proper algebraic subgroup of SL2 contains the
    group; the orbit of F is then the whole determinant-one variety and
    det X - 1 generates its ideal.
    """
    assert kovacic_cases(t) == set()
    assert airy_wronskian_valuation(40) >= 40
    x11, x12, x21, x22 = X2
    return [sp.expand(x12 * x21 - x11 * x22 + 1)]


def kovacic_cases(r):
    """Which of the three Liouvillian cases of y'' = r*y pass the classical
    necessary conditions on pole orders and the order at infinity."""
    r = sp.cancel(sp.together(sp.sympify(r)))
    if r == 0:
        # no poles, infinite order at infinity
        return {1, 3}
    num, den = sp.fraction(r)
    # each root of an irreducible factor is a pole of order the multiplicity
    orders = [
        mult for fac, mult in sp.factor_list(den, t)[1] if sp.degree(fac, t) > 0
    ]
    ord_inf = sp.degree(den, t) - sp.degree(num, t)
    cases = set()
    if all(o == 1 or o % 2 == 0 for o in orders) and (
        ord_inf % 2 == 0 or ord_inf > 2
    ):
        cases.add(1)
    if any(o == 2 or (o > 2 and o % 2 == 1) for o in orders):
        cases.add(2)
    if all(o <= 2 for o in orders) and ord_inf >= 2:
        cases.add(3)
    return cases


def airy_wronskian_valuation(order):
    """Valuation of det F - 1 for the recurrence-built Airy solutions."""
    a = [Fraction(1), Fraction(0), Fraction(0)]
    b = [Fraction(0), Fraction(1), Fraction(0)]
    for k in range(1, order):
        a.append(a[k - 1] / ((k + 2) * (k + 1)))
        b.append(b[k - 1] / ((k + 2) * (k + 1)))
    da = [(k + 1) * a[k + 1] for k in range(order)]
    db = [(k + 1) * b[k + 1] for k in range(order)]
    det = [Fraction(0)] * order
    for i in range(order):
        for j in range(order - i):
            det[i + j] += a[i] * db[j] - b[i] * da[j]
    det[0] -= 1
    for i, c in enumerate(det):
        if c != 0:
            return i
    return order


# ---------------------------------------------------------------------------
# fixture text


def _coeff_text(c):
    c = sp.nsimplify(c, rational=False) if not isinstance(c, sp.Expr) else c
    c = sp.expand(c)
    if c.is_Rational:
        return str(c)
    poly = sp.Poly(c, t)
    if len(poly.terms()) == 1 and poly.LC() in (1, -1) and poly.degree() == 1:
        return "t" if poly.LC() == 1 else "-t"
    raise ValueError("coefficient %s needs a richer printer" % (c,))


def poly_text(expr, xvars):
    """One generator in the line format the package reads back."""
    poly = sp.Poly(sp.expand(expr), *xvars)
    pieces = []
    for exps, coeff in poly.terms():
        mono = "*".join(
            str(x) if e == 1 else "%s^%d" % (x, e)
            for x, e in zip(xvars, exps)
            if e
        )
        cs = _coeff_text(coeff.as_expr() if hasattr(coeff, "as_expr") else coeff)
        if not mono:
            piece = cs
        elif cs == "1":
            piece = mono
        elif cs == "-1":
            piece = "-" + mono
        elif cs.startswith("-") or "/" in cs or cs.isdigit() or cs == "t":
            piece = "%s*%s" % (cs, mono)
        else:
            piece = "(%s)*%s" % (cs, mono)
        pieces.append(piece)
    out = pieces[0]
    for piece in pieces[1:]:
        if piece.startswith("-"):
            out += " - " + piece[1:]
        else:
            out += " + " + piece
    return out


def monic(expr, xvars):
    return sp.Poly(sp.expand(expr), *xvars, field=True).monic().as_expr()


def write_fixture(path, header, gens, xvars):
    lines = ["# %s" % (line,) for line in header]
    lines += [poly_text(monic(g, xvars), xvars) for g in gens]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def regenerate():
    os.makedirs(FIXTURE_DIR, exist_ok=True)
    for name, data in CATALOG.items():
        xvars = data["xvars"]
        basis = relation_basis(name)
        header = [
            "%s: relations among the fundamental matrix entries" % (name,),
            "point %d" % (data["point"],),
        ]
        write_fixture(
            os.path.join(FIXTURE_DIR, "oracle_relations_%s.txt" % (name,)),
            header,
            basis,
            xvars,
        )
        # for every catalog system the closed-form evaluation kernel is
        # already the maximal ideal, so m shares the basis
        write_fixture(
            os.path.join(FIXTURE_DIR, "oracle_m_%s.txt" % (name,)),
            ["%s: maximal ideal of the evaluation at F" % (name,),
             "point %d" % (data["point"],)],
            basis,
            xvars,
        )
        gvars = G1 if len(xvars) == 1 else G2
        gb = sp.groebner(GROUPS[name], *gvars, order="grevlex", field=True)
        write_fixture(
            os.path.join(FIXTURE_DIR, "oracle_group_%s.txt" % (name,)),
            ["%s: classical Galois group with the inverse-determinant" % (name,),
             "relation included"],
            list(gb.exprs),
            gvars,
        )
    print("fixtures written to %s" % (FIXTURE_DIR,))


if __name__ == "__main__":
    regenerate()
