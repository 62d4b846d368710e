"""Staged construction of the Picard-Vessiot ring of delta Y = A Y over Q(t).

Three steps: the radical of the relation ideal of the fundamental solution,
a maximal differential ideal over a splitting tower, and Galois descent of
that ideal back to Q(t).  The descended ideal presents the ring as
Q(t)[X, 1/det X]/m, and its stabilizer inside GL_n is the differential
Galois group.  Every stage leaves a certificate, and the whole battery of
checks can be replayed on a finished result.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .descent import DescentResult, GaloisClosure, descend, galois_closure
from .errors import (
    InternalConsistencyError,
    ParseError,
    SingularPointError,
    UnsupportedShapeError,
    VerificationError,
)
from .fields import K, FieldTower
from .hyperexp import KbarIdeal, maximal_ideal_kbar
from .ideals import (
    DiffIdeal,
    GroupIdeal,
    ambient_relation,
    dimension_of,
    groebner,
    ideal_equal,
    is_delta_ideal,
    matrix_var_names,
    nf,
    radical,
    stabilizer,
)
from .mpoly import PolyRing
from .relations import RelationSpace, relation_space
from .series import (
    det_series,
    eval_mpoly_on_series,
    fundamental_series,
    matrix_entry_series,
    ratfunc_series,
)


# ---------------------------------------------------------------------------
# degree bounds


def dn_bound(n):
    """Envelope degree for the toric stage.

    6 for n = 2, 360 for n = 3, (4n)^(3n^2) beyond.  n = 1 falls back on the
    convention d(1) = 2: degree two is enough for every rank-one relation
    x^m = c f with m <= 2 at desk scale, and the relation finder escalates
    on its own past that.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if n == 1:
        return 2
    if n == 2:
        return 6
    if n == 3:
        return 360
    return (4 * n) ** (3 * n * n)


@dataclass
class KappaBound:
    """Character degree bound, kept in factored form.

    The closed form is a * b * max_i C(b, i)^2 with a = (2n)^(3*8^(n^2)) and
    b = C(n^2 + a, n^2); the max sits at i = floor(b/2).  Even at n = 1 the
    binomial factor has millions of digits, so the value is reported as text
    while the leading factor stays available exactly.
    """

    n: int
    leading_base: int
    leading_exponent: int
    text: str

    def leading_factor(self):
        digits = self.leading_exponent * math.log10(self.leading_base)
        if digits > 10**6:
            raise ValueError(
                "leading factor has about 10^%d digits; use the text form"
                % (int(math.log10(digits)),)
            )
        return self.leading_base**self.leading_exponent


def kappa_bound(n):
    """Symbolic character degree bound; reporting only, never a work bound."""
    if n < 1:
        raise ValueError("n must be positive")
    base = 2 * n
    exp = 3 * 8 ** (n * n)
    pieces = ["kappa = a * b * C(b, floor(b/2))^2"]
    a_text = "a = %d^%d" % (base, exp)
    # inline the decimal expansion only while it stays readable
    if exp * math.log10(base) < 4000:
        a_text += " = %d" % (base**exp,)
    pieces.append(a_text)
    b_text = "b = C(%d + a, %d)" % (n * n, n * n)
    if n == 1:
        b_text += " = a + 1 = %d" % (base**exp + 1,)
    pieces.append(b_text)
    return KappaBound(n, base, exp, "; ".join(pieces))


# ---------------------------------------------------------------------------
# stage one: the toric ideal


@dataclass
class ToricResult:
    """Radical of the relation ideal with its stabilizer.

    relations carries the exactness certificate of the kernel computation;
    radical_assumed flags the radical shapes that are taken on faith, in
    which case delta-stability of the output is still certified directly.
    """

    relations: RelationSpace
    ideal: DiffIdeal
    group: GroupIdeal
    radical_assumed: bool

    @property
    def gens(self):
        return self.ideal.gens

    @property
    def ring(self):
        return self.ideal.ring


def toric_ideal(A, nu=None, t0=0, coeff_degree=None, margin=16):
    """Relation ideal of the fundamental solution at t0, made radical.

    nu defaults to the envelope degree for the system size.  The radical is
    re-certified delta-stable, since the relation certificate only covers
    the ideal it was computed for.
    """
    A = [[K.convert(a) for a in row] for row in A]
    n = len(A)
    if nu is None:
        nu = dn_bound(n)
    rel = relation_space(A, nu, t0=t0, coeff_degree=coeff_degree, margin=margin)
    rad = radical(rel.gens, rel.ring)
    di = DiffIdeal(A, rad.gens, ring=rel.ring)
    ok, _, _ = is_delta_ideal(di)
    if not ok:
        if rad.assumed:
            raise UnsupportedShapeError(
                "radical outside the supported shapes; stability not certified"
            )
        raise InternalConsistencyError("radical of the relation ideal lost stability")
    return ToricResult(rel, di, stabilizer(di), rad.assumed)


# ---------------------------------------------------------------------------
# the full pipeline


@dataclass
class PipelineConfig:
    """Knobs for one run; None means the stage picks its own default."""

    degree: int = None
    coeff_degree: int = None
    margin: int = None
    point: Fraction = None
    char_degree: int = None
    tower_budget: int = 64
    poly_degree_cap: int = None
    point_budget: int = 400
    series_order: int = 24
    recenter_cap: int = 25


@dataclass
class PVResult:
    """The Picard-Vessiot ring of the input system, with its paper trail.

    gens generate the maximal differential ideal m over Q(t), so the ring is
    Q(t)[X, 1/det X]/m with fundamental matrix normalized to the identity at
    t0; group is the Galois group stab(m).  log lists every certificate that
    was checked, in order, and verify() replays the same battery.
    """

    A: list
    n: int
    t0: Fraction
    config: PipelineConfig
    toric: ToricResult
    kbar: KbarIdeal
    closure: GaloisClosure
    descent: DescentResult
    log: list = field(default_factory=list)

    @property
    def gens(self):
        return self.descent.gens

    @property
    def ring(self):
        return self.descent.ring

    @property
    def group(self):
        return self.descent.group


def base_points(A, cap):
    """Non-negative integers that avoid every pole of A, smallest first."""
    out = []
    v = 0
    while len(out) < cap:
        vv = Fraction(v)
        if all(a.den.eval(vv) != 0 for row in A for a in row):
            out.append(vv)
        v += 1
    return out


def _with_base_points(A, config, stage, log):
    """Run stage(t0) at the first workable base point.

    A SingularPointError re-centers at the next candidate; the cap keeps
    pathological inputs from walking the integers forever.
    """
    if config.point is not None:
        points = [Fraction(config.point)]
    else:
        points = base_points(A, config.recenter_cap)
    last = None
    for t0 in points:
        try:
            return t0, stage(t0)
        except SingularPointError as exc:
            log.append("recenter: %s" % (exc,))
            last = exc
    raise last if last is not None else SingularPointError("no usable base point")


def run_toric(A, config=None):
    """Stage one with automatic base-point selection: (t0, toric, log)."""
    config = config if config is not None else PipelineConfig()
    A = [[K.convert(a) for a in row] for row in A]
    nu = config.degree if config.degree is not None else dn_bound(len(A))
    margin = config.margin if config.margin is not None else 16
    log = []
    t0, toric = _with_base_points(
        A,
        config,
        lambda t0: toric_ideal(
            A, nu, t0, coeff_degree=config.coeff_degree, margin=margin
        ),
        log,
    )
    log.append(
        "toric: degree %d at t0 = %s, %d generators%s"
        % (
            nu,
            t0,
            len(toric.gens),
            ", radical assumed" if toric.radical_assumed else "",
        )
    )
    return t0, toric, log


def run_kbar(A, config=None):
    """Stages one and two together: (t0, toric, kbar, log).

    Both run at the same base point; a singular point inside the closure
    stage re-centers the whole pair, keeping the gauge consistent.
    """
    config = config if config is not None else PipelineConfig()
    A = [[K.convert(a) for a in row] for row in A]
    n = len(A)
    nu = config.degree if config.degree is not None else dn_bound(n)
    kappa = config.char_degree if config.char_degree is not None else nu
    margin = config.margin if config.margin is not None else 16
    log = []

    def stage(t0):
        toric = toric_ideal(
            A, nu, t0, coeff_degree=config.coeff_degree, margin=margin
        )
        tower = FieldTower(degree_budget=config.tower_budget)
        kbar = maximal_ideal_kbar(
            toric.gens,
            A,
            t0,
            kappa,
            tower=tower,
            poly_degree_cap=config.poly_degree_cap,
            point_budget=config.point_budget,
        )
        return toric, kbar

    t0, (toric, kbar) = _with_base_points(A, config, stage, log)
    log.append(
        "toric: degree %d at t0 = %s, %d generators%s"
        % (
            nu,
            t0,
            len(toric.gens),
            ", radical assumed" if toric.radical_assumed else "",
        )
    )
    log.append(
        "closure stage: tower degree %d, %d characters, %d lattice relations"
        % (kbar.tower.degree(), len(kbar.characters), len(kbar.relations))
    )
    return t0, toric, kbar, log


def pv_ring(A, config=None):
    """Run all three stages and certify the result.

    The base point is the smallest non-negative integer avoiding the poles
    of A unless the config pins one; a stage that lands on a bad point
    re-centers the whole run at the next candidate.  Bound exhaustion in any
    stage propagates with its own message.
    """
    config = config if config is not None else PipelineConfig()
    A = [[K.convert(a) for a in row] for row in A]
    t0, toric, kbar, log = run_kbar(A, config)
    closure = galois_closure(kbar.tower)
    log.append(
        "descent: closure degree %d with %d automorphisms"
        % (closure.tower.degree(), closure.order())
    )
    des = descend(kbar.gens, closure, A, ring=kbar.ring)
    log.append("descent: orbit of %d conjugates intersected" % (des.orbit_size,))
    result = PVResult(A, len(A), t0, config, toric, kbar, closure, des, log)
    report = verify(result)
    log.extend(report.lines())
    if not report.ok:
        raise VerificationError("\n".join(report.lines()))
    return result


# ---------------------------------------------------------------------------
# the certificate battery


@dataclass
class VerifyReport:
    items: list

    @property
    def ok(self):
        return all(ok for _, ok, _ in self.items)

    def lines(self):
        out = []
        for name, ok, detail in self.items:
            line = "%s %s" % ("PASS" if ok else "FAIL", name)
            if detail:
                line += " (%s)" % (detail,)
            out.append(line)
        return out


def verify(result, series_order=None):
    """Replay every certificate of a finished run.

    Checks delta-stability of all three ideals, the containment chain
    toric in m in J, the torsor dimension against the group dimension,
    the group containment stab(m) in stab(toric), series vanishing of m on
    the fundamental solution, and stability of m under the generic group
    substitution X -> Xg.
    """
    order = series_order if series_order is not None else result.config.series_order
    return _battery(
        result.A,
        result.t0,
        result.toric.ideal,
        result.toric.group,
        result.kbar.ring,
        result.kbar.gens,
        result.descent.ring,
        result.descent.gens,
        result.descent.group,
        order,
    )


def verify_artifact(art, series_order=None):
    """Re-run the battery on a result file read back from disk.

    Both stabilizers are recomputed from scratch; the group equations the
    file carries must agree with the recomputation, which is reported as an
    extra item.
    """
    if art.kind != "result":
        raise ParseError("verification needs a result file, got %r" % (art.kind,))
    if art.A is None or art.point is None:
        raise ParseError("result file is missing the system or the base point")
    order = series_order if series_order is not None else art.config.get(
        "series_order", 24
    )
    kring = art.ground_ring()
    toric_di = DiffIdeal(art.A, art.toric_gens, ring=kring)
    toric_group = stabilizer(toric_di)
    m_gens = groebner(art.m_gens, kring)
    group = stabilizer(m_gens, n=art.n, ring=kring)
    report = _battery(
        art.A,
        art.point,
        toric_di,
        toric_group,
        art.tower_ring(),
        art.kbar_gens,
        kring,
        m_gens,
        group,
        order,
    )
    stored = groebner(art.group_gens, group.ring)
    report.items.append(
        (
            "groups: stored equations match the recomputed stabilizer",
            ideal_equal(stored, group.gb),
            "",
        )
    )
    return report


def _battery(A, t0, toric_di, toric_group, kbar_ring, kbar_gens, kring, m_gens, group, order):
    items = []
    n = len(A)

    ok, _, _ = is_delta_ideal(toric_di)
    items.append(("delta certificate: toric ideal", ok, ""))

    tower_dom = kbar_ring.dom
    Jdi = DiffIdeal(A, kbar_gens, dom=tower_dom, ring=kbar_ring)
    ok, _, _ = is_delta_ideal(Jdi)
    items.append(("delta certificate: tower-stage ideal", ok, ""))

    m_di = DiffIdeal(A, m_gens, ring=kring)
    ok, _, _ = is_delta_ideal(m_di)
    items.append(("delta certificate: descended ideal", ok, ""))

    mgb = groebner(m_gens, kring)
    ok = all(
        nf(g.map_coeffs(K.convert, ring=kring), mgb).is_zero()
        for g in toric_di.gens
    )
    items.append(("chain: toric ideal inside m", ok, ""))

    Jgb = groebner(kbar_gens, kbar_ring)

    def lift(g):
        return g.map_coeffs(tower_dom.convert, ring=kbar_ring)

    ok = all(nf(lift(g), Jgb).is_zero() for g in toric_di.gens) and all(
        nf(lift(g), Jgb).is_zero() for g in m_gens
    )
    items.append(("chain: toric ideal and m inside the tower-stage ideal", ok, ""))

    dim_v = dimension_of(m_gens + [ambient_relation(kring, n)], kring)
    dim_g = group.dimension()
    items.append(
        (
            "torsor: dim V(m) equals dim stab(m)",
            dim_v == dim_g,
            "%d vs %d" % (dim_v, dim_g),
        )
    )

    ok = toric_group.contains_ideal(group)
    items.append(("groups: stab(m) inside stab(toric)", ok, ""))

    ok, detail = _series_vanishing(A, t0, m_gens, order)
    items.append(("series: m vanishes on F to order %d" % (order,), ok, detail))

    ok = _substitution_stabilizes(m_gens, kring, group, n)
    items.append(("action: X -> Xg maps m into itself", ok, ""))

    return VerifyReport(items)


def _series_vanishing(A, t0, gens, order):
    n = len(A)
    F = fundamental_series(A, t0, order)
    images = [matrix_entry_series(F, i, j) for i in range(n) for j in range(n)]
    images.append(det_series(F).inverse())
    coeff = lambda c: ratfunc_series(c, t0, order)
    for g in gens:
        s = eval_mpoly_on_series(g, images, coeff, order)
        if not s.is_zero():
            return False, "residual valuation %s" % (s.valuation(),)
    return True, ""


def _substitution_stabilizes(gens, ring, group, n):
    """Does X -> Xg with g generic in the group map the ideal into itself?

    Reduction happens modulo the ideal joined with the group equations in a
    combined ring, so a zero normal form is exactly the statement that the
    substituted generator lies in m modulo the group relations.
    """
    if not gens:
        return True
    nX = ring.n
    combined = PolyRing(
        ring.names + matrix_var_names(n, "g") + ("e",),
        K,
        order="block",
        block=nX,
    )
    Gc = [g.embed(combined, position=0) for g in groebner(gens, ring)]
    Hc = [h.embed(combined, position=nX) for h in group.gb]
    full = groebner(Gc + Hc, combined)
    images = []
    for i in range(n):
        for j in range(n):
            acc = combined.zero
            for l in range(n):
                acc = acc + combined.var(i * n + l) * combined.var(nX + l * n + j)
            images.append(acc)
    for v in range(n * n, combined.n):
        images.append(combined.var(v))
    return all(nf(g.substitute(images), full).is_zero() for g in Gc)
