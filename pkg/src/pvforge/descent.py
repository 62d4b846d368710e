"""Galois descent of a differential ideal from a tower back to Q(t).

The closure stage hands back generators over a finite tower.  Splitting
every level minimal polynomial, along every partial embedding, turns the
tower into a normal extension with exactly degree-many automorphisms.  The
intersection of the orbit of the ideal under those maps is stable, so the
reduced Groebner basis of the intersection has coefficients in Q(t) again
and generates the descended ideal; its stabilizer is the Galois group of
the original system.
"""

from dataclasses import dataclass
from fractions import Fraction

from .errors import InternalConsistencyError
from .fields import (
    K,
    FieldTower,
    TowerElem,
    UPoly,
    derive,
    factor_monic,
)
from .ideals import (
    DiffIdeal,
    GroupIdeal,
    groebner,
    ideal_equal,
    intersect,
    is_delta_ideal,
    stabilizer,
    system_ring,
)
from .mpoly import PolyRing


# ---------------------------------------------------------------------------
# automorphisms of a split tower


class Automorphism:
    """Field map of a tower over Q(t), stored as generator images.

    images maps each level name to an element of the top level; everything
    below the towers (rationals, Q(t)) is fixed pointwise.  Calling the map
    on any tower element evaluates the residue polynomials on the images,
    so the result is automatically a ring map; bijectivity comes from the
    image count matching the degree, checked where the maps are built.
    """

    def __init__(self, tower, images):
        self.tower = tower
        self.images = images

    def __call__(self, x):
        return _apply(self.tower.top, self.images, x)

    def is_identity(self):
        top = self.tower.top
        return all(
            self.images[lvl.name] == top.convert(lvl.gen)
            for lvl in self.tower.levels
        )

    def __repr__(self):
        if not self.images:
            return "Automorphism(id)"
        body = ", ".join(
            "%s -> %r" % (name, img) for name, img in sorted(self.images.items())
        )
        return "Automorphism(%s)" % (body,)


def _apply(top, images, x):
    if isinstance(x, TowerElem):
        if x.level.name not in images:
            raise InternalConsistencyError(
                "element of level %r outside the closure tower" % (x.level.name,)
            )
        img = images[x.level.name]
        acc = top.convert(Fraction(0))
        for c in reversed(x.rep.coeffs):
            acc = acc * img + _apply(top, images, c)
        return acc
    # rationals and Q(t) are fixed
    return top.convert(x)


def _enumerate_maps(tower):
    """All automorphisms, or the first obstruction to splitting.

    Walks level by level: the minimal polynomial of each level, pushed
    through the partial map built so far, must factor into linears over the
    top; a factor of degree two or more is returned as the defect to adjoin.
    Returns (automorphisms, None) on success, ([], defect) otherwise.
    """
    top = tower.top
    autos = []
    defect = []

    def walk(i, images):
        if defect:
            return
        if i == len(tower.levels):
            autos.append(Automorphism(tower, dict(images)))
            return
        lvl = tower.levels[i]
        mapped = UPoly(top, tuple(_apply(top, images, c) for c in lvl.minpoly.coeffs))
        roots = []
        for fac, _ in factor_monic(mapped):
            if fac.degree() == 1:
                roots.append(-fac.coeff(0))
            else:
                defect.append(fac)
                return
        for r in sorted(roots, key=repr):
            images[lvl.name] = r
            walk(i + 1, images)
            del images[lvl.name]

    walk(0, {})
    if defect:
        return [], defect[0]
    return autos, None


@dataclass
class GaloisClosure:
    """Split tower together with its automorphism group over Q(t).

    Every level minimal polynomial factors into linears along every partial
    map, so the automorphism count equals the tower degree and the fixed
    field of the group is Q(t) itself.
    """

    tower: FieldTower
    automorphisms: list

    def order(self):
        return len(self.automorphisms)

    def basis(self):
        """Q(t)-basis of the tower: products of generator powers."""
        top = self.tower.top
        out = [top.convert(Fraction(1))]
        for lvl in self.tower.levels:
            gen = top.convert(lvl.gen)
            powers = []
            cur = top.convert(Fraction(1))
            for _ in range(lvl.ext_degree()):
                powers.append(cur)
                cur = cur * gen
            out = [b * p for p in powers for b in out]
        return out


def galois_closure(tower=None):
    """Normal closure of a coefficient tower, grown in place.

    Whenever some level minimal polynomial keeps an irreducible factor of
    degree two or more under a partial automorphism, that factor is adjoined
    and the enumeration restarts.  Each round at least doubles the tower
    degree, so the tower budget bounds the loop; exceeding it surfaces as
    TowerBudgetError.  Commutation of every map with the derivation is
    checked on the generators before the closure is returned.
    """
    tower = tower if tower is not None else FieldTower()
    autos, defect = _enumerate_maps(tower)
    while defect is not None:
        tower.adjoin(defect)
        autos, defect = _enumerate_maps(tower)
    if len(autos) != tower.degree():
        raise InternalConsistencyError(
            "split tower of degree %d has %d automorphisms"
            % (tower.degree(), len(autos))
        )
    for auto in autos:
        for lvl in tower.levels:
            gen = tower.convert(lvl.gen)
            if auto(derive(gen)) != derive(auto(gen)):
                raise InternalConsistencyError(
                    "automorphism does not commute with the derivation on %s"
                    % (lvl.name,)
                )
    return GaloisClosure(tower, autos)


# ---------------------------------------------------------------------------
# orbit and descent


def _ring_over(ring, dom):
    if ring.dom is dom:
        return ring
    return PolyRing(ring.names, dom, order=ring.order, block=ring.block)


def orbit(gens, closure, ring=None):
    """Pairwise distinct automorphism images of the ideal, as reduced bases.

    Conjugates that agree as ideals collapse, so the length of the result is
    the index of the decomposition group of the ideal.
    """
    if not gens:
        return [[]]
    ring = _ring_over(ring or gens[0].ring, closure.tower.top)
    out = []
    for auto in closure.automorphisms:
        img = groebner([g.map_coeffs(auto, ring=ring) for g in gens], ring)
        if not any(ideal_equal(img, seen) for seen in out):
            out.append(img)
    return out


def _ground_coeff(x):
    """Tower element down to Q(t); descent output must never need more."""
    while isinstance(x, TowerElem):
        cs = x.rep.coeffs
        if len(cs) > 1:
            raise InternalConsistencyError(
                "orbit intersection keeps a proper tower coefficient"
            )
        x = cs[0] if cs else Fraction(0)
    return K.convert(x)


@dataclass
class DescentResult:
    """Maximal differential ideal over Q(t) with its Galois group.

    gens is the reduced basis over Q(t); ideal carries the derivation and
    the certification; group is the stabilizer inside GL_n over the
    constants; orbit_size counts the distinct conjugates intersected, which
    is also the index of the group of the tower-stage ideal.
    """

    closure: GaloisClosure
    ring: PolyRing
    gens: list
    ideal: DiffIdeal
    group: GroupIdeal
    orbit_size: int


def descend(gens, closure, A, ring=None):
    """Intersect the orbit of the ideal and contract it to Q(t).

    The intersection is stable under every automorphism and the closure has
    degree-many of those, so the reduced basis of the intersection already
    has coefficients in Q(t); a coefficient that stays in the tower is an
    internal error, not a property of the input.  The contraction is checked
    against re-extension, certified proper and differential, and returned
    with its stabilizer.
    """
    n = len(A)
    tower = closure.tower
    if ring is None:
        ring = gens[0].ring if gens else system_ring(n, tower.top)
    up_ring = _ring_over(ring, tower.top)
    imgs = orbit(gens, closure, up_ring)
    inter = intersect(imgs, up_ring)
    kring = _ring_over(up_ring, K)
    G = groebner([g.map_coeffs(_ground_coeff, ring=kring) for g in inter], kring)
    back = groebner([g.map_coeffs(tower.convert, ring=up_ring) for g in G], up_ring)
    if not ideal_equal(back, inter):
        raise InternalConsistencyError(
            "descended ideal does not re-extend to the orbit intersection"
        )
    if any(g.is_constant() and not g.is_zero() for g in G):
        raise InternalConsistencyError("descended ideal is the unit ideal")
    di = DiffIdeal(A, G, dom=K, ring=kring)
    ok, _, _ = is_delta_ideal(di)
    if not ok:
        raise InternalConsistencyError("descended ideal is not differential")
    group = stabilizer(di)
    return DescentResult(closure, kring, G, di, group, len(imgs))
