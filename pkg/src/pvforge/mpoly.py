"""Sparse multivariate polynomials over the package's coefficient fields.

Rings fix a variable list, a coefficient domain, and a term order (grevlex,
lex, or a two-block elimination order).  Exponent vectors are tuples; terms
live in a dict.  Groebner machinery sits in ideals.py; this module supplies
the raw polynomial arithmetic, substitution, and parsing/printing.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import ParseError
from .fields import K, domain_of, parse_ratfunc


def _grevlex_key(e):
    return (sum(e), tuple(-x for x in reversed(e)))


def _lex_key(e):
    return tuple(e)


class PolyRing:
    """Polynomial ring data: names, coefficient domain, term order.

    order is "grevlex", "lex", or "block"; block orders eliminate the first
    `block` variables (compared grevlex), breaking ties grevlex on the rest.
    """

    def __init__(self, names, dom, order="grevlex", block=0):
        self.names = tuple(names)
        self.dom = dom
        self.order = order
        self.block = block
        self.n = len(self.names)
        if order == "block" and not (0 < block < self.n):
            raise ValueError("block size out of range")

    def key(self, e):
        if self.order == "grevlex":
            return _grevlex_key(e)
        if self.order == "lex":
            return _lex_key(e)
        if self.order == "block":
            b = self.block
            return _grevlex_key(e[:b]) + _grevlex_key(e[b:])
        raise ValueError("unknown order %r" % (self.order,))

    @property
    def zero(self):
        return MPoly(self, {})

    @property
    def one(self):
        return MPoly(self, {(0,) * self.n: self.dom.one})

    def var(self, i):
        e = [0] * self.n
        e[i] = 1
        return MPoly(self, {tuple(e): self.dom.one})

    def gens(self):
        return [self.var(i) for i in range(self.n)]

    def var_index(self, name):
        return self.names.index(name)

    def monomial(self, exps, coeff=None):
        c = self.dom.convert(coeff) if coeff is not None else self.dom.one
        if c == self.dom.zero:
            return self.zero
        return MPoly(self, {tuple(exps): c})

    def const(self, c):
        c = self.dom.convert(c)
        if c == self.dom.zero:
            return self.zero
        return MPoly(self, {(0,) * self.n: c})

    def from_dict(self, d):
        terms = {}
        for e, c in d.items():
            c = self.dom.convert(c)
            if c != self.dom.zero:
                terms[tuple(e)] = c
        return MPoly(self, terms)

    def with_order(self, order, block=0):
        return PolyRing(self.names, self.dom, order=order, block=block)

    def extended(self, extra_names, order=None, block=0):
        return PolyRing(
            self.names + tuple(extra_names),
            self.dom,
            order=order or self.order,
            block=block,
        )

    def compatible(self, other):
        return (
            isinstance(other, PolyRing)
            and self.names == other.names
            and self.dom is other.dom
        )

    def __repr__(self):
        return "PolyRing(%s; %r; %s)" % (
            ",".join(self.names),
            self.dom,
            self.order,
        )


class MPoly:
    __slots__ = ("ring", "terms")

    def __init__(self, ring, terms):
        self.ring = ring
        self.terms = terms

    def is_zero(self):
        return not self.terms

    def is_constant(self):
        return all(not any(e) for e in self.terms)

    def constant_value(self):
        if self.is_zero():
            return self.ring.dom.zero
        if not self.is_constant():
            raise ValueError("not a constant polynomial")
        return next(iter(self.terms.values()))

    def total_degree(self):
        if not self.terms:
            return -1
        return max(sum(e) for e in self.terms)

    def degree_in(self, i):
        if not self.terms:
            return -1
        return max(e[i] for e in self.terms)

    def leading(self):
        """(exps, coeff) of the leading term under the ring order."""
        if not self.terms:
            raise ValueError("leading term of zero")
        e = max(self.terms, key=self.ring.key)
        return e, self.terms[e]

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda ec: self.ring.key(ec[0]), reverse=True)

    def monic(self):
        if self.is_zero():
            return self
        _, c = self.leading()
        if c == self.ring.dom.one:
            return self
        inv = self.ring.dom.one / c
        return self.scale(inv)

    def scale(self, c):
        c = self.ring.dom.convert(c)
        if c == self.ring.dom.zero:
            return self.ring.zero
        return MPoly(self.ring, {e: v * c for e, v in self.terms.items()})

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.ring.const(other)
        if not isinstance(other, MPoly):
            return NotImplemented
        return self.ring.compatible(other.ring) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.keys()))

    def __neg__(self):
        return MPoly(self.ring, {e: -c for e, c in self.terms.items()})

    def _coerce(self, other):
        if isinstance(other, MPoly):
            return other
        return self.ring.const(other)

    def __add__(self, other):
        other = self._coerce(other)
        zero = self.ring.dom.zero
        out = dict(self.terms)
        for e, c in other.terms.items():
            s = out.get(e, zero) + c
            if s == zero:
                out.pop(e, None)
            else:
                out[e] = s
        return MPoly(self.ring, out)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, MPoly):
            try:
                return self.scale(other)
            except (TypeError, ValueError):
                return NotImplemented
        zero = self.ring.dom.zero
        out = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                s = out.get(e, zero) + c1 * c2
                if s == zero:
                    out.pop(e, None)
                else:
                    out[e] = s
        return MPoly(self.ring, out)

    def __rmul__(self, other):
        return self.scale(other)

    def __pow__(self, k):
        if k < 0:
            raise ValueError("negative power of a polynomial")
        out = self.ring.one
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base if k > 1 else base
            k >>= 1
        return out

    def __truediv__(self, other):
        if isinstance(other, MPoly):
            if not other.is_constant():
                raise ValueError("division only by constants")
            other = other.constant_value()
        inv = self.ring.dom.one / self.ring.dom.convert(other)
        return self.scale(inv)

    def map_coeffs(self, fn, ring=None):
        ring = ring or self.ring
        out = {}
        zero = ring.dom.zero
        for e, c in self.terms.items():
            v = fn(c)
            if v != zero:
                out[e] = v
        return MPoly(ring, out)

    def coeff_of(self, exps):
        return self.terms.get(tuple(exps), self.ring.dom.zero)

    def substitute(self, images):
        """Evaluate on images[i] for variable i; images are MPolys of one
        common ring (or constants of its domain)."""
        target = None
        for im in images:
            if isinstance(im, MPoly):
                target = im.ring
                break
        if target is None:
            raise ValueError("need at least one polynomial image")
        out = target.zero
        cache = {}
        for e, c in self.terms.items():
            term = target.const(c)
            for i, k in enumerate(e):
                if k == 0:
                    continue
                key = (i, k)
                if key not in cache:
                    im = images[i]
                    if not isinstance(im, MPoly):
                        im = target.const(im)
                    cache[key] = im**k
                term = term * cache[key]
            out = out + term
        return out

    def embed(self, ring, position=0):
        """Reinterpret in a ring that contains this ring's variables as a
        contiguous slice starting at `position`."""
        pad_before = position
        pad_after = ring.n - self.ring.n - position
        out = {}
        for e, c in self.terms.items():
            out[(0,) * pad_before + e + (0,) * pad_after] = ring.dom.convert(c)
        return MPoly(ring, out)

    def __repr__(self):
        return format_mpoly(self)


# ---------------------------------------------------------------------------
# printing and parsing


def format_mpoly(p):
    from .fields import _coeff_str

    if p.is_zero():
        return "0"
    ring = p.ring
    pieces = []
    for e, c in p.sorted_terms():
        vars_part = "*".join(
            ring.names[i] if k == 1 else "%s^%d" % (ring.names[i], k)
            for i, k in enumerate(e)
            if k
        )
        cs = _coeff_str(c)
        if not vars_part:
            term = cs
        elif cs == "1":
            term = vars_part
        elif cs == "-1":
            term = "-" + vars_part
        else:
            term = "%s*%s" % (cs, vars_part)
        pieces.append(term)
    out = pieces[0]
    for term in pieces[1:]:
        if term.startswith("-"):
            out += " - " + term[1:]
        else:
            out += " + " + term
    return out


def parse_mpoly(ring, text, atoms=None):
    """Parse polynomial text over the ring: variables, integers, t (when the
    coefficient field contains it), + - * / ^ and parentheses.

    atoms maps extra names to coefficient-domain elements, so text written
    over a tower can mention the tower generators by name."""
    tokens = _tokenize_mpoly(ring, text, atoms)
    pos = [0]

    def peek():
        return tokens[pos[0]] if pos[0] < len(tokens) else None

    def take():
        tok = peek()
        pos[0] += 1
        return tok

    def expr():
        node = term()
        while peek() in ("+", "-"):
            op = take()
            rhs = term()
            node = node + rhs if op == "+" else node - rhs
        return node

    def term():
        node = factor()
        while peek() in ("*", "/"):
            op = take()
            rhs = factor()
            if op == "*":
                node = node * rhs
            else:
                if not rhs.is_constant():
                    raise ParseError("division by a non-constant in %r" % (text,))
                node = node / rhs
        return node

    def factor():
        node = base()
        if peek() == "^":
            take()
            neg = peek() == "-"
            if neg:
                take()
            tok = take()
            if not (isinstance(tok, str) and tok.isdigit()):
                raise ParseError("bad exponent in %r" % (text,))
            if neg:
                raise ParseError("negative exponent on a polynomial in %r" % (text,))
            return node ** int(tok)
        return node

    def base():
        tok = take()
        if tok is None:
            raise ParseError("unexpected end of %r" % (text,))
        if tok == "(":
            node = expr()
            if take() != ")":
                raise ParseError("unbalanced parentheses in %r" % (text,))
            return node
        if tok == "-":
            return -factor()
        if tok == "+":
            return factor()
        if isinstance(tok, tuple) and tok[0] == "var":
            return ring.var(tok[1])
        if isinstance(tok, tuple) and tok[0] == "atom":
            return ring.const(ring.dom.convert(atoms[tok[1]]))
        if tok == "t":
            try:
                return ring.const(ring.dom.convert(K.gen))
            except TypeError:
                raise ParseError("t not available over %r" % (ring.dom,))
        if tok.isdigit():
            return ring.const(int(tok))
        raise ParseError("unexpected token %r in %r" % (tok, text))

    node = expr()
    if pos[0] != len(tokens):
        raise ParseError("trailing input in %r" % (text,))
    return node


def _tokenize_mpoly(ring, text, atoms=None):
    names = sorted(
        [(name, ("var", i)) for i, name in enumerate(ring.names)]
        + [(name, ("atom", name)) for name in (atoms or ())],
        key=lambda ni: -len(ni[0]),
    )
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "+-*/^()":
            tokens.append(ch)
            i += 1
            continue
        if ch.isdigit():
            j = i
            while j < len(text) and text[j].isdigit():
                j += 1
            tokens.append(text[i:j])
            i = j
            continue
        matched = False
        for name, tok in names:
            if text.startswith(name, i):
                tokens.append(tok)
                i += len(name)
                matched = True
                break
        if matched:
            continue
        if ch == "t":
            tokens.append("t")
            i += 1
            continue
        raise ParseError("bad character %r in %r" % (ch, text))
    return tokens
