"""Text formats for systems, stage artifacts, and finished results.

One line-oriented grammar covers everything: `key rest-of-line` with `#`
comments.  System files carry `n`, one `A` line per matrix entry in row
order, and optional config overrides.  Stage artifacts open with
`pvforge <kind>` and add tower levels, generators, and the certificate log,
written so that reading them back reproduces the objects exactly; that is
what makes every stage independently re-runnable.
"""

from fractions import Fraction

from .errors import ParseError
from .fields import (
    K,
    FieldTower,
    UPoly,
    format_ratfunc,
    format_upoly,
    parse_ratfunc,
)
from .ideals import group_ring, system_ring
from .mpoly import PolyRing, format_mpoly, parse_mpoly

CONFIG_KEYS = (
    "degree",
    "coeff_degree",
    "margin",
    "point",
    "char_degree",
    "tower_budget",
    "poly_degree_cap",
    "point_budget",
    "series_order",
    "recenter_cap",
)


def _lines(text):
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield line


def _split(line):
    parts = line.split(None, 1)
    return parts[0], parts[1].strip() if len(parts) > 1 else ""


def parse_config_value(key, value):
    if key == "point":
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError):
            raise ParseError("bad point %r" % (value,))
    try:
        return int(value)
    except ValueError:
        raise ParseError("bad value %r for %s" % (value, key))


def parse_system(text):
    """System file -> (A, config overrides).

    Expected fields: `n <size>`, then n*n `A <entry>` lines in row order;
    any config key may follow.  Entries are rational functions of t.
    """
    n = None
    entries = []
    config = {}
    for line in _lines(text):
        key, rest = _split(line)
        if key == "pvforge":
            if rest != "system":
                raise ParseError("expected a system file, found %r" % (rest,))
        elif key == "n":
            n = parse_config_value("n", rest)
        elif key == "A":
            entries.append(parse_ratfunc(rest))
        elif key in CONFIG_KEYS:
            config[key] = parse_config_value(key, rest)
        else:
            raise ParseError("unknown field %r in system file" % (key,))
    if n is None:
        raise ParseError("system file never sets n")
    if n < 1:
        raise ParseError("n must be positive")
    if len(entries) != n * n:
        raise ParseError(
            "expected %d matrix entries, found %d" % (n * n, len(entries))
        )
    A = [entries[i * n : (i + 1) * n] for i in range(n)]
    return A, config


def format_system(A, config=None):
    out = ["pvforge system", "n %d" % (len(A),)]
    for row in A:
        for a in row:
            out.append("A %s" % (format_ratfunc(a),))
    out.extend(_config_lines(config, with_point=True))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# stage artifacts


class Artifact:
    """Parsed stage file: the raw pieces a stage needs to resume or verify.

    Sections that a kind does not carry stay at their defaults; rings are
    rebuilt from n and the tower, so generators parse into fresh objects
    that compare equal to the originals coefficient by coefficient.
    """

    def __init__(self, kind, n):
        self.kind = kind
        self.n = n
        self.A = None
        self.point = None
        self.config = {}
        self.tower = FieldTower()
        self.toric_gens = []
        self.kbar_gens = []
        self.m_gens = []
        self.group_gens = []
        self.log = []
        self._rings = {}

    @property
    def atoms(self):
        top = self.tower.top
        return {lvl.name: top.convert(lvl.gen) for lvl in self.tower.levels}

    def ground_ring(self):
        return self._rings.setdefault("ground", system_ring(self.n))

    def tower_ring(self):
        key = ("tower", len(self.tower.levels))
        if key not in self._rings:
            self._rings[key] = system_ring(self.n, self.tower.top)
        return self._rings[key]

    def group_ring(self):
        return self._rings.setdefault("group", group_ring(self.n))


def read_artifact(text):
    kind = None
    art = None
    pending = []
    for line in _lines(text):
        key, rest = _split(line)
        if kind is None:
            if key != "pvforge":
                raise ParseError("stage file must open with a pvforge header")
            kind = rest
            if kind not in ("toric", "kbar", "descent", "result"):
                raise ParseError("unknown stage kind %r" % (kind,))
            continue
        if art is None:
            if key != "n":
                raise ParseError("stage file must set n before anything else")
            art = Artifact(kind, parse_config_value("n", rest))
            continue
        if key == "A":
            pending.append(parse_ratfunc(rest))
        elif key == "point":
            art.point = Fraction(rest)
        elif key in CONFIG_KEYS:
            art.config[key] = parse_config_value(key, rest)
        elif key == "level":
            _read_level(art, rest)
        elif key == "toric":
            art.toric_gens.append(_read_gen(art, art.ground_ring(), rest))
        elif key == "kbar":
            art.kbar_gens.append(_read_gen(art, art.tower_ring(), rest))
        elif key == "m":
            art.m_gens.append(_read_gen(art, art.ground_ring(), rest))
        elif key == "group":
            art.group_gens.append(parse_mpoly(art.group_ring(), rest))
        elif key == "log":
            art.log.append(rest)
        else:
            raise ParseError("unknown field %r in stage file" % (key,))
    if art is None:
        raise ParseError("empty stage file")
    n = art.n
    if pending:
        if len(pending) != n * n:
            raise ParseError(
                "expected %d matrix entries, found %d" % (n * n, len(pending))
            )
        art.A = [pending[i * n : (i + 1) * n] for i in range(n)]
    return art


def _read_level(art, rest):
    if ":" not in rest:
        raise ParseError("level line needs `name : minimal polynomial`")
    name, poly_text = (piece.strip() for piece in rest.split(":", 1))
    if not name.isidentifier():
        raise ParseError("bad level name %r" % (name,))
    top = art.tower.top
    ring = PolyRing((name,), top)
    p = parse_mpoly(ring, poly_text, atoms=art.atoms)
    deg = p.total_degree()
    coeffs = tuple(p.coeff_of((i,)) for i in range(deg + 1))
    budget = art.config.get("tower_budget")
    if budget is not None:
        art.tower.degree_budget = budget
    art.tower.adjoin(UPoly(top, coeffs), name=name)


def _read_gen(art, ring, text):
    return parse_mpoly(ring, text, atoms=art.atoms)


def format_gen(p):
    return format_mpoly(p)


def format_series(ts):
    """Truncated series in tau = t - t0, lowest order first."""
    pieces = []
    for i, c in enumerate(ts.coeffs):
        if c == ts.dom.zero:
            continue
        cs = str(c)
        if i == 0:
            term = cs
        else:
            v = "tau" if i == 1 else "tau^%d" % (i,)
            if cs == "1":
                term = v
            elif cs == "-1":
                term = "-" + v
            else:
                term = "%s*%s" % (cs, v)
        pieces.append(term)
    if not pieces:
        return "O(tau^%d)" % (ts.order,)
    body = pieces[0]
    for term in pieces[1:]:
        if term.startswith("-"):
            body += " - " + term[1:]
        else:
            body += " + " + term
    return "%s + O(tau^%d)" % (body, ts.order)


def _level_lines(tower):
    return [
        "level %s : %s" % (lvl.name, format_upoly(lvl.minpoly, lvl.name))
        for lvl in tower.levels
    ]


def _config_lines(config, with_point=False):
    """Only the knobs that were actually turned; defaults stay implicit."""
    if config is None:
        return []
    if isinstance(config, dict):
        getter, baseline = config.get, {}.get
    else:
        default = type(config)()
        getter = lambda key: getattr(config, key, None)
        baseline = lambda key: getattr(default, key, None)
    out = []
    for key in CONFIG_KEYS:
        if key == "point" and not with_point:
            continue
        value = getter(key)
        if value is not None and value != baseline(key):
            out.append("%s %s" % (key, value))
    return out


def _header_lines(kind, A, t0, config):
    out = ["pvforge %s" % (kind,), "n %d" % (len(A),)]
    if t0 is not None:
        out.append("point %s" % (t0,))
    for row in A:
        for a in row:
            out.append("A %s" % (format_ratfunc(a),))
    if config is not None:
        out.extend(_config_lines(config))
    return out


def format_toric_stage(A, t0, toric, config=None):
    out = _header_lines("toric", A, t0, config)
    for g in toric.gens:
        out.append("toric %s" % (format_gen(g),))
    for g in toric.group.gb:
        out.append("group %s" % (format_gen(g),))
    return "\n".join(out) + "\n"


def format_kbar_stage(A, t0, toric, kbar, config=None):
    """Everything the descent stage needs to resume from a tower ideal."""
    out = _header_lines("kbar", A, t0, config)
    out.extend(_level_lines(kbar.tower))
    for g in toric.gens:
        out.append("toric %s" % (format_gen(g),))
    for g in kbar.gens:
        out.append("kbar %s" % (format_gen(g),))
    return "\n".join(out) + "\n"


def format_descent_stage(A, t0, closure, des, config=None):
    out = _header_lines("descent", A, t0, config)
    out.extend(_level_lines(closure.tower))
    for g in des.gens:
        out.append("m %s" % (format_gen(g),))
    for g in des.group.gb:
        out.append("group %s" % (format_gen(g),))
    return "\n".join(out) + "\n"


def format_result(result):
    """Complete run as one auditable, re-verifiable document."""
    out = _header_lines("result", result.A, result.t0, result.config)
    out.extend(_level_lines(result.kbar.tower))
    for g in result.toric.gens:
        out.append("toric %s" % (format_gen(g),))
    for g in result.kbar.gens:
        out.append("kbar %s" % (format_gen(g),))
    for g in result.gens:
        out.append("m %s" % (format_gen(g),))
    for g in result.group.gb:
        out.append("group %s" % (format_gen(g),))
    for line in result.log:
        out.append("log %s" % (line,))
    return "\n".join(out) + "\n"
