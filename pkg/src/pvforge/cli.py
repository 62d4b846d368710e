"""Command line surface: bounds, single stages, the full run, verification.

Exit codes: 0 success, 2 a verification failed, 3 a bound or budget ran
out, 4 unreadable input.
"""

import argparse
import json
import math
import os
import sys

from .descent import descend, galois_closure
from .errors import (
    BoundExhaustedError,
    ParseError,
    SingularPointError,
    UnsupportedShapeError,
    VerificationError,
)
from .fields import TowerElem, format_ratfunc, format_tower_elem
from .ioformats import (
    format_descent_stage,
    format_gen,
    format_kbar_stage,
    format_result,
    format_series,
    format_toric_stage,
    parse_system,
    read_artifact,
)
from .pipeline import (
    PipelineConfig,
    dn_bound,
    kappa_bound,
    pv_ring,
    run_kbar,
    run_toric,
    verify_artifact,
)
from .relations import relation_space
from .series import fundamental_series, matrix_entry_series


def _build_parser():
    top = argparse.ArgumentParser(
        prog="pvforge",
        description="Picard-Vessiot rings and differential Galois groups over Q(t)",
    )
    sub = top.add_subparsers(dest="command", required=True)

    def stage(name, help_text, with_system=True):
        p = sub.add_parser(name, help=help_text)
        if with_system:
            p.add_argument("file", help="system file (n, A entries, config)")
            p.add_argument("--degree", type=int, help="relation degree bound")
            p.add_argument(
                "--order", type=int, help="extra series truncation margin"
            )
            p.add_argument("--point", help="base point t0 (rational)")
            p.add_argument(
                "--char-degree", type=int, help="character degree for the closure stage"
            )
            p.add_argument(
                "--tower-budget", type=int, help="total extension degree budget"
            )
            p.add_argument(
                "--dump-series",
                action="store_true",
                help="print the fundamental solution to the working order",
            )
        p.add_argument("--json", action="store_true", help="machine-readable output")
        p.add_argument("--outdir", help="directory for stage artifacts")
        return p

    b = sub.add_parser("bounds", help="print the degree bounds for a system size")
    b.add_argument("n", type=int)
    b.add_argument("--json", action="store_true")

    stage("relations", "relation ideal of the fundamental solution")
    stage("toric", "radical relation ideal with its stabilizer")
    stage("kbar", "maximal differential ideal over the splitting tower")

    d = sub.add_parser("descend", help="descend a tower-stage ideal to Q(t)")
    d.add_argument("file", help="kbar stage artifact")
    d.add_argument("--tower-budget", type=int, help="total extension degree budget")
    d.add_argument("--json", action="store_true")
    d.add_argument("--outdir", help="directory for stage artifacts")

    stage("pv", "full three-stage run with certification")

    v = sub.add_parser("verify", help="replay all certificates of a result file")
    v.add_argument("file", help="result artifact")
    v.add_argument("--order", type=int, help="series order for the vanishing check")
    v.add_argument("--json", action="store_true")
    return top


def _fmt_cert(c):
    if isinstance(c, TowerElem):
        return format_tower_elem(c)
    return format_ratfunc(c)


def _read_file(path):
    try:
        with open(path, "r") as fh:
            return fh.read()
    except OSError as exc:
        raise ParseError("cannot read %s: %s" % (path, exc))


def _load_system(args):
    A, overrides = parse_system(_read_file(args.file))
    for flag, key in (
        ("degree", "degree"),
        ("order", "margin"),
        ("point", "point"),
        ("char_degree", "char_degree"),
        ("tower_budget", "tower_budget"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    config = PipelineConfig()
    for key, value in overrides.items():
        if not hasattr(config, key):
            raise ParseError("unknown config key %r" % (key,))
        setattr(config, key, value)
    return A, config


def _write_outdir(outdir, name, text):
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, name)
    with open(path, "w") as fh:
        fh.write(text)
    print("wrote %s" % (path,))


def _emit(args, payload, text_lines):
    if args.json:
        print(json.dumps(payload, sort_keys=True, indent=2))
    else:
        for line in text_lines:
            print(line)


def _dump_series(A, t0, order):
    F = fundamental_series(A, t0, order)
    n = len(A)
    out = []
    for i in range(n):
        for j in range(n):
            out.append(
                "F[%d][%d] = %s" % (i + 1, j + 1, format_series(matrix_entry_series(F, i, j)))
            )
    return out


def cmd_bounds(args):
    n = args.n
    d = dn_bound(n)
    kb = kappa_bound(n)
    if n >= 2 and 3 * n * n * math.log10(4 * n) > 4000:
        d_text = "%d^%d" % (4 * n, 3 * n * n)
    else:
        d_text = str(d)
    payload = {
        "n": n,
        "d": d_text,
        "kappa": kb.text,
        "kappa_leading": "%d^%d" % (kb.leading_base, kb.leading_exponent),
    }
    _emit(
        args,
        payload,
        ["d(%d) = %s" % (n, d_text), "kappa(%d): %s" % (n, kb.text)],
    )
    return 0


def cmd_relations(args):
    A, config = _load_system(args)
    from .pipeline import base_points, _with_base_points

    nu = config.degree if config.degree is not None else dn_bound(len(A))
    margin = config.margin if config.margin is not None else 16
    log = []
    t0, rel = _with_base_points(
        A,
        config,
        lambda t0: relation_space(
            A, nu, t0=t0, coeff_degree=config.coeff_degree, margin=margin
        ),
        log,
    )
    cert = rel.certificate
    lines = ["t0 = %s" % (t0,), "kernel dimension %d" % (rel.kernel_dim,)]
    lines += [
        "certificate: delta %s, cofactors %s, vanishing %s"
        % (cert.delta_ok, cert.cofactors_regular, cert.vanishes_at_point)
    ]
    lines += ["relation %s" % (format_gen(g),) for g in rel.gens]
    if args.dump_series:
        lines += _dump_series(A, t0, config.series_order)
    payload = {
        "t0": str(t0),
        "kernel_dim": rel.kernel_dim,
        "certificate_ok": cert.accepted(),
        "relations": [format_gen(g) for g in rel.gens],
        "log": log,
    }
    _emit(args, payload, lines)
    return 0


def cmd_toric(args):
    A, config = _load_system(args)
    t0, toric, log = run_toric(A, config)
    lines = ["t0 = %s" % (t0,)]
    if toric.radical_assumed:
        lines.append("radical: shape outside the certified cases, taken as given")
    lines += ["toric %s" % (format_gen(g),) for g in toric.gens]
    lines += ["group %s" % (format_gen(g),) for g in toric.group.gb]
    if args.dump_series:
        lines += _dump_series(A, t0, config.series_order)
    payload = {
        "t0": str(t0),
        "toric": [format_gen(g) for g in toric.gens],
        "group": [format_gen(g) for g in toric.group.gb],
        "log": log,
    }
    _emit(args, payload, lines)
    if args.outdir:
        _write_outdir(args.outdir, "toric.txt", format_toric_stage(A, t0, toric, config))
    return 0


def cmd_kbar(args):
    A, config = _load_system(args)
    t0, toric, kbar, log = run_kbar(A, config)
    lines = ["t0 = %s" % (t0,)]
    lines += [
        "level %s : minimal polynomial degree %d" % (lvl.name, lvl.ext_degree())
        for lvl in kbar.tower.levels
    ]
    lines += [
        "character certificate %s" % (_fmt_cert(ch.certificate),)
        for ch in kbar.characters
    ]
    lines += ["lattice relation %s" % (rel.vector,) for rel in kbar.relations]
    lines += ["kbar %s" % (format_gen(g),) for g in kbar.gens]
    if args.dump_series:
        lines += _dump_series(A, t0, config.series_order)
    payload = {
        "t0": str(t0),
        "tower": [
            {"name": lvl.name, "degree": lvl.ext_degree()}
            for lvl in kbar.tower.levels
        ],
        "characters": [_fmt_cert(ch.certificate) for ch in kbar.characters],
        "gens": [format_gen(g) for g in kbar.gens],
        "log": log,
    }
    _emit(args, payload, lines)
    if args.outdir:
        _write_outdir(
            args.outdir, "kbar.txt", format_kbar_stage(A, t0, toric, kbar, config)
        )
    return 0


def cmd_descend(args):
    art = read_artifact(_read_file(args.file))
    if art.kind != "kbar":
        raise ParseError("descend needs a kbar stage file, got %r" % (art.kind,))
    if art.A is None:
        raise ParseError("stage file carries no system matrix")
    if args.tower_budget is not None:
        art.tower.degree_budget = args.tower_budget
    closure = galois_closure(art.tower)
    res = descend(art.kbar_gens, closure, art.A, ring=art.tower_ring())
    lines = ["closure degree %d, %d automorphisms" % (
        closure.tower.degree(), closure.order())]
    lines.append("orbit size %d" % (res.orbit_size,))
    lines += ["m %s" % (format_gen(g),) for g in res.gens]
    lines += ["group %s" % (format_gen(g),) for g in res.group.gb]
    payload = {
        "closure_degree": closure.tower.degree(),
        "orbit_size": res.orbit_size,
        "m": [format_gen(g) for g in res.gens],
        "group": [format_gen(g) for g in res.group.gb],
    }
    _emit(args, payload, lines)
    if args.outdir:
        _write_outdir(
            args.outdir,
            "descent.txt",
            format_descent_stage(art.A, art.point, closure, res),
        )
    return 0


def cmd_pv(args):
    A, config = _load_system(args)
    result = pv_ring(A, config)
    lines = ["t0 = %s" % (result.t0,)]
    lines += [
        "level %s : minimal polynomial degree %d" % (lvl.name, lvl.ext_degree())
        for lvl in result.kbar.tower.levels
    ]
    lines += ["toric %s" % (format_gen(g),) for g in result.toric.gens]
    lines += ["kbar %s" % (format_gen(g),) for g in result.kbar.gens]
    lines += ["m %s" % (format_gen(g),) for g in result.gens]
    lines += ["group %s" % (format_gen(g),) for g in result.group.gb]
    lines += ["log %s" % (entry,) for entry in result.log]
    if args.dump_series:
        lines += _dump_series(result.A, result.t0, config.series_order)
    payload = {
        "t0": str(result.t0),
        "toric": [format_gen(g) for g in result.toric.gens],
        "kbar": [format_gen(g) for g in result.kbar.gens],
        "m": [format_gen(g) for g in result.gens],
        "group": [format_gen(g) for g in result.group.gb],
        "log": result.log,
    }
    _emit(args, payload, lines)
    if args.outdir:
        _write_outdir(args.outdir, "result.txt", format_result(result))
        _write_outdir(
            args.outdir,
            "toric.txt",
            format_toric_stage(result.A, result.t0, result.toric, config),
        )
        _write_outdir(
            args.outdir,
            "kbar.txt",
            format_kbar_stage(result.A, result.t0, result.toric, result.kbar, config),
        )
        _write_outdir(
            args.outdir,
            "descent.txt",
            format_descent_stage(
                result.A, result.t0, result.closure, result.descent
            ),
        )
    return 0


def cmd_verify(args):
    art = read_artifact(_read_file(args.file))
    report = verify_artifact(art, series_order=args.order)
    payload = {
        "ok": report.ok,
        "items": [
            {"name": name, "ok": ok, "detail": detail}
            for name, ok, detail in report.items
        ],
    }
    _emit(args, payload, report.lines())
    return 0 if report.ok else 2


HANDLERS = {
    "bounds": cmd_bounds,
    "relations": cmd_relations,
    "toric": cmd_toric,
    "kbar": cmd_kbar,
    "descend": cmd_descend,
    "pv": cmd_pv,
    "verify": cmd_verify,
}


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        return HANDLERS[args.command](args)
    except ParseError as exc:
        print("error: %s" % (exc,), file=sys.stderr)
        return 4
    except (BoundExhaustedError, SingularPointError, UnsupportedShapeError) as exc:
        print("error: %s" % (exc,), file=sys.stderr)
        return 3
    except VerificationError as exc:
        print("error: %s" % (exc,), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
