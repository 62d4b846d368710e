"""Parsing and printing of system files, stage artifacts, and results."""

from fractions import Fraction

import pytest

from pvforge.errors import ParseError
from pvforge.fields import K, QQ, parse_ratfunc
from pvforge.ideals import groebner, ideal_equal
from pvforge.ioformats import (
    format_descent_stage,
    format_kbar_stage,
    format_result,
    format_series,
    format_system,
    format_toric_stage,
    parse_system,
    read_artifact,
)
from pvforge.mpoly import parse_mpoly
from pvforge.pipeline import (
    PipelineConfig,
    pv_ring,
    run_kbar,
    run_toric,
    verify_artifact,
)
from pvforge.series import TruncSeries


def rf(s):
    return parse_ratfunc(s)


SQRT = [[rf("1/(2*t)")]]


# ---------------------------------------------------------------------------
# system files


def test_parse_system_minimal():
    A, config = parse_system("pvforge system\nn 1\nA 1/(2*t)\n")
    assert len(A) == 1 and A[0][0] == rf("1/(2*t)")
    assert config == {}


def test_parse_system_magic_line_is_optional():
    A, _ = parse_system("n 1\nA t\n")
    assert A[0][0] == K.gen


def test_parse_system_comments_and_blanks():
    text = "# a comment\n\npvforge system\nn 2\nA 0\nA 1\nA -t\nA 0\n# done\n"
    A, _ = parse_system(text)
    assert A[1][0] == rf("-t")


def test_parse_system_config_keys():
    text = "n 1\nA t\ndegree 4\npoint 1/3\ntower_budget 8\n"
    _, config = parse_system(text)
    assert config == {"degree": 4, "point": Fraction(1, 3), "tower_budget": 8}


def test_parse_system_rejects_unknown_key():
    with pytest.raises(ParseError):
        parse_system("n 1\nA t\nfrobnicate 3\n")


def test_parse_system_rejects_wrong_entry_count():
    with pytest.raises(ParseError):
        parse_system("n 2\nA t\n")


def test_parse_system_requires_n():
    with pytest.raises(ParseError):
        parse_system("A t\n")


def test_parse_system_rejects_bad_value():
    with pytest.raises(ParseError):
        parse_system("n 1\nA t\ndegree lots\n")


def test_system_round_trip():
    A = [[rf("0"), rf("1")], [rf("-1/t^2"), rf("2*t/(t^2 + 1)")]]
    text = format_system(A, {"degree": 6, "point": Fraction(2)})
    B, config = parse_system(text)
    assert all(B[i][j] == A[i][j] for i in range(2) for j in range(2))
    assert config == {"degree": 6, "point": Fraction(2)}


def test_format_system_skips_default_config_values():
    text = format_system(SQRT, PipelineConfig(degree=2))
    assert "degree 2" in text
    # defaults stay implicit so files do not accrete noise
    assert "tower_budget" not in text and "series_order" not in text


# ---------------------------------------------------------------------------
# stage artifacts


def test_toric_stage_round_trip():
    cfg = PipelineConfig(degree=2)
    t0, toric, _ = run_toric(SQRT, cfg)
    art = read_artifact(format_toric_stage(SQRT, t0, toric, cfg))
    assert art.kind == "toric" and art.n == 1 and art.point == 1
    assert art.config == {"degree": 2}
    ring = art.ground_ring()
    assert ideal_equal(
        groebner(art.toric_gens, ring),
        groebner([parse_mpoly(ring, "X11^2 - t")], ring),
    )


def test_kbar_stage_round_trip():
    cfg = PipelineConfig(degree=2)
    t0, toric, kbar, _ = run_kbar(SQRT, cfg)
    art = read_artifact(format_kbar_stage(SQRT, t0, toric, kbar, cfg))
    assert art.kind == "kbar"
    assert [lvl.ext_degree() for lvl in art.tower.levels] == [2]
    assert len(art.kbar_gens) == 1
    # the generator mentions the tower element by name
    z = art.tower.top.convert(art.tower.levels[0].gen)
    x = art.tower_ring().var(0)
    assert art.kbar_gens[0] == x - art.tower_ring().const(z)


def test_result_round_trip_and_verification():
    res = pv_ring(SQRT, PipelineConfig(degree=2))
    art = read_artifact(format_result(res))
    assert art.kind == "result"
    assert len(art.m_gens) == 1 and len(art.group_gens) == 2
    assert art.log
    report = verify_artifact(art)
    assert report.ok
    names = [name for name, _, _ in report.items]
    assert any("recomputed stabilizer" in name for name in names)


def test_verify_artifact_rejects_stage_files():
    cfg = PipelineConfig(degree=2)
    t0, toric, _ = run_toric(SQRT, cfg)
    art = read_artifact(format_toric_stage(SQRT, t0, toric, cfg))
    with pytest.raises(ParseError):
        verify_artifact(art)


def test_verify_artifact_flags_a_tampered_ideal():
    res = pv_ring(SQRT, PipelineConfig(degree=2))
    text = format_result(res).replace("m X11^2 - t", "m X11 - 1")
    report = verify_artifact(read_artifact(text))
    assert not report.ok


def test_descent_stage_round_trip():
    res = pv_ring(SQRT, PipelineConfig(degree=2))
    text = format_descent_stage(res.A, res.t0, res.closure, res.descent)
    art = read_artifact(text)
    assert art.kind == "descent"
    assert len(art.m_gens) == 1 and len(art.group_gens) == 2
    ring = art.group_ring()
    assert ideal_equal(
        groebner(art.group_gens, ring),
        groebner([g for g in res.group.gb], ring),
    )


def test_read_artifact_rejects_unknown_kind():
    with pytest.raises(ParseError):
        read_artifact("pvforge banana\nn 1\n")


def test_read_artifact_requires_magic():
    with pytest.raises(ParseError):
        read_artifact("n 1\ntoric X11\n")


def test_read_artifact_needs_n_first():
    with pytest.raises(ParseError):
        read_artifact("pvforge toric\ntoric X11\n")


def test_read_artifact_rejects_bad_level():
    with pytest.raises(ParseError):
        read_artifact("pvforge kbar\nn 1\nlevel oops\n")


# ---------------------------------------------------------------------------
# series text


def test_format_series_orders_terms_upward():
    s = TruncSeries(QQ, (Fraction(1), Fraction(0), Fraction(-1, 2)))
    assert format_series(s) == "1 - 1/2*tau^2 + O(tau^3)"


def test_format_series_zero():
    s = TruncSeries(QQ, (Fraction(0),))
    assert format_series(s) == "O(tau^1)"
