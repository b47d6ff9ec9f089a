import numpy as np
import pytest

from mdaposteriori.grid import TABLE1_LEVELS
from mdaposteriori.study import CSV_COLUMNS, format_csv, parse_levels, run_level


def test_preset_levels():
    levels = parse_levels("preset:table1")
    assert [name for name, _ in levels] == [f"zeta{k}" for k in range(1, 6)]
    assert levels[0][1] == TABLE1_LEVELS[0]


def test_level_list():
    levels = parse_levels("1, zeta3,0.25:0.25:0.25")
    assert [n for n, _ in levels] == ["zeta1", "zeta3", "0.25:0.25:0.25"]
    assert levels[2][1] == (0.25, 0.25, 0.25)


@pytest.mark.parametrize("text", ["", "7", "zetaX", "0.1:0.2"])
def test_bad_levels(text):
    with pytest.raises(ValueError):
        parse_levels(text)


def test_unknown_method():
    with pytest.raises(ValueError, match="unknown method"):
        run_level((0.25, 0.25, 0.25), "mpfa")


def test_row_layout_and_format():
    res = run_level((0.125, 0.25, 0.1), "tpfa", "coarse")
    text = format_csv([res.row()])
    header, row = text.splitlines()
    assert header.split(",")[:14] == list(CSV_COLUMNS[:14])
    assert header.split(",")[5:14] == ["eps_Omega2", "eps_Omega1", "eps_Gamma12", "M_h", "err_p", "err_u",
                                      "I_p", "I_u", "I_pu"]
    fields = row.split(",")
    assert fields[:2] == ["tpfa", "coarse"]
    for v in fields[2:]:
        mant, _, exp = v.partition("e")
        assert len(mant.replace("-", "").replace(".", "")) == 6 and exp
    assert text.endswith("\n") and "\r" not in text
    assert float(fields[CSV_COLUMNS.index("M_h")]) == pytest.approx(res.report.majorant, rel=1e-5)


def test_deterministic():
    a = format_csv([run_level((0.125, 0.25, 0.1), "rt0", "c").row()])
    b = format_csv([run_level((0.125, 0.25, 0.1), "rt0", "c").row()])
    assert a == b


def test_combined_index_uses_residual_term():
    res = run_level((0.125, 0.25, 0.1), "rt0")
    expect = 3 * res.report.majorant / (res.err_p + res.err_u + res.report.residual)
    assert res.indices.I_pu == pytest.approx(expect)
    assert np.isfinite(res.indices.I_p)
