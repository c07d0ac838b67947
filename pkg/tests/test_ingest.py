import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from xeqkit.errors import (
    DimensionMismatch,
    DuplicateRespondent,
    MissingColumn,
    MissingValue,
    ParseError,
    UnknownLabel,
    ValidationError,
)
from xeqkit.ingest import (
    PATTERN_RESPONSE,
    UNDER_TIME,
    PatternRule,
    apply_attention_filters,
    is_pattern_response,
    load_responses,
    longest_run,
    pair_retest,
    write_responses,
)
from xeqkit.scale import ResponseMatrix, RespondentMeta

HEADER = "respondent_id,group,duration_seconds,allocated_seconds," + ",".join(f"item_{k}" for k in range(1, 19))


def _row(rid, codes, group="Positive", duration=600, allocated=600):
    return ",".join([rid, group, str(duration), str(allocated)] + [str(c) for c in codes])


def _write(tmp_path, *rows, header=HEADER):
    p = tmp_path / "r.csv"
    p.write_text("\n".join([header, *rows]) + "\n")
    return p


def test_fixture_loads(fixtures_dir, scale):
    m, rejected = load_responses(fixtures_dir / "responses.csv", scale)
    assert m.n_respondents == 123 and rejected == []
    assert set(m.groups) == {"Positive", "Negative"}
    assert {r.domain for r in m.respondents} == {"D1", "D2", "D3"}


def test_labels_and_codes_both_accepted(tmp_path, scale):
    codes = ["Strongly Agree"] + [3] * 17
    m, _ = load_responses(_write(tmp_path, _row("a", codes), _row("b", [2] * 18)), scale)
    assert m.values[0, 0] == 5


def test_out_of_range_code_names_row_and_column(tmp_path, scale):
    p = _write(tmp_path, _row("a", [3] * 18), _row("b", [3] * 4 + [7] + [3] * 13))
    with pytest.raises(ParseError, match=r":3, column item_5"):
        load_responses(p, scale)


def test_unknown_label(tmp_path, scale):
    with pytest.raises(UnknownLabel, match="item_1"):
        load_responses(_write(tmp_path, _row("a", ["Sometimes"] + [3] * 17)), scale)


def test_missing_column(tmp_path, scale):
    with pytest.raises(MissingColumn, match="item_18"):
        load_responses(_write(tmp_path, header="respondent_id,group,duration_seconds,allocated_seconds,item_1"), scale)


def test_extra_item_column(tmp_path, scale):
    header = HEADER + ",item_19"
    with pytest.raises(DimensionMismatch):
        load_responses(_write(tmp_path, _row("a", [3] * 19), header=header), scale)


def test_blank_cells_listwise_or_strict(tmp_path, scale):
    p = _write(tmp_path, _row("a", [3] * 18), _row("b", [""] + [3] * 17), _row("c", [4] * 18))
    m, rejected = load_responses(p, scale)
    assert m.respondent_ids == ["a", "c"]
    assert [(r.line, r.respondent_id) for r in rejected] == [(3, "b")]
    with pytest.raises(MissingValue):
        load_responses(p, scale, strict_missing=True)


def test_duplicate_ids(tmp_path, scale):
    with pytest.raises(DuplicateRespondent):
        load_responses(_write(tmp_path, _row("a", [3] * 18), _row("a", [4] * 18)), scale)


def test_missing_file(tmp_path, scale):
    with pytest.raises(ValidationError, match="nope.csv"):
        load_responses(tmp_path / "nope.csv", scale)


def test_write_then_read_roundtrip(tmp_path, fixtures_dir, scale):
    m, _ = load_responses(fixtures_dir / "responses.csv", scale)
    write_responses(m, tmp_path / "copy.csv")
    again, _ = load_responses(tmp_path / "copy.csv", scale)
    assert again.respondents == m.respondents
    np.testing.assert_array_equal(again.values, m.values)


@given(st.lists(st.integers(1, 5), min_size=1, max_size=30))
def test_longest_run_bounds(row):
    r = longest_run(row)
    assert 1 <= r <= len(row)
    assert (r == len(row)) == (len(set(row)) == 1)


def test_pattern_rules():
    rule = PatternRule()
    assert is_pattern_response([3] * 18, rule)
    assert is_pattern_response([4] * 15 + [1, 2, 3], rule)       # run 15 >= 0.8 * 18
    assert not is_pattern_response([4] * 14 + [1, 2, 3, 5], rule)
    assert not is_pattern_response([4] * 15 + [1, 2, 3], PatternRule(max_run_fraction=None))
    with pytest.raises(ValidationError):
        PatternRule(max_run_fraction=0)


def test_attention_filters_order_and_reasons(scale):
    values = np.array([[1, 2, 3, 4, 5, 1] * 3, [3] * 18, [3] * 18, [2, 4] * 9])
    meta = (
        RespondentMeta("ok", duration=600, allocated_duration=600),
        RespondentMeta("flat", duration=600, allocated_duration=600),
        RespondentMeta("fast_flat", duration=100, allocated_duration=600),
        RespondentMeta("untimed"),
    )
    rep = apply_attention_filters(ResponseMatrix(scale, meta, values))
    assert rep.excluded == (("flat", PATTERN_RESPONSE), ("fast_flat", UNDER_TIME))
    assert rep.retained.respondent_ids == ["ok", "untimed"]


def test_exactly_half_time_is_kept(scale):
    meta = (RespondentMeta("half", duration=300, allocated_duration=600),)
    rep = apply_attention_filters(ResponseMatrix(scale, meta, [[1, 2] * 9]))
    assert rep.excluded == ()


def test_everyone_excluded_gives_none(scale):
    rep = apply_attention_filters(ResponseMatrix.from_codes(scale, np.full((2, 18), 3)))
    assert rep.retained is None and rep.to_dict()["n_retained"] == 0


def test_pair_retest_inner_join(scale):
    a = ResponseMatrix.from_codes(scale, np.full((3, 18), 3), ids=["x", "y", "z"])
    b = ResponseMatrix.from_codes(scale, np.full((3, 18), 4), ids=["z", "w", "x"], wave="Retest")
    pairs = pair_retest(a, b)
    assert pairs.ids == ("x", "z")
    assert pairs.unmatched_test == ("y",) and pairs.unmatched_retest == ("w",)
    t, r = pairs.totals()
    assert t.tolist() == [54, 54] and r.tolist() == [72, 72]
