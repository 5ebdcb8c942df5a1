from __future__ import annotations

import io
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flashchan.channels import BacParams, BbmParams, Dmc4Params, TwoPageModel
from flashchan.errordata import (
    GRAY_MAP,
    DatasetError,
    ErrorDataset,
    ErrorRecord,
    PageKind,
    average_rber,
    bits_to_level,
    cell_error_frequencies,
    dispersion_ratio,
    dump_dataset,
    dumps_dataset,
    error_map,
    frame_error_counts,
    level_to_bits,
    levels_to_pages,
    load_dataset,
    pages_to_levels,
    sample_moments,
    synthesize_dataset,
    write_moments_csv,
)
from flashchan.presets import cell_error_percentages, dmc4_params

from .conftest import BAC_PQ, BBM_A8000


def _bac_model(p, q):
    ch = BacParams(p, q)
    return TwoPageModel(ch, ch)


# --- cell levels and the Gray map -------------------------------------------

def test_gray_map_values():
    assert [level_to_bits(v) for v in range(4)] == [(1, 1), (1, 0), (0, 0), (0, 1)]


def test_gray_map_bijective_and_adjacent_levels_differ_in_one_bit():
    assert len(set(GRAY_MAP.values())) == 4
    for v in range(3):
        a, b = level_to_bits(v), level_to_bits(v + 1)
        assert sum(x != y for x, y in zip(a, b)) == 1
    for v in range(4):
        assert bits_to_level(*level_to_bits(v)) == v


@given(st.lists(st.integers(0, 3), min_size=1, max_size=50))
def test_levels_pages_round_trip(levels):
    lower, upper = levels_to_pages(levels)
    assert np.array_equal(pages_to_levels(lower, upper), levels)


def test_page_kind_parse():
    assert PageKind.parse("Lower") is PageKind.LOWER
    assert PageKind.parse(PageKind.UPPER) is PageKind.UPPER
    with pytest.raises(ValueError):
        PageKind.parse("middle")


# --- records and ingestion ---------------------------------------------------

def test_load_empty_stream():
    ds = load_dataset("")
    assert len(ds) == 0


def test_load_one_line_two_errors():
    line = '{"pe":8000,"block":0,"page":12,"kind":"lower","n":8192,"err":[[3,0],[97,1]]}\n'
    ds = load_dataset(line)
    assert len(ds) == 1
    rec = ds.records[0]
    assert rec.n_errors == 2
    assert rec.kind is PageKind.LOWER
    assert list(rec.positions) == [3, 97] and list(rec.directions) == [0, 1]


def test_duplicate_position_rejected_in_strict_mode():
    line = '{"pe":1,"block":0,"page":0,"kind":"upper","n":16,"err":[[3,0],[3,1]]}\n'
    with pytest.raises(DatasetError):
        load_dataset(line)


def test_lenient_mode_skips_and_counts():
    good = '{"pe":1,"block":0,"page":0,"kind":"upper","n":16,"err":[[3,0]]}'
    text = "\n".join([good, "not json", '{"pe":1}', good.replace('"page":0', '"page":1')]) + "\n"
    ds = load_dataset(text, strict=False)
    assert len(ds) == 2 and ds.skipped == 2


def test_frame_length_mismatch_always_aborts():
    a = '{"pe":1,"block":0,"page":0,"kind":"upper","n":16,"err":[]}'
    b = '{"pe":1,"block":0,"page":1,"kind":"upper","n":32,"err":[]}'
    with pytest.raises(DatasetError):
        load_dataset(a + "\n" + b + "\n", strict=False)


@pytest.mark.parametrize("bad", [
    '{"pe":1,"block":0,"page":0,"kind":"upper","n":16,"err":[[16,0]]}',
    '{"pe":1,"block":0,"page":0,"kind":"upper","n":16,"err":[[5,0],[2,1]]}',
    '{"pe":1,"block":0,"page":0,"kind":"upper","n":16,"err":[[5,2]]}',
    '{"pe":-1,"block":0,"page":0,"kind":"upper","n":16,"err":[]}',
    '{"pe":1,"block":0,"page":0,"kind":"side","n":16,"err":[]}',
])
def test_invalid_records_rejected(bad):
    with pytest.raises(DatasetError):
        load_dataset(bad + "\n")


def test_meta_line_and_binary_stream():
    ds = ErrorDataset(
        (ErrorRecord.from_errors(5, 1, 2, "upper", 8, [(1, 0), (6, 1)]),), vendor="X", chip="c7"
    )
    raw = dumps_dataset(ds).encode("utf-8")
    back = load_dataset(io.BytesIO(raw))
    assert back.vendor == "X" and back.chip == "c7" and back.frame_length == 8
    assert back.records == ds.records


def test_dump_extra_meta_is_ignored_on_load():
    ds = synthesize_dataset(_bac_model(0.1, 0.1), 3, 16, seed=1)
    buf = io.StringIO()
    dump_dataset(ds, buf, extra_meta={"provenance": {"seed": 1}})
    first = json.loads(buf.getvalue().splitlines()[0])
    assert first["meta"]["provenance"] == {"seed": 1}
    assert load_dataset(buf.getvalue()).records == ds.records


@given(
    st.integers(1, 3), st.integers(1, 40), st.integers(0, 2**31 - 1),
    st.floats(0, 1), st.floats(0, 1),
)
def test_synthesize_load_round_trip(n_frames, n, seed, p, q):
    ds = synthesize_dataset(_bac_model(p, q), n_frames, n, pe_cycle=7, seed=seed)
    back = load_dataset(dumps_dataset(ds))
    assert back.records == ds.records
    assert back.frame_length == ds.frame_length


# --- synthesis ---------------------------------------------------------------

def test_noiseless_synthesis_has_no_errors():
    ds = synthesize_dataset(_bac_model(0, 0), 10, 64, seed=3)
    assert all(r.n_errors == 0 for r in ds.records)


@pytest.mark.parametrize("method", ["counts", "bitwise"])
def test_all_flip_synthesis(method):
    ds = synthesize_dataset(_bac_model(1, 1), 5, 8, seed=3, method=method)
    assert all(r.n_errors == 8 for r in ds.records)


def test_synthesis_deterministic_per_seed():
    model = TwoPageModel(BbmParams(*BBM_A8000), BacParams(*BAC_PQ))
    a = synthesize_dataset(model, 20, 512, seed=11)
    b = synthesize_dataset(model, 20, 512, seed=11)
    c = synthesize_dataset(model, 20, 512, seed=12)
    assert a.records == b.records
    assert a.records != c.records


def test_synthesis_geometry():
    ds = synthesize_dataset(_bac_model(0.01, 0.01), 70, 32, seed=0, pages_per_block=64)
    lower = ds.select("lower")
    upper = ds.select("upper")
    assert len(lower) == len(upper) == 70
    assert {r.page % 2 for r in lower} == {0} and {r.page % 2 for r in upper} == {1}
    assert sorted({r.block for r in ds.records}) == [0, 1, 2]


def test_frames_per_page_groups_frames():
    ds = synthesize_dataset(_bac_model(0.01, 0.01), 10, 32, seed=0, frames_per_page=4)
    assert ds.frame_length == 128
    counts = frame_error_counts(ds, "lower", frame_length=32)
    assert counts.k.size == 12  # 3 pages x 4 frames


def test_return_levels_only_for_cell_model():
    with pytest.raises(ValueError):
        synthesize_dataset(_bac_model(0.1, 0.1), 2, 8, return_levels=True)
    ds, written, read = synthesize_dataset(dmc4_params("A"), 3, 16, seed=2, return_levels=True)
    assert written.shape == read.shape == (48,)
    lw, uw = levels_to_pages(written)
    lr, ur = levels_to_pages(read)
    lower = np.concatenate([r.error_vector() for r in ds.select("lower")])
    assert np.array_equal(lower, (lw != lr).astype(np.uint8))


def test_bac_synthesis_mean_matches_closed_form():
    p, q = BAC_PQ
    n = 8192
    ds = synthesize_dataset(_bac_model(p, q), 20000, n, seed=5)
    k = frame_error_counts(ds, "upper").k
    mean = n * (p + q) / 2
    var = n / 2 * ((p + q) - p * q - (p * p + q * q) / 2)
    assert abs(k.mean() - mean) < 3 * np.sqrt(var / k.size)


# --- counting and moments ----------------------------------------------------

def _dataset(*records):
    return ErrorDataset(tuple(records))


def test_frame_counts_direct():
    rec = ErrorRecord.from_errors(0, 0, 0, "lower", 16, [(3, 0), (9, 1)])
    c = frame_error_counts(_dataset(rec))
    assert list(c.k) == [2] and list(c.k0) == [1] and list(c.k1) == [1]


def test_frame_counts_split_semantics():
    rec = ErrorRecord.from_errors(0, 0, 0, "lower", 16, [(3, 0), (12, 1)])
    c = frame_error_counts(_dataset(rec), frame_length=8)
    assert list(c.k) == [1, 1]


def test_trailing_partial_frame_dropped():
    rec = ErrorRecord.from_errors(0, 0, 0, "lower", 20, [(3, 0), (18, 1)])
    c = frame_error_counts(_dataset(rec), frame_length=8)
    assert list(c.k) == [1, 0]


def test_frame_counts_empty_selection():
    rec = ErrorRecord.from_errors(0, 0, 0, "lower", 16, [])
    with pytest.raises(DatasetError):
        frame_error_counts(_dataset(rec), page_kind="upper")


@given(st.integers(0, 2**31 - 1), st.floats(0, 0.3), st.floats(0, 0.3))
def test_count_consistency(seed, p, q):
    ds = synthesize_dataset(_bac_model(p, q), 4, 48, seed=seed)
    c = frame_error_counts(ds, frame_length=16)
    assert np.array_equal(c.k, c.k0 + c.k1)
    assert c.k.sum() == sum(r.n_errors for r in ds.records)


def test_sample_moments_constant():
    m = sample_moments([5, 5, 5])
    assert m.mean_k == 5 and m.var_k == 0


def test_sample_moments_hand():
    m = sample_moments([0, 2])
    assert m.mean_k == 1 and m.var_k == 2
    assert np.isnan(m.mu1)


def test_sample_moments_needs_two():
    with pytest.raises(ValueError):
        sample_moments([3])


def test_sample_moments_raw_split():
    rec = ErrorRecord.from_errors(0, 0, 0, "upper", 8, [(0, 0), (1, 0), (5, 1)])
    rec2 = ErrorRecord.from_errors(0, 0, 1, "upper", 8, [(2, 1)])
    m = sample_moments(frame_error_counts(_dataset(rec, rec2)))
    # K0 = [2, 0], K1 = [1, 1]
    assert (m.mu1, m.mu2, m.mu3, m.mu4) == (1.0, 2.0, 1.0, 1.0)
    assert m.var0 == pytest.approx(2.0) and m.var1 == 0.0


def test_bbm_synthesized_moments_near_reference():
    ch = BbmParams(*BBM_A8000)
    ds = synthesize_dataset(TwoPageModel(ch, ch), 8000, 8192, seed=21)
    m = sample_moments(frame_error_counts(ds, "upper"))
    se = np.sqrt(57.8873 / m.n_frames)
    assert abs(m.mean_k - 32.0156) < 3 * se
    # sample variance of a BBM count has relative s.e. near 2% at this size
    assert m.var_k == pytest.approx(57.8873, rel=0.07)


def test_moments_csv_columns():
    buf = io.StringIO()
    m = sample_moments([1, 2, 3])
    write_moments_csv([(8000, "lower", m)], buf)
    header, row = buf.getvalue().splitlines()
    assert header == "pe,page,mean,var,mu1,mu2,mu3,mu4,n_frames"
    assert row.startswith("8000,lower,2.0,1.0,")


def test_dispersion_ratio():
    assert dispersion_ratio([4, 4, 4]) == 0.0
    with pytest.raises(ValueError):
        dispersion_ratio([0, 0])
    assert 84.81 / 30.03 == pytest.approx(2.824, abs=5e-4)
    rng = np.random.default_rng(9)
    x = rng.poisson(20.0, size=200000)
    # Var of the sample variance/mean ratio for Poisson: about 2/n
    assert abs(dispersion_ratio(x) - 1.0) < 3 * np.sqrt(2.0 / x.size)


# --- RBER --------------------------------------------------------------------

def test_average_rber_cases():
    ds = synthesize_dataset(_bac_model(0, 0), 5, 32, seed=1)
    assert average_rber(ds) == 0.0
    rec = ErrorRecord.from_errors(0, 0, 0, "lower", 8, [(4, 1)])
    assert average_rber(_dataset(rec)) == 0.125


def test_average_rber_equals_mean_k_over_n():
    ds = synthesize_dataset(_bac_model(*BAC_PQ), 300, 8192, seed=4)
    m = sample_moments(frame_error_counts(ds, "lower"))
    assert average_rber(ds, "lower") == m.mean_k / 8192


def test_average_rber_bac():
    p, q = BAC_PQ
    ds = synthesize_dataset(_bac_model(p, q), 5000, 8192, seed=8)
    r = (p + q) / 2
    n_bits = 5000 * 8192 * 2
    assert abs(average_rber(ds) - r) < 3 * np.sqrt(r * (1 - r) / n_bits)


# --- cell transitions ----------------------------------------------------------

def test_cell_frequencies_no_errors():
    m = cell_error_frequencies([0, 1, 2, 3], [0, 1, 2, 3])
    assert m.n_errors == 0 and not m.percentages.any()


def test_cell_frequencies_single_error():
    m = cell_error_frequencies([1], [2])
    expected = np.zeros((4, 4))
    expected[1, 2] = 100.0
    assert np.array_equal(m.percentages, expected)


def test_cell_frequencies_length_mismatch():
    with pytest.raises(ValueError):
        cell_error_frequencies([0, 1], [0])


@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=80))
def test_cell_percentages_sum_to_100(pairs):
    w, r = zip(*pairs)
    m = cell_error_frequencies(w, r)
    total = m.percentages.sum()
    assert total == 0 or abs(total - 100) < 0.01
    assert np.all(np.diag(m.percentages) == 0)


def test_cell_frequencies_recover_reference_table():
    params = dmc4_params("A")
    _, written, read = synthesize_dataset(params, 400, 8192, seed=13, return_levels=True)
    m = cell_error_frequencies(written, read)
    ref = cell_error_percentages("A")
    n_err = m.n_errors
    share = ref / 100
    sigma = 100 * np.sqrt(share * (1 - share) / n_err)
    assert np.all(np.abs(m.percentages - ref) <= 3 * sigma + 1e-9)
    assert abs(m.cell_error_rate - 4.16e-3) < 3 * np.sqrt(4.16e-3 / written.size)


def test_dmc4_from_percentages_row_stochastic():
    p = Dmc4Params.from_error_percentages(cell_error_percentages("B"), 2.71e-3)
    assert np.allclose(p.transition.sum(axis=1), 1, atol=1e-12)
    # the per-cell error rate averaged over uniform levels equals the target
    assert (1 - np.diag(p.transition)).mean() == pytest.approx(2.71e-3)


# --- error maps ----------------------------------------------------------------

def test_error_map_small():
    rec = ErrorRecord.from_errors(0, 3, 0, "lower", 8, [(0, 0), (1, 0), (2, 1), (5, 0)])
    em = error_map(_dataset(rec), block=3, frame_length=4)
    assert em.grid.tolist() == [[3, 1]]


def test_error_map_noiseless_and_missing_pages():
    ds = synthesize_dataset(_bac_model(0, 0), 3, 16, seed=0)
    recs = [r for r in ds.records if r.page != 1]
    em = error_map(ErrorDataset(tuple(recs)), block=0)
    assert em.pages == list(range(6))
    assert np.isnan(em.grid[1]).all()
    assert np.nansum(em.grid) == 0


def test_error_map_unknown_block():
    ds = synthesize_dataset(_bac_model(0, 0), 3, 16, seed=0)
    with pytest.raises(DatasetError):
        error_map(ds, block=9)


def test_error_map_overdispersed_rows():
    ch = BbmParams(*BBM_A8000)
    ds = synthesize_dataset(TwoPageModel(ch, ch), 32 * 16, 8192, seed=2, frames_per_page=16)
    em = error_map(ds, block=0, frame_length=8192)
    ratio = np.nanvar(em.grid, axis=1, ddof=1) / np.nanmean(em.grid, axis=1)
    assert ratio.mean() > 1.2
