from __future__ import annotations

import itertools
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import sparse, stats as sps

from flashchan.channels import BacParams
from flashchan.ecc import (
    BCH_8191,
    LLR_MAX,
    BoundedDistanceCode,
    LdpcDecoder,
    ParityCheckCode,
    QcLdpcCode,
    bd_decode,
    channel_llr,
    expand_shifts,
    girth,
    peg_construct_qc,
    rank2,
    read_alist,
    sp_decode,
    sp_decode_batch,
    write_alist,
)


def _tanner(H) -> nx.Graph:
    H = sparse.coo_matrix(H)
    g = nx.Graph()
    g.add_nodes_from(("v", j) for j in range(H.shape[1]))
    g.add_nodes_from(("c", i) for i in range(H.shape[0]))
    g.add_edges_from((("c", i), ("v", j)) for i, j in zip(H.row, H.col))
    return g


def _girth_by_enumeration(H) -> float:
    lengths = [len(c) for c in nx.simple_cycles(_tanner(H))]
    return min(lengths) if lengths else math.inf


@pytest.fixture(scope="module")
def small_code() -> QcLdpcCode:
    return peg_construct_qc(Z=16, dv=3, dc=4, n=64, seed=0)


@pytest.fixture(scope="module")
def tiny_code() -> QcLdpcCode:
    return peg_construct_qc(Z=4, dv=2, dc=4, n=16, seed=0)


def _bsc_llr(words, eps):
    return (1.0 - 2.0 * np.asarray(words, dtype=float)) * math.log((1 - eps) / eps)


# --- bounded distance ----------------------------------------------------------------

def test_bd_rule():
    assert bd_decode(0, BCH_8191)
    assert bd_decode(39, BCH_8191)
    assert not bd_decode(40, BCH_8191)
    assert bd_decode(np.array([0, 39, 40]), BCH_8191).tolist() == [True, True, False]
    with pytest.raises(ValueError):
        bd_decode(-1, BCH_8191)


@pytest.mark.parametrize("args", [(10, 10, 1), (10, 0, 1), (10, 5, -1)])
def test_bd_code_validated(args):
    with pytest.raises(ValueError):
        BoundedDistanceCode(*args)


@given(st.integers(0, 2**31 - 1), st.floats(1e-4, 0.05), st.floats(1e-4, 0.05),
       st.integers(0, 40), st.integers(64, 4096))
@settings(max_examples=25)
def test_bd_fer_matches_binomial_tail(seed, p, q, t, n):
    from flashchan.channels import sample_counts

    rng = np.random.default_rng(seed)
    frames = 20000
    k0, k1 = sample_counts(BacParams(p, q), n, frames, rng)
    fer = np.mean(~bd_decode(k0 + k1, BoundedDistanceCode(n, n // 2, t)))
    exact = sps.binom.sf(t, n, (p + q) / 2)
    assert abs(fer - exact) <= 3 * math.sqrt(exact * (1 - exact) / frames) + 3 / frames


# --- QC structure ---------------------------------------------------------------------

def test_expand_shift_convention():
    H = expand_shifts([[1, -1]], 3).toarray()
    # row r connects to column (r + s) mod Z
    assert H.tolist() == [[0, 1, 0, 0, 0, 0], [0, 0, 1, 0, 0, 0], [1, 0, 0, 0, 0, 0]]


@given(st.integers(1, 9).flatmap(lambda z: st.tuples(
    st.just(z),
    st.lists(st.lists(st.integers(-1, z - 1), min_size=3, max_size=3), min_size=2, max_size=4))))
def test_expanded_weights_follow_table(args):
    z, table = args
    code = QcLdpcCode.from_shifts(table, z)
    t = np.array(table)
    H = code.H.toarray()
    col_w = H.sum(axis=0).reshape(t.shape[1], z)
    row_w = H.sum(axis=1).reshape(t.shape[0], z)
    assert np.array_equal(col_w, np.repeat((t >= 0).sum(axis=0)[:, None], z, axis=1))
    assert np.array_equal(row_w, np.repeat((t >= 0).sum(axis=1)[:, None], z, axis=1))
    assert code.n == t.shape[1] * z


def test_from_shifts_validates():
    with pytest.raises(ValueError):
        QcLdpcCode.from_shifts([[4]], 4)
    with pytest.raises(ValueError):
        QcLdpcCode.from_shifts([[-2]], 4)


def test_code_json_round_trip(small_code):
    back = QcLdpcCode.from_json(small_code.to_json())
    assert np.array_equal(back.shift_table, small_code.shift_table)
    assert (back.H != small_code.H).nnz == 0
    assert (back.dv, back.dc, back.circulant_size) == (3, 4, 16)


def test_alist_round_trip(small_code):
    text = small_code.to_alist()
    assert text.splitlines()[0] == "64 48"
    H = read_alist(text)
    assert (H != small_code.H).nnz == 0
    irregular = sparse.csr_matrix(np.array([[1, 1, 0, 1], [0, 1, 0, 0], [1, 0, 0, 1]]))
    assert (read_alist(write_alist(irregular)) != irregular).nnz == 0


# --- girth and rank -------------------------------------------------------------------

def test_girth_four_cycle_fixture():
    H = np.array([[1, 1, 0], [1, 1, 1]])
    assert girth(H) == 4


def test_girth_acyclic():
    assert girth(np.array([[1, 1, 0, 0], [0, 0, 1, 1]])) == math.inf


def test_girth_six_cycle_fixture():
    H = np.array([[1, 1, 0], [0, 1, 1], [1, 0, 1]])
    assert girth(H) == 6


def test_tiny_peg_girth_by_exhaustive_cycle_search(tiny_code):
    g = girth(tiny_code)
    assert g >= 6
    assert g == _girth_by_enumeration(tiny_code.H)
    assert np.all(tiny_code.H.sum(axis=0) == 2)


@given(st.integers(0, 2**31 - 1), st.integers(3, 9), st.integers(4, 12), st.floats(0.15, 0.5))
@settings(max_examples=40)
def test_girth_matches_networkx(seed, m, n, density):
    rng = np.random.default_rng(seed)
    H = (rng.random((m, n)) < density).astype(np.uint8)
    expected = nx.girth(_tanner(H))
    assert girth(H) == expected


@given(st.integers(0, 2**31 - 1), st.sampled_from([(5, 2, 4, 20), (6, 3, 6, 36), (7, 2, 3, 21)]))
@settings(max_examples=20)
def test_qc_girth_shortcut_matches_full_search(seed, profile):
    z, dv, dc, n = profile
    rng = np.random.default_rng(seed)
    rows, cols = -(-dv * (n // z) // dc), n // z
    table = rng.integers(-1, z, size=(rows, cols))
    code = QcLdpcCode.from_shifts(table, z)
    assert girth(code) == nx.girth(_tanner(code.H))


def test_rank_examples():
    assert rank2(np.eye(6, dtype=np.uint8)) == 6
    # weight-2 columns: H is the incidence matrix of a union of cycles, so
    # rank = checks - components. Shift sum s00 - s01 + s11 - s10 decides
    # whether the 2x2 block structure closes into one cycle or several.
    one_cycle = QcLdpcCode.from_shifts([[0, 0], [0, 1]], 4)
    assert rank2(one_cycle) == 7 and one_cycle.k_effective == 1
    four_cycles = QcLdpcCode.from_shifts([[0, 1], [2, 3]], 4)
    assert rank2(four_cycles) == 4 and girth(four_cycles) == 4


# --- PEG construction -------------------------------------------------------------------

def test_peg_deterministic():
    a = peg_construct_qc(Z=16, dv=3, dc=4, n=64, seed=5)
    b = peg_construct_qc(Z=16, dv=3, dc=4, n=64, seed=5)
    c = peg_construct_qc(Z=16, dv=3, dc=4, n=64, seed=6)
    assert np.array_equal(a.shift_table, b.shift_table)
    assert not np.array_equal(a.shift_table, c.shift_table)


def test_peg_small_code_properties(small_code):
    assert small_code.shift_table.shape == (3, 4)
    assert np.all(np.asarray(small_code.H.sum(axis=0)) == 3)
    assert girth(small_code) == 8
    assert small_code.k_effective == 18


@pytest.mark.parametrize("profile", [(8, 3, 6, 48), (12, 3, 6, 60), (16, 2, 4, 64), (32, 4, 16, 512)])
def test_peg_profiles(profile):
    z, dv, dc, n = profile
    code = peg_construct_qc(z, dv, dc, n, seed=1)
    assert girth(code) >= 6
    assert np.all(np.asarray(code.H.sum(axis=0)) == dv)
    assert code.k_effective >= n - code.m


@pytest.mark.parametrize("args", [dict(Z=5, n=16), dict(Z=4, dv=5, dc=4, n=16)])
def test_peg_infeasible(args):
    with pytest.raises(ValueError):
        peg_construct_qc(**args)


@pytest.mark.slow
def test_peg_full_size_profile():
    code = peg_construct_qc()
    assert code.shift_table.shape == (4, 64)
    assert code.design_rate == 0.9375
    assert np.all(np.asarray(code.H.sum(axis=0)) == 4)
    assert np.all(np.asarray(code.H.sum(axis=1)) == 64)
    assert girth(code) >= 6
    assert code.k_effective >= 7680


# --- LLRs -----------------------------------------------------------------------

def test_llr_examples():
    assert channel_llr(0, BacParams(0.1, 0.1)) == pytest.approx(math.log(9), abs=1e-12)
    assert channel_llr(0, BacParams(0.1, 0.1)) == pytest.approx(2.1972245773, abs=1e-9)
    assert channel_llr(1, BacParams(0.0, 0.2)) == -LLR_MAX
    assert channel_llr(0, BacParams(0.1, 0.0)) == LLR_MAX
    assert channel_llr(0, BacParams(4.97e-3, 2.84e-3)) == pytest.approx(5.85896883528, abs=1e-9)
    assert channel_llr(1, BacParams(4.97e-3, 2.84e-3)) == pytest.approx(
        math.log(4.97e-3 / (1 - 2.84e-3)), abs=1e-12)


def test_llr_symmetric_mode():
    y = np.array([0, 1])
    llr = channel_llr(y, BacParams(0.1, 0.3), mode="symmetric")
    assert llr == pytest.approx([math.log(0.8 / 0.2), -math.log(0.8 / 0.2)])
    with pytest.raises(ValueError):
        channel_llr(y, BacParams(0.1, 0.3), mode="weird")


@given(st.floats(0, 1), st.floats(0, 1))
def test_llr_bounded(p, q):
    llr = channel_llr(np.array([0, 1]), BacParams(p, q))
    assert np.all(np.abs(llr) <= LLR_MAX)


# --- sum-product decoding ----------------------------------------------------------

def test_decode_clean_word_immediately(small_code):
    out = sp_decode(np.full(64, 20.0), small_code)
    assert out.success and out.iterations <= 1 and not out.word.any()


def test_decode_length_checked(small_code):
    with pytest.raises(ValueError):
        sp_decode(np.zeros(10), small_code)


def _ml_unique_patterns(code, max_weight):
    """Error patterns of weight <= max_weight that nearest-codeword decoding
    maps uniquely back to the sent word (exhaustive over syndromes)."""
    n = code.n
    by_syndrome: dict[bytes, list[tuple[int, ...]]] = {}
    for w in range(max_weight + 1):
        for pos in itertools.combinations(range(n), w):
            e = np.zeros(n, dtype=np.uint8)
            e[list(pos)] = 1
            by_syndrome.setdefault(code.syndrome(e).tobytes(), []).append(pos)
    unique = []
    for pats in by_syndrome.values():
        weights = sorted(len(p) for p in pats)
        if len(weights) == 1 or weights[0] < weights[1]:
            unique.append(min(pats, key=len))
    return unique


def test_exhaustive_ml_on_16_bit_code(tiny_code):
    n = tiny_code.n
    k = tiny_code.k_effective
    codewords = tiny_code.encode(np.array(list(itertools.product((0, 1), repeat=k)), dtype=np.uint8))
    assert tiny_code.is_codeword(codewords).all()
    for pos in range(n):
        e = np.zeros(n, dtype=np.uint8)
        e[pos] = 1
        dist = (codewords ^ e).sum(axis=1)
        ml_unique = np.sum(dist == dist.min()) == 1 and not codewords[np.argmin(dist)].any()
        if ml_unique:
            out = sp_decode(_bsc_llr(e, 1e-3), tiny_code)
            assert out.success and not out.word.any()


def test_small_code_corrects_all_double_errors(small_code):
    patterns = _ml_unique_patterns(small_code, 2)
    assert len(patterns) == 1 + 64 + 64 * 63 // 2
    E = np.zeros((len(patterns), 64), dtype=np.uint8)
    for r, pos in enumerate(patterns):
        E[r, list(pos)] = 1
    llr = channel_llr(E, BacParams(1e-3, 1e-3))
    words, success, _ = sp_decode_batch(llr, small_code)
    assert success.all() and not words.any()


def test_decoding_is_linear(small_code, rng):
    eps = 0.05
    c = small_code.random_codewords(300, rng)
    e = (rng.random(c.shape) < eps).astype(np.uint8)
    w0, s0, i0 = sp_decode_batch(_bsc_llr(e, eps), small_code)
    w1, s1, i1 = sp_decode_batch(_bsc_llr(c ^ e, eps), small_code)
    assert np.array_equal(s0, s1) and np.array_equal(i0, i1)
    assert np.array_equal(w1, w0 ^ c)


def test_early_termination_differential(small_code, rng):
    eps = 0.05
    e = (rng.random((2000, 64)) < eps).astype(np.uint8)
    llr = _bsc_llr(e, eps)
    _, s_early, it = sp_decode_batch(llr, small_code, early_stop=True)
    _, s_full, _ = sp_decode_batch(llr, small_code, early_stop=False)
    assert np.array_equal(s_early, s_full)
    assert it.max() <= 50


def test_random_codewords_are_codewords(small_code, rng):
    c = small_code.random_codewords(50, rng)
    assert small_code.is_codeword(c).all()
    assert c.any()


def test_decoder_config_validated(small_code):
    with pytest.raises(ValueError):
        LdpcDecoder(small_code, llr_mode="soft")
    assert LdpcDecoder(small_code).n == 64


def test_parity_check_code_without_checks():
    code = ParityCheckCode(sparse.csr_matrix((2, 5), dtype=np.uint8))
    out = sp_decode(np.array([-1.0, 1, 1, 1, 1]), code)
    assert out.success and out.word.tolist() == [1, 0, 0, 0, 0]


@pytest.mark.slow
def test_full_size_profile_low_rber_fer():
    code = peg_construct_qc()
    rng = np.random.default_rng(2000)
    rber = 3e-4
    frames, errors = 0, 0
    while frames < 4000:
        e = (rng.random((200, code.n)) < rber).astype(np.uint8)
        _, ok, _ = sp_decode_batch(_bsc_llr(e, rber), code)
        errors += int((~ok).sum())
        frames += 200
    # zero failures in 4000 frames puts the 95% upper bound below 1e-3
    upper = sps.beta.ppf(0.95, errors + 1, frames - errors)
    assert upper < 1e-3
