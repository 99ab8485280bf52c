import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dialectoscope.align import AlignedPair, align
from dialectoscope.errors import ConfigError, UndefinedCorrelationError
from dialectoscope.glove import EmbeddingSet, normalize_rows
from dialectoscope.measures import (
    CSV_HEADER,
    MeasureTable,
    SvmConfig,
    _neighborhoods,
    build_measure_table,
    cosine_distance,
    cosine_distances,
    ec_row,
    excess_cooccurrence,
    fit_svm_separator,
    high_cooccurrence_sets,
    knn_overlap_distances,
    load_measure_table,
    offset_pca_scores,
    point_plane_distance,
    rank_words,
    save_measure_table,
    sense_separation,
    spearman_rho,
    svm_distances,
)

from conftest import dense_cooc, make_vocab


def unit_rows(rng, n, d):
    return normalize_rows(rng.normal(size=(n, d)))


def manual_pair(m1, m2, tokens=None):
    tokens = tokens or [f"w{i}" for i in range(len(m1))]
    v = make_vocab(tokens)
    return AlignedPair(
        e1=EmbeddingSet(np.asarray(m1, dtype=np.float64), v, normalized=True),
        e2=EmbeddingSet(np.asarray(m2, dtype=np.float64), v, normalized=True),
        method="manual",
        transforms=None,
        residual=0.0,
    )


# ---------------------------------------------------------------- oracles

def oracle_neighbors(matrix, i, k):
    """Brute-force top-k cosine neighbors, ties to the lowest index."""
    m = matrix / np.linalg.norm(matrix, axis=1, keepdims=True)
    sims = m @ m[i]
    order = sorted(
        (j for j in range(len(m)) if j != i), key=lambda j: (-sims[j], j)
    )
    return order[:k]


def oracle_spearman(x, y):
    def avg_ranks(v):
        return [
            sum(1 for w in v if w < a) + (sum(1 for w in v if w == a) + 1) / 2
            for a in v
        ]

    rx, ry = avg_ranks(list(map(float, x))), avg_ranks(list(map(float, y)))
    n = len(rx)
    mx, my = sum(rx) / n, sum(ry) / n
    num = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    den = math.sqrt(
        sum((a - mx) ** 2 for a in rx) * sum((b - my) ** 2 for b in ry)
    )
    return num / den


def oracle_ec(dense, i, j):
    rs = dense.sum(axis=1)
    c = dense[i, j]
    return 0.0 if c == 0 else c * rs.sum() / (rs[i] * rs[j])


def oracle_sense_separation(m1, m2, d1, d2, i):
    n = d1.shape[0]
    ec1 = [oracle_ec(d1, i, j) for j in range(n)]
    ec2 = [oracle_ec(d2, i, j) for j in range(n)]
    hc1 = [j for j in range(n) if ec1[j] > 1 and ec2[j] <= 1]
    hc2 = [j for j in range(n) if ec2[j] > 1 and ec1[j] <= 1]
    if not hc1 or not hc2:
        return None
    o = m1[i] - m2[i]
    u = o / np.linalg.norm(o)
    alpha = lambda js: float(np.mean([(m1[j] @ u + m2[j] @ u) / 2 for j in js]))
    return alpha(hc1) - alpha(hc2)


# ----------------------------------------------------------------- cosine

def test_cosine_identical_rows_zero(rng):
    m = unit_rows(rng, 5, 4)
    pair = manual_pair(m, m.copy())
    assert np.allclose(cosine_distances(pair), 0.0, atol=1e-12)


def test_cosine_orthogonal_and_antipodal():
    m1 = np.array([[1.0, 0.0], [1.0, 0.0]])
    m2 = np.array([[0.0, 1.0], [-1.0, 0.0]])
    pair = manual_pair(m1, m2)
    assert cosine_distance(pair, 0) == pytest.approx(1.0)
    assert cosine_distance(pair, 1) == pytest.approx(2.0)


def test_cosine_vector_matches_scalar(rng):
    pair = manual_pair(unit_rows(rng, 12, 6), unit_rows(rng, 12, 6))
    vec = cosine_distances(pair)
    for i in range(12):
        assert vec[i] == pytest.approx(cosine_distance(pair, i), abs=1e-14)


def test_cosine_joint_rotation_invariant(rng):
    m1, m2 = unit_rows(rng, 10, 5), unit_rows(rng, 10, 5)
    q, _ = np.linalg.qr(rng.normal(size=(5, 5)))
    base = cosine_distances(manual_pair(m1, m2))
    spun = cosine_distances(manual_pair(m1 @ q, m2 @ q))
    assert np.allclose(base, spun, atol=1e-12)


# -------------------------------------------------------------------- knn

def test_knn_identical_spaces_zero(rng):
    m = unit_rows(rng, 20, 5)
    e = EmbeddingSet(m, make_vocab([f"w{i}" for i in range(20)]), normalized=True)
    assert np.allclose(knn_overlap_distances(e, e, k=4), 0.0)


def test_knn_matches_bruteforce_oracle(rng):
    n, k = 40, 5
    v = make_vocab([f"w{i}" for i in range(n)])
    e1 = EmbeddingSet(rng.normal(size=(n, 8)), v, normalized=False)
    e2 = EmbeddingSet(rng.normal(size=(n, 8)), v, normalized=False)
    got = knn_overlap_distances(e1, e2, k=k)
    for i in range(n):
        n1 = set(oracle_neighbors(e1.matrix, i, k))
        n2 = set(oracle_neighbors(e2.matrix, i, k))
        assert got[i] == pytest.approx(1.0 - len(n1 & n2) / k)


def test_knn_tie_breaks_to_lowest_index():
    m = np.array([[1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    hood = _neighborhoods(m, k=2)
    assert list(hood[3]) == [0, 1]
    assert list(hood[2]) == [0, 1]


def test_knn_hand_five_points_half_overlap():
    s1 = np.array([[1.0, 0.0], [0.99, 0.14], [0.95, 0.31], [0.0, 1.0], [-1.0, 0.0]])
    s2 = s1.copy()
    s2[[1, 2, 3]] = s1[[3, 1, 2]]  # neighborhoods of word 0 become {2, 3}
    v = make_vocab([f"w{i}" for i in range(5)])
    e1 = EmbeddingSet(s1, v, normalized=False)
    e2 = EmbeddingSet(s2, v, normalized=False)
    assert oracle_neighbors(s1, 0, 2) == [1, 2]
    assert oracle_neighbors(s2, 0, 2) == [2, 3]
    assert knn_overlap_distances(e1, e2, k=2)[0] == pytest.approx(0.5)


def test_knn_k_out_of_range(rng):
    m = unit_rows(rng, 6, 3)
    e = EmbeddingSet(m, make_vocab([f"w{i}" for i in range(6)]), normalized=True)
    with pytest.raises(ConfigError):
        knn_overlap_distances(e, e, k=6)
    with pytest.raises(ConfigError):
        knn_overlap_distances(e, e, k=0)


def test_knn_chunking_consistent(rng):
    n = 30
    v = make_vocab([f"w{i}" for i in range(n)])
    m = rng.normal(size=(n, 4))
    assert np.array_equal(_neighborhoods(m, 3, chunk=7), _neighborhoods(m, 3, chunk=512))


# ------------------------------------------------------------- offset pca

def test_offset_pca_identical_spaces_zero(rng):
    m = unit_rows(rng, 8, 4)
    scores = offset_pca_scores(manual_pair(m, m.copy()))
    assert np.allclose(scores, 0.0, atol=1e-12)


def test_offset_pca_rank_one_offsets(rng):
    base = rng.normal(size=(7, 5))
    c = rng.normal(size=7)
    v = rng.normal(size=5)
    v /= np.linalg.norm(v)
    pair = manual_pair(base + 0.5 * np.outer(c, v), base - 0.5 * np.outer(c, v))
    assert np.allclose(offset_pca_scores(pair), np.abs(c), atol=1e-10)


def test_offset_pca_centering(rng):
    base = rng.normal(size=(6, 4))
    v = rng.normal(size=4)
    v /= np.linalg.norm(v)
    pair = manual_pair(base + 0.5 * v, base - 0.5 * v)
    assert np.allclose(offset_pca_scores(pair), 1.0, atol=1e-10)
    assert np.allclose(offset_pca_scores(pair, center=True), 0.0, atol=1e-10)


def test_offset_pca_scale_covariance(rng):
    base = rng.normal(size=(6, 4))
    delta = rng.normal(size=(6, 4))
    one = offset_pca_scores(manual_pair(base + delta, base))
    three = offset_pca_scores(manual_pair(base + 3 * delta, base))
    assert np.allclose(three, 3 * one, atol=1e-9)


def test_offset_pca_joint_rotation_invariant(rng):
    m1, m2 = unit_rows(rng, 9, 5), unit_rows(rng, 9, 5)
    q, _ = np.linalg.qr(rng.normal(size=(5, 5)))
    base = offset_pca_scores(manual_pair(m1, m2))
    spun = offset_pca_scores(manual_pair(m1 @ q, m2 @ q))
    assert np.allclose(base, spun, atol=1e-10)


# -------------------------------------------------------------------- svm

def test_point_plane_distance_hand_values():
    assert point_plane_distance(np.array([0.0, 2.0]), -2.0, np.array([5.0, 1.0])) == 0.0
    assert point_plane_distance(np.array([0.0, 2.0]), -2.0, np.array([0.0, 3.0])) == pytest.approx(2.0)
    assert point_plane_distance(np.zeros(2), 1.0, np.ones(2)) == 0.0


def test_point_plane_distance_homogeneous(rng):
    h = rng.normal(size=4)
    b = 0.7
    x = rng.normal(size=4)
    for c in (0.5, 3.0):
        assert point_plane_distance(h, c * b, c * x) == pytest.approx(
            c * point_plane_distance(h, b, x), abs=1e-12
        )


def test_words_on_separator_have_zero_distance():
    from dialectoscope.measures import SvmSeparator

    sep = SvmSeparator(h=np.array([0.0, 2.0]), bias=-2.0, objective=0.0, converged=True)
    m = np.array([[5.0, 1.0], [-3.0, 1.0]])
    pair = manual_pair(m, m[::-1].copy())
    assert np.allclose(svm_distances(pair, sep), 0.0)


def test_svm_antipodal_distance_near_two(rng):
    jitter = 0.01 * rng.normal(size=(10, 3))
    m1 = normalize_rows(np.array([[1.0, 0, 0]] * 10) + jitter)
    m2 = normalize_rows(np.array([[-1.0, 0, 0]] * 10) - jitter)
    pair = manual_pair(m1, m2)
    sep = fit_svm_separator(pair, SvmConfig(epochs=40))
    d = svm_distances(pair, sep)
    assert sep.converged
    assert np.all(np.abs(d - 2.0) < 0.1)
    # under heavy regularization the optimum is pinned at zero bias, so the
    # mirrored rows come out equidistant and d doubles one side's distance
    sep = fit_svm_separator(pair, SvmConfig(lam=0.5, epochs=60, loss_threshold=0.3))
    d = svm_distances(pair, sep)
    for i in range(10):
        one_side = point_plane_distance(sep.h, sep.bias, pair.e1.matrix[i])
        other = point_plane_distance(sep.h, sep.bias, pair.e2.matrix[i])
        assert abs(one_side - other) < 0.05
        assert d[i] == pytest.approx(one_side + other, abs=1e-12)
        assert d[i] == pytest.approx(2.0 * one_side, abs=0.1)


def test_svm_overlapping_classes_flagged(rng):
    m = unit_rows(rng, 30, 4)
    sep = fit_svm_separator(manual_pair(m, m.copy()))
    assert not sep.converged
    assert sep.objective > 0.5


def test_svm_deterministic_given_seed(rng):
    pair = manual_pair(unit_rows(rng, 15, 4), unit_rows(rng, 15, 4))
    a = fit_svm_separator(pair, SvmConfig(seed=9))
    b = fit_svm_separator(pair, SvmConfig(seed=9))
    assert np.array_equal(a.h, b.h) and a.bias == b.bias


def test_svm_distances_sum_both_rows(rng):
    pair = manual_pair(unit_rows(rng, 8, 4), unit_rows(rng, 8, 4))
    sep = fit_svm_separator(pair)
    d = svm_distances(pair, sep)
    for i in range(8):
        expect = point_plane_distance(sep.h, sep.bias, pair.e1.matrix[i]) + point_plane_distance(
            sep.h, sep.bias, pair.e2.matrix[i]
        )
        assert d[i] == pytest.approx(expect, abs=1e-12)


# ------------------------------------------------- excess co-occurrence

def test_ec_independence_gives_one():
    a = np.array([1.0, 2.0, 3.0, 4.0])
    cooc = dense_cooc(np.outer(a, a))
    for i in range(4):
        for j in range(4):
            assert excess_cooccurrence(cooc, i, j) == pytest.approx(1.0)


def test_ec_zero_pair_is_zero():
    m = np.array([[0.0, 2.0, 0.0], [2.0, 2.0, 1.0], [0.0, 1.0, 0.0]])
    cooc = dense_cooc(m)
    assert excess_cooccurrence(cooc, 0, 2) == 0.0
    assert excess_cooccurrence(cooc, 0, 0) == 0.0


def test_ec_matches_oracle(rng):
    m = np.triu(rng.integers(0, 4, size=(8, 8)).astype(np.float64))
    m = m + np.triu(m, 1).T
    cooc = dense_cooc(m)
    for i in range(8):
        for j in range(8):
            assert excess_cooccurrence(cooc, i, j) == pytest.approx(oracle_ec(m, i, j))


def test_ec_row_matches_pointwise(rng):
    m = np.triu(rng.integers(0, 5, size=(6, 6)).astype(np.float64))
    m = m + np.triu(m, 1).T
    cooc = dense_cooc(m)
    for i in range(6):
        idx, ec = ec_row(cooc, i)
        assert np.array_equal(idx, np.nonzero(m[i])[0])
        for j, v in zip(idx, ec):
            assert v == pytest.approx(excess_cooccurrence(cooc, i, int(j)))


def test_ec_sign_agrees_with_pmi(rng):
    m = np.triu(rng.integers(0, 6, size=(10, 10)).astype(np.float64))
    m = m + np.triu(m, 1).T
    rs = m.sum(axis=1)
    total = rs.sum()
    cooc = dense_cooc(m)
    for i in range(10):
        for j in range(10):
            if m[i, j] == 0 or rs[i] == 0 or rs[j] == 0:
                continue
            pmi = math.log((m[i, j] / total) / ((rs[i] / total) * (rs[j] / total)))
            assert (excess_cooccurrence(cooc, i, j) > 1.0) == (pmi > 0.0)


# ------------------------------------------------------ sense separation

def hand_instance():
    """Focal word 0; word 1 keeps it company only in corpus 1, word 2 only
    in corpus 2, words 3-5 pad the mass so the EC thresholds land as
    intended. Geometry puts word 1 at +0.4 and word 2 at -0.4 along the
    offset direction, so the separation is 0.8."""
    d1 = np.array(
        [
            [0, 60, 1, 10, 10, 10],
            [60, 0, 1, 5, 5, 5],
            [1, 1, 0, 40, 40, 40],
            [10, 5, 40, 0, 30, 30],
            [10, 5, 40, 30, 0, 30],
            [10, 5, 40, 30, 30, 0],
        ],
        dtype=np.float64,
    )
    # mirror of d1 with words 1 and 2 swapped
    perm = [0, 2, 1, 3, 4, 5]
    d2 = d1[np.ix_(perm, perm)]
    s = math.sqrt(1 - 0.4**2)
    m1 = np.array(
        [
            [1.0, 0.0, 0.0],
            [0.4, s, 0.0],
            [-0.4, s, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, -1.0],
        ]
    )
    m2 = m1.copy()
    m2[0] = [-1.0, 0.0, 0.0]
    return m1, m2, d1, d2


def test_sense_separation_hand_instance():
    m1, m2, d1, d2 = hand_instance()
    assert oracle_ec(d1, 0, 1) > 1 and oracle_ec(d2, 0, 1) <= 1
    assert oracle_ec(d2, 0, 2) > 1 and oracle_ec(d1, 0, 2) <= 1
    pair = manual_pair(m1, m2)
    c1, c2 = dense_cooc(d1), dense_cooc(d2)
    hc1, hc2 = high_cooccurrence_sets(c1, c2, 0)
    assert list(hc1) == [1] and list(hc2) == [2]
    assert sense_separation(pair, c1, c2, 0) == pytest.approx(0.8, abs=1e-12)


def test_sense_separation_matches_oracle(rng):
    n, d = 12, 4
    for trial in range(25):
        m1, m2 = unit_rows(rng, n, d), unit_rows(rng, n, d)
        a = np.triu(rng.integers(0, 5, size=(n, n)).astype(np.float64))
        b = np.triu(rng.integers(0, 5, size=(n, n)).astype(np.float64))
        a, b = a + np.triu(a, 1).T, b + np.triu(b, 1).T
        pair = manual_pair(m1, m2)
        c1, c2 = dense_cooc(a), dense_cooc(b)
        for i in range(n):
            want = oracle_sense_separation(m1, m2, a, b, i)
            got = sense_separation(pair, c1, c2, i)
            if want is None:
                assert math.isnan(got)
            else:
                assert got == pytest.approx(want, abs=1e-12)


def test_sense_separation_identical_means_zero():
    m1, m2, d1, d2 = hand_instance()
    m1, m2 = m1.copy(), m2.copy()
    m1[2, 0] = 0.4  # both HC words now project to the same mean
    m2[2, 0] = 0.4
    pair = manual_pair(m1, m2)
    s = sense_separation(pair, dense_cooc(d1), dense_cooc(d2), 0)
    assert s == pytest.approx(0.0, abs=1e-12)


def test_sense_separation_empty_set_sentinel(rng):
    m = np.triu(np.ones((4, 4)) - np.eye(4))
    m = m + m.T
    cooc = dense_cooc(m)
    pair = manual_pair(unit_rows(rng, 4, 3), unit_rows(rng, 4, 3))
    # same matrix on both sides: no corpus-exclusive company anywhere
    assert math.isnan(sense_separation(pair, cooc, cooc, 0))


def test_sense_separation_zero_offset_sentinel():
    m1, m2, d1, d2 = hand_instance()
    m2 = m2.copy()
    m2[0] = m1[0]
    pair = manual_pair(m1, m2)
    assert math.isnan(sense_separation(pair, dense_cooc(d1), dense_cooc(d2), 0))


# --------------------------------------------------------------- spearman

def test_spearman_monotone_transform_is_one():
    x = [3.0, 1.0, 4.0, 1.5, 9.0]
    y = [math.exp(v) for v in x]
    assert spearman_rho(x, y) == pytest.approx(1.0)
    assert spearman_rho(x, [-v for v in y]) == pytest.approx(-1.0)


def test_spearman_tied_ranks_frozen():
    rho = spearman_rho([1.0, 2.0, 2.0, 4.0], [10.0, 20.0, 30.0, 40.0])
    assert rho == pytest.approx(0.9486832980505138, abs=1e-15)


def test_spearman_errors():
    with pytest.raises(UndefinedCorrelationError):
        spearman_rho([1.0], [2.0])
    with pytest.raises(UndefinedCorrelationError):
        spearman_rho([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(UndefinedCorrelationError):
        spearman_rho([1.0, 2.0, 3.0], [5.0, 5.0, 5.0])
    with pytest.raises(ConfigError):
        spearman_rho([1.0, 2.0], [1.0, 2.0, 3.0])


@settings(deadline=None, max_examples=60)
@given(st.data())
def test_spearman_matches_oracle_with_ties(data):
    n = data.draw(st.integers(min_value=2, max_value=25))
    x = data.draw(st.lists(st.integers(0, 5), min_size=n, max_size=n))
    y = data.draw(st.lists(st.integers(0, 5), min_size=n, max_size=n))
    if len(set(x)) == 1 or len(set(y)) == 1:
        with pytest.raises(UndefinedCorrelationError):
            spearman_rho(x, y)
        return
    assert spearman_rho(x, y) == pytest.approx(oracle_spearman(x, y), abs=1e-12)


# ------------------------------------------------------------ table + csv

def small_table(rng, n=8, d=4):
    v = make_vocab([f"w{i}" for i in range(n)], rng.integers(100, 200, n), rng.integers(100, 200, n))
    e1 = EmbeddingSet(unit_rows(rng, n, d), v, normalized=True)
    e2 = EmbeddingSet(unit_rows(rng, n, d), v, normalized=True)
    pair = align(e1, e2, "procrustes")
    m = np.triu(rng.integers(0, 5, size=(n, n)).astype(np.float64))
    m = m + np.triu(m, 1).T
    c1, c2 = dense_cooc(m), dense_cooc(np.roll(m, 1, axis=(0, 1)))
    return build_measure_table(pair, e1, e2, c1, c2, knn_k=3)


def test_build_measure_table_shapes_and_metadata(rng):
    table = small_table(rng)
    n = len(table.vocab)
    for name in MeasureTable.MEASURES:
        assert table.measure(name).shape == (n,)
    assert table.mistranslates.dtype == bool
    assert table.metadata["knn_k"] == 3
    assert table.metadata["sense_defined"] == int(np.sum(~np.isnan(table.sense_separation)))


def test_measure_value_ranges(rng):
    table = small_table(rng)
    assert np.all((table.cosine_distance >= 0) & (table.cosine_distance <= 2 + 1e-12))
    assert np.all((table.knn_overlap >= 0) & (table.knn_overlap <= 1))
    assert np.all(table.offset_pca >= 0)
    assert np.all(table.svm_distance >= 0)
    sense = table.sense_separation[~np.isnan(table.sense_separation)]
    assert np.all((sense >= -2) & (sense <= 2))
    for name in ("cosine_distance", "knn_overlap", "offset_pca", "svm_distance"):
        assert np.all(np.isfinite(table.measure(name)))


def test_measure_table_csv_roundtrip(rng, tmp_path):
    table = small_table(rng)
    p = tmp_path / "measures.csv"
    save_measure_table(table, p)
    lines = p.read_text().splitlines()
    header = next(l for l in lines if not l.startswith("# "))
    assert header == CSV_HEADER
    loaded = load_measure_table(p)
    assert loaded.vocab.tokens == table.vocab.tokens
    assert np.array_equal(loaded.vocab.count1, table.vocab.count1)
    for name in MeasureTable.MEASURES:
        np.testing.assert_array_equal(loaded.measure(name), table.measure(name))
    assert np.array_equal(loaded.mistranslates, table.mistranslates)
    assert loaded.metadata["knn_k"] == "3"


def test_measure_table_roundtrip_gzip(rng, tmp_path):
    table = small_table(rng)
    p = tmp_path / "measures.csv.gz"
    save_measure_table(table, p, compress=True)
    loaded = load_measure_table(p, vocab=table.vocab)
    np.testing.assert_array_equal(loaded.sense_separation, table.sense_separation)


def test_sentinel_round_trips_as_empty_field(rng, tmp_path):
    table = small_table(rng)
    table.sense_separation[:] = float("nan")
    p = tmp_path / "m.csv"
    save_measure_table(table, p)
    data_line = [l for l in p.read_text().splitlines() if not l.startswith("#")][1]
    assert data_line.split(",")[7] == ""
    loaded = load_measure_table(p)
    assert np.all(np.isnan(loaded.sense_separation))


def test_rank_words_skips_sentinels_and_sorts(rng):
    table = small_table(rng)
    table.sense_separation = np.array([0.5, float("nan"), -2.0, 1.5, float("nan"), 0.0, -0.1, 0.2])
    order = rank_words(table, by="sense_separation")
    assert list(order) == [3, 0, 7, 5, 6, 2]
    absorder = rank_words(table, by="sense_separation", absolute=True)
    assert list(absorder) == [2, 3, 0, 7, 6, 5]
    with pytest.raises(ConfigError):
        rank_words(table, by="nonsense")
