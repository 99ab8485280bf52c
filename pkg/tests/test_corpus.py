import gzip

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dialectoscope.corpus import (
    Corpus,
    build_vocabulary,
    cooc_share,
    count_cooccurrences,
    dedup_documents,
    load_cooc,
    load_corpus,
    load_vocabulary,
    save_cooc,
    save_corpus,
    save_vocabulary,
)
from dialectoscope.errors import DataError, EmptyVocabularyError, UnknownTokenError

from conftest import make_vocab


def oracle_cooc(docs, index, window, weighting):
    """Reference window walk: enumerate every in-window position pair."""
    n = len(index)
    m = np.zeros((n, n))
    for doc in docs:
        ids = [index.get(t, -1) for t in doc]
        for p in range(len(ids)):
            for d in range(1, window + 1):
                q = p + d
                if q >= len(ids):
                    break
                i, j = ids[p], ids[q]
                if i < 0 or j < 0:
                    continue
                w = 1.0 / d if weighting else 1.0
                m[i, j] += w
                m[j, i] += w
    return m


def test_dedup_keeps_first_of_identical_docs():
    c = Corpus([["a", "b"], ["c"], ["a", "b"]])
    out = dedup_documents(c)
    assert out.documents == [["a", "b"], ["c"]]


def test_dedup_distinguishes_token_boundaries():
    c = Corpus([["ab"], ["a", "b"]])
    assert dedup_documents(c).n_documents == 2


def test_vocabulary_min_count_intersection():
    c1 = Corpus([["a"] * 5 + ["b"] * 2 + ["c"] * 5])
    c2 = Corpus([["a"] * 4 + ["b"] * 9 + ["d"] * 9])
    v = build_vocabulary(c1, c2, min_count=3)
    assert v.tokens == ["a"]
    assert v.count1.tolist() == [5] and v.count2.tolist() == [4]


def test_vocabulary_ordering_mean_count_then_token():
    c1 = Corpus([["z"] * 10 + ["a"] * 10 + ["m"] * 30])
    c2 = Corpus([["z"] * 10 + ["a"] * 10 + ["m"] * 30])
    v = build_vocabulary(c1, c2, min_count=1)
    assert v.tokens == ["m", "a", "z"]


def test_vocabulary_empty_raises():
    with pytest.raises(EmptyVocabularyError):
        build_vocabulary(Corpus([["a"]]), Corpus([["b"]]), min_count=1)


def test_vocabulary_unknown_token_suggestions():
    v = make_vocab(["apple", "apricot", "banana"])
    with pytest.raises(UnknownTokenError) as e:
        v.index_of("apples")
    assert "apricot" in str(e.value) or "apple" in str(e.value)


def test_cooc_adjacent_pair_weight_one():
    v = make_vocab(["a", "b"])
    m = count_cooccurrences(Corpus([["a", "b"]]), v, window=10, distance_weighting=True)
    assert m.entry(0, 1) == 1.0


def test_cooc_oov_occupies_position():
    v = make_vocab(["a", "b"])
    m = count_cooccurrences(Corpus([["a", "x", "b"]]), v, window=10, distance_weighting=True)
    assert m.entry(0, 1) == 0.5


def test_cooc_window_cuts_distance_and_uniform_weighting():
    v = make_vocab(["a", "b"])
    m = count_cooccurrences(Corpus([["a", "b", "a"]]), v, window=1, distance_weighting=False)
    assert m.entry(0, 1) == 2.0
    assert m.entry(0, 0) == 0.0


def test_cooc_does_not_cross_documents():
    v = make_vocab(["a", "b"])
    m = count_cooccurrences(Corpus([["a"], ["b"]]), v, window=10)
    assert m.n_entries == 0


def test_cooc_matches_oracle_on_random_corpus(rng):
    tokens = [f"w{i}" for i in range(7)]
    docs = [
        [tokens[k] for k in rng.integers(0, 10, size=rng.integers(1, 30))
         if k < 7] or ["w0"]
        for _ in range(40)
    ]
    v = make_vocab(tokens)
    for window, weighting in [(1, True), (3, True), (5, False), (10, True)]:
        got = count_cooccurrences(Corpus(docs), v, window=window, distance_weighting=weighting)
        want = oracle_cooc(docs, v.index, window, weighting)
        dense = got.symmetric_csr().toarray()
        assert np.allclose(dense, want, rtol=1e-9, atol=0)
        # total mass equals the reference walk's emitted weight
        assert got.total == pytest.approx(want.sum(), rel=1e-9)
        assert np.allclose(got.row_sums, want.sum(axis=1), rtol=1e-9)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(
        st.lists(st.sampled_from(["a", "b", "c", "d"]), min_size=1, max_size=12),
        min_size=1,
        max_size=10,
    ),
    st.integers(min_value=1, max_value=5),
)
def test_cooc_symmetry_and_shuffle_invariance(docs, window):
    v = make_vocab(["a", "b", "c", "d"])
    m1 = count_cooccurrences(Corpus(docs), v, window=window)
    dense = m1.symmetric_csr().toarray()
    assert np.array_equal(dense, dense.T)
    m2 = count_cooccurrences(Corpus(list(reversed(docs))), v, window=window)
    assert np.array_equal(m1.vals, m2.vals)
    assert np.array_equal(m1.rows, m2.rows) and np.array_equal(m1.cols, m2.cols)


def test_cooc_thread_count_invariance(rng):
    tokens = [f"w{i}" for i in range(5)]
    docs = [[tokens[k] for k in rng.integers(0, 5, size=50)] for _ in range(600)]
    v = make_vocab(tokens)
    a = count_cooccurrences(Corpus(docs), v, window=4, threads=1)
    b = count_cooccurrences(Corpus(docs), v, window=4, threads=3)
    assert np.array_equal(a.vals, b.vals)
    assert a.total == b.total


def test_cooc_dense_and_sparse_paths_agree(rng, monkeypatch):
    import dialectoscope.corpus as cp

    tokens = [f"w{i}" for i in range(6)]
    docs = [[tokens[k] for k in rng.integers(0, 6, size=30)] for _ in range(50)]
    v = make_vocab(tokens)
    dense = count_cooccurrences(Corpus(docs), v, window=3)
    monkeypatch.setattr(cp, "_DENSE_VOCAB_LIMIT", 0)
    sparse = count_cooccurrences(Corpus(docs), v, window=3)
    assert np.array_equal(dense.rows, sparse.rows)
    assert np.array_equal(dense.cols, sparse.cols)
    assert np.array_equal(dense.vals, sparse.vals)


def test_cooc_share_cases():
    from conftest import dense_cooc

    # every word co-occurs with every other word, none with itself
    n = 4
    full = np.ones((n, n)) - np.eye(n)
    assert np.allclose(cooc_share(dense_cooc(full)), (n - 1) / n)
    # empty row -> share 0; single pair in a 3-word vocabulary -> 1/3
    m = np.zeros((3, 3))
    m[0, 1] = m[1, 0] = 2.0
    shares = cooc_share(dense_cooc(m))
    assert shares.tolist() == [1 / 3, 1 / 3, 0.0]


def test_corpus_file_round_trip(tmp_path):
    c = Corpus([["a", "b"], [], ["c"]])
    p = tmp_path / "c.txt"
    save_corpus(c, p)
    back = load_corpus(p, dedup=False)
    assert back.documents == c.documents


def test_corpus_gzip_round_trip(tmp_path):
    c = Corpus([["a", "b"], ["c"]])
    p = tmp_path / "c.txt"
    save_corpus(c, p, compress=True)
    assert (tmp_path / "c.txt.gz").exists()
    back = load_corpus(p, dedup=False)
    assert back.documents == c.documents
    # gzip output is byte-stable
    save_corpus(c, tmp_path / "d.txt", compress=True)
    assert (tmp_path / "c.txt.gz").read_bytes() == (tmp_path / "d.txt.gz").read_bytes()


def test_vocabulary_file_round_trip(tmp_path):
    v = make_vocab(["b", "a"], count1=[10, 5], count2=[10, 5])
    p = tmp_path / "v.tsv"
    save_vocabulary(v, p)
    back = load_vocabulary(p)
    assert back.tokens == v.tokens
    assert np.array_equal(back.count1, v.count1)


def test_vocabulary_load_rejects_non_canonical_order(tmp_path):
    p = tmp_path / "v.tsv"
    p.write_text("rare\t1\t1\ncommon\t9\t9\n", encoding="utf-8")
    with pytest.raises(DataError):
        load_vocabulary(p)


def test_cooc_file_round_trip_and_determinism(tmp_path, rng):
    tokens = [f"w{i}" for i in range(6)]
    docs = [[tokens[k] for k in rng.integers(0, 6, size=20)] for _ in range(30)]
    m = count_cooccurrences(Corpus(docs), make_vocab(tokens), window=5)
    p1, p2 = tmp_path / "m1.txt", tmp_path / "m2.txt"
    save_cooc(m, p1)
    save_cooc(m, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert p1.read_text().startswith("#dialectoscope-cooc v1 N_w=6\n")
    back = load_cooc(p1)
    assert back.n_words == m.n_words
    assert np.array_equal(back.rows, m.rows)
    assert np.array_equal(back.cols, m.cols)
    assert np.array_equal(back.vals, m.vals)  # 17 significant digits: exact
    assert back.total == pytest.approx(m.total, rel=1e-9)


def test_cooc_load_rejects_bad_files(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("not a header\n0 0 1.0\n", encoding="utf-8")
    with pytest.raises(DataError):
        load_cooc(p)
    p.write_text("#dialectoscope-cooc v1 N_w=3\n2 1 1.0\n", encoding="utf-8")
    with pytest.raises(DataError):
        load_cooc(p)


def test_entry_absent_pair_is_zero():
    from conftest import dense_cooc

    m = np.zeros((3, 3))
    m[0, 1] = m[1, 0] = 1.0
    c = dense_cooc(m)
    assert c.entry(0, 2) == 0.0
    assert c.entry(1, 0) == 1.0
