"""Corpora, shared vocabularies, and windowed co-occurrence counting.

A corpus is a list of documents, each a list of tokens. Two corpora are joined
through a shared vocabulary (min-count intersection). Co-occurrence counts are
accumulated per window offset as exact integers and only then scaled by the
distance weight, so the resulting matrix is bit-identical no matter how the
documents are ordered or how many threads count them.
"""

from __future__ import annotations

from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse

from .errors import DataError, EmptyVocabularyError, UnknownTokenError
from .fileio import open_text_read, open_text_write

COOC_HEADER_PREFIX = "#dialectoscope-cooc v1 N_w="

# dense accumulation above this vocabulary size would need >128 MB per matrix
_DENSE_VOCAB_LIMIT = 4096


@dataclass
class Corpus:
    """Tokenized documents plus a label used in reports."""

    documents: list[list[str]]
    label: str = "corpus"

    @property
    def n_documents(self) -> int:
        return len(self.documents)

    @property
    def n_tokens(self) -> int:
        return sum(len(d) for d in self.documents)


def load_corpus(path: str | Path, label: str | None = None, dedup: bool = True) -> Corpus:
    """Read one document per line, tokens separated by spaces."""
    docs = []
    with open_text_read(path) as f:
        for line in f:
            docs.append(line.split())
    corpus = Corpus(docs, label=label or Path(path).stem)
    return dedup_documents(corpus) if dedup else corpus


def save_corpus(corpus: Corpus, path: str | Path, compress: bool = False) -> None:
    with open_text_write(path, compress=compress) as f:
        for doc in corpus.documents:
            f.write(" ".join(doc))
            f.write("\n")


def dedup_documents(corpus: Corpus) -> Corpus:
    """Drop exact duplicate documents, keeping the first occurrence."""
    seen: set[tuple[str, ...]] = set()
    kept = []
    for doc in corpus.documents:
        key = tuple(doc)
        if key not in seen:
            seen.add(key)
            kept.append(doc)
    return Corpus(kept, label=corpus.label)


@dataclass
class Vocabulary:
    """Tokens shared by both corpora, with per-corpus raw counts.

    Tokens are ordered by descending mean count, ties broken lexicographically,
    so index 0 is always the most frequent word.
    """

    tokens: list[str]
    count1: np.ndarray
    count2: np.ndarray
    index: dict[str, int] = field(repr=False, default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {t: i for i, t in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def index_of(self, token: str) -> int:
        try:
            return self.index[token]
        except KeyError:
            raise UnknownTokenError(token, self.nearest(token)) from None

    def nearest(self, token: str, n: int = 5) -> list[str]:
        """Lexicographic neighbors of a missing token, for error messages."""
        import bisect

        ordered = sorted(self.tokens)
        pos = bisect.bisect_left(ordered, token)
        lo = max(0, pos - n // 2)
        return ordered[lo : lo + n]

    @property
    def mean_counts(self) -> np.ndarray:
        return (self.count1 + self.count2) / 2.0

    @property
    def log_mean_freq(self) -> np.ndarray:
        return np.log(self.mean_counts)


def _count_tokens(corpus: Corpus) -> Counter:
    counts: Counter = Counter()
    for doc in corpus.documents:
        counts.update(doc)
    return counts


def build_vocabulary(
    corpus1: Corpus,
    corpus2: Corpus,
    min_count: int = 100,
    restrict_to: list[str] | None = None,
) -> Vocabulary:
    """Intersect both corpora at `min_count` occurrences each.

    `restrict_to` limits the candidate set (used by the swap harness to pin
    the vocabulary of a corpus and its swapped copy to the original's).
    """
    c1 = _count_tokens(corpus1)
    c2 = _count_tokens(corpus2)
    candidates = c1.keys() if restrict_to is None else restrict_to
    eligible = [t for t in candidates if c1.get(t, 0) >= min_count and c2.get(t, 0) >= min_count]
    if not eligible:
        raise EmptyVocabularyError(
            f"no token occurs at least {min_count} times in both corpora"
        )
    eligible.sort(key=lambda t: (-(c1[t] + c2[t]), t))
    count1 = np.array([c1[t] for t in eligible], dtype=np.int64)
    count2 = np.array([c2[t] for t in eligible], dtype=np.int64)
    return Vocabulary(eligible, count1, count2)


def save_vocabulary(vocab: Vocabulary, path: str | Path, compress: bool = False) -> None:
    with open_text_write(path, compress=compress) as f:
        for t, a, b in zip(vocab.tokens, vocab.count1, vocab.count2):
            f.write(f"{t}\t{a}\t{b}\n")


def load_vocabulary(path: str | Path) -> Vocabulary:
    tokens, c1, c2 = [], [], []
    with open_text_read(path) as f:
        for ln, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"{path}:{ln}: expected token<TAB>count1<TAB>count2")
            tokens.append(parts[0])
            c1.append(int(parts[1]))
            c2.append(int(parts[2]))
    vocab = Vocabulary(tokens, np.array(c1, dtype=np.int64), np.array(c2, dtype=np.int64))
    order = sorted(range(len(tokens)), key=lambda i: (-(c1[i] + c2[i]), tokens[i]))
    if order != list(range(len(tokens))):
        raise DataError(f"{path}: vocabulary not in canonical (mean count desc, token) order")
    return vocab


@dataclass
class CoocMatrix:
    """Symmetric co-occurrence weights in upper-triangle storage.

    `rows`/`cols`/`vals` hold entries with rows[k] <= cols[k], sorted by
    (row, col). `row_sums[i]` is the full symmetric mass of row i and
    `total` the mass of the whole matrix, so independence-normalized
    quantities like excess co-occurrence need no recounting.
    """

    n_words: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    row_sums: np.ndarray = field(default=None)
    total: float = field(default=None)
    _csr: scipy.sparse.csr_matrix = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        key = self.rows.astype(np.int64) * self.n_words + self.cols
        if len(key) and np.any(key[1:] <= key[:-1]):
            order = np.argsort(key, kind="stable")
            self.rows = self.rows[order]
            self.cols = self.cols[order]
            self.vals = self.vals[order]
        if self.row_sums is None:
            rs = np.zeros(self.n_words)
            np.add.at(rs, self.rows, self.vals)
            off = self.rows != self.cols
            np.add.at(rs, self.cols[off], self.vals[off])
            self.row_sums = rs
        if self.total is None:
            self.total = float(self.row_sums.sum())

    @property
    def n_entries(self) -> int:
        return len(self.vals)

    def symmetric_csr(self) -> scipy.sparse.csr_matrix:
        """Full symmetric matrix for fast row access (built lazily)."""
        if self._csr is None:
            off = self.rows != self.cols
            r = np.concatenate([self.rows, self.cols[off]])
            c = np.concatenate([self.cols, self.rows[off]])
            v = np.concatenate([self.vals, self.vals[off]])
            self._csr = scipy.sparse.csr_matrix(
                (v, (r, c)), shape=(self.n_words, self.n_words)
            )
        return self._csr

    def entry(self, i: int, j: int) -> float:
        if i > j:
            i, j = j, i
        lo = np.searchsorted(self.rows, i, side="left")
        hi = np.searchsorted(self.rows, i, side="right")
        k = lo + np.searchsorted(self.cols[lo:hi], j, side="left")
        if k < hi and self.cols[k] == j:
            return float(self.vals[k])
        return 0.0

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Column indices and weights of row i of the symmetric matrix."""
        m = self.symmetric_csr()
        sl = slice(m.indptr[i], m.indptr[i + 1])
        return m.indices[sl], m.data[sl]


def _doc_index_arrays(corpus: Corpus, vocab: Vocabulary) -> tuple[np.ndarray, np.ndarray]:
    """Flatten the corpus to vocab indices (-1 for OOV) plus document ids.

    OOV tokens keep their positions so window distances stay faithful.
    """
    idx = vocab.index
    flat = np.empty(corpus.n_tokens, dtype=np.int32)
    doc_id = np.empty(corpus.n_tokens, dtype=np.int64)
    pos = 0
    for d, doc in enumerate(corpus.documents):
        for t in doc:
            flat[pos] = idx.get(t, -1)
            doc_id[pos] = d
            pos += 1
    return flat, doc_id


def _offset_pair_index(flat, doc_id, n, d, start, stop):
    """Linear indices i*n + j of in-vocab pairs at positional distance d."""
    hi = min(stop, len(flat) - d)
    if hi <= start:
        return np.empty(0, dtype=np.int64)
    a = flat[start:hi]
    b = flat[start + d : hi + d]
    valid = (doc_id[start:hi] == doc_id[start + d : hi + d]) & (a >= 0) & (b >= 0)
    return a[valid].astype(np.int64) * n + b[valid]


def _offset_counts_dense(flat, doc_id, n, d, threads):
    size = n * n
    # per-thread count arrays: don't fan out when they would dominate memory
    if threads <= 1 or len(flat) < 1 << 18 or n > 2048:
        lin = _offset_pair_index(flat, doc_id, n, d, 0, len(flat))
        return np.bincount(lin, minlength=size)
    bounds = np.linspace(0, len(flat), threads + 1, dtype=np.int64)
    with ThreadPoolExecutor(max_workers=threads) as ex:
        parts = list(
            ex.map(
                lambda k: np.bincount(
                    _offset_pair_index(flat, doc_id, n, d, bounds[k], bounds[k + 1]),
                    minlength=size,
                ),
                range(threads),
            )
        )
    out = parts[0]
    for p in parts[1:]:
        out += p  # integer merge: order-independent
    return out


def _offset_counts_sparse(flat, doc_id, n, d):
    lin = _offset_pair_index(flat, doc_id, n, d, 0, len(flat))
    return np.unique(lin, return_counts=True)


def count_cooccurrences(
    corpus: Corpus,
    vocab: Vocabulary,
    window: int = 10,
    distance_weighting: bool = True,
    threads: int = 1,
) -> CoocMatrix:
    """Count symmetric windowed co-occurrences over in-vocabulary tokens.

    Every position pair at distance d <= window inside one document adds
    weight 1/d (or 1 without distance weighting) to both (i, j) and (j, i);
    same-word pairs therefore add twice to the diagonal cell.
    """
    n = len(vocab)
    flat, doc_id = _doc_index_arrays(corpus, vocab)
    if n <= _DENSE_VOCAB_LIMIT:
        acc = np.zeros(n * n)
        for d in range(1, window + 1):
            counts = _offset_counts_dense(flat, doc_id, n, d, threads)
            sym = counts + counts.reshape(n, n).T.reshape(-1)
            w = 1.0 / d if distance_weighting else 1.0
            acc += sym * w
        dense = acc.reshape(n, n)
        rows, cols = np.nonzero(np.triu(dense))
        vals = dense[rows, cols]
    else:
        run_lin = np.empty(0, dtype=np.int64)
        run_val = np.empty(0)
        for d in range(1, window + 1):
            lin, counts = _offset_counts_sparse(flat, doc_id, n, d)
            i, j = lin // n, lin % n
            swapped = j * n + i
            # integer symmetrization before scaling keeps float sums canonical
            both = np.concatenate([lin, swapped])
            cnts = np.concatenate([counts, counts])
            order = np.argsort(both, kind="stable")
            both, cnts = both[order], cnts[order]
            starts = np.flatnonzero(np.r_[True, both[1:] != both[:-1]])
            sym_lin = both[starts]
            sym_cnt = np.add.reduceat(cnts, starts)
            w = 1.0 / d if distance_weighting else 1.0
            merged = np.concatenate([run_lin, sym_lin])
            mergedv = np.concatenate([run_val, sym_cnt * w])
            order = np.argsort(merged, kind="stable")
            merged, mergedv = merged[order], mergedv[order]
            starts = np.flatnonzero(np.r_[True, merged[1:] != merged[:-1]])
            run_lin = merged[starts]
            run_val = np.add.reduceat(mergedv, starts)
        i, j = run_lin // n, run_lin % n
        keep = i <= j
        rows, cols, vals = i[keep], j[keep], run_val[keep]
    rows = rows.astype(np.int32)
    cols = cols.astype(np.int32)
    return CoocMatrix(n_words=n, rows=rows, cols=cols, vals=np.asarray(vals, dtype=np.float64))


def cooc_share(cooc: CoocMatrix) -> np.ndarray:
    """Fraction of vocabulary words each word has positive co-occurrence with."""
    m = cooc.symmetric_csr()
    nz = np.diff(m.indptr)
    return nz / cooc.n_words


def save_cooc(cooc: CoocMatrix, path: str | Path, compress: bool = False) -> None:
    with open_text_write(path, compress=compress) as f:
        f.write(f"{COOC_HEADER_PREFIX}{cooc.n_words}\n")
        for i, j, v in zip(cooc.rows, cooc.cols, cooc.vals):
            f.write(f"{i} {j} {v:.17g}\n")


def load_cooc(path: str | Path) -> CoocMatrix:
    with open_text_read(path) as f:
        header = f.readline().rstrip("\n")
        if not header.startswith(COOC_HEADER_PREFIX):
            raise DataError(f"{path}: missing co-occurrence header")
        n = int(header[len(COOC_HEADER_PREFIX):])
        rows, cols, vals = [], [], []
        for ln, line in enumerate(f, 2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 3:
                raise DataError(f"{path}:{ln}: expected 'i j weight'")
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
            if i > j:
                raise DataError(f"{path}:{ln}: lower-triangle entry ({i}, {j})")
            if v <= 0:
                raise DataError(f"{path}:{ln}: non-positive weight")
            rows.append(i)
            cols.append(j)
            vals.append(v)
    return CoocMatrix(
        n_words=n,
        rows=np.array(rows, dtype=np.int32),
        cols=np.array(cols, dtype=np.int32),
        vals=np.array(vals),
    )
