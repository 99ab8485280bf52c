"""Per-word measures of differing use between two aligned spaces.

The geometric measures (cosine, offset PCA, SVM) read the aligned pair;
neighborhood overlap deliberately works on the unaligned embeddings; the
sense-separation measure combines aligned geometry with each corpus's
excess co-occurrence profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .align import AlignedPair, mistranslation_set
from .corpus import CoocMatrix, Vocabulary
from .errors import ConfigError, DataError, UndefinedCorrelationError
from .fileio import open_text_read, open_text_write
from .glove import EmbeddingSet, normalize_rows

# sentinel for measures that are undefined for a word (empty co-occurrence
# classes, vanishing offset); ranking and correlation skip these entries
SENTINEL = float("nan")


def cosine_distance(pair: AlignedPair, index: int) -> float:
    """1 - cos between a word's two aligned rows; in [0, 2]."""
    a = pair.e1.matrix[index]
    b = pair.e2.matrix[index]
    return float(1.0 - a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def cosine_distances(pair: AlignedPair) -> np.ndarray:
    a, b = pair.e1.matrix, pair.e2.matrix
    cos = np.einsum("ij,ij->i", a, b)
    cos /= np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
    return 1.0 - cos


def _neighborhoods(matrix: np.ndarray, k: int, chunk: int = 512) -> np.ndarray:
    """Top-k cosine neighbors per row, self excluded, ties to the lowest index."""
    m = normalize_rows(matrix)
    n = m.shape[0]
    out = np.empty((n, k), dtype=np.int64)
    for s in range(0, n, chunk):
        sims = m[s : s + chunk] @ m.T
        for r in range(sims.shape[0]):
            sims[r, s + r] = -np.inf
        order = np.argsort(-sims, axis=1, kind="stable")
        out[s : s + chunk] = order[:, :k]
    return out


def knn_overlap_distance(e1: EmbeddingSet, e2: EmbeddingSet, index: int, k: int = 30) -> float:
    """1 - |N1 ∩ N2|/k over each space's own k nearest neighbors."""
    return float(knn_overlap_distances(e1, e2, k)[index])


def knn_overlap_distances(e1: EmbeddingSet, e2: EmbeddingSet, k: int = 30) -> np.ndarray:
    n = len(e1)
    if not 1 <= k <= n - 1:
        raise ConfigError(f"k must be in [1, {n - 1}], got {k}")
    n1 = _neighborhoods(e1.matrix, k)
    n2 = _neighborhoods(e2.matrix, k)
    out = np.empty(n)
    for i in range(n):
        out[i] = 1.0 - len(np.intersect1d(n1[i], n2[i])) / k
    return out


def offset_pca_scores(pair: AlignedPair, center: bool = False) -> np.ndarray:
    """|first principal coordinate| of the offset matrix E1a - E2a.

    By default the offsets are not mean-centered; `center` subtracts the
    mean offset first (sensitivity variant).
    """
    o = pair.e1.matrix - pair.e2.matrix
    if center:
        o = o - o.mean(axis=0)
    u, s, _ = np.linalg.svd(o, full_matrices=False)
    return np.abs(u[:, 0] * s[0])


@dataclass
class SvmConfig:
    lam: float = 1e-4
    epochs: int = 20
    seed: int = 0
    loss_threshold: float = 0.5


@dataclass
class SvmSeparator:
    """Linear soft-margin separator between the two aligned row sets."""

    h: np.ndarray
    bias: float
    objective: float
    converged: bool


def fit_svm_separator(pair: AlignedPair, config: SvmConfig | None = None) -> SvmSeparator:
    """Pegasos-style subgradient descent on hinge loss, bias as a feature.

    The two spaces are labeled +1/-1; one separator is fit per pair. The
    `converged` flag goes false when the final objective plateaus above
    `loss_threshold` (the classes barely separate, distances mean little).
    """
    cfg = config or SvmConfig()
    n = len(pair.e1)
    xa = np.hstack(
        [
            np.vstack([pair.e1.matrix, pair.e2.matrix]),
            np.ones((2 * n, 1)),
        ]
    )
    y = np.concatenate([np.ones(n), -np.ones(n)])
    rng = np.random.default_rng(cfg.seed)
    w = np.zeros(xa.shape[1])
    radius = 1.0 / math.sqrt(cfg.lam)
    t = 0
    for _ in range(cfg.epochs):
        for idx in rng.permutation(2 * n):
            t += 1
            margin = y[idx] * (xa[idx] @ w)
            w *= 1.0 - 1.0 / t
            if margin < 1.0:
                w += (y[idx] / (cfg.lam * t)) * xa[idx]
            nw = np.linalg.norm(w)
            if nw > radius:
                w *= radius / nw
    hinge = np.maximum(0.0, 1.0 - y * (xa @ w))
    objective = float(cfg.lam / 2 * w @ w + hinge.mean())
    return SvmSeparator(
        h=w[:-1].copy(),
        bias=float(w[-1]),
        objective=objective,
        converged=objective <= cfg.loss_threshold,
    )


def point_plane_distance(h: np.ndarray, bias: float, x: np.ndarray) -> float:
    norm = np.linalg.norm(h)
    if norm < 1e-12:
        return 0.0
    return float(abs(h @ x + bias) / norm)


def svm_distances(pair: AlignedPair, separator: SvmSeparator) -> np.ndarray:
    norm = np.linalg.norm(separator.h)
    if norm < 1e-12:
        return np.zeros(len(pair.e1))
    d1 = np.abs(pair.e1.matrix @ separator.h + separator.bias) / norm
    d2 = np.abs(pair.e2.matrix @ separator.h + separator.bias) / norm
    return d1 + d2


def svm_distance(pair: AlignedPair, index: int, config: SvmConfig | None = None) -> float:
    """Distance of one word's two rows to a freshly fit separator."""
    return float(svm_distances(pair, fit_svm_separator(pair, config))[index])


def excess_cooccurrence(cooc: CoocMatrix, i: int, j: int) -> float:
    """Observed pair weight over its independence expectation; 0 if unseen."""
    c = cooc.entry(i, j)
    if c == 0.0:
        return 0.0
    return c * cooc.total / (cooc.row_sums[i] * cooc.row_sums[j])


def ec_row(cooc: CoocMatrix, i: int) -> tuple[np.ndarray, np.ndarray]:
    """Indices and excess values of word i's nonzero co-occurrences."""
    idx, vals = cooc.row(i)
    if len(idx) == 0:
        return idx, vals
    ec = vals * (cooc.total / cooc.row_sums[i]) / cooc.row_sums[idx]
    return idx, ec


def high_cooccurrence_sets(
    cooc1: CoocMatrix, cooc2: CoocMatrix, i: int
) -> tuple[np.ndarray, np.ndarray]:
    """Words excessively co-occurring with i in exactly one corpus.

    HC1 holds words with EC > 1 in corpus 1 and EC <= 1 (including zero)
    in corpus 2; HC2 is the mirror image.
    """
    idx1, ec1 = ec_row(cooc1, i)
    idx2, ec2 = ec_row(cooc2, i)
    over1 = idx1[ec1 > 1.0]
    over2 = idx2[ec2 > 1.0]
    hc1 = np.setdiff1d(over1, over2, assume_unique=True)
    hc2 = np.setdiff1d(over2, over1, assume_unique=True)
    return hc1, hc2


def sense_separation(
    pair: AlignedPair, cooc1: CoocMatrix, cooc2: CoocMatrix, i: int
) -> float:
    """Mean projected position of corpus-1-only minus corpus-2-only company.

    Projects only the words in the two high-co-occurrence sets onto the
    focal word's offset direction, so the cost per word is proportional to
    the set sizes, not the vocabulary. Returns the sentinel when either
    set is empty or the offset vanishes.
    """
    hc1, hc2 = high_cooccurrence_sets(cooc1, cooc2, i)
    if len(hc1) == 0 or len(hc2) == 0:
        return SENTINEL
    o = pair.offset(i)
    norm = np.linalg.norm(o)
    if norm <= 1e-12:
        return SENTINEL
    u = o / norm
    both = np.concatenate([hc1, hc2])
    m = (pair.e1.matrix[both] @ u + pair.e2.matrix[both] @ u) / 2.0
    return float(m[: len(hc1)].mean() - m[len(hc1):].mean())


def spearman_rho(x, y) -> float:
    """Rank correlation with averaged tied ranks."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ConfigError("spearman_rho needs two equal-length vectors")
    if len(x) < 2:
        raise UndefinedCorrelationError("need at least two observations")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise UndefinedCorrelationError("rank correlation undefined for constant input")
    rx = rankdata(x, method="average")
    ry = rankdata(y, method="average")
    rx -= rx.mean()
    ry -= ry.mean()
    return float((rx @ ry) / math.sqrt((rx @ rx) * (ry @ ry)))


@dataclass
class MeasureTable:
    """All per-word measures for one aligned pair, vocabulary order."""

    vocab: Vocabulary
    cosine_distance: np.ndarray
    knn_overlap: np.ndarray
    offset_pca: np.ndarray
    svm_distance: np.ndarray
    sense_separation: np.ndarray
    mistranslates: np.ndarray
    metadata: dict = field(default_factory=dict)

    MEASURES = (
        "cosine_distance",
        "knn_overlap",
        "offset_pca",
        "svm_distance",
        "sense_separation",
    )

    def measure(self, name: str) -> np.ndarray:
        if name not in self.MEASURES:
            raise ConfigError(f"unknown measure: {name!r}")
        return getattr(self, name)


def build_measure_table(
    pair: AlignedPair,
    unaligned1: EmbeddingSet,
    unaligned2: EmbeddingSet,
    cooc1: CoocMatrix,
    cooc2: CoocMatrix,
    knn_k: int = 30,
    svm_config: SvmConfig | None = None,
    pca_center: bool = False,
) -> MeasureTable:
    n = len(pair.e1)
    separator = fit_svm_separator(pair, svm_config)
    sense = np.array(
        [sense_separation(pair, cooc1, cooc2, i) for i in range(n)]
    )
    table = MeasureTable(
        vocab=pair.vocab,
        cosine_distance=cosine_distances(pair),
        knn_overlap=knn_overlap_distances(unaligned1, unaligned2, knn_k),
        offset_pca=offset_pca_scores(pair, center=pca_center),
        svm_distance=svm_distances(pair, separator),
        sense_separation=sense,
        mistranslates=mistranslation_set(pair),
        metadata={
            "method": pair.method,
            "knn_k": knn_k,
            "pca_center": pca_center,
            "svm_converged": separator.converged,
            "svm_objective": separator.objective,
            "sense_defined": int(np.sum(~np.isnan(sense))),
        },
    )
    return table


def rank_words(table: MeasureTable, by: str = "sense_separation", absolute: bool = False) -> np.ndarray:
    """Vocabulary indices sorted by a measure, descending; sentinels dropped."""
    values = table.measure(by)
    defined = np.flatnonzero(~np.isnan(values))
    keys = np.abs(values[defined]) if absolute else values[defined]
    order = np.argsort(-keys, kind="stable")
    return defined[order]


CSV_HEADER = (
    "token,freq1,freq2,cosine_distance,knn_overlap,offset_pca,"
    "svm_distance,sense_separation,mistranslates"
)


def _fmt(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def save_measure_table(table: MeasureTable, path: str | Path, compress: bool = False) -> None:
    with open_text_write(path, compress=compress) as f:
        for key in sorted(table.metadata):
            f.write(f"# {key}={table.metadata[key]}\n")
        f.write(CSV_HEADER + "\n")
        v = table.vocab
        for i, token in enumerate(v.tokens):
            f.write(
                f"{token},{v.count1[i]},{v.count2[i]},"
                f"{_fmt(table.cosine_distance[i])},{_fmt(table.knn_overlap[i])},"
                f"{_fmt(table.offset_pca[i])},{_fmt(table.svm_distance[i])},"
                f"{_fmt(table.sense_separation[i])},{int(table.mistranslates[i])}\n"
            )


def load_measure_table(path: str | Path, vocab: Vocabulary | None = None) -> MeasureTable:
    metadata: dict = {}
    tokens, c1, c2 = [], [], []
    cols: dict[str, list[float]] = {m: [] for m in MeasureTable.MEASURES}
    mis = []
    with open_text_read(path) as f:
        for line in f:
            line = line.rstrip("\n")
            if line.startswith("# "):
                key, _, value = line[2:].partition("=")
                metadata[key] = value
                continue
            if line == CSV_HEADER or not line:
                continue
            parts = line.split(",")
            if len(parts) != 9:
                raise DataError(f"{path}: malformed measure row: {line!r}")
            tokens.append(parts[0])
            c1.append(int(parts[1]))
            c2.append(int(parts[2]))
            for name, raw in zip(MeasureTable.MEASURES, parts[3:8]):
                cols[name].append(float(raw) if raw else SENTINEL)
            mis.append(bool(int(parts[8])))
    if vocab is None:
        vocab = Vocabulary(tokens, np.array(c1, dtype=np.int64), np.array(c2, dtype=np.int64))
    elif vocab.tokens != tokens:
        raise DataError(f"{path}: token column does not match the vocabulary")
    return MeasureTable(
        vocab=vocab,
        cosine_distance=np.array(cols["cosine_distance"]),
        knn_overlap=np.array(cols["knn_overlap"]),
        offset_pca=np.array(cols["offset_pca"]),
        svm_distance=np.array(cols["svm_distance"]),
        sense_separation=np.array(cols["sense_separation"]),
        mistranslates=np.array(mis, dtype=bool),
        metadata=metadata,
    )
