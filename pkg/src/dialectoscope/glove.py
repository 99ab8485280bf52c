"""GloVe embedding training on a co-occurrence matrix.

The objective is sum over stored ordered pairs of
f(X_ij) * (w_i . wc_j + b_i + bc_j - log X_ij)^2, minimized by per-pair
AdaGrad passes. Off-diagonal entries contribute both (i, j) and (j, i), so
swapping the word/context roles leaves the objective unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit, prange

from .errors import ConfigError, DataError, DivergenceError, NumericError
from .corpus import Vocabulary
from .fileio import open_text_read, open_text_write

WEIGHTING_MODES = ("default", "uniform", "inverted")

# floor keeps inverted weighting from silencing frequent pairs entirely
_INVERTED_FLOOR = 0.01


@dataclass
class GloveConfig:
    dim: int = 300
    epochs: int = 30
    x_max: float = 100.0
    alpha: float = 0.75
    learning_rate: float = 0.05
    weighting: str = "default"
    residual_clip: float = 100.0
    seed: int = 0

    def __post_init__(self):
        if self.weighting not in WEIGHTING_MODES:
            raise ConfigError(f"unknown weighting mode: {self.weighting!r}")
        if self.dim < 1 or self.epochs < 0 or self.x_max <= 0 or self.learning_rate <= 0:
            raise ConfigError("invalid glove configuration")


@dataclass
class GloveParams:
    """Word/context vectors and biases plus their AdaGrad accumulators."""

    w: np.ndarray
    wc: np.ndarray
    b: np.ndarray
    bc: np.ndarray
    acc_w: np.ndarray = field(repr=False, default=None)
    acc_wc: np.ndarray = field(repr=False, default=None)
    acc_b: np.ndarray = field(repr=False, default=None)
    acc_bc: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.acc_w is None:
            self.acc_w = np.ones_like(self.w)
        if self.acc_wc is None:
            self.acc_wc = np.ones_like(self.wc)
        if self.acc_b is None:
            self.acc_b = np.ones_like(self.b)
        if self.acc_bc is None:
            self.acc_bc = np.ones_like(self.bc)

    @property
    def n_words(self) -> int:
        return self.w.shape[0]

    @property
    def dim(self) -> int:
        return self.w.shape[1]


def init_params(n_words: int, config: GloveConfig) -> GloveParams:
    """Seeded uniform init in (-0.5/dim, +0.5/dim); accumulators start at 1."""
    rng = np.random.default_rng(config.seed)
    half = 0.5 / config.dim
    w = rng.uniform(-half, half, (n_words, config.dim))
    wc = rng.uniform(-half, half, (n_words, config.dim))
    b = rng.uniform(-half, half, n_words)
    bc = rng.uniform(-half, half, n_words)
    return GloveParams(w, wc, b, bc)


def glove_weight(x, config: GloveConfig) -> np.ndarray:
    """Pair weighting f(X): saturating power law, flat, or inverted."""
    x = np.asarray(x, dtype=np.float64)
    if config.weighting == "uniform":
        return np.ones_like(x)
    capped = np.minimum(x / config.x_max, 1.0) ** config.alpha
    if config.weighting == "inverted":
        return np.maximum(1.0 - capped, _INVERTED_FLOOR)
    return capped


def ordered_pairs(cooc) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Training pairs: every stored entry in both directions, diagonal once.

    Canonical order: all upper-triangle entries, then their mirrors.
    """
    off = cooc.rows != cooc.cols
    rows = np.concatenate([cooc.rows, cooc.cols[off]]).astype(np.int32)
    cols = np.concatenate([cooc.cols, cooc.rows[off]]).astype(np.int32)
    xv = np.concatenate([cooc.vals, cooc.vals[off]])
    return rows, cols, xv


def glove_loss(params: GloveParams, cooc, config: GloveConfig) -> float:
    """Objective value over the stored ordered pairs (no clipping)."""
    rows, cols, xv = ordered_pairs(cooc)
    r = (
        np.einsum("ij,ij->i", params.w[rows], params.wc[cols])
        + params.b[rows]
        + params.bc[cols]
        - np.log(xv)
    )
    return float(np.sum(glove_weight(xv, config) * r * r))


def pair_gradient(
    params: GloveParams, i: int, j: int, x: float, config: GloveConfig
) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Analytic gradient of one pair's term w.r.t. (w_i, wc_j, b_i, bc_j)."""
    f = float(glove_weight(x, config))
    r = float(params.w[i] @ params.wc[j] + params.b[i] + params.bc[j] - math.log(x))
    clip = config.residual_clip
    r = max(-clip, min(clip, r))
    g = 2.0 * f * r
    return g * params.wc[j], g * params.w[i], g, g


@njit(cache=True)
def _adagrad_pass(order, rows, cols, fx, logx, w, wc, b, bc, gw, gwc, gb, gbc, lr, clip):
    total = 0.0
    dim = w.shape[1]
    for t in range(order.shape[0]):
        p = order[t]
        i = rows[p]
        j = cols[p]
        dot = 0.0
        for k in range(dim):
            dot += w[i, k] * wc[j, k]
        r = dot + b[i] + bc[j] - logx[p]
        f = fx[p]
        total += f * r * r
        if r > clip:
            r = clip
        elif r < -clip:
            r = -clip
        g = 2.0 * f * r
        for k in range(dim):
            gik = g * wc[j, k]
            gjk = g * w[i, k]
            w[i, k] -= lr * gik / math.sqrt(gw[i, k])
            wc[j, k] -= lr * gjk / math.sqrt(gwc[j, k])
            gw[i, k] += gik * gik
            gwc[j, k] += gjk * gjk
        b[i] -= lr * g / math.sqrt(gb[i])
        bc[j] -= lr * g / math.sqrt(gbc[j])
        gb[i] += g * g
        gbc[j] += g * g
    return total


@njit(cache=True, parallel=True)
def _adagrad_pass_hogwild(order, rows, cols, fx, logx, w, wc, b, bc, gw, gwc, gb, gbc, lr, clip):
    total = 0.0
    dim = w.shape[1]
    for t in prange(order.shape[0]):
        p = order[t]
        i = rows[p]
        j = cols[p]
        dot = 0.0
        for k in range(dim):
            dot += w[i, k] * wc[j, k]
        r = dot + b[i] + bc[j] - logx[p]
        f = fx[p]
        total += f * r * r
        if r > clip:
            r = clip
        elif r < -clip:
            r = -clip
        g = 2.0 * f * r
        for k in range(dim):
            gik = g * wc[j, k]
            gjk = g * w[i, k]
            w[i, k] -= lr * gik / math.sqrt(gw[i, k])
            wc[j, k] -= lr * gjk / math.sqrt(gwc[j, k])
            gw[i, k] += gik * gik
            gwc[j, k] += gjk * gjk
        b[i] -= lr * g / math.sqrt(gb[i])
        bc[j] -= lr * g / math.sqrt(gbc[j])
        gb[i] += g * g
        gbc[j] += g * g
    return total


def train_glove(
    cooc, config: GloveConfig, threads: int = 1
) -> tuple[GloveParams, list[float]]:
    """Train on a co-occurrence matrix; returns params and per-epoch mean loss.

    Single-threaded training is bit-reproducible for a fixed seed; with
    threads > 1 updates race (hogwild) and only the loss level is comparable.
    The trace records the running mean of each pair's pre-update loss term.
    """
    if cooc.n_entries == 0:
        raise DataError("co-occurrence matrix has no entries to train on")
    rows, cols, xv = ordered_pairs(cooc)
    fx = glove_weight(xv, config)
    logx = np.log(xv)
    rng = np.random.default_rng(config.seed)
    params = init_params(cooc.n_words, config)
    if threads > 1:
        import numba

        numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))
    trace: list[float] = []
    n_pairs = len(rows)
    for _ in range(config.epochs):
        order = rng.permutation(n_pairs)
        kernel = _adagrad_pass if threads <= 1 else _adagrad_pass_hogwild
        total = kernel(
            order, rows, cols, fx, logx,
            params.w, params.wc, params.b, params.bc,
            params.acc_w, params.acc_wc, params.acc_b, params.acc_bc,
            config.learning_rate, config.residual_clip,
        )
        mean = total / n_pairs
        if not math.isfinite(mean):
            raise DivergenceError(f"training diverged at epoch {len(trace) + 1}")
        trace.append(mean)
    return params, trace


@dataclass
class EmbeddingSet:
    """Embedding matrix bound to a vocabulary, rows in vocabulary order."""

    matrix: np.ndarray
    vocab: Vocabulary
    normalized: bool = False

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def normalize(self) -> "EmbeddingSet":
        return EmbeddingSet(normalize_rows(self.matrix), self.vocab, normalized=True)

    def row(self, token: str) -> np.ndarray:
        return self.matrix[self.vocab.index_of(token)]


def normalize_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1)
    if np.any(norms < 1e-15):
        raise NumericError("cannot normalize a zero embedding row")
    return matrix / norms[:, None]


def finalize_embedding(
    params: GloveParams, vocab: Vocabulary, normalize: bool = True
) -> EmbeddingSet:
    """Final embedding is the sum of word and context vectors."""
    e = EmbeddingSet(params.w + params.wc, vocab)
    return e.normalize() if normalize else e


def save_embedding_text(emb: EmbeddingSet, path: str | Path, compress: bool = False) -> None:
    """`token v1 ... vD` per line, 9 significant digits, no header."""
    with open_text_write(path, compress=compress) as f:
        for token, row in zip(emb.vocab.tokens, emb.matrix):
            f.write(token)
            for v in row:
                f.write(f" {v:.9g}")
            f.write("\n")


def load_embedding_text(path: str | Path, vocab: Vocabulary) -> EmbeddingSet:
    """Load a text embedding file and bind rows to `vocab` order.

    Tolerates a word2vec-style count/dim header line; tokens outside the
    vocabulary are ignored, missing vocabulary tokens are an error.
    """
    vectors: dict[str, np.ndarray] = {}
    dim = None
    with open_text_read(path) as f:
        first = f.readline().rstrip("\n")
        lines = []
        parts = first.split(" ")
        if not (len(parts) == 2 and parts[0].isdigit() and parts[1].isdigit()):
            lines.append(first)
        for line in f:
            lines.append(line.rstrip("\n"))
    for line in lines:
        if not line:
            continue
        parts = line.split(" ")
        token = parts[0]
        if token not in vocab.index:
            continue
        row = np.array([float(v) for v in parts[1:]])
        if dim is None:
            dim = len(row)
        elif len(row) != dim:
            raise DataError(f"{path}: inconsistent embedding dimension for {token!r}")
        vectors[token] = row
    missing = [t for t in vocab.tokens if t not in vectors]
    if missing:
        raise DataError(
            f"{path}: {len(missing)} vocabulary tokens missing "
            f"(first: {', '.join(missing[:5])})"
        )
    matrix = np.stack([vectors[t] for t in vocab.tokens])
    return EmbeddingSet(matrix, vocab)


def save_loss_trace(trace: list[float], path: str | Path, compress: bool = False) -> None:
    with open_text_write(path, compress=compress) as f:
        f.write("epoch,mean_loss\n")
        for e, v in enumerate(trace, 1):
            f.write(f"{e},{v!r}\n")


def load_loss_trace(path: str | Path) -> list[float]:
    with open_text_read(path) as f:
        header = f.readline().rstrip("\n")
        if header != "epoch,mean_loss":
            raise DataError(f"{path}: not a loss trace file")
        return [float(line.split(",")[1]) for line in f if line.strip()]
