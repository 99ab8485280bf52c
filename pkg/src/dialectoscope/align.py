"""Mapping two embedding spaces into a shared coordinate system.

Three aligners with one contract: orthogonal Procrustes (the default; an
isometry of each space), CCA via SVD (whitens before matching), and an
unconstrained least-squares map (allowed to distort, kept for comparison).
All SVD-based routines pin singular vector signs so reruns and near-identical
inputs produce identical outputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Vocabulary
from .errors import (
    ConfigError,
    DataError,
    DegenerateDirectionError,
    RankDeficiencyError,
    SvdFailureError,
)
from .fileio import open_text_write, open_text_read, sha256_bytes
from .glove import EmbeddingSet, load_embedding_text, normalize_rows, save_embedding_text

ALIGN_METHODS = ("procrustes", "cca", "least_squares")


@dataclass
class FrequencyAdjustment:
    """Record of the frequency direction removed from an embedding."""

    direction: np.ndarray
    removed_norm: float


def frequency_adjust(
    emb: EmbeddingSet, log_freqs: np.ndarray
) -> tuple[EmbeddingSet, FrequencyAdjustment]:
    """Project out the direction correlated with log frequency.

    The direction is u = E^T f normalized; the result E (I - u u^T) has
    ~zero frequency component and reapplying the adjustment is a no-op.
    """
    f = np.asarray(log_freqs, dtype=np.float64)
    if f.shape != (len(emb),):
        raise ConfigError("log_freqs length must match the vocabulary")
    w = emb.matrix.T @ f
    norm = float(np.linalg.norm(w))
    if norm < 1e-12:
        raise DegenerateDirectionError(
            "embedding has no frequency direction to remove"
        )
    u = w / norm
    adjusted = emb.matrix - np.outer(emb.matrix @ u, u)
    return (
        EmbeddingSet(adjusted, emb.vocab, normalized=False),
        FrequencyAdjustment(direction=u, removed_norm=norm),
    )


def fix_svd_signs(u: np.ndarray, vt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Make the largest-magnitude entry of each left singular vector positive."""
    u = u.copy()
    vt = vt.copy()
    for k in range(u.shape[1]):
        idx = int(np.argmax(np.abs(u[:, k])))
        if u[idx, k] < 0:
            u[:, k] = -u[:, k]
            vt[k, :] = -vt[k, :]
    return u, vt


def _svd(m: np.ndarray, full_matrices: bool = False):
    try:
        return np.linalg.svd(m, full_matrices=full_matrices)
    except np.linalg.LinAlgError as e:
        raise SvdFailureError(str(e)) from e


def procrustes_transforms(m1: np.ndarray, m2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Twofold orthogonal maps (v, u) sending m1 -> m1 v and m2 -> m2 u.

    From the SVD m2^T m1 = u s v^T; the equivalent single rotation taking
    m2 into m1's coordinates is u v^T.
    """
    u, _, vt = _svd(m2.T @ m1)
    u, vt = fix_svd_signs(u, vt)
    return vt.T, u


def cca_transforms(
    m1: np.ndarray, m2: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """CCA maps (w1, w2, correlations), shared dims by descending correlation."""
    u1, s1, v1t = _svd(m1)
    u2, s2, v2t = _svd(m2)
    tol = 1e-10
    if s1.min() < tol or s2.min() < tol:
        raise RankDeficiencyError("embedding matrix is rank deficient; CCA undefined")
    u1, v1t = fix_svd_signs(u1, v1t)
    u2, v2t = fix_svd_signs(u2, v2t)
    us, ss, vst = _svd(u2.T @ u1)
    us, vst = fix_svd_signs(us, vst)
    w1 = v1t.T @ ((1.0 / s1)[:, None] * vst.T)
    w2 = v2t.T @ ((1.0 / s2)[:, None] * us)
    return w1, w2, ss


def least_squares_transform(m1: np.ndarray, m2: np.ndarray) -> np.ndarray:
    """Closed-form minimizer of ||m1 - m2 w||_F (the normal-equations optimum)."""
    w, _, rank, _ = np.linalg.lstsq(m2, m1, rcond=None)
    if rank < m2.shape[1]:
        raise RankDeficiencyError("least-squares alignment needs a full-rank source")
    return w


@dataclass
class AlignedPair:
    """Two row-normalized embeddings living in one shared space."""

    e1: EmbeddingSet
    e2: EmbeddingSet
    method: str
    transforms: dict[str, np.ndarray] | None
    residual: float

    @property
    def vocab(self) -> Vocabulary:
        return self.e1.vocab

    @property
    def dim(self) -> int:
        return self.e1.dim

    def rotation(self) -> np.ndarray:
        """Single-matrix rotation m2 -> m1 coordinates (procrustes only)."""
        if self.method != "procrustes" or self.transforms is None:
            raise DataError("rotation is only stored for procrustes alignments")
        return self.transforms["w2"] @ self.transforms["w1"].T

    def offset(self, index: int) -> np.ndarray:
        return self.e1.matrix[index] - self.e2.matrix[index]


def _check_alignable(e1: EmbeddingSet, e2: EmbeddingSet) -> None:
    if e1.vocab.tokens != e2.vocab.tokens:
        raise DataError("aligned embeddings must share one vocabulary")
    if e1.matrix.shape != e2.matrix.shape:
        raise DataError("aligned embeddings must have equal shape")
    for name, e in (("first", e1), ("second", e2)):
        norms = np.linalg.norm(e.matrix, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-6:
            raise DataError(f"{name} embedding must be row-normalized before alignment")


def align(e1: EmbeddingSet, e2: EmbeddingSet, method: str = "procrustes") -> AlignedPair:
    """Map both embeddings into a shared space and re-normalize rows."""
    if method not in ALIGN_METHODS:
        raise ConfigError(f"unknown alignment method: {method!r}")
    _check_alignable(e1, e2)
    m1, m2 = e1.matrix, e2.matrix
    if method == "procrustes":
        w1, w2 = procrustes_transforms(m1, m2)
    elif method == "cca":
        w1, w2, _ = cca_transforms(m1, m2)
    else:
        w1 = np.eye(m1.shape[1])
        w2 = least_squares_transform(m1, m2)
    a1 = normalize_rows(m1 @ w1)
    a2 = normalize_rows(m2 @ w2)
    residual = float(np.linalg.norm(a1 - a2))
    return AlignedPair(
        e1=EmbeddingSet(a1, e1.vocab, normalized=True),
        e2=EmbeddingSet(a2, e2.vocab, normalized=True),
        method=method,
        transforms={"w1": w1, "w2": w2},
        residual=residual,
    )


def prepare_and_align(
    raw1: EmbeddingSet,
    raw2: EmbeddingSet,
    method: str = "procrustes",
    adjust_frequency: bool = True,
    adjust_raw: bool = True,
) -> AlignedPair:
    """Fixed pipeline: (frequency adjust) -> normalize -> align -> normalize.

    With adjust_raw=False the adjustment happens on the normalized rows
    instead of the raw ones, followed by another normalization.
    """
    vocab = raw1.vocab
    f1 = np.log(vocab.count1.astype(np.float64))
    f2 = np.log(vocab.count2.astype(np.float64))
    if adjust_frequency:
        if adjust_raw:
            e1 = frequency_adjust(raw1, f1)[0].normalize()
            e2 = frequency_adjust(raw2, f2)[0].normalize()
        else:
            e1 = frequency_adjust(raw1.normalize(), f1)[0].normalize()
            e2 = frequency_adjust(raw2.normalize(), f2)[0].normalize()
    else:
        e1 = raw1.normalize()
        e2 = raw2.normalize()
    return align(e1, e2, method=method)


def translate(pair: AlignedPair, index: int, direction: str = "1to2") -> int:
    """Nearest neighbor of a word's row in the other space (ties: lowest index)."""
    if direction == "1to2":
        src, dst = pair.e1.matrix, pair.e2.matrix
    elif direction == "2to1":
        src, dst = pair.e2.matrix, pair.e1.matrix
    else:
        raise ConfigError(f"direction must be '1to2' or '2to1', got {direction!r}")
    return int(np.argmax(dst @ src[index]))


def _nearest_indices(src: np.ndarray, dst: np.ndarray, chunk: int = 1024) -> np.ndarray:
    out = np.empty(src.shape[0], dtype=np.int64)
    for s in range(0, src.shape[0], chunk):
        sims = src[s : s + chunk] @ dst.T
        out[s : s + chunk] = np.argmax(sims, axis=1)
    return out


def mistranslation_set(pair: AlignedPair) -> np.ndarray:
    """Boolean mask of words that fail self-translation in either direction."""
    n = len(pair.e1)
    fwd = _nearest_indices(pair.e1.matrix, pair.e2.matrix)
    bwd = _nearest_indices(pair.e2.matrix, pair.e1.matrix)
    idx = np.arange(n)
    return (fwd != idx) | (bwd != idx)


def _array_checksum(a: np.ndarray) -> str:
    return sha256_bytes(np.ascontiguousarray(a).tobytes())


def save_aligned_pair(
    pair: AlignedPair,
    path1: str | Path,
    path2: str | Path,
    meta_path: str | Path,
    compress: bool = False,
) -> None:
    save_embedding_text(pair.e1, path1, compress=compress)
    save_embedding_text(pair.e2, path2, compress=compress)
    meta = {
        "method": pair.method,
        "residual": pair.residual,
        "dim": pair.dim,
        "n_words": len(pair.e1),
        "transform_checksums": {
            name: _array_checksum(w) for name, w in sorted((pair.transforms or {}).items())
        },
    }
    with open_text_write(meta_path) as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")


def load_aligned_pair(
    path1: str | Path, path2: str | Path, meta_path: str | Path, vocab: Vocabulary
) -> AlignedPair:
    with open_text_read(meta_path) as f:
        meta = json.load(f)
    e1 = load_embedding_text(path1, vocab)
    e2 = load_embedding_text(path2, vocab)
    e1.normalized = e2.normalized = True
    return AlignedPair(
        e1=e1,
        e2=e2,
        method=meta["method"],
        transforms=None,
        residual=float(meta["residual"]),
    )
