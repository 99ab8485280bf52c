"""Projection scatters and rankings along offset directions.

A dialectogram fixes one focal word, projects every co-occurring word's
two embeddings onto the focal word's offset direction, and classifies
each point by which corpus keeps it company. Positive always means
"toward corpus 1's use of the focal word".
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .align import AlignedPair, translate
from .corpus import CoocMatrix, Vocabulary
from .errors import (
    ConfigError,
    DataError,
    DegenerateDirectionError,
    NumericError,
    UnknownTokenError,
    ZeroOffsetError,
)
from .fileio import open_text_read, open_text_write
from .measures import ec_row

EC_CLASSES = ("both", "only1", "only2", "neither")


def _lexicographic_neighbors(word: str, tokens, n: int = 3) -> list[str]:
    """The n vocabulary entries closest to `word` in sorted order.

    Entries at equal rank distance from the insertion point tie-break
    alphabetically, so the suggestion list is deterministic.
    """
    ordered = sorted(tokens)
    pos = bisect.bisect_left(ordered, word)
    candidates = []
    for i in range(max(0, pos - n), min(len(ordered), pos + n)):
        distance = pos - 1 - i if i < pos else i - pos
        candidates.append((distance, ordered[i]))
    candidates.sort()
    return [t for _, t in candidates[:n]]


def resolve_token(vocab: Vocabulary, word: str | int) -> int:
    if isinstance(word, (int, np.integer)):
        if not 0 <= word < len(vocab):
            raise ConfigError(f"word index {word} out of range")
        return int(word)
    idx = vocab.index.get(word)
    if idx is None:
        raise UnknownTokenError(word, _lexicographic_neighbors(word, vocab.tokens))
    return idx


def offset_direction(pair: AlignedPair, focal: int) -> tuple[np.ndarray, float]:
    """Unit offset of the focal word and its pre-normalization norm."""
    o = pair.offset(focal)
    norm = float(np.linalg.norm(o))
    if norm <= 1e-12:
        raise ZeroOffsetError(
            f"offset of {pair.vocab.tokens[focal]!r} vanishes; the word is used identically"
        )
    return o / norm, norm


def project_offset(pair: AlignedPair, focal: int) -> tuple[np.ndarray, np.ndarray]:
    """Scalar projections of every word onto the focal offset direction."""
    u, _ = offset_direction(pair, focal)
    return pair.e1.matrix @ u, pair.e2.matrix @ u


def top_frequency_indices(vocab: Vocabulary, k: int) -> np.ndarray:
    """Indices of the k highest-mean-count words (ties to the lower index)."""
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    return np.argsort(-vocab.mean_counts, kind="stable")[:k]


@dataclass
class DialectogramRecord:
    token: str
    alpha1: float
    alpha2: float
    freq1: int
    freq2: int
    ec_class: str


@dataclass
class Dialectogram:
    """One focal word's projection scatter with co-occurrence classes."""

    focal: str
    offset_norm: float
    translation_1to2: str
    translation_2to1: str
    excluded: list[str]
    records: list[DialectogramRecord]


def _ec_class(over1: bool, over2: bool) -> str:
    if over1 and over2:
        return "both"
    if over1:
        return "only1"
    if over2:
        return "only2"
    return "neither"


def build_dialectogram(
    pair: AlignedPair,
    cooc1: CoocMatrix,
    cooc2: CoocMatrix,
    focal: str | int,
    exclude_top: int = 3,
) -> Dialectogram:
    """Project all of the focal word's company and classify it.

    Retains words co-occurring with the focal word in either corpus,
    dropping the focal word itself and the `exclude_top` highest-frequency
    vocabulary words (ubiquitous company carries no signal).
    """
    vocab = pair.vocab
    i = resolve_token(vocab, focal)
    u, norm = offset_direction(pair, i)

    idx1, ec1 = ec_row(cooc1, i)
    idx2, ec2 = ec_row(cooc2, i)
    over1 = set(idx1[ec1 > 1.0].tolist())
    over2 = set(idx2[ec2 > 1.0].tolist())
    top = top_frequency_indices(vocab, exclude_top)
    drop = set(top.tolist()) | {i}
    retained = sorted((set(idx1.tolist()) | set(idx2.tolist())) - drop)

    records = []
    if retained:
        rows = np.array(retained, dtype=np.int64)
        a1 = pair.e1.matrix[rows] @ u
        a2 = pair.e2.matrix[rows] @ u
        if not (np.all(np.isfinite(a1)) and np.all(np.isfinite(a2))):
            raise NumericError("non-finite projection in dialectogram")
        for pos, j in enumerate(retained):
            records.append(
                DialectogramRecord(
                    token=vocab.tokens[j],
                    alpha1=float(a1[pos]),
                    alpha2=float(a2[pos]),
                    freq1=int(vocab.count1[j]),
                    freq2=int(vocab.count2[j]),
                    ec_class=_ec_class(j in over1, j in over2),
                )
            )
    return Dialectogram(
        focal=vocab.tokens[i],
        offset_norm=norm,
        translation_1to2=vocab.tokens[translate(pair, i, "1to2")],
        translation_2to1=vocab.tokens[translate(pair, i, "2to1")],
        excluded=[vocab.tokens[j] for j in top],
        records=records,
    )


# ------------------------------------------------------------ persistence

def dialectogram_to_dict(d: Dialectogram) -> dict:
    return {
        "focal": d.focal,
        "offset_norm": d.offset_norm,
        "translation_1to2": d.translation_1to2,
        "translation_2to1": d.translation_2to1,
        "excluded": list(d.excluded),
        "records": [vars(r).copy() for r in d.records],
    }


def dialectogram_from_dict(obj: dict) -> Dialectogram:
    records = [DialectogramRecord(**r) for r in obj["records"]]
    return Dialectogram(
        focal=obj["focal"],
        offset_norm=float(obj["offset_norm"]),
        translation_1to2=obj["translation_1to2"],
        translation_2to1=obj["translation_2to1"],
        excluded=list(obj["excluded"]),
        records=records,
    )


DIALECTOGRAM_CSV_HEADER = "token,alpha1,alpha2,freq1,freq2,ec_class"


def export_dialectogram(
    d: Dialectogram, fmt: str, path: str | Path, label_top: int = 80
) -> None:
    if fmt == "json":
        with open_text_write(path) as f:
            json.dump(dialectogram_to_dict(d), f, indent=1, sort_keys=True)
            f.write("\n")
    elif fmt == "csv":
        with open_text_write(path) as f:
            meta = {
                "focal": d.focal,
                "offset_norm": repr(d.offset_norm),
                "translation_1to2": d.translation_1to2,
                "translation_2to1": d.translation_2to1,
                "excluded": json.dumps(d.excluded),
            }
            for key, value in meta.items():
                f.write(f"# {key}={value}\n")
            f.write(DIALECTOGRAM_CSV_HEADER + "\n")
            for r in d.records:
                f.write(
                    f"{r.token},{r.alpha1!r},{r.alpha2!r},{r.freq1},{r.freq2},{r.ec_class}\n"
                )
    elif fmt == "svg":
        from .svgplot import dialectogram_svg

        with open_text_write(path) as f:
            f.write(dialectogram_svg(d, label_top=label_top))
    else:
        raise ConfigError(f"unknown dialectogram format: {fmt!r}")


def load_dialectogram(path: str | Path) -> Dialectogram:
    """Read back a json or csv export (decided by content, not suffix)."""
    with open_text_read(path) as f:
        text = f.read()
    if text.lstrip().startswith("{"):
        return dialectogram_from_dict(json.loads(text))
    meta: dict[str, str] = {}
    records = []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition("=")
            meta[key] = value
        elif line and line != DIALECTOGRAM_CSV_HEADER:
            parts = line.split(",")
            if len(parts) != 6:
                raise DataError(f"{path}: malformed dialectogram row: {line!r}")
            records.append(
                DialectogramRecord(
                    token=parts[0],
                    alpha1=float(parts[1]),
                    alpha2=float(parts[2]),
                    freq1=int(parts[3]),
                    freq2=int(parts[4]),
                    ec_class=parts[5],
                )
            )
    try:
        return Dialectogram(
            focal=meta["focal"],
            offset_norm=float(meta["offset_norm"]),
            translation_1to2=meta["translation_1to2"],
            translation_2to1=meta["translation_2to1"],
            excluded=json.loads(meta["excluded"]),
            records=records,
        )
    except KeyError as e:
        raise DataError(f"{path}: missing dialectogram metadata {e}") from None


# --------------------------------------------------- mean offset direction

@dataclass
class MeanOffsetProjection:
    """A shared direction distilled from several words' offsets."""

    word_set: np.ndarray
    final_direction: np.ndarray
    member_alpha1: np.ndarray
    member_alpha2: np.ndarray
    sign_flips: np.ndarray
    extremes: dict[str, list[str]]


def mean_offset_projection(
    pair: AlignedPair, word_set, top_k: int = 10
) -> MeanOffsetProjection:
    """Average the member offsets into one direction and project along it.

    Members whose offset points away from the first mean are flipped and
    the mean recomputed; one recompute suffices unless the flip swings the
    mean past another member, in which case passes repeat until every
    (possibly flipped) member has nonnegative cosine to the direction.
    """
    vocab = pair.vocab
    idx = np.array([resolve_token(vocab, w) for w in word_set], dtype=np.int64)
    if len(idx) < 2:
        raise ConfigError("mean offset needs at least two words")
    if not 1 <= top_k <= len(vocab):
        raise ConfigError(f"top_k must be in [1, {len(vocab)}], got {top_k}")
    offsets = pair.e1.matrix[idx] - pair.e2.matrix[idx]
    signs = np.ones(len(idx))
    mean = offsets.mean(axis=0)
    for _ in range(100):
        if np.linalg.norm(mean) < 1e-12:
            raise DegenerateDirectionError("mean offset vanished; no shared direction")
        neg = (offsets * signs[:, None]) @ mean < 0.0
        if not neg.any():
            break
        signs[neg] *= -1.0
        mean = (offsets * signs[:, None]).mean(axis=0)
    else:
        raise NumericError("offset sign flipping failed to stabilize")
    u = mean / np.linalg.norm(mean)
    a1 = pair.e1.matrix @ u
    a2 = pair.e2.matrix @ u
    tokens = vocab.tokens

    def extreme(scores, sign):
        order = np.argsort(-sign * scores, kind="stable")[:top_k]
        return [tokens[j] for j in order]

    return MeanOffsetProjection(
        word_set=idx,
        final_direction=u,
        member_alpha1=a1[idx],
        member_alpha2=a2[idx],
        sign_flips=np.flatnonzero(signs < 0),
        extremes={
            "positive1": extreme(a1, 1.0),
            "negative1": extreme(a1, -1.0),
            "positive2": extreme(a2, 1.0),
            "negative2": extreme(a2, -1.0),
        },
    )


# ------------------------------------------------ corpus-level aggregation

@dataclass
class AggregateTable:
    """How often each word sits clearly on one corpus's side of an offset."""

    vocab: Vocabulary
    count_pos: np.ndarray
    count_neg: np.ndarray
    score: np.ndarray
    threshold: float
    focal_indices: np.ndarray
    skipped_focals: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def ranking(self) -> np.ndarray:
        return np.argsort(-self.score, kind="stable")


def aggregate_characteristic_use(
    pair: AlignedPair,
    focal_list=None,
    threshold: float = 0.2,
    chunk: int = 512,
) -> AggregateTable:
    """Count, per word, the focal offsets it projects beyond ±threshold on.

    The mean of a word's two projections is compared against the
    threshold for every focal direction; the score is the positive count
    minus the negative count. Focal words whose offset vanishes carry no
    direction and are skipped (reported in `skipped_focals`).
    """
    if threshold <= 0:
        raise ConfigError("threshold must be positive")
    vocab = pair.vocab
    n = len(vocab)
    if focal_list is None:
        focals = np.arange(n, dtype=np.int64)
    else:
        focals = np.array([resolve_token(vocab, w) for w in focal_list], dtype=np.int64)
    if len(focals) == 0:
        raise ConfigError("focal list must be nonempty")
    offsets = pair.e1.matrix[focals] - pair.e2.matrix[focals]
    norms = np.linalg.norm(offsets, axis=1)
    keep = norms > 1e-12
    ohat = offsets[keep] / norms[keep, None]
    base = (pair.e1.matrix + pair.e2.matrix) / 2.0
    count_pos = np.zeros(n, dtype=np.int64)
    count_neg = np.zeros(n, dtype=np.int64)
    for s in range(0, ohat.shape[0], chunk):
        m = base @ ohat[s : s + chunk].T
        count_pos += (m > threshold).sum(axis=1)
        count_neg += (m < -threshold).sum(axis=1)
    return AggregateTable(
        vocab=vocab,
        count_pos=count_pos,
        count_neg=count_neg,
        score=count_pos - count_neg,
        threshold=threshold,
        focal_indices=focals[keep],
        skipped_focals=focals[~keep],
    )


AGGREGATE_CSV_HEADER = "token,count_pos,count_neg,score"


def save_aggregate_table(table: AggregateTable, path: str | Path, compress: bool = False) -> None:
    """Write the ranking, highest score first."""
    v = table.vocab
    with open_text_write(path, compress=compress) as f:
        f.write(f"# threshold={table.threshold!r}\n")
        f.write(f"# n_focals={len(table.focal_indices)}\n")
        f.write(f"# skipped={json.dumps([v.tokens[j] for j in table.skipped_focals])}\n")
        f.write(AGGREGATE_CSV_HEADER + "\n")
        for j in table.ranking():
            f.write(
                f"{v.tokens[j]},{table.count_pos[j]},{table.count_neg[j]},{table.score[j]}\n"
            )
