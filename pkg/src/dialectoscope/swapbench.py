"""Graded-swap validation harness.

Plants a known amount of usage difference: frequency-matched word pairs
are swapped into a corpus copy at degrees from 10% to 100%, the copy is
embedded and aligned against the original, and the report checks how well
each measure recovers the planted degree and each word's swap identity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .align import AlignedPair, _nearest_indices, prepare_and_align
from .corpus import Corpus, Vocabulary, build_vocabulary, count_cooccurrences
from .errors import ConfigError, InfeasibleSamplingError, UndefinedCorrelationError
from .fileio import open_text_read, open_text_write
from .glove import GloveConfig, finalize_embedding, train_glove
from .measures import MeasureTable, SvmConfig, build_measure_table, spearman_rho

DEFAULT_DEGREES = tuple(k / 10 for k in range(1, 11))
DECILE_RULE = "equal-count-rank"


@dataclass
class SwapPair:
    a: str
    b: str
    degree: float
    decile: int


@dataclass
class SwapPlan:
    """Which words trade places, how often, and where they sit by frequency."""

    seed: int
    deciles: int
    degrees: list[float]
    pairs: list[SwapPair]
    pos_map_checksum: str = ""

    def partner_and_degree(self) -> dict[str, tuple[str, float]]:
        out: dict[str, tuple[str, float]] = {}
        for p in self.pairs:
            out[p.a] = (p.b, p.degree)
            out[p.b] = (p.a, p.degree)
        return out


def frequency_deciles(counts: np.ndarray, n_deciles: int) -> np.ndarray:
    """Equal-count rank deciles; 0 holds the lowest-frequency words."""
    n = len(counts)
    if n < n_deciles:
        raise InfeasibleSamplingError(
            f"cannot split {n} words into {n_deciles} deciles"
        )
    order = np.argsort(counts, kind="stable")
    out = np.empty(n, dtype=np.int64)
    for d, chunk in enumerate(np.array_split(order, n_deciles)):
        out[chunk] = d
    return out


def sample_swap_pairs(
    vocab: Vocabulary,
    pos_map: dict[str, str] | None = None,
    deciles: int = 10,
    pairs_per_decile: int = 30,
    degrees=DEFAULT_DEGREES,
    seed: int = 0,
    counts: np.ndarray | None = None,
    pos_map_checksum: str = "",
) -> SwapPlan:
    """Draw frequency-matched (and optionally POS-matched) pairs per decile.

    Within every decile each POS group is shuffled and cut into disjoint
    consecutive pairs, the pooled candidates are shuffled again, and the
    first `pairs_per_decile` survive; each (decile, degree) cell ends up
    with exactly pairs_per_decile/len(degrees) pairs. Words without a POS
    tag form their own shared group.
    """
    degrees = [float(d) for d in degrees]
    if not degrees:
        raise ConfigError("degrees list must be nonempty")
    if pairs_per_decile % len(degrees) != 0:
        raise ConfigError(
            f"degrees list length {len(degrees)} must divide pairs_per_decile {pairs_per_decile}"
        )
    per_cell = pairs_per_decile // len(degrees)
    if counts is None:
        counts = vocab.count1
    decile_of = frequency_deciles(np.asarray(counts), deciles)
    rng = np.random.default_rng(seed)
    pairs: list[SwapPair] = []
    for d in range(deciles):
        members = np.flatnonzero(decile_of == d)
        groups: dict[str, list[int]] = {}
        for i in members:
            tag = pos_map.get(vocab.tokens[i], "") if pos_map else ""
            groups.setdefault(tag, []).append(int(i))
        candidates: list[tuple[int, int]] = []
        for tag in sorted(groups):
            g = np.array(groups[tag], dtype=np.int64)
            rng.shuffle(g)
            candidates.extend((int(g[k]), int(g[k + 1])) for k in range(0, len(g) - 1, 2))
        if len(candidates) < pairs_per_decile:
            constraint = " under POS matching" if pos_map else ""
            raise InfeasibleSamplingError(
                f"decile {d} supplies {len(candidates)} disjoint pairs, "
                f"needs {pairs_per_decile}{constraint}"
            )
        order = rng.permutation(len(candidates))[:pairs_per_decile]
        for k, ci in enumerate(order):
            ia, ib = candidates[ci]
            pairs.append(
                SwapPair(vocab.tokens[ia], vocab.tokens[ib], degrees[k // per_cell], d)
            )
    return SwapPlan(
        seed=seed,
        deciles=deciles,
        degrees=degrees,
        pairs=pairs,
        pos_map_checksum=pos_map_checksum,
    )


def save_swap_plan(plan: SwapPlan, path: str | Path) -> None:
    obj = {
        "seed": plan.seed,
        "deciles": plan.deciles,
        "degrees": plan.degrees,
        "pos_map_checksum": plan.pos_map_checksum,
        "pairs": [
            {"a": p.a, "b": p.b, "degree": p.degree, "decile": p.decile}
            for p in plan.pairs
        ],
    }
    with open_text_write(path) as f:
        json.dump(obj, f, indent=1, sort_keys=True)
        f.write("\n")


def load_swap_plan(path: str | Path) -> SwapPlan:
    with open_text_read(path) as f:
        obj = json.load(f)
    return SwapPlan(
        seed=int(obj["seed"]),
        deciles=int(obj["deciles"]),
        degrees=[float(d) for d in obj["degrees"]],
        pairs=[
            SwapPair(p["a"], p["b"], float(p["degree"]), int(p["decile"]))
            for p in obj["pairs"]
        ],
        pos_map_checksum=obj.get("pos_map_checksum", ""),
    )


def load_pos_map(path: str | Path) -> dict[str, str]:
    """token<TAB>tag per line."""
    out: dict[str, str] = {}
    with open_text_read(path) as f:
        for ln, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ConfigError(f"{path}:{ln}: expected token<TAB>tag")
            out[parts[0]] = parts[1]
    return out


def apply_swaps(corpus: Corpus, plan: SwapPlan, seed: int = 0) -> Corpus:
    """Relabel plan words with their partner at the planted probability.

    One random stream runs in document order; a draw is consumed only at
    occurrences of plan words, so the plan plus seed fully determines the
    output no matter what the other tokens are.
    """
    table = plan.partner_and_degree()
    rng = np.random.default_rng(seed)
    docs = []
    for doc in corpus.documents:
        out = []
        for t in doc:
            hit = table.get(t)
            if hit is None:
                out.append(t)
            else:
                partner, degree = hit
                out.append(partner if rng.random() < degree else t)
        docs.append(out)
    return Corpus(docs, label=f"{corpus.label}+swapped")


def swap_degree_vector(vocab: Vocabulary, plan: SwapPlan) -> np.ndarray:
    """Planted degree per vocabulary word, 0 for unswapped words."""
    deg = np.zeros(len(vocab))
    for p in plan.pairs:
        for token in (p.a, p.b):
            i = vocab.index.get(token)
            if i is not None:
                deg[i] = p.degree
    return deg


@dataclass
class CorrelationRow:
    measure: str
    scope: str
    rho: float | None
    n_used: int
    n_total: int


def evaluate_measures(table: MeasureTable, plan: SwapPlan) -> list[CorrelationRow]:
    """Rank-correlate each measure against the planted swap degrees.

    Scored once over the whole vocabulary (unswapped words at degree 0)
    and once over plan members only. Words where a measure is undefined
    are dropped from that measure's scoring; n_used records what remained.
    An undefined correlation (constant input) is reported as a missing rho
    rather than a number.
    """
    vocab = table.vocab
    deg = swap_degree_vector(vocab, plan)
    member = np.zeros(len(vocab), dtype=bool)
    for p in plan.pairs:
        for token in (p.a, p.b):
            i = vocab.index.get(token)
            if i is not None:
                member[i] = True
    rows = []
    scopes = (("all", np.ones(len(vocab), dtype=bool)), ("swapped", member))
    for name in MeasureTable.MEASURES:
        values = table.measure(name)
        for scope, mask in scopes:
            use = mask & ~np.isnan(values)
            try:
                rho = spearman_rho(values[use], deg[use])
            except UndefinedCorrelationError:
                rho = None
            rows.append(
                CorrelationRow(name, scope, rho, int(use.sum()), int(mask.sum()))
            )
    return rows


@dataclass
class TranslationReport:
    """Translation accuracy by swap bucket, both directions required."""

    buckets: dict[str, tuple[int, float | None]]
    half_n: int
    half_self_rate: float | None


TRANSLATION_BUCKETS = ("unswapped", "under_half", "over_half")


def translation_accuracy(pair: AlignedPair, plan: SwapPlan) -> TranslationReport:
    """Score nearest-neighbor translation against the plan's expectations.

    Unswapped and under-half words should translate to themselves, words
    swapped more than half the time to their partner, in both directions.
    Exactly-half words are scored separately: their self-translation rate
    is reported but counts toward no bucket (no defensible expectation).
    """
    vocab = pair.vocab
    n = len(vocab)
    fwd = _nearest_indices(pair.e1.matrix, pair.e2.matrix)
    bwd = _nearest_indices(pair.e2.matrix, pair.e1.matrix)
    table = plan.partner_and_degree()
    hits = {b: 0 for b in TRANSLATION_BUCKETS}
    totals = {b: 0 for b in TRANSLATION_BUCKETS}
    half_n = 0
    half_self = 0
    for i in range(n):
        entry = table.get(vocab.tokens[i])
        if entry is None:
            bucket, target = "unswapped", i
        else:
            partner, degree = entry
            j = vocab.index.get(partner)
            if degree == 0.5:
                half_n += 1
                if fwd[i] == i and bwd[i] == i:
                    half_self += 1
                continue
            if degree < 0.5:
                bucket, target = "under_half", i
            else:
                bucket, target = "over_half", j
        totals[bucket] += 1
        if target is not None and fwd[i] == target and bwd[i] == target:
            hits[bucket] += 1
    buckets = {
        b: (totals[b], hits[b] / totals[b] if totals[b] else None)
        for b in TRANSLATION_BUCKETS
    }
    return TranslationReport(
        buckets=buckets,
        half_n=half_n,
        half_self_rate=half_self / half_n if half_n else None,
    )


@dataclass
class EvalReport:
    correlations: list[CorrelationRow]
    translation: TranslationReport
    metadata: dict = field(default_factory=dict)


def save_eval_report(report: EvalReport, directory: str | Path) -> dict[str, Path]:
    """Write correlations.csv, translation.csv, and report.json."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "correlations": directory / "correlations.csv",
        "translation": directory / "translation.csv",
        "report": directory / "report.json",
    }
    with open_text_write(paths["correlations"]) as f:
        f.write("measure,scope,spearman_rho,n_used,n_total\n")
        for r in report.correlations:
            rho = "" if r.rho is None else repr(r.rho)
            f.write(f"{r.measure},{r.scope},{rho},{r.n_used},{r.n_total}\n")
    with open_text_write(paths["translation"]) as f:
        f.write("bucket,n,accuracy\n")
        for b in TRANSLATION_BUCKETS:
            n, acc = report.translation.buckets[b]
            f.write(f"{b},{n},{'' if acc is None else repr(acc)}\n")
        rate = report.translation.half_self_rate
        f.write(f"exactly_half,{report.translation.half_n},{'' if rate is None else repr(rate)}\n")
    obj = {
        "metadata": report.metadata,
        "correlations": [vars(r).copy() for r in report.correlations],
        "translation": {
            "buckets": {
                b: {"n": n, "accuracy": acc}
                for b, (n, acc) in report.translation.buckets.items()
            },
            "exactly_half": {
                "n": report.translation.half_n,
                "self_translation_rate": report.translation.half_self_rate,
            },
        },
    }
    with open_text_write(paths["report"]) as f:
        json.dump(obj, f, indent=1, sort_keys=True)
        f.write("\n")
    return paths


@dataclass
class SwapbenchResult:
    plan: SwapPlan
    pair: AlignedPair
    table: MeasureTable
    report: EvalReport


def run_swapbench(
    corpus: Corpus,
    glove_config: GloveConfig,
    min_count: int = 100,
    window: int = 10,
    deciles: int = 10,
    pairs_per_decile: int = 30,
    degrees=DEFAULT_DEGREES,
    knn_k: int = 30,
    method: str = "procrustes",
    pos_map: dict[str, str] | None = None,
    pos_map_checksum: str = "",
    seed: int = 0,
    threads: int = 1,
) -> SwapbenchResult:
    """Embed a corpus against its own graded-swap copy and score recovery.

    The vocabulary is fixed to the original corpus's min-count vocabulary
    before swapping, so partial swaps cannot push a plan word out of the
    shared vocabulary and the two spaces stay word-for-word comparable.
    """
    solo = build_vocabulary(corpus, corpus, min_count=min_count)
    plan = sample_swap_pairs(
        solo,
        pos_map=pos_map,
        deciles=deciles,
        pairs_per_decile=pairs_per_decile,
        degrees=degrees,
        seed=seed,
        counts=solo.count1,
        pos_map_checksum=pos_map_checksum,
    )
    swapped = apply_swaps(corpus, plan, seed=seed)
    vocab = build_vocabulary(corpus, swapped, min_count=1, restrict_to=solo.tokens)
    cooc1 = count_cooccurrences(corpus, vocab, window=window, threads=threads)
    cooc2 = count_cooccurrences(swapped, vocab, window=window, threads=threads)
    params1, _ = train_glove(cooc1, glove_config, threads=threads)
    params2, _ = train_glove(cooc2, glove_config, threads=threads)
    raw1 = finalize_embedding(params1, vocab, normalize=False)
    raw2 = finalize_embedding(params2, vocab, normalize=False)
    aligned = prepare_and_align(raw1, raw2, method=method)
    table = build_measure_table(
        aligned,
        raw1.normalize(),
        raw2.normalize(),
        cooc1,
        cooc2,
        knn_k=knn_k,
        svm_config=SvmConfig(seed=seed),
    )
    report = EvalReport(
        correlations=evaluate_measures(table, plan),
        translation=translation_accuracy(aligned, plan),
        metadata={
            "decile_rule": DECILE_RULE,
            "pos_matched": pos_map is not None,
            "seed": seed,
            "n_words": len(vocab),
            "n_pairs": len(plan.pairs),
            "method": method,
            "min_count": min_count,
            "window": window,
            "dim": glove_config.dim,
            "epochs": glove_config.epochs,
        },
    )
    return SwapbenchResult(plan=plan, pair=aligned, table=table, report=report)
