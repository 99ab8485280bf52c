"""Config-driven pipeline: stage orchestration with checksum-based skipping.

The config file is INI-style with sections named after the library modules.
Every artifact a stage writes gets a `<name>.meta.json` sidecar recording
the stage, toolkit version, seed, a hash of the non-path configuration, and
content hashes of the stage inputs and of the artifact itself. A stage is
skipped when all of its declared outputs exist and their sidecars match the
current run; editing an artifact, an input, the seed, or any non-path config
value makes the affected stages stale again.
"""

from __future__ import annotations

import configparser
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .align import load_aligned_pair, prepare_and_align, save_aligned_pair
from .corpus import (
    build_vocabulary,
    count_cooccurrences,
    load_cooc,
    load_corpus,
    load_vocabulary,
    save_cooc,
    save_vocabulary,
)
from .dialectogram import (
    aggregate_characteristic_use,
    build_dialectogram,
    export_dialectogram,
    save_aggregate_table,
)
from .errors import ConfigError, DataError
from .figures import dialectogram_png, loss_trace_png, measure_frequency_png
from .fileio import ensure_dir, resolve_read_path, sha256_bytes, sha256_file
from .glove import (
    GloveConfig,
    finalize_embedding,
    load_embedding_text,
    save_embedding_text,
    save_loss_trace,
    train_glove,
)
from .measures import SvmConfig, build_measure_table, save_measure_table
from .swapbench import DEFAULT_DEGREES

STAGES = ("vocab", "cooc", "train", "align", "measures", "dialectograms")

# section -> known keys; anything else in the file is a hard error
CONFIG_SCHEMA = {
    "corpus": {"corpus1", "corpus2", "dedup", "min_count", "window", "distance_weighting"},
    "glove": {"dim", "epochs", "x_max", "alpha", "learning_rate", "weighting", "residual_clip"},
    "align": {"method", "frequency_adjust", "adjust_raw"},
    "measures": {"knn_k", "svm_lambda", "svm_epochs", "svm_loss_threshold", "pca_center", "ec_source"},
    "dialectogram": {"focal_words", "exclude_top", "threshold", "label_top", "aggregate"},
    "swapbench": {"deciles", "pairs_per_decile", "degrees", "pos_file"},
    "output": {"directory", "compress", "seed", "threads"},
}

_PATH_FIELDS = ("corpus1", "corpus2", "pos_file", "out_dir")


@dataclass
class PipelineConfig:
    corpus1: Path
    corpus2: Path
    out_dir: Path
    dedup: bool = True
    min_count: int = 100
    window: int = 10
    distance_weighting: bool = True
    glove: GloveConfig = field(default_factory=GloveConfig)
    method: str = "procrustes"
    adjust_frequency: bool = True
    adjust_raw: bool = True
    knn_k: int = 30
    svm_lambda: float = 1e-4
    svm_epochs: int = 20
    svm_loss_threshold: float = 0.5
    pca_center: bool = False
    ec_source: str = "training"
    focal_words: tuple[str, ...] = ()
    exclude_top: int = 3
    threshold: float = 0.2
    label_top: int = 80
    aggregate: bool = True
    sw_deciles: int = 10
    sw_pairs_per_decile: int = 30
    sw_degrees: tuple[float, ...] = DEFAULT_DEGREES
    sw_pos_file: Path | None = None
    compress: bool = False
    seed: int = 0
    threads: int = 1

    def validate(self) -> None:
        for name in ("corpus1", "corpus2"):
            p = getattr(self, name)
            if not Path(p).exists():
                raise ConfigError(f"corpus file not found: {p}")
        if self.sw_pos_file is not None and not self.sw_pos_file.exists():
            raise ConfigError(f"pos file not found: {self.sw_pos_file}")
        if self.method not in ("procrustes", "cca", "leastsq"):
            raise ConfigError(f"unknown alignment method: {self.method!r}")
        if self.ec_source not in ("training", "uniform"):
            raise ConfigError(f"ec_source must be 'training' or 'uniform', got {self.ec_source!r}")
        if self.threshold <= 0:
            raise ConfigError("threshold must be positive")
        if self.min_count < 1 or self.window < 1:
            raise ConfigError("min_count and window must be at least 1")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")

    def config_hash(self) -> str:
        """Hash the run-defining values; paths and threads stay out so moving
        files (same content) or changing parallelism does not invalidate."""
        d = {}
        for key, value in self.__dict__.items():
            if key in _PATH_FIELDS or key == "threads":
                continue
            if isinstance(value, GloveConfig):
                d[key] = value.__dict__
            elif isinstance(value, tuple):
                d[key] = list(value)
            else:
                d[key] = value
        return sha256_bytes(json.dumps(d, sort_keys=True).encode("utf-8"))


_BOOLS = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


class _SectionReader:
    def __init__(self, cp: configparser.ConfigParser, section: str):
        self.cp = cp
        self.section = section

    def _raw(self, key):
        if self.cp.has_option(self.section, key):
            return self.cp.get(self.section, key).strip()
        return None

    def get(self, key, default=None, required=False):
        v = self._raw(key)
        if v is None:
            if required:
                raise ConfigError(f"missing required config key [{self.section}] {key}")
            return default
        return v

    def get_typed(self, key, cast, default):
        v = self._raw(key)
        if v is None:
            return default
        try:
            return cast(v)
        except ValueError:
            raise ConfigError(f"bad value for [{self.section}] {key}: {v!r}") from None

    def get_bool(self, key, default):
        v = self._raw(key)
        if v is None:
            return default
        if v.lower() not in _BOOLS:
            raise ConfigError(f"bad boolean for [{self.section}] {key}: {v!r}")
        return _BOOLS[v.lower()]


def parse_config(path: str | Path, seed: int | None = None, threads: int | None = None) -> PipelineConfig:
    """Read and validate an INI config; seed/threads arguments override it."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(path.read_text(encoding="utf-8"), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None

    for section in cp.sections():
        if section not in CONFIG_SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        unknown = set(cp.options(section)) - CONFIG_SCHEMA[section]
        if unknown:
            names = ", ".join(sorted(unknown))
            raise ConfigError(f"unknown key(s) in [{section}]: {names}")

    base = path.parent

    def respath(value):
        p = Path(value)
        return p if p.is_absolute() else base / p

    corpus = _SectionReader(cp, "corpus")
    glove = _SectionReader(cp, "glove")
    align_s = _SectionReader(cp, "align")
    measures = _SectionReader(cp, "measures")
    dia = _SectionReader(cp, "dialectogram")
    swap = _SectionReader(cp, "swapbench")
    output = _SectionReader(cp, "output")

    eff_seed = seed if seed is not None else output.get_typed("seed", int, 0)
    eff_threads = threads if threads is not None else output.get_typed("threads", int, 1)

    glove_config = GloveConfig(
        dim=glove.get_typed("dim", int, 300),
        epochs=glove.get_typed("epochs", int, 30),
        x_max=glove.get_typed("x_max", float, 100.0),
        alpha=glove.get_typed("alpha", float, 0.75),
        learning_rate=glove.get_typed("learning_rate", float, 0.05),
        weighting=glove.get("weighting", "default"),
        residual_clip=glove.get_typed("residual_clip", float, 100.0),
        seed=eff_seed,
    )

    focal_raw = dia.get("focal_words", "")
    degrees_raw = swap.get("degrees")
    if degrees_raw is None:
        degrees = DEFAULT_DEGREES
    else:
        try:
            degrees = tuple(float(x) for x in degrees_raw.split(",") if x.strip())
        except ValueError:
            raise ConfigError(f"bad value for [swapbench] degrees: {degrees_raw!r}") from None
    pos_file = swap.get("pos_file")

    config = PipelineConfig(
        corpus1=respath(corpus.get("corpus1", required=True)),
        corpus2=respath(corpus.get("corpus2", required=True)),
        out_dir=respath(output.get("directory", required=True)),
        dedup=corpus.get_bool("dedup", True),
        min_count=corpus.get_typed("min_count", int, 100),
        window=corpus.get_typed("window", int, 10),
        distance_weighting=corpus.get_bool("distance_weighting", True),
        glove=glove_config,
        method=align_s.get("method", "procrustes"),
        adjust_frequency=align_s.get_bool("frequency_adjust", True),
        adjust_raw=align_s.get_bool("adjust_raw", True),
        knn_k=measures.get_typed("knn_k", int, 30),
        svm_lambda=measures.get_typed("svm_lambda", float, 1e-4),
        svm_epochs=measures.get_typed("svm_epochs", int, 20),
        svm_loss_threshold=measures.get_typed("svm_loss_threshold", float, 0.5),
        pca_center=measures.get_bool("pca_center", False),
        ec_source=measures.get("ec_source", "training"),
        focal_words=tuple(focal_raw.split()),
        exclude_top=dia.get_typed("exclude_top", int, 3),
        threshold=dia.get_typed("threshold", float, 0.2),
        label_top=dia.get_typed("label_top", int, 80),
        aggregate=dia.get_bool("aggregate", True),
        sw_deciles=swap.get_typed("deciles", int, 10),
        sw_pairs_per_decile=swap.get_typed("pairs_per_decile", int, 30),
        sw_degrees=degrees,
        sw_pos_file=respath(pos_file) if pos_file else None,
        compress=output.get_bool("compress", False),
        seed=eff_seed,
        threads=eff_threads,
    )
    config.validate()
    return config


class Workspace:
    """Paths and sidecar bookkeeping for one output directory."""

    # artifacts that honor --compress (save helpers append .gz themselves)
    _COMPRESSIBLE = (".txt", ".csv")

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.dir = ensure_dir(config.out_dir)
        self.hash = config.config_hash()

    def base(self, name: str) -> Path:
        return self.dir / name

    def real(self, name: str) -> Path:
        """On-disk path: base + .gz for compressible artifacts when enabled.

        Only the bulk delimited intermediates compress; dialectogram exports
        stay plain so the json/csv/svg triple stays uniformly readable.
        """
        p = self.dir / name
        compressible = name.endswith(self._COMPRESSIBLE) and not name.startswith("dialectogram.")
        if self.config.compress and compressible:
            return Path(str(p) + ".gz")
        return p

    def read(self, name: str) -> Path:
        p = resolve_read_path(self.dir / name)
        if not p.exists():
            raise DataError(f"missing artifact: {self.dir / name} (run the producing stage first)")
        return p

    def hash_inputs(self, names) -> dict[str, str]:
        """names: artifact names, or (label, Path) tuples for external files.
        Labels (not paths) key the sidecar dict so relocating an input with
        identical content does not invalidate downstream stages."""
        out = {}
        for n in names:
            if isinstance(n, tuple):
                label, p = n
                if not p.exists():
                    raise ConfigError(f"corpus file not found: {p}")
                out[label] = sha256_file(p)
            else:
                out[n] = sha256_file(self.read(n))
        return out

    def sidecar_path(self, name: str) -> Path:
        real = self.real(name)
        return real.with_name(real.name + ".meta.json")

    def write_sidecar(self, stage: str, name: str, inputs: dict[str, str]) -> None:
        real = self.real(name)
        meta = {
            "stage": stage,
            "toolkit_version": __version__,
            "seed": self.config.seed,
            "config_hash": self.hash,
            "inputs": inputs,
            "signature": sha256_file(real),
        }
        with open(self.sidecar_path(name), "w", encoding="utf-8", newline="\n") as f:
            json.dump(meta, f, indent=1, sort_keys=True)
            f.write("\n")

    def stage_current(self, outputs, inputs: dict[str, str]) -> bool:
        for name in outputs:
            real = self.real(name)
            side = self.sidecar_path(name)
            if not real.exists() or not side.exists():
                return False
            try:
                meta = json.loads(side.read_text(encoding="utf-8"))
            except json.JSONDecodeError:
                return False
            if meta.get("config_hash") != self.hash:
                return False
            if meta.get("seed") != self.config.seed:
                return False
            if meta.get("toolkit_version") != __version__:
                return False
            if meta.get("inputs") != inputs:
                return False
            if meta.get("signature") != sha256_file(real):
                return False
        return True


def _load_corpora(cfg: PipelineConfig):
    c1 = load_corpus(cfg.corpus1, label="corpus1", dedup=cfg.dedup)
    c2 = load_corpus(cfg.corpus2, label="corpus2", dedup=cfg.dedup)
    return c1, c2


def _svm_config(cfg: PipelineConfig) -> SvmConfig:
    return SvmConfig(
        lam=cfg.svm_lambda,
        epochs=cfg.svm_epochs,
        seed=cfg.seed,
        loss_threshold=cfg.svm_loss_threshold,
    )


def _ec_names(cfg: PipelineConfig):
    if cfg.ec_source == "uniform":
        return "cooc1.uniform.txt", "cooc2.uniform.txt"
    return "cooc1.txt", "cooc2.txt"


def _stage_vocab(ws: Workspace):
    cfg = ws.config
    c1, c2 = _load_corpora(cfg)
    vocab = build_vocabulary(c1, c2, min_count=cfg.min_count)
    save_vocabulary(vocab, ws.base("vocab.txt"), compress=cfg.compress)


def _stage_cooc(ws: Workspace):
    cfg = ws.config
    vocab = load_vocabulary(ws.read("vocab.txt"))
    c1, c2 = _load_corpora(cfg)
    for corpus, name in ((c1, "cooc1"), (c2, "cooc2")):
        cooc = count_cooccurrences(
            corpus, vocab, window=cfg.window,
            distance_weighting=cfg.distance_weighting, threads=cfg.threads,
        )
        save_cooc(cooc, ws.base(f"{name}.txt"), compress=cfg.compress)
        if cfg.ec_source == "uniform":
            flat = count_cooccurrences(
                corpus, vocab, window=cfg.window,
                distance_weighting=False, threads=cfg.threads,
            )
            save_cooc(flat, ws.base(f"{name}.uniform.txt"), compress=cfg.compress)


def _stage_train(ws: Workspace):
    cfg = ws.config
    vocab = load_vocabulary(ws.read("vocab.txt"))
    traces = {}
    for k in (1, 2):
        cooc = load_cooc(ws.read(f"cooc{k}.txt"))
        params, trace = train_glove(cooc, cfg.glove, threads=cfg.threads)
        emb = finalize_embedding(params, vocab, normalize=False)
        save_embedding_text(emb, ws.base(f"emb{k}.txt"), compress=cfg.compress)
        save_loss_trace(trace, ws.base(f"trace{k}.txt"), compress=cfg.compress)
        traces[f"corpus{k}"] = trace
    loss_trace_png(traces, ws.base("losses.png"))


def _stage_align(ws: Workspace):
    cfg = ws.config
    vocab = load_vocabulary(ws.read("vocab.txt"))
    raw1 = load_embedding_text(ws.read("emb1.txt"), vocab)
    raw2 = load_embedding_text(ws.read("emb2.txt"), vocab)
    pair = prepare_and_align(
        raw1, raw2, method=cfg.method,
        adjust_frequency=cfg.adjust_frequency, adjust_raw=cfg.adjust_raw,
    )
    save_aligned_pair(
        pair, ws.base("aligned1.txt"), ws.base("aligned2.txt"),
        ws.base("aligned.json"), compress=cfg.compress,
    )


def _load_pair(ws: Workspace):
    vocab = load_vocabulary(ws.read("vocab.txt"))
    return vocab, load_aligned_pair(
        ws.read("aligned1.txt"), ws.read("aligned2.txt"), ws.read("aligned.json"), vocab
    )


def _stage_measures(ws: Workspace):
    cfg = ws.config
    vocab, pair = _load_pair(ws)
    raw1 = load_embedding_text(ws.read("emb1.txt"), vocab).normalize()
    raw2 = load_embedding_text(ws.read("emb2.txt"), vocab).normalize()
    ec1_name, ec2_name = _ec_names(cfg)
    ec1 = load_cooc(ws.read(ec1_name))
    ec2 = load_cooc(ws.read(ec2_name))
    table = build_measure_table(
        pair, raw1, raw2, ec1, ec2,
        knn_k=cfg.knn_k, svm_config=_svm_config(cfg), pca_center=cfg.pca_center,
    )
    save_measure_table(table, ws.base("measures.csv"), compress=cfg.compress)
    measure_frequency_png(table, ws.base("measures.png"))


def dialectogram_outputs(focal: str):
    return [f"dialectogram.{focal}.{ext}" for ext in ("json", "csv", "svg", "png")]


def _write_dialectogram(ws: Workspace, pair, ec1, ec2, focal: str):
    cfg = ws.config
    d = build_dialectogram(pair, ec1, ec2, focal, exclude_top=cfg.exclude_top)
    export_dialectogram(d, "json", ws.base(f"dialectogram.{focal}.json"))
    export_dialectogram(d, "csv", ws.base(f"dialectogram.{focal}.csv"))
    export_dialectogram(d, "svg", ws.base(f"dialectogram.{focal}.svg"), label_top=cfg.label_top)
    dialectogram_png(d, ws.base(f"dialectogram.{focal}.png"))


def _stage_dialectograms(ws: Workspace):
    cfg = ws.config
    _, pair = _load_pair(ws)
    ec1_name, ec2_name = _ec_names(cfg)
    ec1 = load_cooc(ws.read(ec1_name))
    ec2 = load_cooc(ws.read(ec2_name))
    for focal in cfg.focal_words:
        _write_dialectogram(ws, pair, ec1, ec2, focal)
    if cfg.aggregate:
        table = aggregate_characteristic_use(pair, threshold=cfg.threshold)
        save_aggregate_table(table, ws.base("aggregate.csv"), compress=cfg.compress)


def _stage_spec(ws: Workspace):
    """(inputs, outputs, runner) per stage, in fixed execution order."""
    cfg = ws.config
    cooc_out = ["cooc1.txt", "cooc2.txt"]
    if cfg.ec_source == "uniform":
        cooc_out += ["cooc1.uniform.txt", "cooc2.uniform.txt"]
    ec1_name, ec2_name = _ec_names(cfg)
    dia_out = [name for focal in cfg.focal_words for name in dialectogram_outputs(focal)]
    if cfg.aggregate:
        dia_out.append("aggregate.csv")
    return {
        "vocab": (
            [("corpus1", cfg.corpus1), ("corpus2", cfg.corpus2)],
            ["vocab.txt"],
            _stage_vocab,
        ),
        "cooc": (
            [("corpus1", cfg.corpus1), ("corpus2", cfg.corpus2), "vocab.txt"],
            cooc_out,
            _stage_cooc,
        ),
        "train": (
            ["vocab.txt", "cooc1.txt", "cooc2.txt"],
            ["emb1.txt", "emb2.txt", "trace1.txt", "trace2.txt", "losses.png"],
            _stage_train,
        ),
        "align": (
            ["vocab.txt", "emb1.txt", "emb2.txt"],
            ["aligned1.txt", "aligned2.txt", "aligned.json"],
            _stage_align,
        ),
        "measures": (
            ["vocab.txt", "aligned1.txt", "aligned2.txt", "aligned.json",
             "emb1.txt", "emb2.txt", ec1_name, ec2_name],
            ["measures.csv", "measures.png"],
            _stage_measures,
        ),
        "dialectograms": (
            ["vocab.txt", "aligned1.txt", "aligned2.txt", "aligned.json", ec1_name, ec2_name],
            dia_out,
            _stage_dialectograms,
        ),
    }


def parse_stage_range(spec: str | None) -> tuple[int, int]:
    """'a:b' (inclusive), 'a:', ':b', or a single stage name."""
    if spec is None or spec.strip() == "":
        return 0, len(STAGES) - 1
    spec = spec.strip()
    if ":" in spec:
        lo_s, hi_s = spec.split(":", 1)
    else:
        lo_s = hi_s = spec
    try:
        lo = STAGES.index(lo_s) if lo_s else 0
        hi = STAGES.index(hi_s) if hi_s else len(STAGES) - 1
    except ValueError:
        raise ConfigError(
            f"unknown stage in range {spec!r}; stages are {', '.join(STAGES)}"
        ) from None
    if lo > hi:
        raise ConfigError(f"empty stage range: {spec!r}")
    return lo, hi


def run_stage(ws: Workspace, stage: str, force: bool = False) -> str:
    """Run one stage (or skip if current). Returns 'ran', 'skipped', or 'empty'."""
    inputs_spec, outputs, runner = _stage_spec(ws)[stage]
    if not outputs:
        return "empty"
    inputs = ws.hash_inputs(inputs_spec)
    if not force and ws.stage_current(outputs, inputs):
        return "skipped"
    runner(ws)
    for name in outputs:
        if not ws.real(name).exists():
            raise DataError(f"stage {stage} did not produce {ws.real(name)}")
        ws.write_sidecar(stage, name, inputs)
    return "ran"


def run_pipeline(config: PipelineConfig, stage_range: str | None = None, force: bool = False):
    """Execute the stage chain, skipping checksum-current stages.

    Returns {stage: 'ran' | 'skipped' | 'empty'} for the selected range.
    """
    config.validate()
    ws = Workspace(config)
    lo, hi = parse_stage_range(stage_range)
    results = {}
    for stage in STAGES[lo : hi + 1]:
        results[stage] = run_stage(ws, stage, force=force)
    return results
