"""Experiment harness: sweep encoder kind x output dim x pooling x seed
over a set of tasks, train one probe per tuple, and emit result tables.

Outputs in the configured directory:
  results.csv  one row per tuple: task,encoder,dim,pooling,seed,accuracy,wall_ms
  summary.csv  per (task, encoder, dim, pooling): mean, sample sd, n over seeds
  errors.csv   written only when tuples failed (same key columns + message)

Rows are sorted canonically (task, encoder, dim, pooling, seed) regardless
of worker schedule, and accuracy cells use repr(float), so identical
configs reproduce identical bytes (set timing=off to also pin wall_ms).
"""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import encoders as enc
from .embeddings import (
    WordEmbeddingTable,
    clean_tokens,
    embed_sentence,
    load_embeddings,
    tokenize,
)
from .encoders import ConfigError
from .probe import ProbeConfig, SplitPlan, kfold_accuracy, pair_features, train_probe
from .tasks import TaskDataset, load_task

__all__ = [
    "EncoderSpec",
    "ExperimentConfig",
    "ResultRow",
    "SummaryRow",
    "ExperimentResult",
    "parse_encoder_spec",
    "run_experiment",
    "aggregate",
    "write_results_csv",
    "write_summary_csv",
    "write_errors_csv",
    "RESULTS_HEADER",
    "SUMMARY_HEADER",
]

RESULTS_HEADER = "task,encoder,dim,pooling,seed,accuracy,wall_ms"
SUMMARY_HEADER = "task,encoder,dim,pooling,mean,sd,n"


@dataclass(frozen=True)
class EncoderSpec:
    """One encoder column of the sweep: kind plus fixed hyperparameters.

    label is the config-file token ("cnn(window=2)"), used verbatim in the
    encoder column of every output table.
    """

    kind: str
    hyper: tuple[tuple[str, object], ...] = ()
    label: str = ""

    def hyper_dict(self) -> dict:
        return dict(self.hyper)


def _parse_value(raw: str):
    lowered = raw.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw


def parse_encoder_spec(token: str) -> EncoderSpec:
    """Parse "kind" or "kind(key=value,key=value)" into an EncoderSpec."""
    token = token.strip()
    if "(" in token:
        if not token.endswith(")"):
            raise ConfigError(f"malformed encoder spec {token!r}")
        kind, _, inner = token[:-1].partition("(")
        hyper = []
        for part in filter(None, (p.strip() for p in inner.split(","))):
            if "=" not in part:
                raise ConfigError(f"encoder spec {token!r}: expected key=value, got {part!r}")
            key, _, value = part.partition("=")
            hyper.append((key.strip(), _parse_value(value.strip())))
    else:
        kind, hyper = token, []
    kind = kind.strip()
    if kind not in enc.ENCODER_KINDS:
        raise ConfigError(
            f"unknown encoder kind {kind!r}; expected one of {enc.ENCODER_KINDS}"
        )
    return EncoderSpec(kind, tuple(hyper), token)


@dataclass(frozen=True)
class ExperimentConfig:
    embeddings: str
    tasks: tuple[str, ...]
    encoders: tuple[EncoderSpec, ...]
    dims: tuple[int, ...] = (128, 512, 1024, 2048, 4096)
    poolings: tuple[str, ...] = ("max", "mean")
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    output_dir: str = "out"
    workers: int = 1
    timing: bool = True
    oov: str = "drop"
    lowercase: bool = True
    clean: bool = False  # cleanup always runs on the tree path; this extends it to all encoders

    def __post_init__(self):
        if not self.tasks or not self.encoders or not self.dims or not self.poolings:
            raise ConfigError("tasks, encoders, dims and poolings must all be non-empty")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError(f"seeds must be distinct, got {self.seeds}")
        for p in self.poolings:
            if p not in enc.POOLINGS:
                raise ConfigError(f"unknown pooling {p!r}; expected subset of {enc.POOLINGS}")
        if any(d < 1 for d in self.dims):
            raise ConfigError(f"dims must be positive, got {self.dims}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.oov not in ("drop", "zero"):
            raise ConfigError(f"oov policy must be drop or zero, got {self.oov!r}")

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        """Key=value config file mirroring the dataclass fields; list values
        are comma-separated; paths resolve relative to the config file."""
        base = os.path.dirname(os.path.abspath(path))
        entries: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                if "=" not in stripped:
                    raise ConfigError(f"{path}:{line_no}: expected key=value, got {stripped!r}")
                key, _, value = stripped.partition("=")
                key = key.strip()
                if key in entries:
                    raise ConfigError(f"{path}:{line_no}: duplicate key {key!r}")
                entries[key] = value.strip()

        known = {
            "embeddings", "tasks", "encoders", "dims", "poolings", "seeds",
            "probe", "probe_hidden", "max_epochs", "patience", "eval_interval",
            "probe_seed", "l2_grid", "output_dir", "workers", "timing", "oov",
            "lowercase", "clean",
        }
        for key in entries:
            if key not in known:
                raise ConfigError(f"{path}: unknown config key {key!r}")
        for key in ("embeddings", "tasks", "encoders"):
            if key not in entries:
                raise ConfigError(f"{path}: config is missing {key}=")

        def split_list(key: str) -> list[str]:
            return [t.strip() for t in entries[key].split(",") if t.strip()]

        def split_specs(value: str) -> list[str]:
            # commas inside parentheses belong to an encoder's hyperparameters
            parts, depth, current = [], 0, []
            for ch in value:
                if ch == "," and depth == 0:
                    parts.append("".join(current))
                    current = []
                    continue
                depth += (ch == "(") - (ch == ")")
                current.append(ch)
            parts.append("".join(current))
            return [p.strip() for p in parts if p.strip()]

        probe_kwargs = {}
        if "probe" in entries:
            probe_kwargs["kind"] = entries["probe"]
        if "probe_hidden" in entries:
            probe_kwargs["hidden"] = int(entries["probe_hidden"])
        if "max_epochs" in entries:
            probe_kwargs["max_epochs"] = int(entries["max_epochs"])
        if "patience" in entries:
            probe_kwargs["patience"] = int(entries["patience"])
        if "eval_interval" in entries:
            probe_kwargs["eval_interval"] = int(entries["eval_interval"])
        if "probe_seed" in entries:
            probe_kwargs["seed"] = int(entries["probe_seed"])
        if "l2_grid" in entries:
            probe_kwargs["l2_grid"] = tuple(float(v) for v in split_list("l2_grid"))

        kwargs: dict = {
            "embeddings": os.path.join(base, entries["embeddings"]),
            "tasks": tuple(os.path.join(base, t) for t in split_list("tasks")),
            "encoders": tuple(parse_encoder_spec(t) for t in split_specs(entries["encoders"])),
            "probe": ProbeConfig(**probe_kwargs),
        }
        if "dims" in entries:
            kwargs["dims"] = tuple(int(v) for v in split_list("dims"))
        if "poolings" in entries:
            kwargs["poolings"] = tuple(split_list("poolings"))
        if "seeds" in entries:
            kwargs["seeds"] = tuple(int(v) for v in split_list("seeds"))
        if "output_dir" in entries:
            kwargs["output_dir"] = os.path.join(base, entries["output_dir"])
        if "workers" in entries:
            kwargs["workers"] = int(entries["workers"])
        for flag in ("timing", "lowercase", "clean"):
            if flag in entries:
                if entries[flag] not in ("on", "off"):
                    raise ConfigError(f"{path}: {flag}= must be on or off")
                kwargs[flag] = entries[flag] == "on"
        if "oov" in entries:
            kwargs["oov"] = entries["oov"]
        return cls(**kwargs)


@dataclass(frozen=True)
class ResultRow:
    task: str
    encoder: str
    dim: int
    pooling: str
    seed: int
    accuracy: float  # nan when errored
    wall_ms: int
    error: str = ""

    @property
    def sort_key(self):
        return (self.task, self.encoder, self.dim, self.pooling, self.seed)


@dataclass(frozen=True)
class SummaryRow:
    task: str
    encoder: str
    dim: int
    pooling: str
    mean: float
    sd: float
    n: int


@dataclass(frozen=True)
class ExperimentResult:
    rows: tuple[ResultRow, ...]
    summary: tuple[SummaryRow, ...]

    @property
    def errors(self) -> tuple[ResultRow, ...]:
        return tuple(r for r in self.rows if r.error)


# ---------------------------------------------------------------------------
# Sentence preparation (shared across all tuples of a task).
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _PreparedTask:
    """Per-task embedded sentences, shared across all sweep tuples.

    The sequence path follows the configured cleanup/OOV policy; the tree
    path always cleans (the corpus rules are stated for that encoder) and
    maps OOV tokens to zero rows so leaves stay aligned with the parse.
    """

    dataset: TaskDataset
    seqs: tuple  # TokenSequence per example (first sentence)
    seqs2: tuple | None  # pair second sentences
    tree_seqs: tuple | None
    tree_seqs2: tuple | None


def _prepare_task(config: ExperimentConfig, dataset: TaskDataset,
                  table: WordEmbeddingTable) -> _PreparedTask:
    def prep(texts, for_tree: bool):
        out = []
        for text in texts:
            tokens = tokenize(text, lowercase=config.lowercase)
            if for_tree or config.clean:
                tokens = clean_tokens(tokens)
            policy = "zero" if for_tree else config.oov
            out.append(embed_sentence(table, tokens, oov=policy))
        return tuple(out)

    is_pair = dataset.kind == "pair"
    seqs = prep(dataset.texts, False)
    seqs2 = prep(dataset.texts2, False) if is_pair else None
    tree_seqs = prep(dataset.texts, True) if dataset.trees is not None else None
    tree_seqs2 = prep(dataset.texts2, True) if is_pair and dataset.trees2 is not None else None
    return _PreparedTask(dataset, seqs, seqs2, tree_seqs, tree_seqs2)


# ---------------------------------------------------------------------------
# Job execution.
# ---------------------------------------------------------------------------


def _build_encoder(spec: EncoderSpec, seed: int, in_dim: int, dim: int):
    return enc.build_encoder(spec.kind, seed, in_dim, dim, **spec.hyper_dict())


def _embed_all(params, prepared: _PreparedTask, pooling: str) -> np.ndarray:
    ds = prepared.dataset
    on_trees = params.kind == "tree_lstm"
    seqs = prepared.tree_seqs if on_trees else prepared.seqs
    x = enc.encode_corpus(params, list(seqs), pooling, trees=ds.trees if on_trees else None)
    if ds.kind == "pair":
        seqs2 = prepared.tree_seqs2 if on_trees else prepared.seqs2
        x2 = enc.encode_corpus(
            params, list(seqs2), pooling, trees=ds.trees2 if on_trees else None
        )
        return pair_features(x, x2)
    return x


def _run_tuple(
    prepared: _PreparedTask, spec: EncoderSpec, dim: int, pooling: str, seed: int,
    probe_config: ProbeConfig, timing: bool,
) -> ResultRow:
    ds = prepared.dataset
    start = time.perf_counter()
    try:
        in_dim = prepared.seqs[0].dim
        params = _build_encoder(spec, seed, in_dim, dim)
        x = _embed_all(params, prepared, pooling)
        y = ds.label_indices
        config = replace(probe_config, seed=seed)
        if ds.plan.kind == "cv":
            accuracy = kfold_accuracy(x, y, ds.plan.folds, config)
        else:
            _model, report = train_probe(x, y, ds.plan, config)
            accuracy = report.test_accuracy
        wall_ms = int(round((time.perf_counter() - start) * 1000)) if timing else 0
        return ResultRow(ds.name, spec.label, dim, pooling, seed, float(accuracy), wall_ms)
    except Exception as exc:  # crash isolation: one bad tuple never kills the sweep
        wall_ms = int(round((time.perf_counter() - start) * 1000)) if timing else 0
        return ResultRow(
            ds.name, spec.label, dim, pooling, seed, float("nan"), wall_ms,
            error=f"{type(exc).__name__}: {exc}",
        )


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Execute the full sweep; returns rows in canonical order and writes
    results.csv / summary.csv (and errors.csv when applicable) under
    config.output_dir."""
    table = load_embeddings(config.embeddings)
    datasets = [load_task(path) for path in config.tasks]
    if any(spec.kind == "tree_lstm" for spec in config.encoders):
        missing = [ds.name for ds in datasets if not ds.has_trees]
        if missing:
            raise ConfigError(
                "tree_lstm is in the encoder list but these tasks have no "
                f"parse trees: {', '.join(missing)}"
            )
    prepared = [_prepare_task(config, ds, table) for ds in datasets]

    jobs = [
        (p, spec, dim, pooling, seed)
        for p in prepared
        for spec in config.encoders
        for dim in config.dims
        for pooling in config.poolings
        for seed in config.seeds
    ]

    def run(job):
        p, spec, dim, pooling, seed = job
        return _run_tuple(p, spec, dim, pooling, seed, config.probe, config.timing)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(run, jobs))
    else:
        rows = [run(job) for job in jobs]
    rows.sort(key=lambda r: r.sort_key)
    summary = aggregate(rows)
    result = ExperimentResult(tuple(rows), tuple(summary))

    os.makedirs(config.output_dir, exist_ok=True)
    write_results_csv(os.path.join(config.output_dir, "results.csv"), result.rows)
    write_summary_csv(os.path.join(config.output_dir, "summary.csv"), result.summary)
    if result.errors:
        write_errors_csv(os.path.join(config.output_dir, "errors.csv"), result.errors)
    return result


def aggregate(rows) -> list[SummaryRow]:
    """Mean and sample (n-1) standard deviation of accuracy per
    (task, encoder, dim, pooling) over seeds, skipping errored rows.
    Groups with a single seed report sd = 0.0; n carries the flag."""
    groups: dict = {}
    for row in rows:
        if row.error:
            continue
        groups.setdefault((row.task, row.encoder, row.dim, row.pooling), []).append(row.accuracy)
    out = []
    for key in sorted(groups):
        values = groups[key]
        mean = float(np.mean(values))
        sd = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
        out.append(SummaryRow(*key, mean, sd, len(values)))
    return out


# ---------------------------------------------------------------------------
# CSV emission (repr floats: shortest round-tripping decimal form).
# ---------------------------------------------------------------------------


def _fmt(value: float) -> str:
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    return repr(float(value))


# encoder labels may carry commas ("cnn(window=2,from_borep=true)"), so
# cells go through the csv module, which quotes exactly when needed


def write_results_csv(path: str, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULTS_HEADER.split(","))
        for r in rows:
            writer.writerow(
                [r.task, r.encoder, r.dim, r.pooling, r.seed, _fmt(r.accuracy), r.wall_ms]
            )


def write_summary_csv(path: str, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_HEADER.split(","))
        for r in rows:
            writer.writerow(
                [r.task, r.encoder, r.dim, r.pooling, _fmt(r.mean), _fmt(r.sd), r.n]
            )


def write_errors_csv(path: str, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["task", "encoder", "dim", "pooling", "seed", "error"])
        for r in rows:
            writer.writerow(
                [r.task, r.encoder, r.dim, r.pooling, r.seed, r.error.replace("\n", " ")]
            )
