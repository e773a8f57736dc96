"""End-to-end pipeline driver: each stage is a subcommand over a shared config.

Subcommands: slices, merge, train, align, report, synth, run. The config is a
flat "key = value" text file; command-line flags win over config values. All
stage outputs are byte-for-byte deterministic for fixed inputs, and an output
directory is guarded by a lock file against concurrent invocations.

Exit codes: 0 success, 2 config error, 3 data error, 4 convergence failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

from . import align as align_mod
from . import corpus as corpus_mod
from . import cooccur as cooccur_mod
from . import embed as embed_mod
from . import merge as merge_mod
from . import shift as shift_mod
from . import synth as synth_mod
from .errors import ConfigError, ConvergenceFailure, DriftvecError

log = logging.getLogger("driftvec")

_CONFIG_KEYS = {
    "corpus",
    "out",
    "slice_start",
    "slice_end",
    "slice_width",
    "slice_boundaries",
    "stop_words",
    "min_count",
    "max_vocab",
    "window",
    "alpha",
    "tau",
    "dim",
    "lambda1",
    "lambda2",
    "gamma",
    "learning_rate",
    "max_iters",
    "grad_tol",
    "seed",
    "entities",
    "pairs",
    "top_k",
    "min_freq",
}


@dataclass
class PipelineConfig:
    out_dir: Path
    corpus_path: Path | None = None
    slice_start: int | None = None
    slice_end: int | None = None
    slice_width: int | None = None
    slice_boundaries: tuple[int, ...] | None = None
    stop_words_path: Path | None = None
    min_count: int = 1
    max_vocab: int | None = None
    window: int = 5
    alpha: float = 1.0
    tau: float = 0.95
    train: embed_mod.TrainConfig = dataclasses.field(default_factory=embed_mod.TrainConfig)
    entities_path: Path | None = None
    pairs: tuple[tuple[str, str], ...] = ()
    top_k: int = 20
    min_freq: int = 20


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Flat "key = value" lines; '#' comments and blank lines are ignored."""
    raw: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        raw[key] = value.strip()
    return raw


def _get(raw: dict[str, str], key: str, convert, default=None):
    value = raw.get(key, "")
    if value == "":
        return default
    try:
        return convert(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config key {key!r}: cannot parse {value!r}: {exc}") from exc


def _parse_pairs(value: str) -> tuple[tuple[str, str], ...]:
    pairs = []
    for chunk in value.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        left, sep, right = chunk.partition(":")
        if not sep or not left.strip() or not right.strip():
            raise ValueError(f"expected 'word:word', got {chunk!r}")
        pairs.append((left.strip(), right.strip()))
    return tuple(pairs)


def build_config(raw: dict[str, str], args: argparse.Namespace) -> PipelineConfig:
    out = args.out or raw.get("out")
    if not out:
        raise ConfigError("no output directory: set 'out' in the config or pass --out")
    try:
        train = embed_mod.TrainConfig(
            d=_get(raw, "dim", int, 100),
            lambda1=_get(raw, "lambda1", float, 0.1),
            lambda2=_get(raw, "lambda2", float, 0.01),
            gamma=_get(raw, "gamma", float, 0.9),
            learning_rate=_get(raw, "learning_rate", float, 1e-3),
            max_iters=_get(raw, "max_iters", int, 500),
            grad_tol=_get(raw, "grad_tol", float, 1e-5),
            seed=args.seed if args.seed is not None else _get(raw, "seed", int, 0),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    cfg = PipelineConfig(
        out_dir=Path(out),
        corpus_path=_get(raw, "corpus", Path),
        slice_start=_get(raw, "slice_start", int),
        slice_end=_get(raw, "slice_end", int),
        slice_width=_get(raw, "slice_width", int),
        slice_boundaries=_get(
            raw, "slice_boundaries", lambda v: tuple(int(b) for b in v.split(","))
        ),
        stop_words_path=_get(raw, "stop_words", Path),
        min_count=_get(raw, "min_count", int, 1),
        max_vocab=_get(raw, "max_vocab", int),
        window=_get(raw, "window", int, 5),
        alpha=_get(raw, "alpha", float, 1.0),
        tau=_get(raw, "tau", float, 0.95),
        train=train,
        entities_path=_get(raw, "entities", Path),
        pairs=_get(raw, "pairs", _parse_pairs, ()),
        top_k=_get(raw, "top_k", int, 20),
        min_freq=_get(raw, "min_freq", int, 20),
    )
    if cfg.min_count < 1:
        raise ConfigError(f"min_count must be >= 1, got {cfg.min_count}")
    if cfg.window < 1:
        raise ConfigError(f"window must be >= 1, got {cfg.window}")
    if not cfg.alpha > 0:
        raise ConfigError(f"alpha must be > 0, got {cfg.alpha}")
    if not 0.0 < cfg.tau < 1.0:
        raise ConfigError(f"tau must be in (0, 1), got {cfg.tau}")
    return cfg


@contextmanager
def output_lock(out_dir: Path):
    """Fail fast when another invocation holds the same output directory."""
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(
            f"output directory {out_dir} is locked by another run "
            f"(remove {lock} if that run is dead)"
        ) from None
    try:
        yield
    finally:
        os.close(fd)
        os.unlink(lock)


def _write_json(payload: dict, path: Path) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _tokenizer(cfg: PipelineConfig) -> corpus_mod.TokenizerConfig:
    if cfg.stop_words_path is None:
        return corpus_mod.TokenizerConfig()
    return corpus_mod.TokenizerConfig(stop_words=corpus_mod.load_stop_words(cfg.stop_words_path))


def stage_slices(cfg: PipelineConfig) -> None:
    """Corpus -> vocabulary + per-slice COOC v1 files + manifest."""
    if cfg.corpus_path is None:
        raise ConfigError("no corpus path configured")
    tokenizer = _tokenizer(cfg)
    if cfg.corpus_path.is_dir():
        doc_slices, specs = corpus_mod.read_slice_directory(cfg.corpus_path)
    else:
        if cfg.slice_boundaries is not None:
            specs = corpus_mod.specs_from_boundaries(cfg.slice_boundaries)
        elif None not in (cfg.slice_start, cfg.slice_end, cfg.slice_width):
            specs = corpus_mod.make_slice_specs(cfg.slice_start, cfg.slice_end, cfg.slice_width)
        else:
            raise ConfigError(
                "timestamped corpora need slice_start/slice_end/slice_width "
                "or slice_boundaries"
            )
        doc_slices = corpus_mod.slice_corpus(corpus_mod.read_ndjson(cfg.corpus_path), specs)
    token_slices = [corpus_mod.tokenize_documents(docs, tokenizer) for docs in doc_slices]
    vocab = corpus_mod.build_vocabulary(token_slices, cfg.min_count, cfg.max_vocab)
    corpus_mod.write_vocabulary(vocab, cfg.out_dir / "vocab.txt")
    log.info("vocabulary: %d words", len(vocab))

    slices_dir = cfg.out_dir / "slices"
    slices_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for spec, docs, tokens in zip(specs, doc_slices, token_slices):
        cooc = cooccur_mod.count_cooccurrences(
            tokens, vocab, cfg.window, slice_id=str(spec.index)
        )
        name = f"slice_{spec.index:04d}.cooc"
        cooccur_mod.write_cooc(cooc, cfg.alpha, slices_dir / name)
        entries.append(
            {
                "id": cooc.slice_id,
                "index": spec.index,
                "start": spec.start,
                "end": spec.end,
                "documents": len(docs),
                "total_tokens": cooc.total_tokens,
                "file": name,
            }
        )
        log.info("slice %s: %d documents, %d stored pairs", cooc.slice_id, len(docs), cooc.nnz)
    _write_json(
        {
            "alpha": cfg.alpha,
            "window": cfg.window,
            "min_count": cfg.min_count,
            "max_vocab": cfg.max_vocab,
            "vocab_size": len(vocab),
            "vocab_file": "../vocab.txt",
            "slices": entries,
        },
        slices_dir / "manifest.json",
    )


def _load_slice_coocs(cfg: PipelineConfig, stage_dir: str) -> tuple[dict, list[cooccur_mod.SliceCooc]]:
    manifest_path = cfg.out_dir / stage_dir / "manifest.json"
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    coocs = []
    for entry in manifest["slices"]:
        cooc, _ = cooccur_mod.read_cooc(
            cfg.out_dir / stage_dir / entry["file"],
            slice_id=entry["id"],
            window=manifest["window"],
            total_tokens=entry["total_tokens"],
        )
        coocs.append(cooc)
    return manifest, coocs


def stage_merge(cfg: PipelineConfig) -> None:
    """Adaptive merge of adjacent slices; writes the plan and merged matrices."""
    slices_manifest, coocs = _load_slice_coocs(cfg, "slices")
    plan, merged = merge_mod.adaptive_merge(coocs, cfg.tau, cfg.alpha)
    merge_dir = cfg.out_dir / "merge"
    merge_dir.mkdir(parents=True, exist_ok=True)
    plan.save(merge_dir / "plan.json")
    doc_counts = [entry["documents"] for entry in slices_manifest["slices"]]
    entries = []
    for pos, (members, cooc) in enumerate(zip(plan.groups, merged)):
        name = f"slice_{pos:04d}.cooc"
        cooccur_mod.write_cooc(cooc, cfg.alpha, merge_dir / name)
        entries.append(
            {
                "id": cooc.slice_id,
                "members": members,
                "documents": sum(doc_counts[m] for m in members),
                "total_tokens": cooc.total_tokens,
                "file": name,
            }
        )
    _write_json(
        {
            "alpha": cfg.alpha,
            "window": cfg.window,
            "tau": cfg.tau,
            "vocab_size": slices_manifest["vocab_size"],
            "slices": entries,
        },
        merge_dir / "manifest.json",
    )
    log.info("merged %d slices into %d groups", len(coocs), len(merged))


def stage_train(cfg: PipelineConfig) -> None:
    """Dynamic-update training over the merged slices."""
    vocab = corpus_mod.read_vocabulary(cfg.out_dir / "vocab.txt", cfg.min_count)
    _, coocs = _load_slice_coocs(cfg, "merge")
    normalized = [cooccur_mod.smooth_and_normalize(c, cfg.alpha) for c in coocs]
    traces: list[list[float]] = []
    embeddings = embed_mod.train_sequence(normalized, cfg.train, traces)
    emb_dir = cfg.out_dir / "embeddings"
    emb_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for pos, (emb, trace) in enumerate(zip(embeddings, traces)):
        name = f"embedding_{pos:04d}.txt"
        embed_mod.write_embedding(emb, vocab, emb_dir / name)
        entries.append(
            {
                "id": emb.slice_id,
                "file": name,
                "provenance": emb.provenance,
                "accepted_steps": len(trace) - 1,
                "final_objective": trace[-1],
            }
        )
        log.info(
            "trained slice %s: %d accepted steps, objective %.6g",
            emb.slice_id,
            len(trace) - 1,
            trace[-1],
        )
    _write_json(
        {"d": cfg.train.d, "config": dataclasses.asdict(cfg.train), "slices": entries},
        emb_dir / "manifest.json",
    )


def _load_embeddings(cfg: PipelineConfig, stage_dir: str) -> tuple[dict, list[embed_mod.EmbeddingMatrix]]:
    manifest_path = cfg.out_dir / stage_dir / "manifest.json"
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    embeddings = []
    for entry in manifest["slices"]:
        _, matrix = embed_mod.read_embedding(cfg.out_dir / stage_dir / entry["file"])
        embeddings.append(
            embed_mod.EmbeddingMatrix(
                slice_id=entry["id"], vectors=matrix, provenance=entry["provenance"]
            )
        )
    return manifest, embeddings


def stage_align(cfg: PipelineConfig) -> None:
    """Procrustes-align every merged slice onto the last."""
    vocab = corpus_mod.read_vocabulary(cfg.out_dir / "vocab.txt", cfg.min_count)
    _, embeddings = _load_embeddings(cfg, "embeddings")
    aligned, transforms = align_mod.align_with_transforms(embeddings)
    aligned_dir = cfg.out_dir / "aligned"
    aligned_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for pos, emb in enumerate(aligned):
        name = f"embedding_{pos:04d}.txt"
        embed_mod.write_embedding(emb, vocab, aligned_dir / name)
        transform_name = None
        if pos < len(transforms):
            transform_name = f"transform_{pos:04d}.txt"
            align_mod.write_transform(transforms[pos], aligned_dir / transform_name)
        entries.append(
            {
                "id": emb.slice_id,
                "file": name,
                "provenance": emb.provenance,
                "transform": transform_name,
            }
        )
    _write_json(
        {"reference": aligned[-1].slice_id, "slices": entries},
        aligned_dir / "manifest.json",
    )
    log.info("aligned %d slices onto %s", len(aligned), aligned[-1].slice_id)


def stage_report(cfg: PipelineConfig) -> None:
    """Shift report, top-shifted ranking, pair series, association networks."""
    vocab = corpus_mod.read_vocabulary(cfg.out_dir / "vocab.txt", cfg.min_count)
    _, embeddings = _load_embeddings(cfg, "aligned")
    report_dir = cfg.out_dir / "report"
    report_dir.mkdir(parents=True, exist_ok=True)

    report = shift_mod.shift_report(embeddings, vocab)
    shift_mod.write_shift_report(report, report_dir / "shift_report.csv")

    ranked = shift_mod.top_shifted(embeddings, vocab, cfg.top_k, cfg.min_freq)
    with open(report_dir / "top_shifted.csv", "w", encoding="utf-8", newline="") as handle:
        handle.write("word,total_shift\n")
        for word, score in ranked:
            handle.write(f"{word},{score!r}\n")

    labels = [e.slice_id for e in embeddings]
    for word_a, word_b in cfg.pairs:
        series = shift_mod.pair_series(word_a, word_b, embeddings, vocab)
        shift_mod.write_pair_series(
            series, labels, report_dir / f"pair_{word_a}__{word_b}.csv"
        )

    if cfg.entities_path is not None:
        with open(cfg.entities_path, encoding="utf-8") as handle:
            nodes = [line.strip() for line in handle if line.strip()]
        network = shift_mod.association_network(nodes, embeddings, vocab)
        shift_mod.write_association_network(network, report_dir)
    log.info("report written to %s", report_dir)


def stage_synth(args: argparse.Namespace, out_dir: Path) -> None:
    """Generate a synthetic corpus plus its ground-truth record."""
    seed = args.seed if args.seed is not None else 0
    common = {
        "vocab_size": args.vocab_size,
        "n_slices": args.slices,
        "docs_per_slice": args.docs_per_slice,
        "doc_length": args.doc_length,
        "seed": seed,
    }
    factories = {
        "pivot": synth_mod.pivot_scenario,
        "gradual-drift": synth_mod.gradual_drift_scenario,
        "association-strengthen": synth_mod.association_scenario,
        "stable-only": synth_mod.stable_scenario,
    }
    scenario = factories[args.kind](**common)
    docs, truth = synth_mod.generate(scenario)
    corpus_mod.write_ndjson(docs, out_dir / "corpus.ndjson")
    truth.save(out_dir / "ground_truth.json")
    log.info("wrote %d documents to %s", len(docs), out_dir / "corpus.ndjson")


_PIPELINE_STAGES = {
    "slices": (stage_slices,),
    "merge": (stage_merge,),
    "train": (stage_train,),
    "align": (stage_align,),
    "report": (stage_report,),
    "run": (stage_slices, stage_merge, stage_train, stage_align, stage_report),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftvec",
        description="Dynamic word embeddings over time-sliced corpora.",
    )
    parser.add_argument("--config", help="path to the flat key = value config file")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", default=None, help="override the output directory")
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("slices", "build vocabulary and per-slice co-occurrence matrices"),
        ("merge", "adaptively merge adjacent slices"),
        ("train", "train dynamic embeddings over merged slices"),
        ("align", "Procrustes-align embeddings onto the last slice"),
        ("report", "write shift report, pair series, and networks"),
        ("run", "run all five stages in order"),
    ]:
        sub.add_parser(name, help=help_text)
    synth = sub.add_parser("synth", help="generate a synthetic corpus with ground truth")
    synth.add_argument("--kind", choices=synth_mod.SCENARIO_KINDS, default="pivot")
    synth.add_argument("--vocab-size", type=int, default=80)
    synth.add_argument("--slices", type=int, default=6)
    synth.add_argument("--docs-per-slice", type=int, default=3000)
    synth.add_argument("--doc-length", type=int, default=10)
    return parser


def run_command(args: argparse.Namespace) -> int:
    if args.command == "synth":
        out = args.out
        if not out and args.config:
            out = parse_config_file(args.config).get("out")
        if not out:
            raise ConfigError("synth needs an output directory: pass --out or set 'out'")
        out_dir = Path(out)
        with output_lock(out_dir):
            stage_synth(args, out_dir)
        return 0
    raw = parse_config_file(args.config) if args.config else {}
    cfg = build_config(raw, args)
    stages = _PIPELINE_STAGES[args.command]
    with output_lock(cfg.out_dir):
        for stage in stages:
            stage(cfg)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return run_command(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceFailure as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return 4
    except (DriftvecError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
