"""Command-line interface: run, match, wmd, and eval subcommands.

Flags can also come from an optional config file (one ``key = value`` per
line, ``#`` comments, unknown keys rejected); explicit flags win over file
values, which win over defaults. IMAT_THREADS is honored as a fallback for
--threads. Every phase failure maps to its own nonzero exit code with the
message on standard error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .corpus import Sentence, load_corpus, tokenize
from .embedding import load_embeddings, sentence_embedding, cosine_similarity
from .errors import (
    CheckpointError,
    ConfigError,
    CorpusError,
    EmbeddingError,
    EvalError,
    ImatError,
    MatchingError,
    SolverError,
    TranslationError,
)
from .evaluation import bleu_multi_ref, perplexity, train_classifier, train_lm, accuracy
from .matching import MatchConfig, build_initial_pairs
from .pipeline import PipelineConfig, config_hash, run_imat
from .state import checkpoint_write
from .wmd import WmdOptions, wmd

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CORPUS = 3
EXIT_EMBEDDING = 4
EXIT_MATCHING = 5
EXIT_TRANSLATION = 6
EXIT_CHECKPOINT = 7
EXIT_EVAL = 8
EXIT_INTERNAL = 70

_EXIT_CODES: tuple[tuple[type, int], ...] = (
    (ConfigError, EXIT_USAGE),
    (CorpusError, EXIT_CORPUS),
    (EmbeddingError, EXIT_EMBEDDING),
    (MatchingError, EXIT_MATCHING),
    (TranslationError, EXIT_TRANSLATION),
    (CheckpointError, EXIT_CHECKPOINT),
    (EvalError, EXIT_EVAL),
    (SolverError, EXIT_INTERNAL),
)

# Converters for run/match options that may come from a config file.
_FILE_KEYS = {
    "source": str,
    "target": str,
    "embeddings": str,
    "out": str,
    "gamma": float,
    "max_iters": int,
    "update_threshold": float,
    "backend": str,
    "seed": int,
    "threads": int,
    "cost": str,
    "stoplist": str,
}

_RUN_DEFAULTS = {
    "gamma": 0.7,
    "max_iters": 5,
    "update_threshold": 0.005,
    "backend": "builtin",
    "seed": 42,
    "threads": None,  # resolved from IMAT_THREADS or auto
    "cost": "euclidean",
    "stoplist": None,
}


def _read_config_file(path: str) -> dict:
    values: dict = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in _FILE_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _FILE_KEYS[key](value.strip())
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
    return values


def _merge_run_options(args: argparse.Namespace, require_backend: bool) -> dict:
    """flags > config file > env (threads only) > defaults."""
    file_values = _read_config_file(args.config) if args.config else {}
    merged: dict = {}
    for key in _FILE_KEYS:
        if key == "backend" and not require_backend:
            continue
        flag = getattr(args, key, None)
        merged[key] = flag if flag is not None else file_values.get(key, _RUN_DEFAULTS.get(key))
    if merged.get("threads") is None:
        env = os.environ.get("IMAT_THREADS")
        if env is not None:
            try:
                merged["threads"] = int(env)
            except ValueError as exc:
                raise ConfigError(f"IMAT_THREADS must be an integer, got {env!r}") from exc
        else:
            merged["threads"] = 1  # auto: the exact solver is interpreter-bound
    for key in ("source", "target", "embeddings", "out"):
        if not merged.get(key):
            raise ConfigError(f"missing required option --{key.replace('_', '-')}")
    return merged


def _load_stoplist(path: str | None) -> frozenset[str] | None:
    if path is None:
        return None
    try:
        with open(path, encoding="utf-8") as fh:
            words = frozenset(w for w in fh.read().split() if w)
    except OSError as exc:
        raise ConfigError(f"cannot read stoplist {path}: {exc}") from exc
    return words or None


def _pipeline_config(merged: dict, backend: str = "builtin") -> PipelineConfig:
    return PipelineConfig(
        gamma=merged["gamma"],
        max_iters=merged["max_iters"],
        update_threshold=merged["update_threshold"],
        seed=merged["seed"],
        backend=backend,
        cost_metric=merged["cost"],
        stopwords=_load_stoplist(merged["stoplist"]),
        checkpoint_dir=merged["out"],
        threads=merged["threads"],
    )


def _read_token_file(path: str, what: str) -> list[Sentence]:
    """Verbatim token lines for evaluation inputs (no case folding, no skipping)."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise EvalError(f"cannot read {what} file {path}: {exc}") from exc
    sentences = []
    for lineno, line in enumerate(lines, start=1):
        tokens = line.split()
        if not tokens:
            raise EvalError(f"{path}:{lineno}: empty {what} line")
        sentences.append(Sentence(tokens=tuple(tokens), id=lineno - 1))
    if not sentences:
        raise EvalError(f"{what} file {path} is empty")
    return sentences


def cmd_run(args: argparse.Namespace) -> int:
    merged = _merge_run_options(args, require_backend=True)
    cfg = _pipeline_config(merged, backend=merged["backend"])
    source = load_corpus(merged["source"], "source")
    target = load_corpus(merged["target"], "target")
    table = load_embeddings(merged["embeddings"])
    model, state, report = run_imat(source, target, table, cfg)

    out = merged["out"]
    outputs = model.translate_batch([p.src for p in state.pairs])
    with open(os.path.join(out, "transferred.txt"), "w", encoding="utf-8", newline="\n") as fh:
        for s in outputs:
            fh.write(s.text())
            fh.write("\n")
    with open(os.path.join(out, "transferred.ids"), "w", encoding="utf-8", newline="\n") as fh:
        for p in state.pairs:
            fh.write(f"{p.src_id}\n")
    summary = {
        "pairs": len(state.pairs),
        "iterations_run": len(report.update_rate_trace),
        "final_update_rate": report.update_rate_trace[-1],
        "converged": report.update_rate_trace[-1] < cfg.update_threshold,
        "total_cost": state.total_cost(),
        "out": out,
    }
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_match(args: argparse.Namespace) -> int:
    merged = _merge_run_options(args, require_backend=False)
    cfg = _pipeline_config(merged)
    source = load_corpus(merged["source"], "source")
    target = load_corpus(merged["target"], "target")
    table = load_embeddings(merged["embeddings"])
    state = build_initial_pairs(source, target, table, MatchConfig(gamma=cfg.gamma))
    os.makedirs(merged["out"], exist_ok=True)
    checkpoint_write(state, os.path.join(merged["out"], "iter_000.jsonl"), config_hash(cfg))
    sims = [
        cosine_similarity(sentence_embedding(p.src, table), sentence_embedding(p.tgt, table))
        for p in state.pairs
    ]
    print(f"retained pairs: {len(state.pairs)}")
    print(f"mean similarity: {sum(sims) / len(sims):.6f}")
    return EXIT_OK


def cmd_wmd(args: argparse.Namespace) -> int:
    table = load_embeddings(args.embeddings)
    options = WmdOptions(metric=args.cost, stopwords=_load_stoplist(args.stoplist))
    tokens_a = tokenize(args.a)
    tokens_b = tokenize(args.b)
    if not tokens_a or not tokens_b:
        raise ConfigError("--a and --b must each contain at least one token")
    value = wmd(
        Sentence(tokens=tuple(tokens_a), id=0),
        Sentence(tokens=tuple(tokens_b), id=0),
        table,
        options,
    )
    print("undefined" if value is None else f"{value:.9f}")
    return EXIT_OK


def cmd_eval_bleu(args: argparse.Namespace) -> int:
    hyps = _read_token_file(args.hyp, "hypothesis")
    ref_files = [p for p in args.refs.split(",") if p]
    if not ref_files:
        raise EvalError("--refs needs at least one file")
    ref_columns = [_read_token_file(p, "reference") for p in ref_files]
    for path, column in zip(ref_files, ref_columns):
        if len(column) != len(hyps):
            raise EvalError(
                f"line-count mismatch: {args.hyp} has {len(hyps)} lines, {path} has {len(column)}"
            )
    refs = [[column[i] for column in ref_columns] for i in range(len(hyps))]
    score = bleu_multi_ref(hyps, refs)
    print(
        json.dumps(
            {
                "bleu": score.value,
                "precisions": list(score.precisions),
                "brevity_penalty": score.brevity_penalty,
            },
            sort_keys=True,
        )
    )
    return EXIT_OK


def cmd_eval_acc(args: argparse.Namespace) -> int:
    pos = load_corpus(args.train_pos, "pos")
    neg = load_corpus(args.train_neg, "neg")
    if args.expect not in (pos.attribute, neg.attribute):
        raise ConfigError(f"--expect must be 'pos' or 'neg', got {args.expect!r}")
    clf = train_classifier(pos, neg)
    inputs = _read_token_file(args.input, "input")
    print(json.dumps({"accuracy": accuracy(clf, inputs, args.expect)}, sort_keys=True))
    return EXIT_OK


def cmd_eval_ppl(args: argparse.Namespace) -> int:
    train = load_corpus(args.train, "lm-train")
    lm = train_lm(train)
    inputs = _read_token_file(args.input, "input")
    print(json.dumps({"ppl": perplexity(lm, inputs)}, sort_keys=True))
    return EXIT_OK


def _add_run_flags(p: argparse.ArgumentParser, with_backend: bool) -> None:
    p.add_argument("--source", help="source-attribute corpus file (required)")
    p.add_argument("--target", help="target-attribute corpus file (required)")
    p.add_argument("--embeddings", help="text-format word-vector file (required)")
    p.add_argument("--out", help="output directory for checkpoints and manifest (required)")
    p.add_argument("--config", help="key = value config file; flags win over file values")
    p.add_argument("--gamma", type=float, help="similarity retention threshold (default: 0.7)")
    p.add_argument("--max-iters", type=int, dest="max_iters", help="last iteration index (default: 5)")
    p.add_argument(
        "--update-threshold",
        type=float,
        dest="update_threshold",
        help="stop when the per-iteration update rate drops below this (default: 0.005)",
    )
    if with_backend:
        p.add_argument("--backend", help="builtin | external:CMD (default: builtin)")
    p.add_argument("--seed", type=int, help="run seed, recorded in the manifest (default: 42)")
    p.add_argument("--threads", type=int, help="intra-phase worker bound (default: auto; env IMAT_THREADS)")
    p.add_argument("--cost", choices=("euclidean", "cosine"), help="WMD ground cost (default: euclidean)")
    p.add_argument("--stoplist", help="file of tokens excluded from transport mass (default: none)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="imat",
        description="Iterative matching and translation over two mono-attribute corpora.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the full pipeline")
    _add_run_flags(p_run, with_backend=True)
    p_run.set_defaults(func=cmd_run)

    p_match = sub.add_parser("match", help="initial matching only; writes iter_000.jsonl")
    _add_run_flags(p_match, with_backend=False)
    p_match.set_defaults(func=cmd_match)

    p_wmd = sub.add_parser("wmd", help="word mover distance between two token strings")
    p_wmd.add_argument("--a", required=True, help="first sentence (whitespace tokens)")
    p_wmd.add_argument("--b", required=True, help="second sentence (whitespace tokens)")
    p_wmd.add_argument("--embeddings", required=True, help="text-format word-vector file")
    p_wmd.add_argument("--cost", choices=("euclidean", "cosine"), default="euclidean", help="ground cost (default: euclidean)")
    p_wmd.add_argument("--stoplist", help="file of tokens excluded from transport mass (default: none)")
    p_wmd.set_defaults(func=cmd_wmd)

    p_eval = sub.add_parser("eval", help="evaluation metrics")
    eval_sub = p_eval.add_subparsers(dest="metric", required=True)

    p_bleu = eval_sub.add_parser("bleu", help="corpus BLEU-4 against one or more reference files")
    p_bleu.add_argument("--hyp", required=True, help="hypothesis file, one sentence per line")
    p_bleu.add_argument("--refs", required=True, help="comma-separated line-aligned reference files")
    p_bleu.set_defaults(func=cmd_eval_bleu)

    p_acc = eval_sub.add_parser("acc", help="attribute accuracy via the bundled NB classifier")
    p_acc.add_argument("--train-pos", required=True, dest="train_pos", help="class 'pos' training corpus")
    p_acc.add_argument("--train-neg", required=True, dest="train_neg", help="class 'neg' training corpus")
    p_acc.add_argument("--input", required=True, help="sentences to classify")
    p_acc.add_argument("--expect", required=True, help="expected label: pos | neg")
    p_acc.set_defaults(func=cmd_eval_acc)

    p_ppl = eval_sub.add_parser("ppl", help="trigram-LM perplexity")
    p_ppl.add_argument("--train", required=True, help="language-model training corpus")
    p_ppl.add_argument("--input", required=True, help="sentences to score")
    p_ppl.set_defaults(func=cmd_eval_ppl)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ImatError as exc:
        for klass, code in _EXIT_CODES:
            if isinstance(exc, klass):
                print(f"imat: error: {exc}", file=sys.stderr)
                return code
        print(f"imat: error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
