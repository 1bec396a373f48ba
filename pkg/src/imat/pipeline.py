"""Iterative matching-and-translation orchestration.

Each iteration t: (t >= 1) re-match current targets against Y under the
strict-WMD gate, train a fresh backend model on the current pairs, then
refine (replace a target with its translation iff that strictly lowers the
pair's WMD). Iteration 0 substitutes the threshold-filtered initial matching
for the re-match phase. The loop stops when the fraction of pairs whose
target changed during a full iteration drops below update_threshold, or after
iteration max_iters (t runs 0..max_iters inclusive).

Every accepted update strictly lowers a per-pair cost, so the summed
transport cost is non-increasing and, with finite candidate sets, the loop
cannot oscillate. State is checkpointed per iteration; a manifest records
config, content hashes, and per-iteration statistics, and contains nothing
run-dependent, so identical runs produce byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .corpus import Corpus, Sentence
from .embedding import EmbeddingTable
from .errors import ConfigError
from .evaluation import EvalReport, accuracy, bleu_multi_ref, perplexity, train_classifier, train_lm
from .matching import MatchConfig, TargetIndex, build_initial_pairs, rematch_pairs
from .state import (
    ORIGIN_TRANS,
    PairRecord,
    PseudoParallelState,
    UpdateEvent,
    checkpoint_read,
    checkpoint_write,
)
from .translate import Backend, BuiltinBackend, ExternalBackend, TranslationModel
from .wmd import WmdOptions, WmdScorer

__all__ = [
    "PipelineConfig",
    "EvalInputs",
    "PseudoParallelState",
    "PairRecord",
    "UpdateEvent",
    "checkpoint_read",
    "checkpoint_write",
    "run_imat",
    "refine_step",
    "update_rate",
    "total_cost",
    "config_hash",
    "corpus_sha256",
    "table_sha256",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    gamma: float = 0.7
    max_iters: int = 5
    update_threshold: float = 0.005
    seed: int = 42
    backend: str = "builtin"              # "builtin" or "external:CMD"
    cost_metric: str = "euclidean"
    stopwords: frozenset[str] | None = None
    checkpoint_dir: str | None = None
    em_iters: int = 5
    min_score: float = 0.5
    threads: int = 1
    external_timeout: float = 300.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0.0 < self.update_threshold < 1.0:
            raise ConfigError(f"update_threshold must lie in (0, 1), got {self.update_threshold}")
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if not self.backend == "builtin" and not self.backend.startswith("external:"):
            raise ConfigError(f"backend must be 'builtin' or 'external:CMD', got {self.backend!r}")
        if self.cost_metric not in ("euclidean", "cosine"):
            raise ConfigError(f"cost metric must be 'euclidean' or 'cosine', got {self.cost_metric!r}")

    def wmd_options(self) -> WmdOptions:
        return WmdOptions(metric=self.cost_metric, stopwords=self.stopwords)

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "max_iters": self.max_iters,
            "update_threshold": self.update_threshold,
            "seed": self.seed,
            "backend": self.backend,
            "cost_metric": self.cost_metric,
            "stopwords": sorted(self.stopwords) if self.stopwords else None,
            "em_iters": self.em_iters,
            "min_score": self.min_score,
        }

    def make_backend(self) -> Backend:
        if self.backend == "builtin":
            return BuiltinBackend(em_iters=self.em_iters, min_score=self.min_score, seed=self.seed)
        command = self.backend.split(":", 1)[1]
        if not command:
            raise ConfigError("external backend requires a command: external:CMD")
        return ExternalBackend(command=command, timeout=self.external_timeout, workdir=self.checkpoint_dir)


@dataclass
class EvalInputs:
    """Optional evaluation material for the report returned by run_imat.

    references: per-source-id lists of gold rewrites (indexed by X sentence
    id) for BLEU over the transferred output; classifier_train is a
    (target-attribute corpus, source-attribute corpus) pair for attribute
    accuracy; lm_train feeds the fluency perplexity model.
    """

    references: dict[int, list[Sentence]] | None = None
    classifier_train: tuple[Corpus, Corpus] | None = None
    lm_train: Corpus | None = None


def config_hash(cfg: PipelineConfig) -> str:
    blob = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def corpus_sha256(corpus: Corpus) -> str:
    h = hashlib.sha256()
    h.update(corpus.attribute.encode("utf-8"))
    for s in corpus:
        h.update(b"\n")
        h.update(s.text().encode("utf-8"))
    return h.hexdigest()


def table_sha256(table: EmbeddingTable) -> str:
    h = hashlib.sha256()
    for tok in table.tokens():
        h.update(tok.encode("utf-8"))
        h.update(table[tok].tobytes())
    return h.hexdigest()


def total_cost(state: PseudoParallelState) -> float:
    """Sum of per-pair transport costs."""
    return state.total_cost()


def update_rate(before: PseudoParallelState, after: PseudoParallelState) -> float:
    """Fraction of pairs whose target token sequence differs between the states."""
    if len(before.pairs) != len(after.pairs):
        raise ValueError("states have different pair counts")
    changed = 0
    for b, a in zip(before.pairs, after.pairs):
        if b.src_id != a.src_id:
            raise ValueError(f"states are misaligned at src_id {b.src_id} vs {a.src_id}")
        if b.tgt.tokens != a.tgt.tokens:
            changed += 1
    return changed / len(before.pairs)


def _candidate_costs(scorer: WmdScorer, items, threads: int):
    """Exact-or-pruned WMD for (src, candidate, incumbent) triples.

    Results are collected by position, so thread scheduling cannot change the
    outcome; the scorer cache is value-deterministic under concurrent writes.
    """
    if threads <= 1 or len(items) < 2:
        return [scorer.best_under(src, cand, inc) for src, cand, inc in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda it: scorer.best_under(it[0], it[1], it[2]), items))


def refine_step(
    state: PseudoParallelState,
    model: TranslationModel,
    table: EmbeddingTable,
    scorer: WmdScorer | None = None,
    iteration: int | None = None,
    threads: int = 1,
) -> PseudoParallelState:
    """Replace targets with model translations that strictly lower the pair cost.

    All translations are produced before any state mutation, so a backend
    failure aborts the step with the state unchanged. Translations with
    undefined WMD (zero embedding coverage) never win.
    """
    scorer = scorer or WmdScorer(table, WmdOptions())
    iteration = state.iteration if iteration is None else iteration
    translations = model.translate_batch([p.src for p in state.pairs])

    items = []
    positions = []
    for k, (p, trans) in enumerate(zip(state.pairs, translations)):
        if trans.tokens == p.tgt.tokens:
            continue
        items.append((p.src, trans, p.cost))
        positions.append(k)
    costs = _candidate_costs(scorer, items, threads)
    for (src, trans, _inc), cost, k in zip(items, costs, positions):
        p = state.pairs[k]
        if cost is not None and cost < p.cost:
            state.replace_pair(
                k,
                tgt=Sentence(tokens=trans.tokens, id=p.src_id),
                cost=float(cost),
                origin=ORIGIN_TRANS,
                iteration=iteration,
                phase="refine",
            )
    return state


def _snapshot(state: PseudoParallelState) -> PseudoParallelState:
    # PairRecords are frozen; a shallow list copy freezes the pair set in time.
    return PseudoParallelState(pairs=list(state.pairs), iteration=state.iteration)


def run_imat(
    X: Corpus,
    Y: Corpus,
    table: EmbeddingTable,
    cfg: PipelineConfig = PipelineConfig(),
    backend: Backend | None = None,
    eval_inputs: EvalInputs | None = None,
):
    """Run the full loop; returns (final model, final state, eval report).

    The returned model is trained from scratch on the final refined pair set.
    When cfg.checkpoint_dir is set, per-iteration checkpoints
    (iter_000.jsonl, ...), manifest.json, and final_model.meta are written
    there.
    """
    if X.attribute == Y.attribute:
        raise ConfigError(
            f"source and target corpora must carry two distinct attributes, both are {X.attribute!r}"
        )
    backend = backend or cfg.make_backend()
    scorer = WmdScorer(table, cfg.wmd_options())
    cfg_hash = config_hash(cfg)
    if cfg.checkpoint_dir:
        os.makedirs(cfg.checkpoint_dir, exist_ok=True)

    state = build_initial_pairs(X, Y, table, MatchConfig(gamma=cfg.gamma), scorer=scorer)
    index = TargetIndex.from_corpus(Y, table)
    n_pairs = len(state.pairs)
    log.info("initial matching retained %d of %d source sentences", n_pairs, len(X))

    iteration_stats: list[dict] = []
    target_snapshots: list[list[tuple[str, ...]]] = []
    model: TranslationModel | None = None
    t = 0
    converged = False
    while True:
        start = _snapshot(state)
        if t >= 1:
            rematch_pairs(state, Y, table, scorer=scorer, index=index, iteration=t)
        after_rematch = _snapshot(state)
        model = backend.fit([(p.src, p.tgt) for p in state.pairs])
        refine_step(state, model, table, scorer=scorer, iteration=t, threads=cfg.threads)

        rate = update_rate(start, state)
        rematch_rate = update_rate(start, after_rematch)
        refine_rate = update_rate(after_rematch, state)
        state.iteration = t
        state.update_rate_history.append(rate)
        iteration_stats.append(
            {
                "iteration": t,
                "update_rate": rate,
                "rematch_rate": rematch_rate,
                "refine_rate": refine_rate,
                "total_cost": state.total_cost(),
            }
        )
        target_snapshots.append(state.target_tokens())
        if cfg.checkpoint_dir:
            checkpoint_write(state, os.path.join(cfg.checkpoint_dir, f"iter_{t:03d}.jsonl"), cfg_hash)
        log.info(
            "iteration %d: update rate %.4f (rematch %.4f, refine %.4f), total cost %.6f",
            t,
            rate,
            rematch_rate,
            refine_rate,
            state.total_cost(),
        )
        if rate < cfg.update_threshold:
            converged = True
            break
        if t == cfg.max_iters:
            break
        t += 1

    final_model = backend.fit([(p.src, p.tgt) for p in state.pairs])
    report = _build_report(state, iteration_stats, target_snapshots, final_model, eval_inputs)

    if cfg.checkpoint_dir:
        manifest = {
            "config": cfg.to_dict(),
            "config_hash": cfg_hash,
            "backend": backend.name,
            "source": {"attribute": X.attribute, "sentences": len(X), "sha256": corpus_sha256(X)},
            "target": {"attribute": Y.attribute, "sentences": len(Y), "sha256": corpus_sha256(Y)},
            "embeddings": {"dim": table.dim, "tokens": len(table), "sha256": table_sha256(table)},
            "pair_count": n_pairs,
            "iterations": iteration_stats,
            "iterations_run": len(iteration_stats),
            "converged": converged,
        }
        with open(os.path.join(cfg.checkpoint_dir, "manifest.json"), "w", encoding="utf-8", newline="\n") as fh:
            json.dump(manifest, fh, sort_keys=True, indent=2)
            fh.write("\n")
        _write_model_meta(final_model, backend, os.path.join(cfg.checkpoint_dir, "final_model.meta"))

    return final_model, state, report


def _write_model_meta(model: TranslationModel, backend: Backend, path: str) -> None:
    meta: dict = {"backend": backend.name}
    table = getattr(model, "table", None)
    if table is not None:
        entries = {src: [tgt, score] for src, (tgt, score) in sorted(table.items())}
        meta["model"] = {
            "type": "lexical",
            "min_score": getattr(model, "min_score", None),
            "entries": entries,
            "size": len(entries),
        }
    command = getattr(model, "command", None)
    if command is not None:
        meta["model"] = {"type": "external", "command": command}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _build_report(
    state: PseudoParallelState,
    iteration_stats: list[dict],
    target_snapshots: list[list[tuple[str, ...]]],
    model: TranslationModel,
    eval_inputs: EvalInputs | None,
) -> EvalReport:
    report = EvalReport(
        update_rate_trace=[s["update_rate"] for s in iteration_stats],
        total_cost_trace=[s["total_cost"] for s in iteration_stats],
        target_snapshots=target_snapshots,
    )
    if eval_inputs is None:
        return report
    outputs = model.translate_batch([p.src for p in state.pairs])
    if eval_inputs.references is not None:
        hyps, refs = [], []
        for p, out in zip(state.pairs, outputs):
            ref = eval_inputs.references.get(p.src_id)
            if ref:
                hyps.append(out)
                refs.append(ref)
        if hyps:
            report.bleu = bleu_multi_ref(hyps, refs)
    if eval_inputs.classifier_train is not None:
        target_corpus, source_corpus = eval_inputs.classifier_train
        clf = train_classifier(target_corpus, source_corpus)
        report.accuracy = accuracy(clf, outputs, target_corpus.attribute)
    if eval_inputs.lm_train is not None:
        lm = train_lm(eval_inputs.lm_train)
        report.ppl = perplexity(lm, outputs)
    return report
