"""Nearest-neighbor sentence matching over mean-embedding cosine similarity.

Builds the initial pseudo-parallel corpus (threshold-filtered exact
nearest neighbors) and re-matches in later iterations (query is the current
target's embedding; replacement is gated by strict WMD improvement, with no
threshold). Search is exact brute force: threshold filtering is only sound
against true maxima. The batch path evaluates the similarity matrix in
blocks, which returns the same matches as the one-query path.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, Sentence
from .embedding import EmbeddingTable, SentenceVector, sentence_embedding
from .errors import MatchingError
from .state import ORIGIN_MATCH, PairRecord, PseudoParallelState
from .wmd import WmdOptions, WmdScorer

log = logging.getLogger(__name__)

_BLOCK = 256


@dataclass(frozen=True)
class MatchConfig:
    """gamma: retention threshold on initial-match cosine similarity (strict >)."""

    gamma: float = 0.7

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")


@dataclass(frozen=True)
class MatchResult:
    source_id: int
    target_id: int
    similarity: float


class TargetIndex:
    """Row-normalized matrix of valid target sentence embeddings.

    Rows follow ascending sentence id, so a first-maximum argmax over a row of
    similarities breaks ties toward the lowest target id.
    """

    def __init__(self, ids: list[int], vectors: np.ndarray):
        if len(ids) == 0:
            raise MatchingError("target index is empty")
        self.ids = np.asarray(ids, dtype=np.int64)
        norms = np.linalg.norm(vectors, axis=1, keepdims=True)
        self.matrix = vectors / norms

    @classmethod
    def from_corpus(cls, corpus: Corpus, table: EmbeddingTable) -> "TargetIndex":
        ids: list[int] = []
        rows: list[np.ndarray] = []
        skipped = 0
        for s in corpus:
            sv = sentence_embedding(s, table)
            if sv is None:
                skipped += 1
                continue
            ids.append(s.id)
            rows.append(sv.values)
        if skipped:
            log.warning("%d sentence(s) with zero embedding coverage excluded from matching", skipped)
        if not rows:
            raise MatchingError("no target sentence has embedding coverage")
        return cls(ids, np.stack(rows))

    def query(self, vector: np.ndarray) -> tuple[int, float]:
        """Best row position and its cosine similarity for one query vector."""
        q = vector / np.linalg.norm(vector)
        sims = self.matrix @ q
        pos = int(np.argmax(sims))
        return pos, float(sims[pos])

    def query_batch(self, vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Argmax row positions and similarities for many queries, blockwise."""
        q = vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
        best = np.empty(len(q), dtype=np.int64)
        sims = np.empty(len(q), dtype=np.float64)
        for lo in range(0, len(q), _BLOCK):
            hi = min(lo + _BLOCK, len(q))
            block = q[lo:hi] @ self.matrix.T
            best[lo:hi] = np.argmax(block, axis=1)
            sims[lo:hi] = block[np.arange(hi - lo), best[lo:hi]]
        return best, sims


def nearest_neighbor(q, targets) -> tuple[int, float]:
    """Exact argmax of cosine similarity; ties go to the lowest target index.

    q is a SentenceVector or raw vector; targets is a non-empty indexed
    sequence of the same (or a prebuilt TargetIndex, in which case positions
    map to its ids).
    """
    qv = q.values if isinstance(q, SentenceVector) else np.asarray(q, dtype=np.float64)
    if isinstance(targets, TargetIndex):
        pos, sim = targets.query(qv)
        return int(targets.ids[pos]), sim
    if len(targets) == 0:
        raise MatchingError("nearest_neighbor requires a non-empty target list")
    rows = [t.values if isinstance(t, SentenceVector) else np.asarray(t, dtype=np.float64) for t in targets]
    index = TargetIndex(list(range(len(rows))), np.stack(rows))
    pos, sim = index.query(qv)
    return pos, sim


def build_initial_pairs(
    X: Corpus,
    Y: Corpus,
    table: EmbeddingTable,
    cfg: MatchConfig = MatchConfig(),
    scorer: WmdScorer | None = None,
) -> PseudoParallelState:
    """Initial matching pass (iteration 0).

    Every source sentence with embedding coverage is paired with its exact
    nearest neighbor in Y; the pair is retained iff similarity > gamma
    (strict). Retained pairs get their WMD cost and provenance "match".
    """
    if len(X) == 0 or len(Y) == 0:
        raise MatchingError("both corpora must be non-empty")
    scorer = scorer or WmdScorer(table, WmdOptions())
    index = TargetIndex.from_corpus(Y, table)

    src_ids: list[int] = []
    src_vectors: list[np.ndarray] = []
    skipped = 0
    for s in X:
        sv = sentence_embedding(s, table)
        if sv is None:
            skipped += 1
            continue
        src_ids.append(s.id)
        src_vectors.append(sv.values)
    if skipped:
        log.warning("%d source sentence(s) with zero embedding coverage excluded from matching", skipped)
    if not src_vectors:
        raise MatchingError("no source sentence has embedding coverage")

    best, sims = index.query_batch(np.stack(src_vectors))
    pairs: list[PairRecord] = []
    for k, src_id in enumerate(src_ids):
        sim = float(sims[k])
        if sim > cfg.gamma:
            y = Y[int(index.ids[best[k]])]
            src = X[src_id]
            cost = scorer.distance(src, y)
            # Both sides have coverage here, so the distance is defined.
            pairs.append(
                PairRecord(
                    src_id=src_id,
                    src=src,
                    tgt=Sentence(tokens=y.tokens, id=src_id),
                    cost=float(cost),
                    origin=ORIGIN_MATCH,
                    iter_set=0,
                )
            )
    if not pairs:
        raise MatchingError(f"no pair exceeds the similarity threshold gamma={cfg.gamma}")
    return PseudoParallelState(pairs=pairs, iteration=0)


def rematch_pairs(
    state: PseudoParallelState,
    Y: Corpus,
    table: EmbeddingTable,
    scorer: WmdScorer | None = None,
    index: TargetIndex | None = None,
    iteration: int | None = None,
) -> PseudoParallelState:
    """Later-iteration matching (t >= 1), mutating and returning the state.

    For each pair, the nearest neighbor in Y of the *current* target's
    embedding becomes a candidate; it replaces the target iff its WMD to the
    source is strictly lower. No similarity threshold applies here.
    """
    scorer = scorer or WmdScorer(table, WmdOptions())
    index = index or TargetIndex.from_corpus(Y, table)
    iteration = state.iteration if iteration is None else iteration

    queries = []
    for p in state.pairs:
        sv = sentence_embedding(p.tgt, table)
        if sv is None:
            raise MatchingError(f"pair {p.src_id}: current target has zero embedding coverage")
        queries.append(sv.values)
    best, _sims = index.query_batch(np.stack(queries))

    for k, p in enumerate(state.pairs):
        y = Y[int(index.ids[best[k]])]
        if y.tokens == p.tgt.tokens:
            continue
        candidate_cost = scorer.best_under(p.src, y, p.cost)
        if candidate_cost is not None and candidate_cost < p.cost:
            state.replace_pair(
                k,
                tgt=Sentence(tokens=y.tokens, id=p.src_id),
                cost=float(candidate_cost),
                origin=ORIGIN_MATCH,
                iteration=iteration,
                phase="rematch",
            )
    return state
