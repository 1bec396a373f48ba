"""Pseudo-parallel corpus state and its line-JSON checkpoint format.

A state is the evolving aligned set: one record per retained source sentence,
carrying the current target, its transport cost, and provenance (whether the
target came from nearest-neighbor matching or from the translation model, and
in which iteration it was set). Checkpoints are JSONL: a header record with
the iteration, config hash, pair count, and update-rate history, followed by
one record per pair. Serialization is canonical (sorted keys, fixed
separators) so identical states produce byte-identical files.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace

from .corpus import Sentence
from .errors import CheckpointError

log = logging.getLogger(__name__)

ORIGIN_MATCH = "match"
ORIGIN_TRANS = "trans"


@dataclass(frozen=True)
class PairRecord:
    """One aligned pair. tgt.id mirrors src_id (alignment slot, not Y membership)."""

    src_id: int
    src: Sentence
    tgt: Sentence
    cost: float
    origin: str      # ORIGIN_MATCH | ORIGIN_TRANS
    iter_set: int


@dataclass(frozen=True)
class UpdateEvent:
    """Audit record for one accepted target replacement."""

    iteration: int
    phase: str       # "rematch" | "refine"
    src_id: int
    old_cost: float
    new_cost: float


@dataclass
class PseudoParallelState:
    pairs: list[PairRecord]
    iteration: int = 0
    update_rate_history: list[float] = field(default_factory=list)
    update_log: list[UpdateEvent] = field(default_factory=list)

    def total_cost(self) -> float:
        return float(sum(p.cost for p in self.pairs))

    def target_tokens(self) -> list[tuple[str, ...]]:
        return [p.tgt.tokens for p in self.pairs]

    def replace_pair(self, index: int, tgt: Sentence, cost: float, origin: str, iteration: int, phase: str) -> None:
        old = self.pairs[index]
        self.update_log.append(
            UpdateEvent(
                iteration=iteration,
                phase=phase,
                src_id=old.src_id,
                old_cost=old.cost,
                new_cost=cost,
            )
        )
        self.pairs[index] = replace(old, tgt=tgt, cost=cost, origin=origin, iter_set=iteration)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def checkpoint_write(state: PseudoParallelState, path: str, config_hash: str) -> None:
    """Write the state as JSONL: header record, then one record per pair."""
    header = {
        "config_hash": config_hash,
        "iteration": state.iteration,
        "pair_count": len(state.pairs),
        "update_rate_history": state.update_rate_history,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_dump(header))
        fh.write("\n")
        for p in state.pairs:
            rec = {
                "src_id": p.src_id,
                "src": list(p.src.tokens),
                "tgt": list(p.tgt.tokens),
                "cost": p.cost,
                "origin": p.origin,
                "iter_set": p.iter_set,
            }
            fh.write(_dump(rec))
            fh.write("\n")


def checkpoint_read(path: str, expected_config_hash: str | None = None) -> PseudoParallelState:
    """Read a checkpoint back; config-hash mismatch warns, truncation raises."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not lines:
        raise CheckpointError(f"{path}: empty checkpoint")

    def parse(lineno: int, text: str) -> dict:
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"{path}: line {lineno}: malformed record: {exc}") from exc
        if not isinstance(obj, dict):
            raise CheckpointError(f"{path}: line {lineno}: expected a JSON object")
        return obj

    header = parse(1, lines[0])
    for key in ("config_hash", "iteration", "pair_count"):
        if key not in header:
            raise CheckpointError(f"{path}: line 1: header missing {key!r}")
    if expected_config_hash is not None and header["config_hash"] != expected_config_hash:
        log.warning(
            "checkpoint %s was written under config hash %s, expected %s",
            path,
            header["config_hash"],
            expected_config_hash,
        )

    pairs: list[PairRecord] = []
    for lineno, text in enumerate(lines[1:], start=2):
        rec = parse(lineno, text)
        try:
            src_id = rec["src_id"]
            pairs.append(
                PairRecord(
                    src_id=src_id,
                    src=Sentence(tokens=tuple(rec["src"]), id=src_id),
                    tgt=Sentence(tokens=tuple(rec["tgt"]), id=src_id),
                    cost=float(rec["cost"]),
                    origin=rec["origin"],
                    iter_set=int(rec["iter_set"]),
                )
            )
        except KeyError as exc:
            raise CheckpointError(f"{path}: line {lineno}: record missing {exc}") from exc
    if len(pairs) != header["pair_count"]:
        raise CheckpointError(
            f"{path}: line {len(lines)}: expected {header['pair_count']} pair records, found {len(pairs)}"
        )
    return PseudoParallelState(
        pairs=pairs,
        iteration=int(header["iteration"]),
        update_rate_history=[float(x) for x in header.get("update_rate_history", [])],
    )
