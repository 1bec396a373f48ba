"""Pluggable translation backends trained from scratch each iteration.

The builtin backend is a statistical lexical channel: expectation-maximization
word alignment (source token -> target token, with a NULL source competitor)
over the current pair set, reduced to a per-token substitution table with a
confidence threshold and copy fallback. It is deliberately positional: output
length equals input length, which keeps the desk-scale pipeline analyzable.

A real sequence model plugs in through the subprocess adapter instead: line-
delimited JSON over stdin/stdout, one request and one response object per
line, responses in request order. The adapter hands the current training
pairs to the subprocess via a JSONL file whose path is exported as
IMAT_TRAIN_FILE; servers that do not train (e.g. echo) simply ignore it.
"""

from __future__ import annotations

import json
import logging
import math
import os
import shlex
import subprocess
from dataclasses import dataclass, field
from typing import Protocol

from .corpus import Sentence
from .errors import ProtocolError, TranslationError

log = logging.getLogger(__name__)

NULL_TOKEN = "<null>"


class TranslationModel(Protocol):
    """Anything trained on pairs that can rewrite one sentence."""

    def translate(self, s: Sentence) -> Sentence: ...

    def translate_batch(self, sentences: list[Sentence]) -> list[Sentence]: ...


@dataclass
class LexicalChannel:
    """Per-token substitution table with scores in [0, 1].

    table maps a source token to its best target token and alignment
    probability; tokens scoring below min_score (or absent) are copied.
    ll_history holds the training log-likelihood before round 1 and after
    each EM round; it is non-decreasing.
    """

    table: dict[str, tuple[str, float]]
    min_score: float = 0.5
    copy_fallback: bool = True
    ll_history: list[float] = field(default_factory=list)

    def substitute(self, token: str) -> str:
        entry = self.table.get(token)
        if entry is not None and entry[1] >= self.min_score:
            return entry[0]
        if not self.copy_fallback:
            raise TranslationError(f"no substitution for token {token!r} and copy fallback disabled")
        return token

    def translate(self, s: Sentence) -> Sentence:
        return Sentence(tokens=tuple(self.substitute(t) for t in s.tokens), id=s.id)

    def translate_batch(self, sentences: list[Sentence]) -> list[Sentence]:
        return [self.translate(s) for s in sentences]


def train_lexical(
    pairs: list[tuple[Sentence, Sentence]],
    iters: int = 5,
    seed: int = 0,
    min_score: float = 0.5,
) -> LexicalChannel:
    """EM word-alignment training of the substitution table.

    Model: each target token is generated by one source token (or NULL),
    picked uniformly; t(y|x) is the translation probability, initialized
    uniform over the target vocabulary and re-estimated from expected
    alignment counts. Every step is deterministic (the seed parameter exists
    for backends with stochastic training; this one has none).
    """
    if not pairs:
        raise TranslationError("cannot train on an empty pair list")
    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")
    del seed  # the EM procedure is deterministic

    bitext = [
        (tuple(src.tokens) + (NULL_TOKEN,), tuple(tgt.tokens)) for src, tgt in pairs
    ]
    target_vocab: set[str] = set()
    for _, tgt in bitext:
        target_vocab.update(tgt)
    uniform = 1.0 / len(target_vocab)

    prob: dict[tuple[str, str], float] = {}
    for src, tgt in bitext:
        for x in src:
            for y in tgt:
                prob[(x, y)] = uniform

    def log_likelihood() -> float:
        ll = 0.0
        for src, tgt in bitext:
            log_m = math.log(len(src))
            for y in tgt:
                ll += math.log(sum(prob[(x, y)] for x in src)) - log_m
        return ll

    ll_history = [log_likelihood()]
    for _ in range(iters):
        counts: dict[tuple[str, str], float] = {}
        row_totals: dict[str, float] = {}
        for src, tgt in bitext:
            for y in tgt:
                denom = sum(prob[(x, y)] for x in src)
                for x in src:
                    delta = prob[(x, y)] / denom
                    key = (x, y)
                    counts[key] = counts.get(key, 0.0) + delta
                    row_totals[x] = row_totals.get(x, 0.0) + delta
        for (x, y), c in counts.items():
            prob[(x, y)] = c / row_totals[x]
        ll_history.append(log_likelihood())

    best: dict[str, tuple[str, float]] = {}
    for (x, y), p in prob.items():
        if x == NULL_TOKEN:
            continue
        incumbent = best.get(x)
        if incumbent is None or p > incumbent[1] or (p == incumbent[1] and y < incumbent[0]):
            best[x] = (y, p)
    return LexicalChannel(table=best, min_score=min_score, ll_history=ll_history)


def translate(model: TranslationModel, s: Sentence) -> Sentence:
    """Apply a trained model to one sentence."""
    return model.translate(s)


@dataclass
class ExternalModel:
    """Adapter for a translation subprocess speaking the line-JSON protocol."""

    command: str
    timeout: float = 300.0
    train_file: str | None = None

    def translate(self, s: Sentence) -> Sentence:
        return self.translate_batch([s])[0]

    def translate_batch(self, sentences: list[Sentence]) -> list[Sentence]:
        return translate_batch_external(self, sentences)


def translate_batch_external(model: ExternalModel, sentences: list[Sentence]) -> list[Sentence]:
    """Run one batch through the subprocess; one spawn per batch.

    Requests are written one JSON object per line ({"id": n, "src": [...]})
    and responses are required one per line, in request order, as
    {"id": n, "tgt": [...]}. Any deviation aborts the batch.
    """
    requests = [{"id": k, "src": list(s.tokens)} for k, s in enumerate(sentences)]
    payload = "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in requests)
    argv = shlex.split(model.command)
    env = dict(os.environ)
    if model.train_file is not None:
        env["IMAT_TRAIN_FILE"] = model.train_file
    try:
        proc = subprocess.run(
            argv,
            input=payload.encode("utf-8"),
            capture_output=True,
            timeout=model.timeout,
            env=env,
        )
    except subprocess.TimeoutExpired as exc:
        raise TranslationError(
            f"translation subprocess timed out after {model.timeout}s: {argv}"
        ) from exc
    except OSError as exc:
        raise TranslationError(f"cannot spawn translation subprocess {argv}: {exc}") from exc
    if proc.returncode != 0:
        stderr = proc.stderr.decode("utf-8", "replace").strip()
        raise TranslationError(
            f"translation subprocess exited with status {proc.returncode}: {stderr or '<no stderr>'}"
        )

    lines = proc.stdout.decode("utf-8").splitlines()
    lines = [ln for ln in lines if ln.strip()]
    outputs: list[Sentence] = []
    for k, request in enumerate(requests):
        if k >= len(lines):
            raise ProtocolError(f"missing response for id {request['id']} of {len(requests)}")
        try:
            obj = json.loads(lines[k])
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"malformed response line {k + 1}: {exc}") from exc
        if not isinstance(obj, dict) or "id" not in obj or "tgt" not in obj:
            raise ProtocolError(f"response line {k + 1} must be an object with 'id' and 'tgt'")
        if obj["id"] != request["id"]:
            raise ProtocolError(f"expected response for id {request['id']}, got id {obj['id']}")
        tgt = obj["tgt"]
        if not isinstance(tgt, list) or not tgt or not all(isinstance(t, str) for t in tgt):
            raise ProtocolError(f"response for id {request['id']}: 'tgt' must be a non-empty token list")
        outputs.append(Sentence(tokens=tuple(tgt), id=sentences[k].id))
    if len(lines) > len(requests):
        raise ProtocolError(f"{len(lines) - len(requests)} unexpected extra response line(s)")
    return outputs


class Backend(Protocol):
    """Factory that trains a fresh model on the current pair set."""

    name: str

    def fit(self, pairs: list[tuple[Sentence, Sentence]]) -> TranslationModel: ...


@dataclass
class BuiltinBackend:
    """Trains a LexicalChannel from scratch on each call."""

    em_iters: int = 5
    min_score: float = 0.5
    seed: int = 42
    name: str = field(default="builtin", init=False)

    def fit(self, pairs: list[tuple[Sentence, Sentence]]) -> LexicalChannel:
        return train_lexical(pairs, iters=self.em_iters, seed=self.seed, min_score=self.min_score)


@dataclass
class ExternalBackend:
    """Hands the pair set to an external command via IMAT_TRAIN_FILE."""

    command: str
    timeout: float = 300.0
    workdir: str | None = None
    name: str = field(default="external", init=False)

    def fit(self, pairs: list[tuple[Sentence, Sentence]]) -> ExternalModel:
        train_file = None
        if self.workdir is not None:
            train_file = os.path.join(self.workdir, "train_pairs.jsonl")
            with open(train_file, "w", encoding="utf-8", newline="\n") as fh:
                for src, tgt in pairs:
                    fh.write(json.dumps({"src": list(src.tokens), "tgt": list(tgt.tokens)}, ensure_ascii=False))
                    fh.write("\n")
        return ExternalModel(command=self.command, timeout=self.timeout, train_file=train_file)
