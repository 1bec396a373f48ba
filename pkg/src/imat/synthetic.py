"""Synthetic attribute-transfer task with a known ground-truth lexicon.

Both styles are emitted from one shared template/noun distribution; the only
systematic difference is a planted bijective polarity lexicon (source style
uses the left column, target style the right). A small fraction of sentences
additionally receives one random noise token. Because the generator owns the
mapping, it can produce the gold rewrite of any source sentence, which makes
it an oracle for end-to-end evaluation: a perfect transfer system maps each
polarity token through the lexicon and copies everything else.

Embeddings are synthetic too: every word gets a random unit vector, except
that the two halves of a polarity pair are drawn close together (antonyms
share contexts, so real distributional vectors behave the same way). That
geometry is what lets cosine matching pair template-mates across styles and
lets WMD prefer the true rewrite over any other candidate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus, Sentence
from .embedding import EmbeddingTable

POLARITY_PAIRS: tuple[tuple[str, str], ...] = (
    ("good", "bad"),
    ("great", "terrible"),
    ("awesome", "awful"),
    ("amazing", "horrible"),
    ("delicious", "disgusting"),
    ("friendly", "rude"),
    ("clean", "filthy"),
    ("fresh", "stale"),
    ("lovely", "dreadful"),
    ("perfect", "useless"),
    ("tasty", "bland"),
    ("helpful", "unhelpful"),
    ("cozy", "cramped"),
    ("charming", "shabby"),
    ("fabulous", "atrocious"),
    ("wonderful", "miserable"),
    ("fantastic", "appalling"),
    ("pleasant", "unpleasant"),
    ("superb", "lousy"),
    ("delightful", "grim"),
)

NOUNS: tuple[str, ...] = (
    "pizza", "burrito", "pasta", "salad", "soup", "burger", "steak", "coffee",
    "cake", "bread", "service", "staff", "waiter", "manager", "kitchen", "room",
    "patio", "lobby", "parking", "bathroom", "music", "decor", "menu", "price",
    "portion", "location", "view", "table", "chair", "plate",
)

# Slot markers: N0/N1 nouns, P0/P1 polarity words.
TEMPLATES: tuple[tuple[str, ...], ...] = (
    ("the", "N0", "is", "P0"),
    ("the", "N0", "was", "P0"),
    ("P0", "N0", "ever", "ever"),
    ("what", "a", "P0", "N0"),
    ("i", "had", "a", "P0", "N0"),
    ("my", "N0", "was", "P0", "overall"),
    ("this", "place", "has", "P0", "N0"),
    ("the", "N0", "looked", "P0", "to", "me"),
    ("honestly", "the", "N0", "is", "P0"),
    ("we", "thought", "the", "N0", "was", "P0"),
    ("the", "N0", "was", "P0", "and", "the", "N1", "was", "P1"),
    ("P0", "N0", "and", "P1", "N1", "here"),
)

FUNCTION_WORDS: tuple[str, ...] = (
    "the", "is", "was", "ever", "what", "a", "i", "had", "my", "overall",
    "this", "place", "has", "looked", "to", "me", "honestly", "we", "thought",
    "and", "here",
)


@dataclass(frozen=True)
class SyntheticSpec:
    n_sentences: int = 2000
    n_heldout: int = 400
    noise_rate: float = 0.10      # fraction of sentences receiving one noise token
    n_noise_tokens: int = 30
    dim: int = 16
    pair_closeness: float = 0.15  # perturbation scale within a polarity pair
    seed: int = 13


@dataclass
class SyntheticTask:
    source: Corpus
    target: Corpus
    heldout_source: Corpus
    heldout_target: Corpus
    table: EmbeddingTable
    mapping: dict[str, str]               # source polarity token -> target polarity token
    gold: dict[int, Sentence]             # source sentence id -> gold rewrite
    spec: SyntheticSpec = field(default=SyntheticSpec())

    def gold_rewrite(self, s: Sentence) -> Sentence:
        return Sentence(tokens=tuple(self.mapping.get(t, t) for t in s.tokens), id=s.id)


def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)


def build_table(spec: SyntheticSpec) -> tuple[EmbeddingTable, list[str]]:
    """Vectors for the whole synthetic vocabulary; returns (table, noise tokens)."""
    rng = np.random.default_rng(spec.seed)
    noise_tokens = [f"nz{i}" for i in range(spec.n_noise_tokens)]
    vectors: dict[str, np.ndarray] = {}
    for word in FUNCTION_WORDS + NOUNS + tuple(noise_tokens):
        vectors[word] = _unit(rng, spec.dim)
    for pos, neg in POLARITY_PAIRS:
        base = _unit(rng, spec.dim)
        for word in (pos, neg):
            v = base + spec.pair_closeness * rng.normal(size=spec.dim)
            vectors[word] = v / np.linalg.norm(v)
    return EmbeddingTable(vectors), noise_tokens


def _materialize(
    rng: np.random.Generator,
    polarity_column: int,
    noise_tokens: list[str],
    noise_rate: float,
) -> tuple[str, ...]:
    template = TEMPLATES[rng.integers(len(TEMPLATES))]
    nouns = rng.choice(len(NOUNS), size=2, replace=False)
    pols = rng.choice(len(POLARITY_PAIRS), size=2, replace=False)
    tokens: list[str] = []
    for slot in template:
        if slot == "N0":
            tokens.append(NOUNS[nouns[0]])
        elif slot == "N1":
            tokens.append(NOUNS[nouns[1]])
        elif slot == "P0":
            tokens.append(POLARITY_PAIRS[pols[0]][polarity_column])
        elif slot == "P1":
            tokens.append(POLARITY_PAIRS[pols[1]][polarity_column])
        else:
            tokens.append(slot)
    if rng.random() < noise_rate:
        pos = int(rng.integers(len(tokens) + 1))
        tokens.insert(pos, noise_tokens[rng.integers(len(noise_tokens))])
    return tuple(tokens)


def _corpus(rng, n: int, column: int, attribute: str, noise_tokens, noise_rate) -> Corpus:
    sentences = tuple(
        Sentence(tokens=_materialize(rng, column, noise_tokens, noise_rate), id=i)
        for i in range(n)
    )
    return Corpus(sentences=sentences, attribute=attribute)


def generate(spec: SyntheticSpec = SyntheticSpec()) -> SyntheticTask:
    """Build the full task: two styles, held-out splits, embeddings, gold rewrites."""
    table, noise_tokens = build_table(spec)
    rng = np.random.default_rng(spec.seed + 1)
    source = _corpus(rng, spec.n_sentences, 0, "positive", noise_tokens, spec.noise_rate)
    target = _corpus(rng, spec.n_sentences, 1, "negative", noise_tokens, spec.noise_rate)
    heldout_source = _corpus(rng, spec.n_heldout, 0, "positive", noise_tokens, spec.noise_rate)
    heldout_target = _corpus(rng, spec.n_heldout, 1, "negative", noise_tokens, spec.noise_rate)
    mapping = dict(POLARITY_PAIRS)
    task = SyntheticTask(
        source=source,
        target=target,
        heldout_source=heldout_source,
        heldout_target=heldout_target,
        table=table,
        mapping=mapping,
        gold={},
        spec=spec,
    )
    task.gold = {s.id: task.gold_rewrite(s) for s in source}
    return task


def token_transfer_accuracy(outputs: list[Sentence], golds: list[Sentence]) -> float:
    """Fraction of output tokens matching the gold rewrite, position by position.

    Length mismatches count every position of the longer side as wrong.
    """
    hits = 0
    total = 0
    for out, gold in zip(outputs, golds):
        total += max(len(out.tokens), len(gold.tokens))
        hits += sum(1 for a, b in zip(out.tokens, gold.tokens) if a == b)
    return hits / total if total else 0.0
