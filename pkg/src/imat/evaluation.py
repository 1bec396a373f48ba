"""Automatic evaluation triad: multi-reference BLEU, attribute accuracy, LM perplexity.

All three evaluators are deterministic. BLEU is corpus-level BLEU-4 with
max-over-references clip counts and closest-reference-length brevity penalty.
Attribute accuracy comes from a multinomial naive-Bayes classifier over
unigram+bigram counts with add-1 smoothing. Fluency is the perplexity of an
interpolated trigram language model with fixed weights and an add-1 unigram
floor.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field

from .corpus import Sentence
from .errors import EvalError

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"


def _token_lists(sentences) -> list[tuple[str, ...]]:
    out = []
    for s in sentences:
        out.append(s.tokens if isinstance(s, Sentence) else tuple(s))
    return out


# ---------------------------------------------------------------------------
# BLEU


@dataclass(frozen=True)
class BleuScore:
    """Corpus BLEU-4 in [0, 100] with its modified precisions and brevity penalty."""

    value: float
    precisions: tuple[float, float, float, float]
    brevity_penalty: float


def _ngrams(tokens: tuple[str, ...], n: int) -> Counter:
    return Counter(tokens[i : i + n] for i in range(len(tokens) - n + 1))


def bleu_multi_ref(hyps, refs) -> BleuScore:
    """Corpus-level BLEU-4 against one or more references per hypothesis.

    Clipped n-gram counts take, per n-gram, the maximum count over the
    references. The brevity penalty uses the reference length closest to each
    hypothesis length (ties resolved toward the shorter reference). Zero
    precisions for n >= 2 are smoothed by adding 1 to numerator and
    denominator; the unigram precision is left unsmoothed, so a hypothesis
    set sharing no unigram with its references scores 0.
    """
    hyp_lists = _token_lists(hyps)
    if not hyp_lists:
        raise EvalError("empty hypothesis set")
    if len(hyp_lists) != len(refs):
        raise EvalError(f"{len(hyp_lists)} hypotheses but {len(refs)} reference lists")

    clipped = [0] * 4
    totals = [0] * 4
    hyp_len = 0
    ref_len = 0
    for hyp, ref_group in zip(hyp_lists, refs):
        ref_lists = _token_lists(ref_group)
        if not ref_lists:
            raise EvalError("every hypothesis needs at least one reference")
        hyp_len += len(hyp)
        ref_len += min((r_len for r_len in map(len, ref_lists)), key=lambda L: (abs(L - len(hyp)), L))
        for n in range(1, 5):
            hyp_counts = _ngrams(hyp, n)
            if not hyp_counts:
                continue
            max_ref: Counter = Counter()
            for r in ref_lists:
                for gram, count in _ngrams(r, n).items():
                    if count > max_ref[gram]:
                        max_ref[gram] = count
            totals[n - 1] += sum(hyp_counts.values())
            clipped[n - 1] += sum(min(c, max_ref[g]) for g, c in hyp_counts.items())

    precisions: list[float] = []
    for n in range(1, 5):
        if n == 1:
            precisions.append(clipped[0] / totals[0] if totals[0] else 0.0)
        elif clipped[n - 1] > 0:
            precisions.append(clipped[n - 1] / totals[n - 1])
        else:
            precisions.append(1.0 / (totals[n - 1] + 1))

    brevity = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    if precisions[0] == 0.0:
        value = 0.0
    else:
        value = brevity * math.exp(sum(math.log(p) for p in precisions) / 4.0) * 100.0
    return BleuScore(value=value, precisions=tuple(precisions), brevity_penalty=brevity)


# ---------------------------------------------------------------------------
# Attribute classifier


@dataclass(frozen=True)
class AttributeClassifier:
    """Multinomial naive Bayes over unigram+bigram counts, add-1 smoothed.

    Features absent from the training vocabulary are skipped at
    classification time, so a fully out-of-vocabulary sentence is decided by
    the class priors alone.
    """

    labels: tuple[str, str]
    log_priors: tuple[float, float]
    log_probs: tuple[dict, dict]       # feature -> log P(feature | class)
    log_floor: tuple[float, float]     # in-vocab feature unseen in this class
    vocab: frozenset


def _features(tokens: tuple[str, ...]) -> Counter:
    feats = Counter((t,) for t in tokens)
    feats.update(tokens[i : i + 2] for i in range(len(tokens) - 1))
    return feats


def train_classifier(pos, neg) -> AttributeClassifier:
    """Train on two corpora; class priors follow corpus sizes (sentence counts)."""
    pos_label = getattr(pos, "attribute", "pos")
    neg_label = getattr(neg, "attribute", "neg")
    class_lists = (_token_lists(pos), _token_lists(neg))
    if not class_lists[0] or not class_lists[1]:
        raise EvalError("both training classes must be non-empty")
    counts = (Counter(), Counter())
    for cls, sentences in enumerate(class_lists):
        for tokens in sentences:
            counts[cls].update(_features(tokens))
    vocab = frozenset(counts[0]) | frozenset(counts[1])
    n_total = len(class_lists[0]) + len(class_lists[1])
    log_priors = tuple(math.log(len(class_lists[c]) / n_total) for c in range(2))
    denom = tuple(sum(counts[c].values()) + len(vocab) for c in range(2))
    log_probs = tuple(
        {f: math.log((c + 1) / denom[cls]) for f, c in counts[cls].items()} for cls in range(2)
    )
    log_floor = tuple(math.log(1.0 / denom[c]) for c in range(2))
    return AttributeClassifier(
        labels=(pos_label, neg_label),
        log_priors=log_priors,
        log_probs=log_probs,
        log_floor=log_floor,
        vocab=vocab,
    )


def classify(clf: AttributeClassifier, s) -> tuple[str, float]:
    """Argmax label and its posterior; ties go to the first class."""
    tokens = s.tokens if isinstance(s, Sentence) else tuple(s)
    feats = _features(tokens)
    scores = list(clf.log_priors)
    for f, count in feats.items():
        if f not in clf.vocab:
            continue
        for c in range(2):
            scores[c] += count * clf.log_probs[c].get(f, clf.log_floor[c])
    peak = max(scores)
    norm = peak + math.log(sum(math.exp(sc - peak) for sc in scores))
    posteriors = [math.exp(sc - norm) for sc in scores]
    winner = 0 if scores[0] >= scores[1] else 1
    return clf.labels[winner], posteriors[winner]


def accuracy(clf: AttributeClassifier, sentences, expected: str) -> float:
    """Fraction of sentences classified as the expected label."""
    items = list(sentences)
    if not items:
        raise EvalError("cannot score accuracy on an empty corpus")
    hits = sum(1 for s in items if classify(clf, s)[0] == expected)
    return hits / len(items)


# ---------------------------------------------------------------------------
# Trigram language model


@dataclass(frozen=True)
class NgramLM:
    """Interpolated trigram LM with fixed weights and an add-1 unigram floor.

    When a trigram or bigram context was never observed, its interpolation
    weight folds into the next lower order, so every conditional distribution
    sums to one.
    """

    lambdas: tuple[float, float, float]
    tri: dict
    tri_totals: dict
    bi: dict
    bi_totals: dict
    uni: Counter
    uni_total: int
    vocab: frozenset


def train_lm(corpus, lambdas: tuple[float, float, float] = (0.6, 0.3, 0.1)) -> NgramLM:
    """Count padded trigrams/bigrams/unigrams over the training corpus."""
    if abs(sum(lambdas) - 1.0) > 1e-9 or any(l <= 0 for l in lambdas):
        raise EvalError(f"interpolation weights must be positive and sum to 1, got {lambdas}")
    sentences = _token_lists(corpus)
    if not sentences:
        raise EvalError("cannot train a language model on an empty corpus")
    tri: dict[tuple[str, str], Counter] = {}
    bi: dict[str, Counter] = {}
    uni: Counter = Counter()
    for tokens in sentences:
        seq = (BOS, BOS) + tokens + (EOS,)
        for i in range(2, len(seq)):
            u, v, w = seq[i - 2], seq[i - 1], seq[i]
            tri.setdefault((u, v), Counter())[w] += 1
            bi.setdefault(v, Counter())[w] += 1
            uni[w] += 1
    vocab = frozenset(uni) | {UNK}
    return NgramLM(
        lambdas=lambdas,
        tri=tri,
        tri_totals={k: sum(c.values()) for k, c in tri.items()},
        bi=bi,
        bi_totals={k: sum(c.values()) for k, c in bi.items()},
        uni=uni,
        uni_total=sum(uni.values()),
        vocab=vocab,
    )


def log_prob(lm: NgramLM, word: str, context: tuple[str, str]) -> float:
    """log P(word | context) under the folded interpolation."""
    w = word if word in lm.vocab else UNK
    lam3, lam2, lam1 = lm.lambdas
    u, v = context
    p = 0.0
    carry = 0.0
    tri_counts = lm.tri.get((u, v))
    if tri_counts is not None:
        p += lam3 * tri_counts[w] / lm.tri_totals[(u, v)]
    else:
        carry += lam3
    bi_counts = lm.bi.get(v)
    if bi_counts is not None:
        p += (lam2 + carry) * bi_counts[w] / lm.bi_totals[v]
        carry = 0.0
    else:
        carry += lam2
    p += (lam1 + carry) * (lm.uni[w] + 1) / (lm.uni_total + len(lm.vocab))
    return math.log(p)


def perplexity(lm: NgramLM, corpus) -> float:
    """exp of the mean negative log probability; end markers count as events."""
    sentences = _token_lists(corpus)
    if not sentences:
        raise EvalError("cannot evaluate perplexity on an empty corpus")
    total = 0.0
    n_events = 0
    for tokens in sentences:
        seq = (BOS, BOS) + tokens + (EOS,)
        for i in range(2, len(seq)):
            total += log_prob(lm, seq[i], (seq[i - 2], seq[i - 1]))
            n_events += 1
    return math.exp(-total / n_events)


# ---------------------------------------------------------------------------
# Report


@dataclass
class EvalReport:
    """Scores plus per-iteration traces; score fields stay None without inputs."""

    bleu: BleuScore | None = None
    accuracy: float | None = None
    ppl: float | None = None
    update_rate_trace: list[float] = field(default_factory=list)
    total_cost_trace: list[float] = field(default_factory=list)
    target_snapshots: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "bleu": None
            if self.bleu is None
            else {
                "value": self.bleu.value,
                "precisions": list(self.bleu.precisions),
                "brevity_penalty": self.bleu.brevity_penalty,
            },
            "accuracy": self.accuracy,
            "ppl": self.ppl,
            "update_rate_trace": self.update_rate_trace,
            "total_cost_trace": self.total_cost_trace,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


__all__ = [
    "BleuScore",
    "bleu_multi_ref",
    "AttributeClassifier",
    "train_classifier",
    "classify",
    "accuracy",
    "NgramLM",
    "train_lm",
    "log_prob",
    "perplexity",
    "EvalReport",
]
