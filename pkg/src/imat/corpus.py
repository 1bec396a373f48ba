"""Corpus loading, tokenization, and vocabulary counting.

Corpora are line-oriented UTF-8 text files, one sentence per line, already
tokenized so that splitting on whitespace recovers the tokens. Sentences and
corpora are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field

from .errors import CorpusError

log = logging.getLogger(__name__)

# An attribute label is a plain string naming one side of the transfer task,
# e.g. "positive" / "negative". Exactly two distinct labels per run.
AttributeLabel = str


@dataclass(frozen=True)
class TokenizeConfig:
    """Tokenization and sentence-filtering knobs.

    lowercase: fold case before splitting (default True; maximizes embedding
        coverage on preprocessed review-style text).
    max_len: sentences with more tokens than this are dropped at load time.
    """

    lowercase: bool = True
    max_len: int = 100


@dataclass(frozen=True)
class Sentence:
    """An immutable tokenized sentence with its corpus-local 0-based id."""

    tokens: tuple[str, ...]
    id: int

    def __post_init__(self) -> None:
        if not self.tokens:
            raise CorpusError("sentence must contain at least one token")
        for tok in self.tokens:
            if not tok or any(ch.isspace() for ch in tok):
                raise CorpusError(f"invalid token {tok!r}: empty or contains whitespace")

    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class Corpus:
    """An ordered, immutable collection of sentences sharing one attribute."""

    sentences: tuple[Sentence, ...]
    attribute: AttributeLabel
    source_path: str = field(default="", compare=False)
    dropped: int = field(default=0, compare=False)

    def __post_init__(self) -> None:
        for i, s in enumerate(self.sentences):
            if s.id != i:
                raise CorpusError(f"sentence ids must be dense 0..n-1, got {s.id} at position {i}")

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    def __getitem__(self, i: int) -> Sentence:
        return self.sentences[i]


@dataclass(frozen=True)
class Vocabulary:
    """Dense token-id assignment plus occurrence counts over the input corpora."""

    ids: dict[str, int]
    counts: Counter

    def __len__(self) -> int:
        return len(self.ids)


def tokenize(line: str, cfg: TokenizeConfig = TokenizeConfig()) -> list[str]:
    """Split a line on whitespace runs; optionally lowercase. Never yields empty tokens."""
    if cfg.lowercase:
        line = line.lower()
    return line.split()


def sentences_from_lines(
    lines, attribute: AttributeLabel, cfg: TokenizeConfig, source_path: str = ""
) -> Corpus:
    """Build a Corpus from an iterable of raw lines (shared by file and in-memory paths)."""
    sentences: list[Sentence] = []
    dropped = 0
    for line in lines:
        tokens = tokenize(line, cfg)
        if not tokens:
            continue
        if len(tokens) > cfg.max_len:
            dropped += 1
            continue
        sentences.append(Sentence(tokens=tuple(tokens), id=len(sentences)))
    if dropped:
        log.warning("dropped %d sentence(s) exceeding max_len=%d (%s)", dropped, cfg.max_len, source_path or "<memory>")
    if not sentences:
        raise CorpusError(f"empty corpus after filtering: {source_path or '<memory>'}")
    return Corpus(
        sentences=tuple(sentences),
        attribute=attribute,
        source_path=source_path,
        dropped=dropped,
    )


def load_corpus(
    path: str, attribute: AttributeLabel, cfg: TokenizeConfig = TokenizeConfig()
) -> Corpus:
    """Load a one-sentence-per-line UTF-8 corpus file.

    Blank lines are skipped; over-length sentences are dropped with a counted
    warning; remaining sentences get dense ids in file order.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise CorpusError(f"cannot read corpus file {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise CorpusError(f"corpus file {path} is not valid UTF-8: {exc}") from exc
    return sentences_from_lines(lines, attribute, cfg, source_path=str(path))


def save_corpus(corpus: Corpus, path: str) -> None:
    """Write one sentence per line, tokens joined by single spaces, LF endings."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in corpus:
            fh.write(s.text())
            fh.write("\n")


def build_vocab(corpora: list[Corpus]) -> Vocabulary:
    """Assign dense ids (first-occurrence order) and total counts over all corpora."""
    if not corpora:
        raise CorpusError("build_vocab requires at least one corpus")
    ids: dict[str, int] = {}
    counts: Counter = Counter()
    for corpus in corpora:
        for sentence in corpus:
            for tok in sentence.tokens:
                if tok not in ids:
                    ids[tok] = len(ids)
                counts[tok] += 1
    return Vocabulary(ids=ids, counts=counts)
