"""Word-embedding table loading and sentence-level vector arithmetic.

The table maps tokens to dense float64 vectors of one shared dimension,
loaded from the plain-text word-vector format (one token plus its components
per line, optional two-integer count/dim header). Sentence embeddings are
unweighted means over in-vocabulary tokens; cosine handles normalization, so
means are stored unnormalized.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .corpus import Sentence
from .errors import EmbeddingError

log = logging.getLogger(__name__)


class EmbeddingTable:
    """Immutable token -> vector map with a single dimension ``dim``."""

    def __init__(self, vectors: dict[str, np.ndarray]):
        if not vectors:
            raise EmbeddingError("embedding table must contain at least one vector")
        dims = {v.shape for v in vectors.values()}
        if len(dims) != 1 or len(next(iter(dims))) != 1:
            raise EmbeddingError(f"inconsistent vector shapes in table: {sorted(dims)}")
        self.dim: int = next(iter(dims))[0]
        self._vectors: dict[str, np.ndarray] = {}
        for tok, vec in vectors.items():
            arr = np.asarray(vec, dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise EmbeddingError(f"non-finite components in vector for token {tok!r}")
            arr.setflags(write=False)
            self._vectors[tok] = arr

    def __contains__(self, token: str) -> bool:
        return token in self._vectors

    def __getitem__(self, token: str) -> np.ndarray:
        return self._vectors[token]

    def __len__(self) -> int:
        return len(self._vectors)

    def get(self, token: str):
        return self._vectors.get(token)

    def tokens(self):
        return self._vectors.keys()


@dataclass(frozen=True)
class SentenceVector:
    """Mean embedding of a sentence's in-vocabulary tokens.

    coverage is the fraction of tokens found in the table; construction is
    refused at zero coverage (callers receive None instead).
    """

    values: np.ndarray
    coverage: float

    def __post_init__(self) -> None:
        if not 0.0 < self.coverage <= 1.0:
            raise EmbeddingError(f"coverage must lie in (0, 1], got {self.coverage}")


def _parse_header(first_line: str) -> bool:
    """True when the first line is exactly two integers (vocab count, dim)."""
    parts = first_line.split()
    if len(parts) != 2:
        return False
    try:
        int(parts[0]), int(parts[1])
    except ValueError:
        return False
    return True


def load_embeddings(path: str) -> EmbeddingTable:
    """Load a text-format embedding file.

    Each line holds a token followed by ``dim`` space-separated floats; an
    optional first line of exactly two integers is treated as a header and
    skipped. Later duplicate tokens overwrite earlier ones (counted warning).
    """
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise EmbeddingError(f"cannot read embedding file {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise EmbeddingError(f"embedding file {path} is not valid UTF-8: {exc}") from exc

    start = 0
    if lines and _parse_header(lines[0]):
        start = 1

    vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    duplicates = 0
    for lineno, line in enumerate(lines[start:], start=start + 1):
        if not line.strip():
            continue
        parts = line.split()
        token, components = parts[0], parts[1:]
        if dim is None:
            dim = len(components)
            if dim == 0:
                raise EmbeddingError(f"{path}:{lineno}: no vector components")
        elif len(components) != dim:
            raise EmbeddingError(
                f"{path}:{lineno}: inconsistent dimension {len(components)} (expected {dim})"
            )
        try:
            vec = np.array([float(x) for x in components], dtype=np.float64)
        except ValueError as exc:
            raise EmbeddingError(f"{path}:{lineno}: unparseable float: {exc}") from exc
        if token in vectors:
            duplicates += 1
        vectors[token] = vec
    if not vectors:
        raise EmbeddingError(f"embedding file {path} contains no vectors")
    if duplicates:
        log.warning("%d duplicate token(s) in %s; later entries kept", duplicates, path)
    return EmbeddingTable(vectors)


def save_embeddings(table: EmbeddingTable, path: str, header: bool = False) -> None:
    """Write the plain-text word-vector format load_embeddings reads.

    Floats use repr precision, so a save/load round trip is exact.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header:
            fh.write(f"{len(table)} {table.dim}\n")
        for tok in table.tokens():
            fh.write(tok + " " + " ".join(repr(float(x)) for x in table[tok]))
            fh.write("\n")


def sentence_embedding(s: Sentence, table: EmbeddingTable):
    """Mean of in-vocabulary token vectors, or None when every token is OOV.

    Accumulates left-to-right in float64 so results are reproducible
    regardless of array backend.
    """
    acc = np.zeros(table.dim, dtype=np.float64)
    hits = 0
    for tok in s.tokens:
        vec = table.get(tok)
        if vec is not None:
            acc += vec
            hits += 1
    if hits == 0:
        return None
    return SentenceVector(values=acc / hits, coverage=hits / len(s.tokens))


def _as_array(v) -> np.ndarray:
    return v.values if isinstance(v, SentenceVector) else np.asarray(v, dtype=np.float64)


def cosine_similarity(u, v) -> float:
    """dot(u, v) / (|u| |v|); raises on zero-norm input.

    The formula is evaluated identically under argument swap, so symmetry is
    exact, not approximate.
    """
    ua, va = _as_array(u), _as_array(v)
    if ua.shape != va.shape:
        raise EmbeddingError(f"dimension mismatch: {ua.shape} vs {va.shape}")
    nu = float(np.linalg.norm(ua))
    nv = float(np.linalg.norm(va))
    if nu == 0.0 or nv == 0.0:
        raise EmbeddingError("cosine similarity undefined for zero-norm vector")
    return float(np.dot(ua, va) / (nu * nv))
