"""Exception hierarchy shared across the pipeline.

Each phase raises its own subclass so callers (and the CLI's exit-code
mapping) can tell a bad corpus from a bad embedding file from a backend
failure without string matching.
"""

from __future__ import annotations


class ImatError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ImatError):
    """Invalid configuration value or unknown config-file key."""


class CorpusError(ImatError):
    """Unreadable, malformed, or empty corpus input."""


class EmbeddingError(ImatError):
    """Malformed embedding file or invalid vector arithmetic input."""


class MatchingError(ImatError):
    """Matching phase cannot proceed (e.g. zero retained pairs)."""


class TranslationError(ImatError):
    """Translation backend failure."""


class ProtocolError(TranslationError):
    """External backend violated the line-JSON wire protocol."""


class CheckpointError(ImatError):
    """Corrupt or truncated checkpoint file."""


class EvalError(ImatError):
    """Evaluation inputs are inconsistent (e.g. hyp/ref length mismatch)."""


class SolverError(ImatError):
    """Internal optimizer failure; indicates a bug, not bad user input."""
