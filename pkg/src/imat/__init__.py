"""Iterative matching and translation for unsupervised attribute rewriting.

Pipeline: exact cosine nearest-neighbor matching over mean word embeddings
builds a pseudo-parallel corpus; a translation backend is retrained from
scratch on it each iteration; Word Mover Distance gates every candidate
update so the summed transport cost can only decrease; the loop stops once
the fraction of changed pairs per iteration falls below a threshold.
"""

from .corpus import (
    AttributeLabel,
    Corpus,
    Sentence,
    TokenizeConfig,
    Vocabulary,
    build_vocab,
    load_corpus,
    save_corpus,
    tokenize,
)
from .embedding import (
    EmbeddingTable,
    SentenceVector,
    cosine_similarity,
    load_embeddings,
    save_embeddings,
    sentence_embedding,
)
from .errors import (
    CheckpointError,
    ConfigError,
    CorpusError,
    EmbeddingError,
    EvalError,
    ImatError,
    MatchingError,
    ProtocolError,
    SolverError,
    TranslationError,
)
from .evaluation import (
    AttributeClassifier,
    BleuScore,
    EvalReport,
    NgramLM,
    accuracy,
    bleu_multi_ref,
    classify,
    perplexity,
    train_classifier,
    train_lm,
)
from .matching import MatchConfig, MatchResult, TargetIndex, build_initial_pairs, nearest_neighbor, rematch_pairs
from .pipeline import (
    EvalInputs,
    PipelineConfig,
    config_hash,
    refine_step,
    run_imat,
    total_cost,
    update_rate,
)
from .state import (
    ORIGIN_MATCH,
    ORIGIN_TRANS,
    PairRecord,
    PseudoParallelState,
    UpdateEvent,
    checkpoint_read,
    checkpoint_write,
)
from .translate import (
    BuiltinBackend,
    ExternalBackend,
    ExternalModel,
    LexicalChannel,
    train_lexical,
    translate,
    translate_batch_external,
)
from .wmd import (
    NBow,
    TransportPlan,
    WmdOptions,
    WmdScorer,
    cost_matrix,
    emd_solve,
    nbow,
    wcd_lower_bound,
    wmd,
)

__version__ = "0.1.0"

__all__ = [
    "AttributeLabel",
    "Corpus",
    "Sentence",
    "TokenizeConfig",
    "Vocabulary",
    "build_vocab",
    "load_corpus",
    "save_corpus",
    "tokenize",
    "EmbeddingTable",
    "SentenceVector",
    "cosine_similarity",
    "load_embeddings",
    "save_embeddings",
    "sentence_embedding",
    "ImatError",
    "ConfigError",
    "CorpusError",
    "EmbeddingError",
    "MatchingError",
    "TranslationError",
    "ProtocolError",
    "CheckpointError",
    "EvalError",
    "SolverError",
    "AttributeClassifier",
    "BleuScore",
    "EvalReport",
    "NgramLM",
    "accuracy",
    "bleu_multi_ref",
    "classify",
    "perplexity",
    "train_classifier",
    "train_lm",
    "MatchConfig",
    "MatchResult",
    "TargetIndex",
    "build_initial_pairs",
    "nearest_neighbor",
    "rematch_pairs",
    "EvalInputs",
    "PipelineConfig",
    "config_hash",
    "refine_step",
    "run_imat",
    "total_cost",
    "update_rate",
    "ORIGIN_MATCH",
    "ORIGIN_TRANS",
    "PairRecord",
    "PseudoParallelState",
    "UpdateEvent",
    "checkpoint_read",
    "checkpoint_write",
    "BuiltinBackend",
    "ExternalBackend",
    "ExternalModel",
    "LexicalChannel",
    "train_lexical",
    "translate",
    "translate_batch_external",
    "NBow",
    "TransportPlan",
    "WmdOptions",
    "WmdScorer",
    "cost_matrix",
    "emd_solve",
    "nbow",
    "wcd_lower_bound",
    "wmd",
]
