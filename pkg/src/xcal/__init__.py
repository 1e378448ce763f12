"""Interactive cross-modal image retrieval with SVM relevance feedback."""

from .errors import (
    CorpusError,
    FeedbackError,
    FormatError,
    NotFoundError,
    ProviderUnavailableError,
)
from .formats import ingest_corpus, read_labels, write_corpus, write_labels
from .metrics import average_precision_at_k, recall_at_k
from .providers import ProviderConfig, RemoteProvider, StubProvider, make_provider, stub_embed
from .session import (
    FinetuneOutcome,
    Judgment,
    Query,
    ResultEntry,
    ResultPage,
    Session,
    SessionEngine,
    encode_query,
)
from .simulate import (
    ActorConfig,
    SimulationConfig,
    SimulationReport,
    actor_select,
    apply_error_model,
    enumerate_grid,
    generate_synthetic_corpus,
    grid_search,
    run_simulation,
)
from .store import (
    Corpus,
    ImageRecord,
    RankedList,
    cosine_similarity,
    initial_retrieval,
    normalize,
)
from .svm import KernelSVC, decision_score, kernel_eval, rank_by_confidence

__version__ = "0.1.0"

__all__ = [
    "ActorConfig",
    "Corpus",
    "CorpusError",
    "FeedbackError",
    "FinetuneOutcome",
    "FormatError",
    "ImageRecord",
    "Judgment",
    "KernelSVC",
    "NotFoundError",
    "ProviderConfig",
    "ProviderUnavailableError",
    "Query",
    "RankedList",
    "RemoteProvider",
    "ResultEntry",
    "ResultPage",
    "Session",
    "SessionEngine",
    "SimulationConfig",
    "SimulationReport",
    "StubProvider",
    "actor_select",
    "apply_error_model",
    "average_precision_at_k",
    "cosine_similarity",
    "decision_score",
    "encode_query",
    "enumerate_grid",
    "generate_synthetic_corpus",
    "grid_search",
    "ingest_corpus",
    "initial_retrieval",
    "kernel_eval",
    "make_provider",
    "normalize",
    "rank_by_confidence",
    "read_labels",
    "recall_at_k",
    "run_simulation",
    "stub_embed",
    "write_corpus",
    "write_labels",
]
