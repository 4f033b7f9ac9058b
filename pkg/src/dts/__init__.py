"""Entropy-gated decoding tree engine with oracle and evaluation harness."""

from .branching import (
    BranchDecision,
    branch_function,
    entropy,
    sample_token,
    softmax_with_temperature,
    top_k_tokens,
)
from .core import (
    BranchState,
    DatasetError,
    DtsConfig,
    DtsError,
    Frontier,
    InvalidInputError,
    LogicError,
    ProtocolError,
    ProviderError,
    ResourceLimitError,
    RunResult,
    StepTrace,
    TokenDistribution,
    TokenId,
    TransportError,
)
from .engine import (
    EarlyStopOutcome,
    apply_budget,
    check_early_stop,
    expand_frontier,
    run_dts,
    run_standard,
    select_result,
)
from .evalharness import (
    EvalItem,
    EvalRecord,
    MetricsTable,
    aggregate_metrics,
    detect_repetition,
    export_scatter,
    extract_answer,
    load_dataset,
    run_eval,
    selection_strategy_analysis,
)
from .oracle import EnumeratedPath, enumerate_tree, shortest_terminating, verify_dts_against_oracle
from .providers import (
    DistributionProvider,
    NGramModel,
    PfsaModel,
    ProviderServer,
    RemoteProvider,
    ScriptedModel,
    train_ngram,
)
from .rng import SplitMix64

__version__ = "0.1.0"

__all__ = [
    "BranchDecision",
    "BranchState",
    "DatasetError",
    "DistributionProvider",
    "DtsConfig",
    "DtsError",
    "EarlyStopOutcome",
    "EnumeratedPath",
    "EvalItem",
    "EvalRecord",
    "Frontier",
    "InvalidInputError",
    "LogicError",
    "MetricsTable",
    "NGramModel",
    "PfsaModel",
    "ProtocolError",
    "ProviderError",
    "ProviderServer",
    "RemoteProvider",
    "ResourceLimitError",
    "RunResult",
    "ScriptedModel",
    "SplitMix64",
    "StepTrace",
    "TokenDistribution",
    "TokenId",
    "TransportError",
    "aggregate_metrics",
    "apply_budget",
    "branch_function",
    "check_early_stop",
    "detect_repetition",
    "entropy",
    "enumerate_tree",
    "expand_frontier",
    "export_scatter",
    "extract_answer",
    "load_dataset",
    "run_dts",
    "run_eval",
    "run_standard",
    "sample_token",
    "select_result",
    "selection_strategy_analysis",
    "shortest_terminating",
    "softmax_with_temperature",
    "top_k_tokens",
    "train_ngram",
    "verify_dts_against_oracle",
]
