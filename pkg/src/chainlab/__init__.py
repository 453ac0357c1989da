"""chainlab: simulate and analyze iterated sentence-transformation chains."""

__version__ = "0.1.0"

from .errors import ChainLabError
from .textunit import Corpus, Paragraph, Sentence, canonicalize, load_corpus, segment
from .kernels import (
    DecodingConfig,
    FiniteKernel,
    KernelStep,
    LLMKernel,
    PromptSchedule,
    PromptTemplate,
    ScheduledKernel,
    ScriptedKernel,
    apply_decoding,
    compose_round_trip,
    load_template,
    random_logits_kernel,
    render_prompt,
    sample_step,
    scheduled_step,
)
from .chain_runner import (
    BatchResult,
    RecurrenceReport,
    Trajectory,
    recurrence_stats,
    run_batch,
    run_chain,
)
from .markov_analysis import (
    BlockDecomposition,
    Distribution,
    TransitionMatrix,
    compose_matrices,
    entropy,
    estimate_kernel,
    evolve,
    kl_divergence,
    mixture_entropy_bounds,
    recurrent_classes,
    stationary,
)
from .metrics import (
    DriftSeries,
    TokenizedSentence,
    bleu,
    drift_series,
    meteor_lite,
    normalized_diversity_ratio,
    rouge1,
    tfidf_cosine,
    tokenize,
)
from .stats import (
    CorrelationRow,
    PairedSample,
    length_diversity_table,
    linear_fit,
    pearson_with_p,
    regularized_incomplete_beta,
)
from .llm_client import ChatClient, CompletionRequest, EndpointConfig, complete

__all__ = [name for name in dir() if not name.startswith("_")]
