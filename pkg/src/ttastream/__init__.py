"""Streaming test-time adaptation over frozen embedding streams.

The engine classifies a stream of unit-norm image embeddings against a bank
of text-prompt embeddings, adapting as it goes: per-sample prompt filtering
and ensembling, a constant-memory recursive cache of pseudo-labeled samples
equivalent to unbounded cross-attention, and entropy-weighted fusion of the
two resulting logit vectors.
"""

from .cache import (
    BoundedCache,
    CacheEntry,
    ClassState,
    ClassStates,
    cache_insert,
    cross_attention_logits,
    init_states,
    pseudo_label,
    recursive_logits,
    recursive_update,
)
from .embedding import cosine, normalize
from .engine import RunConfig, RunReport, SampleRecord, run_stream
from .ensemble import (
    EnsembleConfig,
    EnsembleResult,
    adaptive_step,
    ensemble_class,
    filter_prompts,
    retained_count,
)
from .errors import (
    BadMagicError,
    DegenerateEnsembleError,
    DimensionMismatchError,
    EmptyStreamError,
    MetadataMismatchError,
    SeparationInfeasibleError,
    TruncatedFileError,
    TruncatedRecordError,
    TTAStreamError,
    VersionUnsupportedError,
    ZeroVectorError,
)
from .ete import (
    PromptBank,
    StreamArrays,
    StreamSample,
    load_prompt_bank,
    load_stream,
    load_stream_arrays,
    write_prompt_bank,
    write_stream,
)
from .fusion import FusedResult, FusionConfig, entropy, fuse
from .harness import (
    emit_report,
    load_report,
    noise_experiment,
    sweep_alpha,
    sweep_beta,
    sweep_cache_sizes,
    unbounded_divergence,
)
from .synth import SynthSpec, benchmark_spec, contaminate_bank, generate, synth_generate

__version__ = "0.1.0"

__all__ = [
    "BadMagicError",
    "BoundedCache",
    "CacheEntry",
    "ClassState",
    "ClassStates",
    "DegenerateEnsembleError",
    "DimensionMismatchError",
    "EmptyStreamError",
    "EnsembleConfig",
    "EnsembleResult",
    "FusedResult",
    "FusionConfig",
    "MetadataMismatchError",
    "PromptBank",
    "RunConfig",
    "RunReport",
    "SampleRecord",
    "SeparationInfeasibleError",
    "StreamArrays",
    "StreamSample",
    "SynthSpec",
    "TTAStreamError",
    "TruncatedFileError",
    "TruncatedRecordError",
    "VersionUnsupportedError",
    "ZeroVectorError",
    "adaptive_step",
    "benchmark_spec",
    "cache_insert",
    "contaminate_bank",
    "cosine",
    "cross_attention_logits",
    "emit_report",
    "ensemble_class",
    "entropy",
    "filter_prompts",
    "fuse",
    "generate",
    "init_states",
    "load_prompt_bank",
    "load_report",
    "load_stream",
    "load_stream_arrays",
    "noise_experiment",
    "normalize",
    "pseudo_label",
    "recursive_logits",
    "recursive_update",
    "retained_count",
    "run_stream",
    "sweep_alpha",
    "sweep_beta",
    "sweep_cache_sizes",
    "synth_generate",
    "unbounded_divergence",
    "write_prompt_bank",
    "write_stream",
]
