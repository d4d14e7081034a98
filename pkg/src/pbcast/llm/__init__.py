"""LLM prediction pipelines: prompt variants, client, parsing, probes."""

from .client import (  # noqa: F401
    ChatClient,
    LlmConfig,
    LlmError,
    ReplayMissError,
    Transcript,
    TranscriptStore,
    prompt_key,
)
from .prompts import (  # noqa: F401
    PromptVariant,
    PredictionParseError,
    build_prompt,
    build_step_back_prompt,
    parse_prediction,
    retrieve_similar,
    summarize_past_election,
)
from .pipeline import run_campaign_prediction  # noqa: F401
from .contamination import (  # noqa: F401
    ContaminationReport,
    probe_attribute_retrieval,
    probe_description_completion,
)
