"""Adversarial prompt construction and LLM generation."""
from .backends import (
    Backend,
    Completion,
    LlmBackendConfig,
    MockBackend,
    OpenAIChatBackend,
    Price,
    mock_generate,
    parse_chat_response,
)
from .generate import (
    GenerationCache,
    GenerationRecord,
    cache_key,
    cost_summary,
    default_refusal_patterns,
    generate,
    generate_batch,
    is_refusal,
    read_records,
    write_records,
)
from .prompt import PromptTemplate, build_prompt, extract_transcript, prompt_hash, skeleton_template_path

__all__ = [
    "Backend", "Completion", "GenerationCache", "GenerationRecord", "LlmBackendConfig", "MockBackend",
    "OpenAIChatBackend", "Price", "PromptTemplate", "build_prompt", "cache_key", "cost_summary",
    "default_refusal_patterns", "extract_transcript", "generate", "generate_batch", "is_refusal",
    "mock_generate", "parse_chat_response", "prompt_hash", "read_records", "skeleton_template_path",
    "write_records",
]
