"""Dual-process conversational memory: an episodic window plus a consolidated
profile, with RAG and full-context baselines and a deterministic benchmark harness."""

__version__ = "0.1.0"

from dualmem.architectures import Architecture, DualProcessMemory, FullContextMemory, RagMemory
from dualmem.backends import (
    ChatBackendSpec,
    HttpChatBackend,
    HttpEmbedder,
    Outcome,
    ScriptedBehavior,
    ScriptedChatBackend,
    ScriptedEmbedder,
)
from dualmem.core import (
    AssembledContext,
    Message,
    Role,
    TokenCounter,
    assemble_context,
    build_context,
    count_tokens,
)
from dualmem.episodic import EpisodicBuffer
from dualmem.evaluation import (
    BenchmarkRecord,
    PricingTable,
    crossover_point,
    emit_report,
    fit_growth_law,
    match_answer,
    project_costs,
    summarize_scale,
)
from dualmem.full_context import FullHistory, full_context_answer_context
from dualmem.profile import (
    ConsolidationPolicy,
    LLMConsolidator,
    RuleBasedConsolidator,
    SemanticProfile,
    consolidate,
)
from dualmem.simulation import (
    Placement,
    QueryType,
    WorkloadSpec,
    generate_capacity_run,
    generate_query_suite,
    generate_realistic_run,
)
from dualmem.vector import ChunkIndex, chunk_history, retrieve_top_k

__all__ = [
    "Architecture", "DualProcessMemory", "FullContextMemory", "RagMemory",
    "ChatBackendSpec", "HttpChatBackend", "HttpEmbedder", "Outcome", "ScriptedBehavior",
    "ScriptedChatBackend", "ScriptedEmbedder",
    "AssembledContext", "Message", "Role", "TokenCounter", "assemble_context", "build_context",
    "count_tokens", "EpisodicBuffer",
    "BenchmarkRecord", "PricingTable", "crossover_point", "emit_report", "fit_growth_law",
    "match_answer", "project_costs", "summarize_scale",
    "FullHistory", "full_context_answer_context",
    "ConsolidationPolicy", "LLMConsolidator", "RuleBasedConsolidator", "SemanticProfile",
    "consolidate",
    "Placement", "QueryType", "WorkloadSpec", "generate_capacity_run", "generate_query_suite",
    "generate_realistic_run",
    "ChunkIndex", "chunk_history", "retrieve_top_k",
]
