"""Proposal generation: prompts, memory, and LLM/offline backends."""

from __future__ import annotations

from dataclasses import dataclass

from ..datamodel import ColumnSchema
from ..explain import ImportanceVector
from ..islands import Island
from .backends import (
    DEFAULT_API_KEY_ENV,
    DEFAULT_TEMPERATURE,
    GenerationError,
    IslandExhaustedError,
    ProposerConfig,
    chat_complete,
    extract_program_text,
    extract_rationale,
    offline_candidates,
    offline_respond,
    propose,
)
from .memory import AcceptedEntry, MemoryBank, RejectedEntry
from .prompts import (
    DEFAULT_PROMPT_BUDGET,
    GBDT_GUIDANCE,
    GRAMMAR_REFERENCE,
    LOGREG_GUIDANCE,
    PromptBundle,
    build_prompt,
)


@dataclass(frozen=True)
class Proposal:
    program_text: str
    rationale: str


class OfflineProposer:
    """Engine-facing deterministic proposer; no prompt leaves the process."""

    name = "offline"

    def __init__(self, config: ProposerConfig | None = None):
        self.config = config or ProposerConfig(backend="offline")

    def generate(
        self,
        island: Island,
        importance: ImportanceVector,
        memory: MemoryBank,
        learner_kind: str,
        schema: list[ColumnSchema],
        task_description: str,
        seed: int,
        extra_known: frozenset[str] = frozenset(),
    ) -> Proposal:
        response = offline_respond(
            island, memory, learner_kind, self.config.seed + seed, schema, extra_known
        )
        return Proposal(
            program_text=extract_program_text(response),
            rationale=extract_rationale(response),
        )


class HttpChatProposer:
    """Engine-facing chat-completions proposer."""

    name = "http_chat"

    def __init__(
        self,
        config: ProposerConfig,
        model_aware: bool = True,
        include_importance: bool = True,
        prompt_budget: int = DEFAULT_PROMPT_BUDGET,
    ):
        self.config = config
        self.model_aware = model_aware
        self.include_importance = include_importance
        self.prompt_budget = prompt_budget

    def generate(
        self,
        island: Island,
        importance: ImportanceVector,
        memory: MemoryBank,
        learner_kind: str,
        schema: list[ColumnSchema],
        task_description: str,
        seed: int,
        extra_known: frozenset[str] = frozenset(),
    ) -> Proposal:
        bundle = build_prompt(
            island,
            importance,
            memory,
            learner_kind,
            task_description,
            schema,
            model_aware=self.model_aware,
            include_importance=self.include_importance,
        )
        response = chat_complete(bundle.render(self.prompt_budget), self.config)
        return Proposal(
            program_text=extract_program_text(response),
            rationale=extract_rationale(response),
        )
