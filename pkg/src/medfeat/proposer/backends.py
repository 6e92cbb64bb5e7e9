"""Proposal backends: a chat-completions HTTP client and an offline double.

Both produce a free-text response whose first fenced code block is the
proposed program. The offline backend is a deterministic template chooser,
which makes whole-pipeline runs reproducible without any network access.
"""

from __future__ import annotations

import itertools
import os
import re
import time
from dataclasses import dataclass

import httpx

from ..datamodel import ColumnKind, ColumnSchema
from ..islands import Island
from .memory import MemoryBank

_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)

DEFAULT_TEMPERATURE = 0.7
DEFAULT_API_KEY_ENV = "MEDFEAT_API_KEY"


class GenerationError(RuntimeError):
    """The backend produced no usable program (transport or format failure)."""


class IslandExhaustedError(GenerationError):
    """The offline backend ran out of unproposed templates for this island."""


@dataclass(frozen=True)
class ProposerConfig:
    backend: str = "offline"  # "offline" | "http_chat"
    endpoint: str = ""  # full chat-completions URL for http_chat
    model: str = ""
    temperature: float = DEFAULT_TEMPERATURE
    api_key_env: str = DEFAULT_API_KEY_ENV
    timeout: float = 30.0
    max_transport_retries: int = 2
    seed: int = 0  # offline template rotation

    def __post_init__(self) -> None:
        if self.backend not in ("offline", "http_chat"):
            raise ValueError(f"unknown proposer backend {self.backend!r}")


def extract_program_text(response: str) -> str:
    """First fenced code block, stripped; anything else is a failure."""
    match = _FENCE_RE.search(response)
    if match is None:
        raise GenerationError("response contains no fenced code block")
    return match.group(1).strip()


def extract_rationale(response: str) -> str:
    """Prose preceding the first fence, as the proposal's justification."""
    idx = response.find("```")
    prose = response if idx < 0 else response[:idx]
    return " ".join(prose.split())


def chat_complete(prompt_text: str, config: ProposerConfig) -> str:
    """One chat-completions request; retried on transport errors only."""
    if not config.endpoint:
        raise GenerationError("http_chat backend requires an endpoint URL")
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(config.api_key_env, "")
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    payload = {
        "model": config.model,
        "temperature": config.temperature,
        "messages": [
            {"role": "system", "content": "You design features for clinical tabular models."},
            {"role": "user", "content": prompt_text},
        ],
    }
    last_error: Exception | None = None
    for attempt in range(config.max_transport_retries + 1):
        try:
            response = httpx.post(
                config.endpoint, json=payload, headers=headers, timeout=config.timeout
            )
            if response.status_code >= 500:
                raise httpx.TransportError(f"server error {response.status_code}")
            if response.status_code >= 400:
                raise GenerationError(
                    f"chat endpoint rejected the request: {response.status_code} "
                    f"{response.text[:200]}"
                )
            body = response.json()
            return body["choices"][0]["message"]["content"]
        except (httpx.TransportError, KeyError, ValueError) as exc:
            last_error = exc
            if attempt < config.max_transport_retries:
                time.sleep(0.5 * 2**attempt)
    raise GenerationError(f"transport failed after retries: {last_error}")


def propose(prompt_text: str, config: ProposerConfig, island=None, memory=None,
            learner_kind: str = "logreg", schema=None) -> str:
    """Program text from the configured backend.

    The offline backend ignores the prompt text and derives its proposal
    from the island and memory directly.
    """
    if config.backend == "http_chat":
        return extract_program_text(chat_complete(prompt_text, config))
    response = offline_respond(island, memory, learner_kind, config.seed, schema=schema)
    return extract_program_text(response)


# -- offline template chooser ------------------------------------------------


def _numeric_columns(island: Island, schema: list[ColumnSchema]) -> list[str]:
    kinds = {c.name: c.kind for c in schema}
    return sorted(
        c for c in island.columns if kinds[c] in (ColumnKind.NUMERIC, ColumnKind.BINARY)
    )


def _rotate(items: list, by: int) -> list:
    if not items:
        return items
    by %= len(items)
    return items[by:] + items[:by]


def _product_templates(cols: list[str]) -> list[tuple[str, str]]:
    out = []
    for a, b in itertools.combinations(cols, 2):
        text = f"feature {a}_x_{b} = col({a}) * col({b})"
        rationale = (
            f"Multiplicative interaction of {a} and {b}; joint elevation can "
            "signal compounded risk that neither column shows alone."
        )
        out.append((text, rationale))
    return out


def _norm_product_templates(cols: list[str]) -> list[tuple[str, str]]:
    out = []
    for a, b in itertools.combinations(cols, 2):
        text = (
            f"feature {a}_{b}_norm_interaction = "
            f"(col({a}) - trainmin(col({a}))) / (trainmax(col({a})) - trainmin(col({a}))) * "
            f"(col({b}) - trainmin(col({b}))) / (trainmax(col({b})) - trainmin(col({b})))"
        )
        rationale = (
            f"Range-normalized interaction of {a} and {b}, scaled to comparable "
            "units before multiplying so neither column dominates."
        )
        out.append((text, rationale))
    return out


def _threshold_templates(cols: list[str]) -> list[tuple[str, str]]:
    out = []
    for a in cols:
        text = (
            f"feature {a}_above_median = "
            f"if(col({a}) > trainmedian(col({a})), 1.0, 0.0)"
        )
        rationale = f"Indicator for {a} above its typical (training-median) level."
        out.append((text, rationale))
    return out


def _temporal_templates(island: Island) -> list[tuple[str, str]]:
    groups = sorted(g.group_id for g in island.groups if g.is_temporal)
    out = []
    for op, suffix, what in (
        ("gslope", "slope", "direction and speed of change"),
        ("gdelta", "delta", "net change from first to last measurement"),
        ("gstd", "variability", "instability across measurements"),
    ):
        for g in groups:
            text = f"feature {g}_{suffix} = {op}({g})"
            rationale = f"Captures the {what} of {g} over its repeated measurements."
            out.append((text, rationale))
    return out


def _zsum_template(cols: list[str]) -> list[tuple[str, str]]:
    if len(cols) < 2:
        return []
    terms = " + ".join(
        f"(col({c}) - trainmean(col({c}))) / trainstd(col({c}))" for c in cols
    )
    name = "zsum_" + "_".join(cols)
    rationale = (
        "Global burden score: sum of standardized island columns, a cross-"
        "feature aggregate that a tree must otherwise approximate split by split."
    )
    return [(f"feature {name} = {terms}", rationale)]


def offline_candidates(
    island: Island, learner_kind: str, seed: int, schema: list[ColumnSchema]
) -> list[tuple[str, str]]:
    """Ordered (program text, rationale) candidates for one island.

    Template families keep a fixed order per learner kind; the seed rotates
    the candidate order inside each family. For the linear model: pairwise
    products, then range-normalized products, then above-median indicators.
    For trees: temporal slope/delta/variability aggregates, then a
    standardized multi-column sum, then interaction fallbacks.
    """
    cols = _numeric_columns(island, schema)
    if learner_kind == "logreg":
        families = [
            _product_templates(cols),
            _norm_product_templates(cols),
            _threshold_templates(cols),
        ]
    else:
        temporal = _temporal_templates(island)
        # Rotation over groups happens inside the family via the shared shift.
        families = [
            temporal,
            _zsum_template(cols),
            _product_templates(cols),
            _norm_product_templates(cols),
        ]
    return [item for family in families for item in _rotate(family, seed)]


def offline_respond(
    island: Island,
    memory: MemoryBank,
    learner_kind: str,
    seed: int,
    schema: list[ColumnSchema],
    extra_known: frozenset[str] = frozenset(),
) -> str:
    """Deterministic response text: rationale prose plus one fenced program.

    Never re-emits a program text already present in memory (accepted or
    rejected) or in ``extra_known`` (the engine's per-island scratch).
    """
    known = memory.known_texts() | set(extra_known)
    for text, rationale in offline_candidates(island, learner_kind, seed, schema):
        if text not in known:
            return f"{rationale}\n```\n{text}\n```"
    raise IslandExhaustedError(
        f"island {island.island_id} has no unproposed templates left"
    )
