"""Model-aware prompt construction from metadata only.

Prompts are assembled from the schema, group importance, and the proposal
memory. No dataset cell and no label value can reach the prompt: the
builder simply never touches row storage, and a property test injects
sentinel cells to prove it. Island scoping bounds the prompt, so columns
outside the island never grow it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from ..datamodel import ColumnSchema
from ..explain import ImportanceVector
from ..islands import Island
from .memory import DEFAULT_RENDER_CAP, MemoryBank

DEFAULT_PROMPT_BUDGET = 8000

LOGREG_GUIDANCE = (
    "The downstream model is logistic regression: its decision function is "
    "linear in the inputs, so it cannot represent curvature or feature "
    "interplay on its own. Propose nonlinear transformations, interaction "
    "terms, and composite features that expand its representational capacity."
)

GBDT_GUIDANCE = (
    "The downstream model is a gradient-boosted tree ensemble, which already "
    "captures axis-aligned thresholds and local interactions. Propose "
    "complex temporal patterns, global statistics, and context-driven "
    "interactions instead. Do not propose simple thresholding, trivial "
    "interactions, or naive rescaling of a single column."
)

GRAMMAR_REFERENCE = """\
Write exactly one program:  feature <name> = <expression>
Expressions may use:
  col(name)                      a column value
  + - * / min max pow            arithmetic (infix; x pow 2 squares x)
  log1p(x) abs(x) sqrt(x) neg(x) clip01(x)
  if(condition, a, b)            condition: comparisons (> >= < <= ==),
                                 is_missing(x), and/or/not
  coalesce(a, b)                 first value unless missing
  trainmean(x) trainstd(x) trainmin(x) trainmax(x) trainmedian(x)
                                 statistics frozen on training rows only
  gmean(g) gstd(g) gmin(g) gmax(g) gfirst(g) glast(g) gdelta(g) gslope(g)
  gmissing(g)                    aggregations over a temporal group g
Categorical columns may only be compared to a quoted token, e.g.
if(col(sex) == "F", 1, 0). Never reference the outcome column."""


@dataclass(frozen=True)
class PromptBundle:
    """Named prompt blocks; rendering joins them under fixed headings."""

    preamble: str
    guidance: str  # empty when model-awareness is ablated
    dataset_block: str
    island_block: str
    accepted_block: str
    failed_block: str
    output_contract: str

    def render(self, budget: int = DEFAULT_PROMPT_BUDGET) -> str:
        text = self._render_once()
        if len(text) <= budget:
            return text
        # Trim memory first, then column descriptions; a contract that still
        # cannot fit is a configuration error.
        trimmed = replace(self, accepted_block="(trimmed)", failed_block="(trimmed)")
        text = trimmed._render_once()
        if len(text) <= budget:
            return text
        raise ValueError(f"prompt exceeds budget of {budget} characters")

    def _render_once(self) -> str:
        sections = [self.preamble]
        if self.guidance:
            sections.append(self.guidance)
        sections.extend(
            [
                f"Dataset description:\n{self.dataset_block}",
                f"Available features and importance:\n{self.island_block}",
                f"Previously successful features:\n{self.accepted_block}",
                f"Previously failed features:\n{self.failed_block}",
                self.output_contract,
            ]
        )
        return "\n\n".join(sections)


def _describe_column(col: ColumnSchema) -> str:
    bits = [col.kind.value]
    if col.temporal_group is not None:
        bits.append(
            f"measurement of group '{col.temporal_group.group_id}' at "
            f"{col.temporal_group.time_offset:g}h"
        )
    if col.description:
        bits.append(col.description)
    return f"  - {col.name} ({'; '.join(bits)})"


def build_prompt(
    island: Island,
    importance: ImportanceVector,
    memory: MemoryBank,
    learner_kind: str,
    task_description: str,
    schema: list[ColumnSchema],
    model_aware: bool = True,
    include_importance: bool = True,
    memory_cap: int = DEFAULT_RENDER_CAP,
) -> PromptBundle:
    """Assemble the generation prompt for one island.

    Importance lines follow "name, importance: v, ranking r among G
    features". Ablations: ``model_aware=False`` drops the learner guidance
    block; ``include_importance=False`` drops the importance lines and the
    importance-use instruction.
    """
    by_name = {c.name: c for c in schema}
    by_group = importance.by_group()
    n_groups = len(importance.entries)

    principles = [
        "Ground every feature in plausible clinical reasoning.",
        "Prefer patterns resembling previously accepted features; avoid "
        "patterns resembling failed ones.",
        "Handle missing values explicitly; never invent a value.",
    ]
    if include_importance:
        principles.insert(
            0,
            "Use the provided feature importance scores to guide the design; "
            "prioritise features that already show predictive signal.",
        )
    preamble = (
        "You are a clinician-epidemiologist and data scientist. Design one "
        f"new numerical feature that improves performance on this task: "
        f"{task_description}\n"
        "Principles:\n" + "\n".join(f"{i + 1}. {p}" for i, p in enumerate(principles))
    )

    guidance = ""
    if model_aware:
        guidance = LOGREG_GUIDANCE if learner_kind == "logreg" else GBDT_GUIDANCE

    island_lines = []
    for group in island.groups:
        entry = by_group.get(group.group_id)
        if include_importance and entry is not None:
            island_lines.append(
                f"- {group.group_id}, importance: {entry.normalized:.4f}, "
                f"ranking {entry.rank} among {n_groups} features"
            )
        else:
            island_lines.append(f"- {group.group_id}")
        for name in group.member_columns:
            island_lines.append(_describe_column(by_name[name]))
    island_block = "\n".join(island_lines)

    dataset_block = (
        f"{len(by_name)} columns overall; this request covers the "
        f"{len(island.columns)} column(s) listed below. Only column metadata "
        "is available; no patient-level values are ever shared."
    )

    output_contract = (
        "Output requirements: respond with exactly one fenced code block "
        "containing a single transformation program and nothing else.\n"
        + GRAMMAR_REFERENCE
    )

    return PromptBundle(
        preamble=preamble,
        guidance=guidance,
        dataset_block=dataset_block,
        island_block=island_block,
        accepted_block=memory.render_accepted(memory_cap),
        failed_block=memory.render_rejected(memory_cap),
        output_contract=output_contract,
    )
