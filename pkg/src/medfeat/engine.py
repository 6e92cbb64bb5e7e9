"""The feature-engineering loop: propose, evaluate, select, accept, refresh.

Each iteration samples K islands from the importance distribution, asks the
proposer for one candidate per island (up to ``retries`` attempts when a
proposal fails to parse or validate), trains a fresh learner per valid
candidate, and keeps the single best candidate only if it clears the
acceptance rule against the current baseline. On acceptance the baseline
model, metric, and importance vector are refreshed; otherwise everything is
rejected into memory. The held-out test split is touched exactly once, after
the final iteration, at the validation-selected threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .datamodel import (
    Dataset,
    FeatureGroup,
    SchemaError,
    SplitIndices,
    augment,
    feature_groups,
)
from .explain import ImportanceVector, grouped_permutation_importance, normalize
from .fdsl import (
    FitError,
    FittedTransformation,
    ParseError,
    Program,
    ResolveError,
    TransformationSet,
    fit,
    fit_all,
    load_transformation_programs,
    parse,
    save_transformations,
    validate,
)
from .fdsl.nodes import rename_references
from .learners import LearnerError, LearnerSpec, predict_scores, train_spec
from .metrics import EvalReport, MetricError, auc, f1_at, youden_threshold
from .proposer import (
    GenerationError,
    MemoryBank,
    OfflineProposer,
    Proposal,
)

ACCEPTANCE_MODES = ("require_improvement", "allow_slack")


@dataclass(frozen=True)
class EngineConfig:
    iterations: int = 3  # T
    islands: int = 2  # K
    island_size: int = 3  # m
    beta: float = 0.01
    acceptance_mode: str = "require_improvement"
    retries: int = 3  # proposal attempts per island
    seed: int = 0
    importance_repeats: int = 5
    importance_guided: bool = True  # False: uniform sampling, no importance lines
    model_aware_prompt: bool = True
    task_description: str = "predict the binary outcome"

    def __post_init__(self) -> None:
        if self.iterations < 1 or self.islands < 1 or self.island_size < 1:
            raise ValueError("iterations, islands, and island_size must be >= 1")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.acceptance_mode not in ACCEPTANCE_MODES:
            raise ValueError(f"unknown acceptance_mode {self.acceptance_mode!r}")


def accept_rule(metric_new: float, metric_base: float, beta: float, mode: str) -> bool:
    """require_improvement: clear the baseline by beta; allow_slack: stay
    within beta below it."""
    if mode == "require_improvement":
        return metric_new >= metric_base + beta
    if mode == "allow_slack":
        return metric_new >= metric_base - beta
    raise ValueError(f"unknown acceptance_mode {mode!r}")


@dataclass
class CandidateResult:
    island_index: int
    program_text: str
    rationale: str = ""
    valid: bool = False
    reason: str = ""  # validity reason or error class when invalid
    metric: float | None = None
    fitted: FittedTransformation | None = None
    model: object | None = None


@dataclass
class EngineState:
    """Mutable loop state; the invariant is that ``baseline_metric`` always
    equals the baseline model's validation metric on the current augmented
    data."""

    dataset: Dataset
    split: SplitIndices
    learner_spec: LearnerSpec
    sigma: TransformationSet = field(default_factory=list)
    augmented: Dataset | None = None
    model: object | None = None
    baseline_metric: float = float("nan")
    importance: ImportanceVector | None = None
    memory: MemoryBank = field(default_factory=MemoryBank)

    def groups(self) -> list[FeatureGroup]:
        base = feature_groups(self.dataset.schema)
        generated = [
            FeatureGroup(group_id=f.program.name, member_columns=(f.program.name,), is_temporal=False)
            for f in self.sigma
        ]
        return base + generated


@dataclass
class EngineResult:
    sigma: TransformationSet
    model: object
    trajectory: dict
    test_report: EvalReport
    memory: MemoryBank
    baseline_val_auc: float
    final_val_auc: float
    test_evaluations: int


def _derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def evaluate_candidate(
    state: EngineState,
    proposal: Proposal,
    island_index: int,
    trainer=train_spec,
) -> CandidateResult:
    """Parse, fit, validate, then train and score one candidate.

    Every failure mode is captured as an invalid result; nothing escapes.
    """
    result = CandidateResult(
        island_index=island_index,
        program_text=proposal.program_text,
        rationale=proposal.rationale,
    )
    try:
        program = parse(proposal.program_text)
        program = Program(name=program.name, ast=program.ast, rationale=proposal.rationale)
        fitted = fit(program, state.augmented, state.split.train)
        report = validate(fitted, state.augmented, state.split.train)
        if not report.valid:
            result.reason = report.reason
            return result
        candidate_data = augment(state.augmented, [fitted])
        model = trainer(candidate_data, state.split.train, state.learner_spec)
        scores = predict_scores(model, candidate_data, state.split.val)
        metric = auc(scores, state.dataset.labels[state.split.val])
    except (ParseError, ResolveError, FitError, SchemaError, LearnerError, MetricError) as exc:
        result.reason = f"{type(exc).__name__}: {exc}"
        return result
    result.valid = True
    result.reason = "ok"
    result.metric = float(metric)
    result.fitted = fitted
    result.model = model
    return result


def _importance(state: EngineState, config: EngineConfig, explainer, iteration: int) -> ImportanceVector:
    groups = state.groups()
    if not config.importance_guided:
        return normalize({g.group_id: 0.0 for g in groups})
    return explainer(
        state.model,
        state.augmented,
        state.split.val,
        groups,
        repeats=config.importance_repeats,
        seed=_derived_seed(config.seed, iteration, 1),
    )


def run(
    config: EngineConfig,
    dataset: Dataset,
    split: SplitIndices,
    learner_spec: LearnerSpec,
    explainer=grouped_permutation_importance,
    proposer=None,
    trainer=train_spec,
) -> EngineResult:
    """Execute the full loop and evaluate once on the test split.

    A run in which no island ever yields an accepted candidate is not an
    error: the result simply carries an empty transformation set and the
    baseline model's test metrics.
    """
    from .islands import sample_islands

    proposer = proposer or OfflineProposer()
    labels = dataset.labels
    state = EngineState(dataset=dataset, split=split, learner_spec=learner_spec)
    state.augmented = dataset
    state.model = trainer(dataset, split.train, learner_spec)
    base_scores = predict_scores(state.model, dataset, split.val)
    state.baseline_metric = auc(base_scores, labels[split.val])
    baseline_val_auc = state.baseline_metric
    state.importance = _importance(state, config, explainer, 0)

    trajectory: dict = {"iterations": [], "config_seed": config.seed}
    test_evaluations = 0

    for t in range(1, config.iterations + 1):
        groups = state.groups()
        m = min(config.island_size, len(groups))
        islands = sample_islands(
            state.importance, groups, config.islands, m,
            seed=_derived_seed(config.seed, t, 0), iteration=t,
        )
        candidates: list[CandidateResult] = []
        attempts_log: list[list[dict]] = []
        scratch_entries: list = []
        for k, island in enumerate(islands):
            scratch_texts: set[str] = set()
            island_attempts: list[dict] = []
            chosen: CandidateResult | None = None
            for attempt in range(config.retries):
                try:
                    proposal = proposer.generate(
                        island=island,
                        importance=state.importance,
                        memory=state.memory,
                        learner_kind=learner_spec.kind,
                        schema=state.augmented.schema,
                        task_description=config.task_description,
                        seed=_derived_seed(config.seed, t, k, 2),
                        extra_known=frozenset(scratch_texts),
                    )
                except GenerationError as exc:
                    island_attempts.append(
                        {"attempt": attempt, "generation_error": str(exc)}
                    )
                    continue
                cand = evaluate_candidate(state, proposal, k, trainer=trainer)
                island_attempts.append(
                    {
                        "attempt": attempt,
                        "program": cand.program_text,
                        "valid": cand.valid,
                        "reason": cand.reason,
                        "metric": cand.metric,
                    }
                )
                if cand.valid:
                    chosen = cand
                    break
                scratch_texts.add(cand.program_text)
                scratch_entries.append(
                    (cand.program_text, "invalid", None, cand.reason)
                )
            attempts_log.append(island_attempts)
            if chosen is not None:
                candidates.append(chosen)

        record = {
            "iteration": t,
            "islands": [
                {"island_id": list(i.island_id), "groups": [g.group_id for g in i.groups]}
                for i in islands
            ],
            "attempts": attempts_log,
            "baseline_before": state.baseline_metric,
            "winner": None,
            "accepted": False,
        }

        if candidates:
            winner = max(candidates, key=lambda c: (c.metric, -c.island_index))
            previous = state.baseline_metric
            accepted = accept_rule(winner.metric, previous, config.beta, config.acceptance_mode)
            record["winner"] = {
                "island_index": winner.island_index,
                "program": winner.program_text,
                "metric": winner.metric,
            }
            record["accepted"] = accepted
            if accepted:
                fitted = replace(
                    winner.fitted,
                    provenance={
                        "iteration": t,
                        "island": winner.island_index,
                        "proposer": getattr(proposer, "name", "unknown"),
                    },
                )
                state.sigma.append(fitted)
                state.augmented = augment(state.augmented, [fitted])
                state.model = winner.model
                state.baseline_metric = float(winner.metric)
                state.memory.record_accepted(
                    winner.program_text,
                    fitted.program.name,
                    fitted.program.rationale,
                    gain=float(winner.metric - previous),
                )
                for cand in candidates:
                    if cand is not winner:
                        state.memory.record_rejected(
                            cand.program_text,
                            "no_improvement",
                            delta=float(cand.metric - previous),
                        )
                state.importance = _importance(state, config, explainer, t)
            else:
                for cand in candidates:
                    state.memory.record_rejected(
                        cand.program_text,
                        "no_improvement",
                        delta=float(cand.metric - previous),
                    )
        for text, reason, delta, detail in scratch_entries:
            state.memory.record_rejected(text, reason, delta=delta, detail=detail)
        record["baseline_after"] = state.baseline_metric
        record["importance"] = state.importance.to_dict()
        trajectory["iterations"].append(record)

    val_scores = predict_scores(state.model, state.augmented, split.val)
    threshold = youden_threshold(val_scores, labels[split.val])
    test_scores = predict_scores(state.model, state.augmented, split.test)
    test_evaluations += 1
    test_report = EvalReport(
        auc=auc(test_scores, labels[split.test]),
        f1=f1_at(test_scores, labels[split.test], threshold),
        threshold=float(threshold),
    )
    return EngineResult(
        sigma=state.sigma,
        model=state.model,
        trajectory=trajectory,
        test_report=test_report,
        memory=state.memory,
        baseline_val_auc=float(baseline_val_auc),
        final_val_auc=float(state.baseline_metric),
        test_evaluations=test_evaluations,
    )


def export_transformations(result: EngineResult, path: str) -> None:
    """Transfer artifact: program texts and provenance, never fitted stats."""
    save_transformations(path, result.sigma, include_stats=False)


def import_transformations(
    path: str,
    dataset: Dataset,
    train_indices: np.ndarray,
    name_map: dict[str, str] | None = None,
) -> TransformationSet:
    """Re-parse exported programs, remap references, re-fit on new training rows."""
    name_map = name_map or {}
    programs = []
    for program, provenance in load_transformation_programs(path):
        renamed = rename_references(program, name_map)
        programs.append(renamed)
    return fit_all(programs, dataset, np.asarray(train_indices, dtype=np.intp))
