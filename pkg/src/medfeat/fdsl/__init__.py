"""Restricted feature-transformation language: parse, fit, apply, validate."""

from __future__ import annotations

import json

import numpy as np

from ..datamodel import Dataset
from .evaluate import (
    EXCESS_MISSING_THRESHOLD,
    FitError,
    FittedTransformation,
    ResolveError,
    TransformationSet,
    ValidityReport,
    apply,
    fit,
    resolve,
    validate,
)
from .nodes import (
    Binary,
    BoolOp,
    Coalesce,
    Col,
    Compare,
    GroupAgg,
    IfExpr,
    IsMissing,
    Literal,
    NotOp,
    Program,
    Stat,
    StringLit,
    Unary,
    referenced_columns,
    referenced_groups,
    render,
    walk,
)
from .parser import ParseError, parse

TRANSFORMATIONS_FORMAT_VERSION = 1


def save_transformations(
    path: str, sigma: TransformationSet, include_stats: bool = True
) -> None:
    """Persist a transformation set as a JSON document.

    Each entry carries the program text, name, rationale, provenance, and
    (optionally) the frozen statistics. Written deterministically so equal
    sets produce byte-identical files.
    """
    entries = []
    for fitted in sigma:
        entries.append(
            {
                "name": fitted.program.name,
                "rationale": fitted.program.rationale,
                "program": render(fitted.program),
                "fitted_stats": dict(fitted.fitted_stats) if include_stats else None,
                "provenance": fitted.provenance,
            }
        )
    doc = {"format_version": TRANSFORMATIONS_FORMAT_VERSION, "transformations": entries}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_transformation_programs(path: str) -> list[tuple[Program, dict | None]]:
    """Read back (program, provenance) pairs; statistics are never reused."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    version = doc.get("format_version")
    if version != TRANSFORMATIONS_FORMAT_VERSION:
        raise ValueError(f"unsupported transformations format_version {version!r}")
    out = []
    for entry in doc["transformations"]:
        program = parse(entry["program"])
        program = Program(
            name=program.name, ast=program.ast, rationale=entry.get("rationale", "")
        )
        out.append((program, entry.get("provenance")))
    return out


def fit_all(
    programs: list[Program], dataset: Dataset, train_indices: np.ndarray
) -> TransformationSet:
    """Fit programs in order against a progressively augmented dataset.

    Later programs may reference the output columns of earlier ones.
    """
    from ..datamodel import augment

    sigma: TransformationSet = []
    current = dataset
    for program in programs:
        fitted = fit(program, current, train_indices)
        sigma.append(fitted)
        current = augment(current, [fitted])
    return sigma
