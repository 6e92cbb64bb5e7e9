"""Append-only ledger of accepted and rejected proposals across a run."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

DEFAULT_RENDER_CAP = 10

REJECT_REASONS = ("invalid", "no_improvement")


@dataclass(frozen=True)
class AcceptedEntry:
    program_text: str
    name: str
    rationale: str
    gain: float


@dataclass(frozen=True)
class RejectedEntry:
    program_text: str
    reason: str  # "invalid" | "no_improvement"
    delta: float | None = None  # metric minus baseline, when evaluated
    detail: str = ""

    def __post_init__(self) -> None:
        if self.reason not in REJECT_REASONS:
            raise ValueError(f"unknown rejection reason {self.reason!r}")


@dataclass
class MemoryBank:
    accepted: list[AcceptedEntry] = field(default_factory=list)
    rejected: list[RejectedEntry] = field(default_factory=list)

    def record_accepted(self, program_text: str, name: str, rationale: str, gain: float) -> None:
        self.accepted.append(AcceptedEntry(program_text, name, rationale, gain))

    def record_rejected(
        self, program_text: str, reason: str, delta: float | None = None, detail: str = ""
    ) -> None:
        self.rejected.append(RejectedEntry(program_text, reason, delta, detail))

    def known_texts(self) -> set[str]:
        return {e.program_text for e in self.accepted} | {
            e.program_text for e in self.rejected
        }

    def rejected_texts(self) -> set[str]:
        return {e.program_text for e in self.rejected}

    # -- prompt rendering --------------------------------------------------

    def render_accepted(self, cap: int = DEFAULT_RENDER_CAP) -> str:
        """Newest first, names and rationales only; never fitted statistics."""
        entries = self.accepted[::-1][:cap]
        if not entries:
            return "(none yet)"
        return "\n".join(
            f"- {e.name}: {e.rationale} (validation gain {e.gain:+.4f})" for e in entries
        )

    def render_rejected(self, cap: int = DEFAULT_RENDER_CAP) -> str:
        entries = self.rejected[::-1][:cap]
        if not entries:
            return "(none yet)"
        lines = []
        for e in entries:
            label = e.program_text.splitlines()[0] if e.program_text else "(no program)"
            note = e.reason if not e.detail else f"{e.reason}: {e.detail}"
            lines.append(f"- {label} [{note}]")
        return "\n".join(lines)

    # -- persistence ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "accepted": [
                {
                    "program_text": e.program_text,
                    "name": e.name,
                    "rationale": e.rationale,
                    "gain": e.gain,
                }
                for e in self.accepted
            ],
            "rejected": [
                {
                    "program_text": e.program_text,
                    "reason": e.reason,
                    "delta": e.delta,
                    "detail": e.detail,
                }
                for e in self.rejected
            ],
        }

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @staticmethod
    def from_dict(doc: dict) -> "MemoryBank":
        bank = MemoryBank()
        for e in doc.get("accepted", []):
            bank.accepted.append(AcceptedEntry(**e))
        for e in doc.get("rejected", []):
            bank.rejected.append(RejectedEntry(**e))
        return bank

    @staticmethod
    def load(path: str) -> "MemoryBank":
        with open(path, encoding="utf-8") as fh:
            return MemoryBank.from_dict(json.load(fh))
