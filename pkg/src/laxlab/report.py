"""Machine-readable diagnostics: one record per verified claim."""

from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass
class ClaimResult:
    """One measured claim.

    kind "bound": pass iff measured <= target; "margin": pass iff
    measured >= target; "value": pass iff |measured - target| <= tolerance.
    provenance records what the target is (an identity between computed
    fields, a measured bound, or a configured tolerance).
    """

    claim: str
    measured: float
    target: float
    tolerance: float
    kind: str = "bound"
    provenance: str = "configured-tolerance"
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        if self.kind == "bound":
            return self.measured <= self.target
        if self.kind == "margin":
            return self.measured >= self.target
        if self.kind == "value":
            return abs(self.measured - self.target) <= self.tolerance
        raise ValueError(f"unknown claim kind {self.kind!r}")

    def as_dict(self) -> dict:
        return {
            "claim": self.claim,
            "measured": self.measured,
            "target": self.target,
            "tolerance": self.tolerance,
            "kind": self.kind,
            "provenance": self.provenance,
            "passed": self.passed,
            "details": self.details,
        }


@dataclass
class DiagnosticsReport:
    name: str
    claims: list[ClaimResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.claims)

    def add(self, claim: ClaimResult) -> ClaimResult:
        self.claims.append(claim)
        return claim

    def extend(self, claims) -> None:
        self.claims.extend(claims)

    def to_json(self) -> str:
        return json.dumps(
            {
                "report": self.name,
                "passed": self.passed,
                "claims": [c.as_dict() for c in self.claims],
            },
            indent=1,
            sort_keys=True,
        )

    def summary_lines(self) -> list[str]:
        out = []
        for c in self.claims:
            status = "pass" if c.passed else "FAIL"
            rel = {"bound": "<=", "margin": ">=", "value": "~"}[c.kind]
            out.append(
                f"[{status}] {c.claim}: measured {c.measured:.6g} {rel} target {c.target:.6g}"
            )
        return out
