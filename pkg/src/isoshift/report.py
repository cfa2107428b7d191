"""Named numerical checks and report assembly.

Every theorem-level assertion in the package is recorded as a ``Check``:
a stable dotted name, the measured residual, the tolerance it was held to,
the validity window it was asserted on, and optionally a rank with its
allowed bound.  A check passes when the residual is within tolerance and,
if a rank bound is present, the rank respects it.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field


@dataclass(frozen=True)
class Check:
    name: str
    residual: float
    tol: float
    window: str = "full"
    rank: int | None = None
    rank_bound: int | None = None
    detail: str = ""

    @property
    def passed(self) -> bool:
        ok = self.residual <= self.tol
        if self.rank is not None and self.rank_bound is not None:
            ok = ok and self.rank <= self.rank_bound
        return bool(ok)

    def to_json(self) -> dict:
        out = {
            "name": self.name,
            "residual": float(self.residual),
            "tol": float(self.tol),
            "window": self.window,
            "pass": self.passed,
        }
        if self.rank is not None:
            out["rank"] = int(self.rank)
        if self.rank_bound is not None:
            out["rank_bound"] = int(self.rank_bound)
        if self.detail:
            out["detail"] = self.detail
        return out


@dataclass
class VerificationReport:
    checks: list[Check] = field(default_factory=list)
    environment: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, check: Check) -> None:
        self.checks.append(check)

    def extend(self, checks) -> None:
        self.checks.extend(checks)

    def merge(self, other: "VerificationReport", prefix: str = "") -> None:
        for c in other.checks:
            if prefix:
                c = Check(f"{prefix}.{c.name}", c.residual, c.tol, c.window,
                          c.rank, c.rank_bound, c.detail)
            self.checks.append(c)

    def get(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def select(self, prefix: str) -> list[Check]:
        return [c for c in self.checks if c.name.startswith(prefix)]

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def max_residual(self, prefix: str = "") -> float:
        vals = [c.residual for c in self.checks if c.name.startswith(prefix)]
        return max(vals) if vals else 0.0

    def to_json(self) -> dict:
        return {
            "checks": [c.to_json() for c in self.checks],
            "environment": dict(self.environment),
            "pass": self.passed,
        }

    def summary_lines(self) -> list[str]:
        lines = []
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            rank = f" rank={c.rank}<=" + str(c.rank_bound) if c.rank_bound is not None else ""
            lines.append(f"[{status}] {c.name}: residual={c.residual:.3e} tol={c.tol:.1e}"
                         f"{rank} window={c.window}")
        return lines


def thread_cap() -> int:
    """Worker cap for independent checks, from ISOSHIFT_THREADS (default 1)."""
    raw = os.environ.get("ISOSHIFT_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def evaluate_checks(thunks, workers: int = 1) -> list[Check]:
    """Run independent check thunks, preserving order in the output.

    Each thunk returns a Check or a list of Checks; results are flattened in
    the order the thunks were given, so reports are deterministic regardless
    of the worker count.
    """
    thunks = list(thunks)
    if workers <= 1 or len(thunks) <= 1:
        results = [t() for t in thunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda t: t(), thunks))
    out: list[Check] = []
    for r in results:
        if isinstance(r, Check):
            out.append(r)
        else:
            out.extend(r)
    return out
