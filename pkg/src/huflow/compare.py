"""Run matrices: the same cases driven by several interface-flux schemes.

The solver-efficiency comparisons in this package all have the same shape:
fix a set of cases, run each one under each scheme with an identical time
schedule, and tabulate converged and wasted Newton iterations side by side.
Aborted runs stay in the matrix (marked as such) so a scheme that fails a
case is reported rather than silently dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

from .cases import CaseSpec, builtin_case
from .solver import RunReport, run_schedule


def resolve_case(case: CaseSpec | str) -> CaseSpec:
    return builtin_case(case) if isinstance(case, str) else case


def run_case(case: CaseSpec | str, scheme: str,
             alpha: float | None = None) -> RunReport:
    """Run one case under one scheme label and return its report."""
    spec = resolve_case(case)
    problem, state0, dts = spec.build(scheme, alpha=alpha)
    return run_schedule(problem, state0, dts, label=f"{spec.name}:{scheme}")


@dataclass(frozen=True)
class ComparisonMatrix:
    """Results of a cases x schemes sweep, keyed by (case name, scheme)."""

    cases: tuple[str, ...]
    schemes: tuple[str, ...]
    runs: dict[tuple[str, str], RunReport]

    def report(self, case: str, scheme: str) -> RunReport:
        return self.runs[(case, scheme)]

    def rows(self) -> list[dict]:
        """Flat per-run summary rows, one per (case, scheme)."""
        out = []
        for case in self.cases:
            for scheme in self.schemes:
                r = self.runs[(case, scheme)]
                out.append({
                    "case": case,
                    "scheme": scheme,
                    "iterations": r.iterations,
                    "wasted": r.wasted,
                    "total_iterations": r.total_iterations,
                    "cuts": r.cuts,
                    "steps": sum(1 for s in r.steps if s.accepted),
                    "aborted": r.aborted,
                    "final_time": r.final_time,
                    "conservation_defect": max(
                        abs(float(d)) for d in r.conservation_defect
                    ),
                })
        return out

    def cumulative_iterations(self, case: str, scheme: str) -> list[tuple[float, int]]:
        """(elapsed time, cumulative Newton iterations) after each attempt.

        Failed attempts contribute their wasted iterations at the time they
        were abandoned, so the series exposes time-step cutting as extra
        slope rather than hiding it.
        """
        r = self.runs[(case, scheme)]
        total = 0
        series = [(0.0, 0)]
        for step in r.steps:
            total += step.report.iterations
            t = step.time_start + (step.dt if step.accepted else 0.0)
            series.append((t, total))
        return series


def run_matrix(cases, schemes, alpha: float | None = None) -> ComparisonMatrix:
    """Run every case under every scheme; aborted runs are kept, not raised."""
    specs = [resolve_case(c) for c in cases]
    names = tuple(s.name for s in specs)
    labels = tuple(schemes)
    runs: dict[tuple[str, str], RunReport] = {}
    for spec in specs:
        for scheme in labels:
            runs[(spec.name, scheme)] = run_case(spec, scheme, alpha=alpha)
    return ComparisonMatrix(cases=names, schemes=labels, runs=runs)
