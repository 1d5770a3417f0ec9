"""Evaluation measurements: ontology stats, triple counts, property coverage, failure accounting."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

from .ontology import Ontology, OntologyStats, Severity, ontology_stats
from .rdf import RDF_TYPE, Graph


@dataclass(frozen=True)
class Coverage:
    instantiated: int
    total: int

    @property
    def defined(self) -> bool:
        return self.total > 0

    @property
    def ratio(self) -> float:
        return self.instantiated / self.total if self.total else 0.0


def property_coverage(kg: Graph, o: Ontology) -> Coverage:
    """Share of ontology properties used as a predicate at least once in ``kg``."""
    used = kg.predicates() - {RDF_TYPE}
    return Coverage(sum(1 for p in o.properties if p in used), len(o.properties))


def format_percent(numerator: int, denominator: int) -> str:
    """Exact ratio as a percentage, rounded half-up to one decimal; "n/a" for 0/0."""
    if denominator == 0:
        return "n/a"
    tenths = math.floor(Fraction(1000 * numerator, denominator) + Fraction(1, 2))
    whole, frac = divmod(tenths, 10)
    return f"{whole}.{frac}%"


@dataclass(frozen=True)
class RunMetrics:
    products_total: int = 0
    products_succeeded: int = 0
    products_failed: int = 0
    failure_rate: float = 0.0
    failure_rate_defined: bool = False
    triples_total: int = 0
    properties_total: int = 0
    properties_instantiated: int = 0
    property_coverage: float = 0.0
    property_coverage_defined: bool = False
    ontology_stats: dict = field(default_factory=dict)
    conformance_errors: int = 0
    conformance_warnings: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunMetrics":
        return cls(**d)

    @property
    def failure_rate_text(self) -> str:
        return format_percent(self.products_failed, self.products_total)

    @property
    def coverage_text(self) -> str:
        return format_percent(self.properties_instantiated, self.properties_total)


def run_summary(results: Sequence, kg: Graph, o: Ontology) -> RunMetrics:
    total = len(results)
    succeeded = sum(1 for r in results if r.succeeded)
    failed = total - succeeded
    cov = property_coverage(kg, o)
    errors = warnings = 0
    for r in results:
        for issue in r.conformance:
            if issue.severity is Severity.ERROR:
                errors += 1
            else:
                warnings += 1
    stats: OntologyStats = ontology_stats(o)
    return RunMetrics(
        products_total=total,
        products_succeeded=succeeded,
        products_failed=failed,
        failure_rate=failed / total if total else 0.0,
        failure_rate_defined=total > 0,
        triples_total=len(kg),
        properties_total=cov.total,
        properties_instantiated=cov.instantiated,
        property_coverage=cov.ratio,
        property_coverage_defined=cov.defined,
        ontology_stats=stats.to_dict(),
        conformance_errors=errors,
        conformance_warnings=warnings,
    )


def render_report(m: RunMetrics, format: str = "text") -> str:
    if format == "json":
        return json.dumps(m.to_dict(), indent=2, sort_keys=True) + "\n"
    if format != "text":
        raise ValueError(f"unknown report format {format!r}")
    s = m.ontology_stats
    lines = [
        f"products: {m.products_succeeded}/{m.products_total} succeeded",
        f"failed: {m.products_failed} (failure rate: {m.failure_rate_text})",
        f"triples: {m.triples_total}",
        "ontology: {} classes, {} properties ({} datatype, {} object)".format(
            s.get("classes", 0), s.get("properties", 0), s.get("datatype_properties", 0), s.get("object_properties", 0)
        ),
        f"coverage: {m.coverage_text} ({m.properties_instantiated}/{m.properties_total} properties instantiated)",
        f"conformance: {m.conformance_errors} errors, {m.conformance_warnings} warnings",
    ]
    return "\n".join(lines) + "\n"
