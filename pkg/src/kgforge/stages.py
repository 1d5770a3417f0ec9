"""The three pipeline stages: ontology expansion, refinement, and KG population."""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

from .agents import AgentError, AgentTimeout, Gateway
from .corpus import Corpus, ProductRecord, UnknownCategory, sample_products
from .ontology import (
    NEAR_DUPLICATE_THRESHOLD,
    DiffReport,
    MergeReport,
    Ontology,
    OntologyIssue,
    PropertyKind,
    Severity,
    StructureError,
    is_external,
    jaccard,
    name_tokens,
    ontology_diff,
    ontology_from_graph,
    ontology_merge,
    ontology_to_graph,
    validate_ontology,
)
from .rdf import (
    RDF_LANGSTRING,
    RDF_TYPE,
    RDFS,
    XSD_DECIMAL,
    XSD_INTEGER,
    XSD_STRING,
    Graph,
    Iri,
    Literal,
    Triple,
    TurtleSyntaxError,
    parse_turtle,
    serialize_turtle,
    triple_sort_key,
)

log = logging.getLogger(__name__)

_FENCE = re.compile(r"```([^\n`]*)\n(.*?)```", re.S)


class StageErrorKind(str, enum.Enum):
    INVALID_RDF = "InvalidRDF"
    EMPTY_ONTOLOGY = "EmptyOntology"
    AGENT_ERROR = "AgentError"


class StageError(RuntimeError):
    def __init__(self, kind: StageErrorKind, message: str, attempts: int = 0):
        super().__init__(f"{kind.value}: {message}")
        self.kind = kind
        self.message = message
        self.attempts = attempts


class _Unusable(ValueError):
    """Agent output parsed but cannot be accepted; message is fed back on retry."""

    def __init__(self, message: str, kind: StageErrorKind = StageErrorKind.INVALID_RDF):
        super().__init__(message)
        self.kind = kind


def extract_turtle(text: str) -> str:
    """First fenced code block if there is one, else the whole response."""
    m = _FENCE.search(text)
    return m.group(2) if m else text


def extract_mapping(text: str) -> dict:
    """The JSON mapping block of a refinement response, or {} when absent.

    The block is the first fenced block tagged ``json``/``mapping``, else the second fenced block.
    """
    blocks = _FENCE.findall(text)
    chosen = next((body for info, body in blocks if info.strip().lower() in ("json", "mapping")), None)
    if chosen is None and len(blocks) > 1:
        chosen = blocks[1][1]
    if chosen is None:
        return {}
    try:
        data = json.loads(chosen)
    except json.JSONDecodeError:
        log.warning("ignoring unparseable refinement mapping block")
        return {}
    if not isinstance(data, dict):
        return {}
    out = {}
    for key, value in data.items():
        targets = [value] if isinstance(value, str) else value
        if isinstance(targets, list) and all(isinstance(t, str) for t in targets):
            out[str(key)] = list(targets)
    return out


def _describe_batch(batch: Sequence[ProductRecord]) -> str:
    return "\n\n".join(f"### Product {p.id}\n{p.description.strip()}" for p in batch)


def serialize_ontology(o: Ontology) -> str:
    return serialize_turtle(ontology_to_graph(o))


def _errors(issues: list[OntologyIssue]) -> list[OntologyIssue]:
    return [i for i in issues if i.severity is Severity.ERROR]


def _ask_for_ontology(
    gw: Gateway,
    template_id: str,
    variables: dict[str, str],
    max_attempts: int,
    accept: Callable[[Ontology, list[OntologyIssue]], None],
) -> tuple[Ontology, list[OntologyIssue], str, int]:
    """Invoke the agent until its Turtle lifts to an acceptable ontology."""
    feedback = None
    last = _Unusable("no attempt made")
    for attempt in range(1, max_attempts + 1):
        req = gw.request(template_id, variables, feedback)
        try:
            resp = gw.invoke(req)
        except AgentError as exc:
            raise StageError(StageErrorKind.AGENT_ERROR, str(exc), attempt) from exc
        try:
            graph = parse_turtle(extract_turtle(resp.text))
            onto, issues = ontology_from_graph(graph)
            accept(onto, issues)
            return onto, issues, resp.text, attempt
        except TurtleSyntaxError as exc:
            last = _Unusable(f"Turtle syntax error at {exc}")
        except StructureError as exc:
            last = _Unusable(str(exc))
        except _Unusable as exc:
            last = exc
        feedback = str(last)
        log.info("%s attempt %d rejected: %s", template_id, attempt, feedback)
    raise StageError(last.kind, str(last), max_attempts)


def _reject_errors(issues: list[OntologyIssue]) -> None:
    errors = _errors(issues)
    if errors:
        raise _Unusable("; ".join(f"{i.subject.value}: {i.message}" for i in errors))


def _with_namespace(o: Ontology, namespace: Optional[str]) -> Ontology:
    if o.namespace is None and namespace:
        return replace(o, namespace=namespace)
    return o


# ------------------------------------------------------------------ expansion


def bootstrap_ontology(
    batch: Sequence[ProductRecord], gw: Gateway, namespace: str, max_attempts: int = 3
) -> tuple[Ontology, list[OntologyIssue]]:
    if not batch:
        raise ValueError("bootstrap needs at least one product description")

    def accept(onto: Ontology, issues: list[OntologyIssue]) -> None:
        if not onto.classes:
            raise _Unusable("the ontology declares no classes", StageErrorKind.EMPTY_ONTOLOGY)
        _reject_errors(issues)

    variables = {"namespace": namespace, "descriptions": _describe_batch(batch)}
    onto, issues, _, _ = _ask_for_ontology(gw, "bootstrap", variables, max_attempts, accept)
    return _with_namespace(onto, namespace), issues


def expand_once(
    current: Ontology, batch: Sequence[ProductRecord], gw: Gateway, namespace: str, max_attempts: int = 3
) -> tuple[Ontology, MergeReport]:
    """One expansion step. Raises StageError if no usable delta came back."""
    baseline = {(i.code, i.subject, i.message) for i in _errors(validate_ontology(current))}
    merged: dict[str, tuple[Ontology, MergeReport]] = {}

    def accept(delta: Ontology, _issues: list[OntologyIssue]) -> None:
        result, report = ontology_merge(current, delta)
        fresh = [i for i in _errors(validate_ontology(result)) if (i.code, i.subject, i.message) not in baseline]
        if fresh:
            raise _Unusable("; ".join(f"{i.subject.value}: {i.message}" for i in fresh))
        merged["result"] = (result, report)

    variables = {
        "namespace": namespace,
        "ontology": serialize_ontology(current),
        "descriptions": _describe_batch(batch),
    }
    _ask_for_ontology(gw, "expand", variables, max_attempts, accept)
    return merged["result"]


@dataclass(frozen=True)
class ExpansionConfig:
    batch_size: int = 5
    sample_budget: int = 30
    plateau_window: int = 2
    plateau_threshold: int = 2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.sample_budget < self.batch_size:
            raise ValueError("sample_budget must be >= batch_size")
        if self.plateau_window < 1:
            raise ValueError("plateau_window must be >= 1")

    @property
    def max_iterations(self) -> int:
        return math.ceil(self.sample_budget / self.batch_size)


@dataclass
class IterationRecord:
    index: int
    stage: str
    batch_ids: list[str]
    new_classes: int
    new_properties: int
    merge_report: MergeReport
    error: Optional[str] = None

    @property
    def new_elements(self) -> int:
        return self.new_classes + self.new_properties

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "stage": self.stage,
            "batch_ids": list(self.batch_ids),
            "new_classes": self.new_classes,
            "new_properties": self.new_properties,
            "merge_report": self.merge_report.to_dict(),
            "error": self.error,
        }


@dataclass
class ExpansionTrace:
    category: str = ""
    iterations: list[IterationRecord] = field(default_factory=list)
    stop_reason: str = ""

    def to_dict(self) -> dict:
        return {
            "category": self.category,
            "stop_reason": self.stop_reason,
            "iterations": [it.to_dict() for it in self.iterations],
        }


def plateau_reached(yields: Sequence[int], window: int, threshold: int) -> bool:
    """True when each of the last ``window`` yields is below ``threshold``."""
    if len(yields) < window:
        return False
    return all(y < threshold for y in yields[-window:])


def expansion_loop(
    c: Corpus,
    category: str,
    cfg: ExpansionConfig,
    gw: Gateway,
    namespace: str,
    max_attempts: int = 3,
    initial: Optional[Ontology] = None,
) -> tuple[Ontology, ExpansionTrace]:
    """Bootstrap, then expand on fresh batches until the budget or a yield plateau.

    With ``initial`` the first batch is an expansion step instead of a bootstrap.
    Failed expansion steps are recorded and skipped; they do not count toward the plateau.
    """
    if category not in c.categories:
        raise UnknownCategory(category)
    sample = sample_products(c, category, cfg.sample_budget, cfg.seed)
    batches = [sample[i : i + cfg.batch_size] for i in range(0, len(sample), cfg.batch_size)]

    trace = ExpansionTrace(category)
    onto = initial
    yields: list[int] = []
    for index, batch in enumerate(batches, start=1):
        ids = [p.id for p in batch]
        if onto is None:
            onto, _ = bootstrap_ontology(batch, gw, namespace, max_attempts)
            report = MergeReport(
                added_classes=sorted(onto.classes, key=lambda i: i.value),
                added_properties=sorted(onto.properties, key=lambda i: i.value),
            )
            record = IterationRecord(index, "bootstrap", ids, len(onto.classes), len(onto.properties), report)
        else:
            try:
                onto, report = expand_once(onto, batch, gw, namespace, max_attempts)
            except StageError as exc:
                log.warning("expansion iteration %d failed: %s", index, exc)
                trace.iterations.append(IterationRecord(index, "expand", ids, 0, 0, MergeReport(), str(exc)))
                continue
            record = IterationRecord(
                index, "expand", ids, len(report.added_classes), len(report.added_properties), report
            )
        trace.iterations.append(record)
        yields.append(record.new_elements)
        if plateau_reached(yields, cfg.plateau_window, cfg.plateau_threshold):
            trace.stop_reason = "plateau"
            break
    else:
        trace.stop_reason = "budget" if len(sample) >= cfg.sample_budget else "exhausted"
    assert onto is not None
    return onto, trace


# ------------------------------------------------------------------ refinement


@dataclass
class RefinementReport:
    diff: DiffReport
    rename_map: dict[Iri, list[Iri]]
    unmapped_removals: list[Iri]
    accepted: bool
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "error": self.error,
            "diff": self.diff.to_dict(),
            "rename_map": {k.value: [v.value for v in vs] for k, vs in sorted(self.rename_map.items(), key=lambda kv: kv[0].value)},
            "unmapped_removals": [i.value for i in self.unmapped_removals],
        }


def _expand_name(name: str, prefixes: dict[str, str]) -> Optional[Iri]:
    name = name.strip().strip("<>")
    prefix, sep, local = name.partition(":")
    if sep and prefix in prefixes and not local.startswith("//"):
        name = prefixes[prefix] + local
    try:
        return Iri(name)
    except ValueError:
        return None


def _element_tokens(o: Ontology, iri: Iri) -> frozenset[str]:
    element = o.element(iri)
    label = getattr(element, "label", None)
    return name_tokens(label) if label else name_tokens(iri.local_name)


def reconcile(
    old: Ontology,
    new: Ontology,
    mapping: dict[str, list[str]],
    threshold: float = NEAR_DUPLICATE_THRESHOLD,
) -> tuple[DiffReport, dict[Iri, list[Iri]], list[Iri]]:
    """Account for every removed element: agent mapping first, then name similarity."""
    diff = ontology_diff(old, new)
    prefixes = {**old.prefixes, **new.prefixes}
    declared = set(new.classes) | set(new.properties)
    removed = set(diff.removed)

    rename_map: dict[Iri, list[Iri]] = {}
    for key, values in mapping.items():
        source = _expand_name(key, prefixes)
        if source not in removed:
            continue
        targets = sorted({t for t in (_expand_name(v, prefixes) for v in values) if t in declared}, key=lambda i: i.value)
        if targets:
            rename_map[source] = targets

    unmapped = []
    for iri in diff.removed:
        if iri in rename_map:
            continue
        pool = diff.added_classes if iri in old.classes else diff.added_properties
        tokens = _element_tokens(old, iri)
        candidates = [a for a in pool if jaccard(tokens, _element_tokens(new, a)) >= threshold]
        if candidates:
            rename_map[iri] = candidates
        else:
            unmapped.append(iri)
    return diff, rename_map, unmapped


def refine_ontology(
    o: Ontology,
    gw: Gateway,
    allow_drops: bool = False,
    max_attempts: int = 3,
    namespace: Optional[str] = None,
) -> tuple[Ontology, RefinementReport]:
    """Zero-shot refinement. A rejected or failed refinement returns ``o`` itself."""
    namespace = namespace or o.namespace or ""
    try:
        refined, _, text, _ = _ask_for_ontology(
            gw,
            "refine",
            {"namespace": namespace, "ontology": serialize_ontology(o)},
            max_attempts,
            lambda onto, issues: _reject_errors(issues),
        )
    except StageError as exc:
        return o, RefinementReport(ontology_diff(o, o), {}, [], accepted=False, error=str(exc))

    refined = _with_namespace(refined, o.namespace)
    if not refined.prefixes:
        refined = replace(refined, prefixes=dict(o.prefixes))
    diff, rename_map, unmapped = reconcile(o, refined, extract_mapping(text))
    accepted = allow_drops or not unmapped
    report = RefinementReport(diff, rename_map, unmapped, accepted)
    return (refined if accepted else o), report


# ------------------------------------------------------------------ population


class ConformanceCode(str, enum.Enum):
    UNKNOWN_PREDICATE = "UnknownPredicate"
    DOMAIN_VIOLATION = "DomainViolation"
    RANGE_VIOLATION = "RangeViolation"
    DATATYPE_MISMATCH = "DatatypeMismatch"
    UNTYPED_SUBJECT = "UntypedSubject"


class ConformanceMode(str, enum.Enum):
    LENIENT = "lenient"
    STRICT = "strict"


@dataclass(frozen=True)
class ConformanceIssue:
    triple: Triple
    code: ConformanceCode
    severity: Severity
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "triple": triple_to_text(self.triple),
            "code": self.code.value,
            "severity": self.severity.value,
            "message": self.message,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConformanceIssue":
        return cls(triple_from_text(d["triple"]), ConformanceCode(d["code"]), Severity(d["severity"]), d.get("message", ""))


def triple_to_text(t: Triple) -> str:
    return f"{t.subject.n3()} {t.predicate.n3()} {t.object.n3()} ."


def triple_from_text(text: str) -> Triple:
    (t,) = parse_turtle(text)
    return t


def _datatype_compatible(actual: Iri, declared: Iri) -> bool:
    if actual == declared or declared == Iri(RDFS + "Literal"):
        return True
    if actual == XSD_INTEGER and declared == XSD_DECIMAL:
        return True
    return actual == RDF_LANGSTRING and declared == XSD_STRING


def subject_types_of(ts) -> dict:
    types: dict = {}
    for t in ts:
        if t.predicate == RDF_TYPE and isinstance(t.object, Iri):
            types.setdefault(t.subject, set()).add(t.object)
    return types


def validate_triples(
    ts: Sequence[Triple],
    o: Ontology,
    subject_types: Optional[dict] = None,
    mode: ConformanceMode = ConformanceMode.LENIENT,
) -> list[ConformanceIssue]:
    """Check instance triples against the ontology's declarations."""
    mode = ConformanceMode(mode)
    types = subject_types_of(ts) if subject_types is None else subject_types
    hard = Severity.ERROR if mode is ConformanceMode.STRICT else Severity.WARNING
    issues = []

    def conforms(node, cls: Iri) -> Optional[bool]:
        node_types = types.get(node)
        if not node_types:
            return None
        return any(cls in o.ancestors(t) for t in node_types)

    for t in sorted(ts, key=triple_sort_key):
        if t.predicate == RDF_TYPE:
            continue
        prop = o.properties.get(t.predicate)
        if prop is None:
            issues.append(ConformanceIssue(t, ConformanceCode.UNKNOWN_PREDICATE, hard, "predicate not declared in the ontology"))
            continue
        if prop.domain is not None and not is_external(prop.domain):
            ok = conforms(t.subject, prop.domain)
            if ok is None:
                issues.append(ConformanceIssue(t, ConformanceCode.UNTYPED_SUBJECT, Severity.WARNING, "subject has no rdf:type"))
            elif not ok:
                issues.append(
                    ConformanceIssue(t, ConformanceCode.DOMAIN_VIOLATION, hard, f"subject is not a {prop.domain.local_name}")
                )
        obj = t.object
        if prop.kind is PropertyKind.DATATYPE:
            if not isinstance(obj, Literal):
                issues.append(ConformanceIssue(t, ConformanceCode.RANGE_VIOLATION, hard, "datatype property with a non-literal value"))
            elif prop.range is not None and not _datatype_compatible(obj.datatype, prop.range):
                issues.append(
                    ConformanceIssue(
                        t, ConformanceCode.DATATYPE_MISMATCH, hard, f"expected {prop.range.local_name}, got {obj.datatype.local_name}"
                    )
                )
        else:
            if isinstance(obj, Literal):
                issues.append(ConformanceIssue(t, ConformanceCode.RANGE_VIOLATION, hard, "object property with a literal value"))
            elif prop.range is not None and not is_external(prop.range) and conforms(obj, prop.range) is False:
                issues.append(ConformanceIssue(t, ConformanceCode.RANGE_VIOLATION, hard, f"object is not a {prop.range.local_name}"))
    return issues


_SLUG_STRIP = re.compile(r"[^a-z0-9]+")


def mint_subject_iri(p: ProductRecord, base: str) -> Iri:
    if not base.endswith(("/", "#")):
        raise ValueError(f"instance base must end with '/' or '#': {base!r}")
    slug = _SLUG_STRIP.sub("-", p.id.lower()).strip("-")
    if not slug:
        slug = hashlib.sha256(p.description.encode("utf-8")).hexdigest()[:16]
    return Iri(base + slug)


class FailureCause(str, enum.Enum):
    INVALID_RDF = "InvalidRDF"
    AGENT_ERROR = "AgentError"
    TIMEOUT = "Timeout"


@dataclass
class PopulationResult:
    product_id: str
    subject: Iri
    succeeded: bool
    attempts: int
    triples: list[Triple] = field(default_factory=list)
    conformance: list[ConformanceIssue] = field(default_factory=list)
    cause: Optional[FailureCause] = None
    error: Optional[str] = None

    @classmethod
    def success(cls, product_id, subject, attempts, triples, conformance) -> "PopulationResult":
        return cls(product_id, subject, True, attempts, list(triples), list(conformance))

    @classmethod
    def failure(cls, product_id, subject, attempts, cause: FailureCause, error: str) -> "PopulationResult":
        return cls(product_id, subject, False, attempts, cause=cause, error=error)

    def to_dict(self) -> dict:
        out = {
            "product_id": self.product_id,
            "subject": self.subject.value,
            "outcome": "success" if self.succeeded else "failure",
            "attempts": self.attempts,
        }
        if self.succeeded:
            out["triples"] = [triple_to_text(t) for t in self.triples]
            out["conformance"] = [i.to_dict() for i in self.conformance]
        else:
            out["cause"] = self.cause.value if self.cause else None
            out["error"] = self.error
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "PopulationResult":
        subject = Iri(d["subject"])
        if d["outcome"] == "success":
            return cls.success(
                d["product_id"],
                subject,
                d["attempts"],
                [triple_from_text(t) for t in d.get("triples", [])],
                [ConformanceIssue.from_dict(i) for i in d.get("conformance", [])],
            )
        return cls.failure(d["product_id"], subject, d["attempts"], FailureCause(d["cause"]), d.get("error") or "")


@dataclass(frozen=True)
class PopulationConfig:
    instance_base: str
    max_attempts: int = 3
    conformance_mode: ConformanceMode = ConformanceMode.LENIENT
    max_inflight: int = 4

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.max_inflight < 1:
            raise ValueError("max_inflight must be >= 1")


def populate_product(
    p: ProductRecord,
    o: Ontology,
    gw: Gateway,
    cfg: PopulationConfig,
    ontology_text: Optional[str] = None,
) -> PopulationResult:
    """Extract one product's triples; every failure mode is returned, never raised."""
    subject = mint_subject_iri(p, cfg.instance_base)
    variables = {
        "ontology": ontology_text if ontology_text is not None else serialize_ontology(o),
        "subject_iri": subject.value,
        "product_id": p.id,
        "description": p.description.strip(),
    }
    feedback = None
    for attempt in range(1, cfg.max_attempts + 1):
        req = gw.request("populate", variables, feedback)
        try:
            resp = gw.invoke(req)
        except AgentTimeout as exc:
            return PopulationResult.failure(p.id, subject, attempt, FailureCause.TIMEOUT, str(exc))
        except AgentError as exc:
            return PopulationResult.failure(p.id, subject, attempt, FailureCause.AGENT_ERROR, str(exc))
        try:
            graph = parse_turtle(extract_turtle(resp.text))
        except TurtleSyntaxError as exc:
            feedback = f"Turtle syntax error at {exc}"
            continue
        if not any(True for _ in graph.match(subject)):
            feedback = f"the answer contains no triples about <{subject.value}>"
            continue
        triples = sorted(graph, key=triple_sort_key)
        issues = validate_triples(triples, o, mode=cfg.conformance_mode)
        if cfg.conformance_mode is ConformanceMode.STRICT:
            rejected = {i.triple for i in issues if i.severity is Severity.ERROR}
            for t in sorted(rejected, key=triple_sort_key):
                log.info("strict mode dropped %s", triple_to_text(t))
            triples = [t for t in triples if t not in rejected]
        return PopulationResult.success(p.id, subject, attempt, triples, issues)
    return PopulationResult.failure(p.id, subject, cfg.max_attempts, FailureCause.INVALID_RDF, feedback or "")


def kg_prefixes(o: Ontology, instance_base: str) -> dict[str, str]:
    prefixes = dict(ontology_to_graph(o).prefixes)
    if instance_base not in prefixes.values():
        label = "item"
        while label in prefixes:
            label += "_"
        prefixes[label] = instance_base
    return prefixes


def populate_corpus(
    c: Corpus, o: Ontology, gw: Gateway, cfg: PopulationConfig
) -> tuple[Graph, list[PopulationResult]]:
    """Populate every product; results keep corpus order whatever the completion order."""
    ontology_text = serialize_ontology(o)
    with ThreadPoolExecutor(max_workers=cfg.max_inflight) as pool:
        results = list(pool.map(lambda p: populate_product(p, o, gw, cfg, ontology_text), c.records))
    kg = Graph(prefixes=kg_prefixes(o, cfg.instance_base))
    for r in results:
        if r.succeeded:
            for t in r.triples:
                kg.add(t)
    return kg, results

