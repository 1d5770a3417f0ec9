"""Typed ontology view over an RDF graph: lifting, lowering, merge, diff, validation, stats."""

from __future__ import annotations

import enum
import itertools
import re
from dataclasses import dataclass, field, replace
from typing import Optional

from .rdf import (
    OWL,
    RDF,
    RDF_TYPE,
    RDFS,
    STANDARD_PREFIXES,
    XSD,
    Graph,
    Iri,
    Literal,
    Triple,
)

OWL_CLASS = Iri(OWL + "Class")
OWL_ONTOLOGY = Iri(OWL + "Ontology")
OWL_DATATYPE_PROPERTY = Iri(OWL + "DatatypeProperty")
OWL_OBJECT_PROPERTY = Iri(OWL + "ObjectProperty")
RDFS_CLASS = Iri(RDFS + "Class")
RDF_PROPERTY = Iri(RDF + "Property")
RDFS_SUBCLASS_OF = Iri(RDFS + "subClassOf")
RDFS_DOMAIN = Iri(RDFS + "domain")
RDFS_RANGE = Iri(RDFS + "range")
RDFS_COMMENT = Iri(RDFS + "comment")
RDFS_LABEL = Iri(RDFS + "label")
RDFS_LITERAL = Iri(RDFS + "Literal")

CLASS_TYPES = {RDFS_CLASS, OWL_CLASS}
PROPERTY_TYPES = {RDF_PROPERTY, OWL_DATATYPE_PROPERTY, OWL_OBJECT_PROPERTY}
EXTERNAL_NAMESPACES = (RDF, RDFS, OWL, XSD)

NEAR_DUPLICATE_THRESHOLD = 0.8


class StructureError(ValueError):
    """Raised when an ontology graph has a subclass cycle."""


class PropertyKind(str, enum.Enum):
    DATATYPE = "datatype"
    OBJECT = "object"


class Severity(str, enum.Enum):
    ERROR = "error"
    WARNING = "warning"


class IssueCode(str, enum.Enum):
    MISSING_DOMAIN = "MissingDomain"
    MISSING_RANGE = "MissingRange"
    MISSING_COMMENT = "MissingComment"
    DANGLING_REFERENCE = "DanglingReference"
    SUBCLASS_CYCLE = "SubclassCycle"
    DUPLICATE_LABEL = "DuplicateLabel"
    NEAR_DUPLICATE_PROPERTY = "NearDuplicateProperty"

    @property
    def severity(self) -> Severity:
        if self in (IssueCode.DANGLING_REFERENCE, IssueCode.SUBCLASS_CYCLE):
            return Severity.ERROR
        return Severity.WARNING


def is_external(iri: Iri) -> bool:
    return iri.value.startswith(EXTERNAL_NAMESPACES)


def is_datatype_iri(iri: Iri) -> bool:
    return iri.value.startswith(XSD) or iri == RDFS_LITERAL or iri.value == RDF + "langString"


@dataclass(frozen=True)
class OntologyClass:
    iri: Iri
    label: Optional[str] = None
    comment: Optional[str] = None
    parents: frozenset[Iri] = frozenset()


@dataclass(frozen=True)
class OntologyProperty:
    iri: Iri
    kind: PropertyKind
    domain: Optional[Iri] = None
    range: Optional[Iri] = None
    comment: Optional[str] = None
    label: Optional[str] = None


@dataclass(frozen=True)
class OntologyIssue:
    code: IssueCode
    subject: Iri
    message: str

    @property
    def severity(self) -> Severity:
        return self.code.severity

    def sort_key(self) -> tuple:
        return (self.severity != Severity.ERROR, self.subject.value, self.code.value, self.message)

    def to_dict(self) -> dict:
        return {
            "severity": self.severity.value,
            "code": self.code.value,
            "subject": self.subject.value,
            "message": self.message,
        }


@dataclass(frozen=True)
class Ontology:
    classes: dict[Iri, OntologyClass] = field(default_factory=dict)
    properties: dict[Iri, OntologyProperty] = field(default_factory=dict)
    namespace: Optional[str] = None
    prefixes: dict[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        overlap = set(self.classes) & set(self.properties)
        if overlap:
            raise ValueError(f"IRIs declared as both class and property: {sorted(i.value for i in overlap)}")

    def __len__(self) -> int:
        return len(self.classes) + len(self.properties)

    def element(self, iri: Iri):
        return self.classes.get(iri) or self.properties.get(iri)

    def ancestors(self, iri: Iri) -> set[Iri]:
        """Reflexive-transitive superclasses of ``iri``."""
        seen = {iri}
        stack = [iri]
        while stack:
            cls = self.classes.get(stack.pop())
            if cls is None:
                continue
            for parent in cls.parents:
                if parent not in seen:
                    seen.add(parent)
                    stack.append(parent)
        return seen


# ------------------------------------------------------------ graph <-> ontology


def _single_text(g: Graph, subject: Iri, predicate: Iri) -> Optional[str]:
    values = [o.lexical for o in g.objects(subject, predicate) if isinstance(o, Literal)]
    return min(values) if values else None


def _single_iri(g: Graph, subject: Iri, predicate: Iri) -> Optional[Iri]:
    values = [o for o in g.objects(subject, predicate) if isinstance(o, Iri)]
    return min(values, key=lambda i: i.value) if values else None


def ontology_from_graph(g: Graph) -> tuple[Ontology, list[OntologyIssue]]:
    """Lift schema triples into an :class:`Ontology` and report mechanical issues.

    Raises :class:`StructureError` if the subclass graph has a cycle.
    """
    types: dict[Iri, set[Iri]] = {}
    for t in g.match(None, RDF_TYPE):
        if isinstance(t.subject, Iri) and isinstance(t.object, Iri):
            types.setdefault(t.subject, set()).add(t.object)

    classes: dict[Iri, OntologyClass] = {}
    properties: dict[Iri, OntologyProperty] = {}
    for subject in sorted(types, key=lambda i: i.value):
        declared = types[subject]
        if declared & PROPERTY_TYPES:
            rng = _single_iri(g, subject, RDFS_RANGE)
            if OWL_DATATYPE_PROPERTY in declared and OWL_OBJECT_PROPERTY not in declared:
                kind = PropertyKind.DATATYPE
            elif OWL_OBJECT_PROPERTY in declared and OWL_DATATYPE_PROPERTY not in declared:
                kind = PropertyKind.OBJECT
            elif rng is not None and is_datatype_iri(rng):
                kind = PropertyKind.DATATYPE
            else:
                kind = PropertyKind.OBJECT
            properties[subject] = OntologyProperty(
                iri=subject,
                kind=kind,
                domain=_single_iri(g, subject, RDFS_DOMAIN),
                range=rng,
                comment=_single_text(g, subject, RDFS_COMMENT),
                label=_single_text(g, subject, RDFS_LABEL),
            )
        elif declared & CLASS_TYPES:
            parents = frozenset(o for o in g.objects(subject, RDFS_SUBCLASS_OF) if isinstance(o, Iri))
            classes[subject] = OntologyClass(
                iri=subject,
                label=_single_text(g, subject, RDFS_LABEL),
                comment=_single_text(g, subject, RDFS_COMMENT),
                parents=parents,
            )

    declared_ns = [s.value for s, ts in types.items() if OWL_ONTOLOGY in ts]
    namespace = min(declared_ns) if declared_ns else None

    onto = Ontology(classes, properties, namespace, dict(g.prefixes))
    cycle = find_subclass_cycle(onto)
    if cycle:
        raise StructureError("subclass cycle: " + " -> ".join(i.value for i in cycle))
    return onto, validate_ontology(onto)


def ontology_to_graph(o: Ontology) -> Graph:
    g = Graph()
    for label, ns in sorted({**STANDARD_PREFIXES, **o.prefixes}.items()):
        g.bind(label, ns)
    if not o.classes and not o.properties:
        return g
    if o.namespace:
        g.add(Triple(Iri(o.namespace), RDF_TYPE, OWL_ONTOLOGY))
    for cls in o.classes.values():
        g.add(Triple(cls.iri, RDF_TYPE, OWL_CLASS))
        for parent in cls.parents:
            g.add(Triple(cls.iri, RDFS_SUBCLASS_OF, parent))
        if cls.label is not None:
            g.add(Triple(cls.iri, RDFS_LABEL, Literal(cls.label)))
        if cls.comment is not None:
            g.add(Triple(cls.iri, RDFS_COMMENT, Literal(cls.comment)))
    for prop in o.properties.values():
        kind_type = OWL_DATATYPE_PROPERTY if prop.kind is PropertyKind.DATATYPE else OWL_OBJECT_PROPERTY
        g.add(Triple(prop.iri, RDF_TYPE, kind_type))
        if prop.domain is not None:
            g.add(Triple(prop.iri, RDFS_DOMAIN, prop.domain))
        if prop.range is not None:
            g.add(Triple(prop.iri, RDFS_RANGE, prop.range))
        if prop.label is not None:
            g.add(Triple(prop.iri, RDFS_LABEL, Literal(prop.label)))
        if prop.comment is not None:
            g.add(Triple(prop.iri, RDFS_COMMENT, Literal(prop.comment)))
    return g


# ------------------------------------------------------------------ validation


def find_subclass_cycle(o: Ontology) -> Optional[list[Iri]]:
    """Return one subclass cycle as a closed path, or None."""
    WHITE, GREY, BLACK = 0, 1, 2
    color = {iri: WHITE for iri in o.classes}
    for root in sorted(o.classes, key=lambda i: i.value):
        if color[root] != WHITE:
            continue
        path = [root]
        stack = [iter(sorted(o.classes[root].parents, key=lambda i: i.value))]
        color[root] = GREY
        while stack:
            nxt = next(stack[-1], None)
            if nxt is None:
                color[path.pop()] = BLACK
                stack.pop()
                continue
            if nxt not in o.classes:
                continue
            if color[nxt] == GREY:
                return path[path.index(nxt) :] + [nxt]
            if color[nxt] == WHITE:
                color[nxt] = GREY
                path.append(nxt)
                stack.append(iter(sorted(o.classes[nxt].parents, key=lambda i: i.value)))
    return None


_TOKEN = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|[0-9]+")


def name_tokens(name: str) -> frozenset[str]:
    """camelCase / snake_case / kebab-case aware, lowercased token set."""
    return frozenset(m.group().lower() for m in _TOKEN.finditer(name))


def jaccard(a: frozenset, b: frozenset) -> float:
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)


def validate_ontology(o: Ontology, near_duplicate_threshold: float = NEAR_DUPLICATE_THRESHOLD) -> list[OntologyIssue]:
    issues: list[OntologyIssue] = []

    def known_class(iri: Iri) -> bool:
        return iri in o.classes or is_external(iri)

    for cls in o.classes.values():
        if not cls.comment:
            issues.append(OntologyIssue(IssueCode.MISSING_COMMENT, cls.iri, "class has no rdfs:comment"))
        for parent in cls.parents:
            if not known_class(parent):
                issues.append(
                    OntologyIssue(IssueCode.DANGLING_REFERENCE, cls.iri, f"parent {parent.value} is not a declared class")
                )

    for prop in o.properties.values():
        if not prop.comment:
            issues.append(OntologyIssue(IssueCode.MISSING_COMMENT, prop.iri, "property has no rdfs:comment"))
        if prop.domain is None:
            issues.append(OntologyIssue(IssueCode.MISSING_DOMAIN, prop.iri, "property has no rdfs:domain"))
        elif not known_class(prop.domain):
            issues.append(
                OntologyIssue(IssueCode.DANGLING_REFERENCE, prop.iri, f"domain {prop.domain.value} is not a declared class")
            )
        if prop.range is None:
            issues.append(OntologyIssue(IssueCode.MISSING_RANGE, prop.iri, "property has no rdfs:range"))
        elif prop.kind is PropertyKind.DATATYPE and not is_datatype_iri(prop.range):
            issues.append(
                OntologyIssue(
                    IssueCode.DANGLING_REFERENCE, prop.iri, f"datatype property range {prop.range.value} is not a datatype"
                )
            )
        elif prop.kind is PropertyKind.OBJECT and not known_class(prop.range):
            issues.append(
                OntologyIssue(IssueCode.DANGLING_REFERENCE, prop.iri, f"range {prop.range.value} is not a declared class")
            )

    cycle = find_subclass_cycle(o)
    if cycle:
        issues.append(
            OntologyIssue(IssueCode.SUBCLASS_CYCLE, min(cycle, key=lambda i: i.value), "subclass cycle: " + " -> ".join(i.value for i in cycle))
        )

    by_label: dict[str, list[Iri]] = {}
    for element in [*o.classes.values(), *o.properties.values()]:
        if element.label:
            by_label.setdefault(element.label.strip().lower(), []).append(element.iri)
    for label, iris in by_label.items():
        if len(iris) > 1:
            iris = sorted(iris, key=lambda i: i.value)
            others = ", ".join(i.value for i in iris[1:])
            issues.append(OntologyIssue(IssueCode.DUPLICATE_LABEL, iris[0], f"label {label!r} also used by {others}"))

    props = sorted(o.properties, key=lambda i: i.value)
    tokens = {p: name_tokens(p.local_name) for p in props}
    for a, b in itertools.combinations(props, 2):
        score = jaccard(tokens[a], tokens[b])
        if score >= near_duplicate_threshold:
            issues.append(
                OntologyIssue(
                    IssueCode.NEAR_DUPLICATE_PROPERTY,
                    a,
                    f"near-duplicate of {b.value} (token Jaccard {score:.2f})",
                )
            )

    return sorted(issues, key=OntologyIssue.sort_key)


# ----------------------------------------------------------------------- merge


@dataclass(frozen=True)
class FieldChange:
    iri: Iri
    field: str
    old: Optional[str]
    new: Optional[str]

    def to_dict(self) -> dict:
        return {"iri": self.iri.value, "field": self.field, "old": self.old, "new": self.new}


@dataclass
class MergeReport:
    added_classes: list[Iri] = field(default_factory=list)
    added_properties: list[Iri] = field(default_factory=list)
    annotation_updates: list[FieldChange] = field(default_factory=list)
    rejected_removals: list[Iri] = field(default_factory=list)
    conflicts: list[FieldChange] = field(default_factory=list)

    def is_empty(self) -> bool:
        return not (
            self.added_classes or self.added_properties or self.annotation_updates or self.rejected_removals or self.conflicts
        )

    @property
    def new_elements(self) -> int:
        return len(self.added_classes) + len(self.added_properties)

    def to_dict(self) -> dict:
        return {
            "added_classes": [i.value for i in self.added_classes],
            "added_properties": [i.value for i in self.added_properties],
            "annotation_updates": [c.to_dict() for c in self.annotation_updates],
            "rejected_removals": [i.value for i in self.rejected_removals],
            "conflicts": [c.to_dict() for c in self.conflicts],
        }


def _text(value) -> Optional[str]:
    if value is None:
        return None
    if isinstance(value, Iri):
        return value.value
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, frozenset):
        return " ".join(sorted(i.value for i in value))
    return str(value)


_ANNOTATIONS = ("label", "comment")
_CLASS_STRUCTURE = ("parents",)
_PROPERTY_STRUCTURE = ("kind", "domain", "range")


def _merge_element(base, delta, structural: tuple[str, ...], report: MergeReport):
    updates = {}
    for name in _ANNOTATIONS:
        old, new = getattr(base, name), getattr(delta, name)
        if not old and new:
            updates[name] = new
            report.annotation_updates.append(FieldChange(base.iri, name, old, new))
    conflicted = False
    for name in structural:
        old, new = getattr(base, name), getattr(delta, name)
        # an omitted field in delta is not a claim
        if new is not None and new != frozenset() and old != new:
            conflicted = True
            report.conflicts.append(FieldChange(base.iri, name, _text(old), _text(new)))
    if conflicted:
        report.rejected_removals.append(base.iri)
    return replace(base, **updates) if updates else base


def ontology_merge(base: Ontology, delta: Ontology) -> tuple[Ontology, MergeReport]:
    """Add delta's new elements to base without removing or restructuring anything.

    Base wins on structural fields; empty base labels/comments may be filled from delta.
    """
    report = MergeReport()
    classes = dict(base.classes)
    properties = dict(base.properties)

    for iri in sorted(delta.classes, key=lambda i: i.value):
        cls = delta.classes[iri]
        if iri in classes:
            classes[iri] = _merge_element(classes[iri], cls, _CLASS_STRUCTURE, report)
        elif iri in properties:
            report.rejected_removals.append(iri)
            report.conflicts.append(FieldChange(iri, "element", "property", "class"))
        else:
            classes[iri] = cls
            report.added_classes.append(iri)

    for iri in sorted(delta.properties, key=lambda i: i.value):
        prop = delta.properties[iri]
        if iri in properties:
            properties[iri] = _merge_element(properties[iri], prop, _PROPERTY_STRUCTURE, report)
        elif iri in classes:
            report.rejected_removals.append(iri)
            report.conflicts.append(FieldChange(iri, "element", "class", "property"))
        else:
            properties[iri] = prop
            report.added_properties.append(iri)

    namespace = base.namespace or delta.namespace
    prefixes = {**delta.prefixes, **base.prefixes}
    return Ontology(classes, properties, namespace, prefixes), report


# ------------------------------------------------------------------------ diff


@dataclass
class DiffReport:
    added_classes: list[Iri] = field(default_factory=list)
    removed_classes: list[Iri] = field(default_factory=list)
    changed_classes: dict[Iri, list[FieldChange]] = field(default_factory=dict)
    unchanged_classes: list[Iri] = field(default_factory=list)
    added_properties: list[Iri] = field(default_factory=list)
    removed_properties: list[Iri] = field(default_factory=list)
    changed_properties: dict[Iri, list[FieldChange]] = field(default_factory=dict)
    unchanged_properties: list[Iri] = field(default_factory=list)

    def is_empty(self) -> bool:
        return not (
            self.added_classes
            or self.removed_classes
            or self.changed_classes
            or self.added_properties
            or self.removed_properties
            or self.changed_properties
        )

    @property
    def added(self) -> list[Iri]:
        return self.added_classes + self.added_properties

    @property
    def removed(self) -> list[Iri]:
        return self.removed_classes + self.removed_properties

    def to_dict(self) -> dict:
        def changes(d):
            return {k.value: [c.to_dict() for c in v] for k, v in sorted(d.items(), key=lambda kv: kv[0].value)}

        return {
            "added_classes": [i.value for i in self.added_classes],
            "removed_classes": [i.value for i in self.removed_classes],
            "changed_classes": changes(self.changed_classes),
            "added_properties": [i.value for i in self.added_properties],
            "removed_properties": [i.value for i in self.removed_properties],
            "changed_properties": changes(self.changed_properties),
            "summary": {
                "added": len(self.added),
                "removed": len(self.removed),
                "changed": len(self.changed_classes) + len(self.changed_properties),
                "unchanged": len(self.unchanged_classes) + len(self.unchanged_properties),
            },
        }


_CLASS_FIELDS = ("label", "comment", "parents")
_PROPERTY_FIELDS = ("kind", "domain", "range", "label", "comment")


def _diff_maps(old: dict, new: dict, fields: tuple[str, ...]):
    added = sorted((i for i in new if i not in old), key=lambda i: i.value)
    removed = sorted((i for i in old if i not in new), key=lambda i: i.value)
    changed: dict[Iri, list[FieldChange]] = {}
    unchanged = []
    for iri in sorted((i for i in old if i in new), key=lambda i: i.value):
        deltas = [
            FieldChange(iri, name, _text(getattr(old[iri], name)), _text(getattr(new[iri], name)))
            for name in fields
            if getattr(old[iri], name) != getattr(new[iri], name)
        ]
        if deltas:
            changed[iri] = deltas
        else:
            unchanged.append(iri)
    return added, removed, changed, unchanged


def ontology_diff(old: Ontology, new: Ontology) -> DiffReport:
    ac, rc, cc, uc = _diff_maps(old.classes, new.classes, _CLASS_FIELDS)
    ap, rp, cp, up = _diff_maps(old.properties, new.properties, _PROPERTY_FIELDS)
    return DiffReport(ac, rc, cc, uc, ap, rp, cp, up)


# ----------------------------------------------------------------------- stats


@dataclass(frozen=True)
class OntologyStats:
    classes: int
    properties: int
    datatype_properties: int
    object_properties: int
    annotated_fraction: float

    def to_dict(self) -> dict:
        return {
            "classes": self.classes,
            "properties": self.properties,
            "datatype_properties": self.datatype_properties,
            "object_properties": self.object_properties,
            "annotated_fraction": self.annotated_fraction,
        }


def ontology_stats(o: Ontology) -> OntologyStats:
    """Element counts; annotated_fraction is the share of elements carrying an rdfs:comment."""
    datatype = sum(1 for p in o.properties.values() if p.kind is PropertyKind.DATATYPE)
    total = len(o.classes) + len(o.properties)
    annotated = sum(1 for e in [*o.classes.values(), *o.properties.values()] if e.comment)
    return OntologyStats(
        classes=len(o.classes),
        properties=len(o.properties),
        datatype_properties=datatype,
        object_properties=len(o.properties) - datatype,
        annotated_fraction=annotated / total if total else 0.0,
    )
