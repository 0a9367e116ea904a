"""Verifier for hierarchical data-driven workflow specifications."""

from .model import (
    ArtifactRelation, Attr, DatabaseSchema, HASSpec, InternalService,
    Relation, Task, Variable, validate_schema, validate_spec,
)
from .parser import (
    LTLFOProperty, SpecParseError, parse_property, parse_spec, serialize_spec,
)
from .repeated import Verdict, Witness, verify
from .search import SearchOptions, SearchStats

__all__ = [
    "ArtifactRelation", "Attr", "DatabaseSchema", "HASSpec", "InternalService",
    "LTLFOProperty", "Relation", "SearchOptions", "SearchStats",
    "SpecParseError", "Task", "Variable", "Verdict", "Witness",
    "parse_property", "parse_spec", "serialize_spec", "validate_schema",
    "validate_spec", "verify",
]
