"""Structured EHR elements to a numeric design matrix.

Categoricals use full one-hot encoding over the declared domains (no
reference level dropped; the L1 penalty downstream absorbs the induced
collinearity and keeps every level's coefficient readable). Age and length
of stay are z-scored with moments taken from the fitting records and frozen
into the schema. TF-IDF columns are appended as-is by :func:`combine`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from .errors import BadCategory, EmptyCohort, RowMismatch
from .ingest import (
    BOOLEAN_FIELDS,
    CATEGORICAL_DOMAINS,
    NUMERIC_BOUNDS,
    STRUCTURED_COLUMNS,
    StructuredRecord,
)
from .text import DocTermMatrix

OUTCOME_FIELDS = ("discharge_disposition", "length_of_stay_days")


@dataclass(frozen=True)
class FeatureDescriptor:
    source: str
    kind: str  # "numeric" | "bool" | "onehot"
    level: str | None
    column: str


@dataclass(frozen=True)
class FeatureSchema:
    descriptors: tuple[FeatureDescriptor, ...]
    moments: dict[str, tuple[float, float]]  # numeric column -> (mean, sd)
    include_outcome_features: bool = True

    @property
    def columns(self) -> tuple[str, ...]:
        return tuple(d.column for d in self.descriptors)


@dataclass(frozen=True)
class FeatureMatrix:
    row_ids: tuple[str, ...]
    columns: tuple[str, ...]
    X: np.ndarray | sparse.csr_matrix
    blocks: tuple[tuple[str, int, int], ...]  # (name, start, stop) column ranges

    @property
    def shape(self) -> tuple[int, int]:
        return self.X.shape

    def dense(self) -> np.ndarray:
        if sparse.issparse(self.X):
            return np.asarray(self.X.todense())
        return self.X


def _schema_fields(include_outcome_features: bool) -> list[str]:
    fields = list(STRUCTURED_COLUMNS[1:])
    if not include_outcome_features:
        fields = [f for f in fields if f not in OUTCOME_FIELDS]
    return fields


def fit_schema(records: list[StructuredRecord] | tuple[StructuredRecord, ...],
               include_outcome_features: bool = True) -> FeatureSchema:
    """Build the encoding plan, freezing standardization moments from ``records``."""
    if not records:
        raise EmptyCohort("cannot fit a feature schema on zero records")
    descriptors: list[FeatureDescriptor] = []
    moments: dict[str, tuple[float, float]] = {}
    for field in _schema_fields(include_outcome_features):
        if field in NUMERIC_BOUNDS:
            values = np.array([getattr(r, field) for r in records], dtype=np.float64)
            mean = float(values.mean())
            sd = float(values.std())
            if sd == 0.0:
                sd = 1.0
            moments[field] = (mean, sd)
            descriptors.append(FeatureDescriptor(field, "numeric", None, field))
        elif field in BOOLEAN_FIELDS:
            descriptors.append(FeatureDescriptor(field, "bool", None, field))
        else:
            for level in CATEGORICAL_DOMAINS[field]:
                descriptors.append(
                    FeatureDescriptor(field, "onehot", level, f"{field}={level}"))
    return FeatureSchema(descriptors=tuple(descriptors), moments=moments,
                         include_outcome_features=include_outcome_features)


def encode(schema: FeatureSchema,
           records: list[StructuredRecord] | tuple[StructuredRecord, ...]) -> FeatureMatrix:
    """Encode records into the schema's column order (row-wise, deterministic)."""
    n = len(records)
    p = len(schema.descriptors)
    X = np.zeros((n, p), dtype=np.float64)
    for j, desc in enumerate(schema.descriptors):
        if desc.kind == "numeric":
            mean, sd = schema.moments[desc.source]
            col = np.array([getattr(r, desc.source) for r in records], dtype=np.float64)
            X[:, j] = (col - mean) / sd
        elif desc.kind == "bool":
            X[:, j] = [1.0 if getattr(r, desc.source) else 0.0 for r in records]
        else:
            for i, r in enumerate(records):
                value = getattr(r, desc.source)
                if value not in CATEGORICAL_DOMAINS[desc.source]:
                    raise BadCategory(
                        f"record {r.patient_id!r}: {desc.source}={value!r} not in domain")
                if value == desc.level:
                    X[i, j] = 1.0
    row_ids = tuple(r.patient_id for r in records)
    return FeatureMatrix(row_ids=row_ids, columns=schema.columns, X=X,
                         blocks=(("structured", 0, p),))


def from_doc_term(dtm: DocTermMatrix) -> FeatureMatrix:
    """Wrap a TF-IDF matrix as a text-only feature matrix."""
    return FeatureMatrix(row_ids=dtm.row_ids, columns=dtm.terms,
                         X=dtm.matrix,
                         blocks=(("text", 0, len(dtm.terms)),))


def combine(structured: FeatureMatrix, text: DocTermMatrix | FeatureMatrix) -> FeatureMatrix:
    """Horizontally concatenate the structured block with the text block."""
    if isinstance(text, DocTermMatrix):
        text = from_doc_term(text)
    if structured.row_ids != text.row_ids:
        raise RowMismatch("structured and text matrices index different patients "
                          "or a different patient order")
    left = structured.X if sparse.issparse(structured.X) else sparse.csr_matrix(structured.X)
    X = sparse.hstack([left, text.X], format="csr")
    offset = len(structured.columns)
    blocks = structured.blocks + tuple(
        (name, start + offset, stop + offset) for name, start, stop in text.blocks)
    return FeatureMatrix(row_ids=structured.row_ids,
                         columns=structured.columns + text.columns,
                         X=X, blocks=blocks)


def schema_to_dict(schema: FeatureSchema) -> dict:
    return {
        "descriptors": [
            {"source": d.source, "kind": d.kind, "level": d.level, "column": d.column}
            for d in schema.descriptors
        ],
        "moments": {k: [v[0], v[1]] for k, v in schema.moments.items()},
        "include_outcome_features": schema.include_outcome_features,
    }


def schema_from_dict(payload: dict) -> FeatureSchema:
    descriptors = tuple(
        FeatureDescriptor(d["source"], d["kind"], d["level"], d["column"])
        for d in payload["descriptors"])
    moments = {k: (float(v[0]), float(v[1])) for k, v in payload["moments"].items()}
    return FeatureSchema(descriptors=descriptors, moments=moments,
                         include_outcome_features=bool(payload["include_outcome_features"]))


def save_schema(schema: FeatureSchema, path: str | Path) -> None:
    Path(path).write_text(json.dumps(schema_to_dict(schema), indent=2, sort_keys=True))


def load_schema(path: str | Path) -> FeatureSchema:
    return schema_from_dict(json.loads(Path(path).read_text()))
