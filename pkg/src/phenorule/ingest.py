"""On-disk data model: structured records, note bundles, labels, and the join.

Three file formats, all human-inspectable:

* ``structured.csv``  - one row per patient, header fixed to ``STRUCTURED_COLUMNS``
* ``notes.jsonl``     - one JSON object per line: patient_id, note_type, text
* ``labels.csv``      - header ``patient_id,due_to_covid`` with 0/1 labels

Categorical strings are matched case-insensitively and ignoring spaces,
hyphens, and underscores, so "Not Taken", "not_taken", and "NotTaken" all
map to the ``NotTaken`` level.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, fields as dc_fields
from pathlib import Path

from .errors import (
    BadCategory,
    DuplicatePatient,
    EmptyCohort,
    MalformedLine,
    MissingColumn,
    MissingField,
)

logger = logging.getLogger(__name__)

SEX_LEVELS = ("Female", "Male")
DISPOSITION_LEVELS = ("Dead", "Home", "OtherFacility")
ADMISSION_LEVELS = ("Emergency", "RoutineElective", "Urgent")
ENCOUNTER_LEVELS = ("Emergency", "EmergencyToInpatient", "Inpatient", "ObservationStay")
BMI_LEVELS = ("Missing", "Normal", "Obese", "Overweight", "Underweight")
PAYER_LEVELS = ("Private", "Public", "SelfPay", "Other")
RACE_LEVELS = ("Hispanic", "NHBlack", "NHWhite", "NHAsian", "Other")
LAB_LEVELS = ("High", "Low", "Normal", "NotTaken")
NOTE_TYPES = ("EDAdmission", "Progress", "Operative", "HistoryPhysical",
              "DischargeSummary", "Other")

COMORBIDITY_FIELDS = ("surgery", "cancer", "cardiovascular", "hypertension",
                      "chronic_liver", "copd", "asthma", "chronic_renal", "diabetes")
MEDICATION_FIELDS = ("bronchodilator", "steroid", "anticoagulant_antiplatelet",
                     "diuretic", "cough_suppressant", "paralytic", "expectorant",
                     "remdesivir", "inhaled_steroid")
LAB_FIELDS = ("lymphocyte_abs", "lymphocyte", "crp", "ferritin", "d_dimer",
              "procalcitonin")
BOOLEAN_FIELDS = ("icu_transfer", "vaccinated") + COMORBIDITY_FIELDS + MEDICATION_FIELDS

CATEGORICAL_DOMAINS: dict[str, tuple[str, ...]] = {
    "sex": SEX_LEVELS,
    "discharge_disposition": DISPOSITION_LEVELS,
    "admission_type": ADMISSION_LEVELS,
    "encounter_type": ENCOUNTER_LEVELS,
    "bmi_category": BMI_LEVELS,
    "payer": PAYER_LEVELS,
    "race_ethnicity": RACE_LEVELS,
    **{lab: LAB_LEVELS for lab in LAB_FIELDS},
}

# numeric field -> (min, max) inclusive bounds
NUMERIC_BOUNDS = {"age_years": (0.0, 130.0), "length_of_stay_days": (0.0, float("inf"))}


@dataclass(frozen=True)
class StructuredRecord:
    patient_id: str
    sex: str
    age_years: float
    discharge_disposition: str
    admission_type: str
    icu_transfer: bool
    encounter_type: str
    length_of_stay_days: float
    bmi_category: str
    payer: str
    race_ethnicity: str
    vaccinated: bool
    surgery: bool
    cancer: bool
    cardiovascular: bool
    hypertension: bool
    chronic_liver: bool
    copd: bool
    asthma: bool
    chronic_renal: bool
    diabetes: bool
    bronchodilator: bool
    steroid: bool
    anticoagulant_antiplatelet: bool
    diuretic: bool
    cough_suppressant: bool
    paralytic: bool
    expectorant: bool
    remdesivir: bool
    inhaled_steroid: bool
    lymphocyte_abs: str
    lymphocyte: str
    crp: str
    ferritin: str
    d_dimer: str
    procalcitonin: str


STRUCTURED_COLUMNS: tuple[str, ...] = tuple(f.name for f in dc_fields(StructuredRecord))


@dataclass(frozen=True)
class NoteDocument:
    patient_id: str
    note_type: str
    text: str


@dataclass(frozen=True)
class JoinReport:
    n_patients: int
    notes_dropped: int
    labels_dropped: int
    patients_without_notes: int


@dataclass(frozen=True)
class CohortDataset:
    """Joined, analysis-ready cohort.

    ``notes_by_patient`` has an entry for every patient (possibly an empty
    list); ``labels`` is None for an unlabeled cohort. Instances are treated
    as immutable and are safe to share across threads.
    """

    records: tuple[StructuredRecord, ...]
    notes_by_patient: dict[str, tuple[NoteDocument, ...]]
    labels: dict[str, bool] | None = None

    @property
    def patient_ids(self) -> list[str]:
        return [r.patient_id for r in self.records]

    def label_vector(self) -> list[bool]:
        if self.labels is None:
            raise EmptyCohort("dataset has no labels")
        return [self.labels[pid] for pid in self.patient_ids]


def _normalize(token: str) -> str:
    return "".join(ch for ch in token.lower() if ch not in " _-")


_CANONICAL: dict[str, dict[str, str]] = {
    f: {_normalize(level): level for level in levels}
    for f, levels in CATEGORICAL_DOMAINS.items()
}

_TRUE = {"1", "true", "yes", "t", "y"}
_FALSE = {"0", "false", "no", "f", "n"}


def _parse_category(column: str, raw: str, where: str) -> str:
    level = _CANONICAL[column].get(_normalize(raw))
    if level is None:
        raise BadCategory(f"{where}: column {column!r} has value {raw!r}, "
                          f"expected one of {CATEGORICAL_DOMAINS[column]}")
    return level


def _parse_bool(column: str, raw: str, where: str) -> bool:
    token = raw.strip().lower()
    if token in _TRUE:
        return True
    if token in _FALSE:
        return False
    raise BadCategory(f"{where}: column {column!r} has value {raw!r}, expected a 0/1 flag")


def _parse_numeric(column: str, raw: str, where: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise BadCategory(f"{where}: column {column!r} has non-numeric value {raw!r}") from None
    lo, hi = NUMERIC_BOUNDS[column]
    if not (lo <= value <= hi):
        raise BadCategory(f"{where}: column {column!r} value {value} outside [{lo}, {hi}]")
    return value


def parse_structured_row(row: dict[str, str], where: str) -> StructuredRecord:
    pid = row["patient_id"].strip()
    if not pid:
        raise BadCategory(f"{where}: empty patient_id")
    values: dict[str, object] = {"patient_id": pid}
    for column in STRUCTURED_COLUMNS[1:]:
        raw = row[column]
        if column in NUMERIC_BOUNDS:
            values[column] = _parse_numeric(column, raw, where)
        elif column in BOOLEAN_FIELDS:
            values[column] = _parse_bool(column, raw, where)
        else:
            values[column] = _parse_category(column, raw, where)
    return StructuredRecord(**values)  # type: ignore[arg-type]


def load_structured(path: str | Path) -> list[StructuredRecord]:
    """Load structured records from a comma-delimited table with a header."""
    path = Path(path)
    records: list[StructuredRecord] = []
    seen: set[str] = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in STRUCTURED_COLUMNS if c not in header]
        if missing:
            raise MissingColumn(f"{path}: missing column(s) {', '.join(missing)}")
        for lineno, row in enumerate(reader, start=2):
            record = parse_structured_row(row, f"{path}:{lineno}")
            if record.patient_id in seen:
                raise DuplicatePatient(f"{path}:{lineno}: duplicate patient_id "
                                       f"{record.patient_id!r}")
            seen.add(record.patient_id)
            records.append(record)
    return records


def _format_cell(value: object) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_structured(records: list[StructuredRecord], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(STRUCTURED_COLUMNS)
        for rec in records:
            writer.writerow([_format_cell(getattr(rec, c)) for c in STRUCTURED_COLUMNS])


_NOTE_TYPE_CANONICAL = {_normalize(t): t for t in NOTE_TYPES}


def load_notes(path: str | Path) -> list[NoteDocument]:
    """Load line-delimited notes, preserving input order.

    Unknown note_type values map to ``Other``; the count is logged as a
    warning. A missing note_type key is not an error (defaults to Other).
    """
    path = Path(path)
    notes: list[NoteDocument] = []
    unknown_types = 0
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLine(f"{path}:{lineno}: not valid JSON ({exc.msg})") from None
            if not isinstance(obj, dict) or "patient_id" not in obj:
                raise MalformedLine(f"{path}:{lineno}: record must be an object with a "
                                    f"patient_id")
            if "text" not in obj:
                raise MissingField(f"{path}:{lineno}: missing 'text' field")
            raw_type = obj.get("note_type", "Other")
            note_type = _NOTE_TYPE_CANONICAL.get(_normalize(str(raw_type)))
            if note_type is None:
                note_type = "Other"
                unknown_types += 1
            notes.append(NoteDocument(patient_id=str(obj["patient_id"]),
                                      note_type=note_type,
                                      text=str(obj["text"])))
    if unknown_types:
        logger.warning("%s: %d note(s) had an unrecognized note_type, mapped to Other",
                       path, unknown_types)
    return notes


def write_notes(notes: list[NoteDocument], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for note in notes:
            fh.write(json.dumps({"patient_id": note.patient_id,
                                 "note_type": note.note_type,
                                 "text": note.text}, sort_keys=True))
            fh.write("\n")


def load_labels(path: str | Path) -> dict[str, bool]:
    path = Path(path)
    labels: dict[str, bool] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for column in ("patient_id", "due_to_covid"):
            if column not in header:
                raise MissingColumn(f"{path}: missing column {column!r}")
        for lineno, row in enumerate(reader, start=2):
            pid = row["patient_id"].strip()
            if pid in labels:
                raise DuplicatePatient(f"{path}:{lineno}: duplicate label for {pid!r}")
            labels[pid] = _parse_bool("due_to_covid", row["due_to_covid"], f"{path}:{lineno}")
    return labels


def write_labels(labels: dict[str, bool], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["patient_id", "due_to_covid"])
        for pid, value in labels.items():
            writer.writerow([pid, "1" if value else "0"])


def join_cohort(
    records: list[StructuredRecord],
    notes: list[NoteDocument],
    labels: dict[str, bool] | None = None,
) -> tuple[CohortDataset, JoinReport]:
    """Join loaded pieces into a CohortDataset.

    Notes and labels referencing patients absent from ``records`` are dropped
    and counted in the report. Every patient gets a notes entry, possibly
    empty: patients without notes stay in the cohort.
    """
    if not records:
        raise EmptyCohort("cannot join a cohort with zero structured records")
    known = {r.patient_id for r in records}
    grouped: dict[str, list[NoteDocument]] = {pid: [] for pid in known}
    notes_dropped = 0
    for note in notes:
        if note.patient_id in grouped:
            grouped[note.patient_id].append(note)
        else:
            notes_dropped += 1
    kept_labels: dict[str, bool] | None = None
    labels_dropped = 0
    if labels is not None:
        kept_labels = {}
        for pid, value in labels.items():
            if pid in known:
                kept_labels[pid] = value
            else:
                labels_dropped += 1
    notes_by_patient = {r.patient_id: tuple(grouped[r.patient_id]) for r in records}
    without_notes = sum(1 for bundle in notes_by_patient.values() if not bundle)
    if without_notes:
        logger.info("%d patient(s) have no notes and are retained", without_notes)
    dataset = CohortDataset(records=tuple(records),
                            notes_by_patient=notes_by_patient,
                            labels=kept_labels)
    report = JoinReport(n_patients=len(records), notes_dropped=notes_dropped,
                        labels_dropped=labels_dropped,
                        patients_without_notes=without_notes)
    return dataset, report


def load_cohort(data_dir: str | Path, require_labels: bool = False) -> tuple[CohortDataset, JoinReport]:
    """Load structured.csv / notes.jsonl / labels.csv from a directory."""
    data_dir = Path(data_dir)
    records = load_structured(data_dir / "structured.csv")
    notes_path = data_dir / "notes.jsonl"
    notes = load_notes(notes_path) if notes_path.exists() else []
    labels_path = data_dir / "labels.csv"
    labels = load_labels(labels_path) if labels_path.exists() else None
    if require_labels and labels is None:
        raise EmptyCohort(f"{labels_path}: labels required but not found")
    return join_cohort(records, notes, labels)


def write_cohort(dataset: CohortDataset, data_dir: str | Path) -> None:
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    write_structured(list(dataset.records), data_dir / "structured.csv")
    all_notes = [note for pid in dataset.patient_ids
                 for note in dataset.notes_by_patient[pid]]
    write_notes(all_notes, data_dir / "notes.jsonl")
    if dataset.labels is not None:
        write_labels({pid: dataset.labels[pid] for pid in dataset.patient_ids},
                     data_dir / "labels.csv")
