"""Calibrated synthetic cohort generator.

Structured variables are drawn per class with marginal targets taken from
the study cohort table. Within a class, draws share a per-patient latent
severity factor through a Gaussian copula: marginal rates stay exactly on
target while features correlate the way clinical variables do, which keeps
classifier AUROCs in a realistic range instead of the inflated values
fully independent draws would produce.

Note text mixes a Zipf background lexicon (consonant-only word shapes, so
stemming and the min-count filter behave realistically) with a small signal
lexicon whose per-term rates are multiplied in the positive class and
modulated by the same latent factor (lognormal with unit mean, so expected
class-conditional rates stay on target).

Outcomes follow configurable stratum-specific truths: length of stay is
Poisson with a log-mean vaccination effect per stratum; ICU transfer and
mortality are logistic. Discharge disposition is derived from the mortality
draw, so the structured record stays consistent with the outcome models.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy import optimize, stats

from .errors import BadConfig
from .ingest import CohortDataset, NoteDocument, StructuredRecord

_LABEL_STREAM = 0
_PATIENT_STREAM = 1

# (p_negative_class, p_positive_class) marginal targets per boolean field
DEFAULT_BINARY_CONDITIONALS: dict[str, tuple[float, float]] = {
    "surgery": (0.893, 0.834),
    "cancer": (0.129, 0.124),
    "cardiovascular": (0.335, 0.403),
    "hypertension": (0.326, 0.417),
    "chronic_liver": (0.134, 0.127),
    "copd": (0.094, 0.138),
    "asthma": (0.080, 0.108),
    "chronic_renal": (0.196, 0.307),
    "diabetes": (0.201, 0.285),
    "bronchodilator": (0.196, 0.412),
    "steroid": (0.241, 0.644),
    "anticoagulant_antiplatelet": (0.540, 0.785),
    "diuretic": (0.268, 0.362),
    "cough_suppressant": (0.196, 0.448),
    "paralytic": (0.045, 0.083),
    "expectorant": (0.063, 0.155),
    "remdesivir": (0.246, 0.682),
    "inhaled_steroid": (0.107, 0.116),
}

# levels listed in increasing-severity order used by the copula; per-level
# (negative, positive) class probabilities
DEFAULT_CATEGORICAL_CONDITIONALS: dict[str, tuple[tuple[str, ...], tuple[float, ...], tuple[float, ...]]] = {
    "sex": (("Male", "Female"), (0.464, 0.536), (0.500, 0.500)),
    "admission_type": (("RoutineElective", "Urgent", "Emergency"),
                       (0.107, 0.156, 0.737), (0.011, 0.033, 0.956)),
    "encounter_type": (("Emergency", "ObservationStay", "Inpatient", "EmergencyToInpatient"),
                       (0.009, 0.049, 0.138, 0.804), (0.003, 0.033, 0.097, 0.867)),
    "race_ethnicity": (("Hispanic", "NHAsian", "Other", "NHWhite", "NHBlack"),
                       (0.094, 0.031, 0.000, 0.402, 0.473),
                       (0.055, 0.039, 0.003, 0.420, 0.483)),
    "bmi_category": (("Missing", "Underweight", "Normal", "Overweight", "Obese"),
                     (0.040, 0.022, 0.290, 0.268, 0.380),
                     (0.025, 0.052, 0.246, 0.271, 0.406)),
    "payer": (("SelfPay", "Other", "Public", "Private"),
              (0.094, 0.058, 0.393, 0.455), (0.025, 0.080, 0.398, 0.497)),
    "lymphocyte_abs": (("NotTaken", "Normal", "Low", "High"),
                       (0.839, 0.103, 0.054, 0.004), (0.702, 0.163, 0.130, 0.005)),
    "lymphocyte": (("NotTaken", "Normal", "Low", "High"),
                   (0.339, 0.585, 0.076, 0.000), (0.155, 0.644, 0.196, 0.005)),
    "crp": (("NotTaken", "Normal", "Low", "High"),
            (0.674, 0.049, 0.000, 0.277), (0.414, 0.025, 0.000, 0.561)),
    "ferritin": (("NotTaken", "Normal", "Low", "High"),
                 (0.741, 0.076, 0.009, 0.174), (0.575, 0.122, 0.008, 0.295)),
    "d_dimer": (("NotTaken", "Normal", "Low", "High"),
                (0.754, 0.161, 0.000, 0.085), (0.246, 0.431, 0.000, 0.323)),
    "procalcitonin": (("NotTaken", "Normal", "Low", "High"),
                      (0.928, 0.054, 0.000, 0.018), (0.740, 0.199, 0.000, 0.061)),
}

# per-term (base token rate in the negative class, positive-class multiplier)
DEFAULT_SIGNAL_TERMS: dict[str, tuple[float, float]] = {
    "remdesivir": (0.0018, 12.5),
    "dexamethasone": (0.0016, 11.0),
    "hypoxic": (0.0012, 9.0),
    "hypoxia": (0.0012, 9.0),
    "oxygen": (0.0034, 3.2),
    "pneumonia": (0.0016, 5.1),
    "covid": (0.0067, 2.4),
    "surgical": (0.0059, 0.08),
    "dressing": (0.0030, 0.12),
    "fracture": (0.0020, 0.17),
}

_NOTE_TYPE_DIST = (("Progress", 0.45), ("EDAdmission", 0.20),
                   ("DischargeSummary", 0.15), ("HistoryPhysical", 0.10),
                   ("Operative", 0.05), ("Other", 0.05))


@dataclass(frozen=True)
class OutcomeTruth:
    """Marginal class targets and stratum-specific vaccination effects.

    Tuples are (negative class / hospitalization not due, positive class /
    hospitalization due). Vaccination effects are multiplicative: RR for
    length of stay, OR for ICU and mortality, unvaccinated as reference.
    """

    los_mean: tuple[float, float] = (10.2, 9.9)
    los_rr: tuple[float, float] = (0.59, 0.98)
    icu_rate: tuple[float, float] = (0.201, 0.215)
    icu_or: tuple[float, float] = (0.77, 1.25)
    mortality_rate: tuple[float, float] = (0.080, 0.108)
    mortality_or: tuple[float, float] = (0.48, 1.45)
    disposition_home: tuple[float, float] = (0.786, 0.713)


@dataclass(frozen=True)
class GeneratorConfig:
    n_patients: int = 586
    prevalence: float = 362.0 / 586.0
    master_seed: int = 7
    age_mean: tuple[float, float] = (51.9, 62.7)
    age_sd: float = 17.0
    vaccinated_rate: tuple[float, float] = (0.504, 0.492)
    binary_conditionals: dict[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_BINARY_CONDITIONALS))
    categorical_conditionals: dict = field(
        default_factory=lambda: dict(DEFAULT_CATEGORICAL_CONDITIONALS))
    latent_rho: float = 0.35
    note_kappa: float = 0.9
    # fraction of patients whose structured profile (and treatment mentions)
    # follows the opposite class; generating rates are corrected so observed
    # class-conditional marginals stay on target
    structured_discordance: float = 0.13
    treatment_terms: tuple[str, ...] = ("remdesivir", "dexamethasone")
    background_lexicon_size: int = 3000
    zipf_exponent: float = 1.1
    notes_extra_mean: float = 1.5
    tokens_per_note_mean: float = 120.0
    signal_terms: dict[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_SIGNAL_TERMS))
    outcomes: OutcomeTruth = field(default_factory=OutcomeTruth)

    def validate(self) -> None:
        if self.n_patients < 1:
            raise BadConfig(f"n_patients must be >= 1, got {self.n_patients}")
        if not (0.0 < self.prevalence < 1.0):
            raise BadConfig(f"prevalence must be in (0, 1), got {self.prevalence}")
        if not (0.0 <= self.latent_rho < 1.0):
            raise BadConfig("latent_rho must be in [0, 1)")
        if not (0.0 <= self.structured_discordance <= 0.45):
            raise BadConfig("structured_discordance must be in [0, 0.45]")
        if self.age_sd <= 0 or self.tokens_per_note_mean <= 0:
            raise BadConfig("scale parameters must be positive")
        if self.background_lexicon_size < 10:
            raise BadConfig("background lexicon too small")
        for name, (p0, p1) in self.binary_conditionals.items():
            if not (0.0 <= p0 <= 1.0 and 0.0 <= p1 <= 1.0):
                raise BadConfig(f"{name}: class probabilities must be in [0, 1]")
        for name, (levels, p0, p1) in self.categorical_conditionals.items():
            if len(levels) != len(p0) or len(levels) != len(p1):
                raise BadConfig(f"{name}: level/probability length mismatch")
            if min(p0) < 0 or min(p1) < 0:
                raise BadConfig(f"{name}: probabilities must be nonnegative")
        for term, (base, mult) in self.signal_terms.items():
            if base <= 0 or mult <= 0:
                raise BadConfig(f"signal term {term!r}: rate and multiplier must be > 0")
        signal_mass = sum(b * max(1.0, m) for b, m in self.signal_terms.values())
        if signal_mass > 0.25:
            raise BadConfig("signal lexicon mass too large; must stay well below 1")


_BG_ALPHABET = "bcdfghjklmnpqrtvwxz"  # no vowels or s/y: shapes are stem-stable


def background_lexicon(size: int) -> list[str]:
    """Deterministic consonant-only word shapes ("zbbb", "zbbc", ...)."""
    base = len(_BG_ALPHABET)
    words = []
    for i in range(size):
        digits = []
        v = i
        for _ in range(3):
            digits.append(_BG_ALPHABET[v % base])
            v //= base
        words.append("z" + "".join(reversed(digits)))
    return words


def _corrected_pair(p0: float, p1: float, m: float) -> tuple[float, float]:
    """Generating rates (q0, q1) so that mixing a 1-m/m share of the two
    classes reproduces the target class-conditional rates; clipped to [0, 1]
    (clipping error is far inside the 3-SE calibration band)."""
    if m == 0.0:
        return p0, p1
    shift = (p1 - p0) / (1.0 - 2.0 * m)
    q1 = ((p1 + p0) + shift) / 2.0
    q0 = ((p1 + p0) - shift) / 2.0
    return min(max(q0, 0.0), 1.0), min(max(q1, 0.0), 1.0)


def _corrected_vector(p0, p1, m: float) -> tuple[np.ndarray, np.ndarray]:
    p0 = _normalized(p0)
    p1 = _normalized(p1)
    q0 = np.empty_like(p0)
    q1 = np.empty_like(p1)
    for k in range(len(p0)):
        q0[k], q1[k] = _corrected_pair(float(p0[k]), float(p1[k]), m)
    return _normalized(q0), _normalized(q1)


def _solve_logit_intercept(target: float, or_effect: float, vax_rate: float) -> float:
    """Intercept alpha with (1-pv)*sigmoid(a) + pv*sigmoid(a + ln OR) = target."""
    log_or = np.log(or_effect)

    def gap(a):
        return ((1 - vax_rate) / (1 + np.exp(-a))
                + vax_rate / (1 + np.exp(-(a + log_or))) - target)

    return float(optimize.brentq(gap, -20.0, 20.0))


def _normalized(probs) -> np.ndarray:
    arr = np.asarray(probs, dtype=np.float64)
    return arr / arr.sum()


def generate_cohort(config: GeneratorConfig, seed: int | None = None) -> CohortDataset:
    """Draw a labeled cohort; (config, seed) fully determines the output."""
    config.validate()
    seed = config.master_seed if seed is None else seed
    n = config.n_patients
    rho = config.latent_rho
    rho_c = float(np.sqrt(1.0 - rho * rho))

    # exact-count labels in a seeded random arrangement
    n_pos = int(round(n * config.prevalence))
    label_rng = np.random.default_rng(np.random.SeedSequence([seed, _LABEL_STREAM]))
    labels_arr = np.zeros(n, dtype=bool)
    labels_arr[label_rng.permutation(n)[:n_pos]] = True

    # copula thresholds per class, on discordance-corrected generating rates
    m_disc = config.structured_discordance
    bin_fields = sorted(config.binary_conditionals)
    bin_thr = {}
    for f in bin_fields:
        q0, q1 = _corrected_pair(*config.binary_conditionals[f], m_disc)
        bin_thr[f] = (stats.norm.ppf(1.0 - q0), stats.norm.ppf(1.0 - q1))
    cat_fields = sorted(config.categorical_conditionals)
    cat_cuts = {}
    for f in cat_fields:
        levels, p0, p1 = config.categorical_conditionals[f]
        q0, q1 = _corrected_vector(p0, p1, m_disc)
        cat_cuts[f] = (tuple(levels),
                       stats.norm.ppf(np.cumsum(q0)[:-1]),
                       stats.norm.ppf(np.cumsum(q1)[:-1]))
    age_shift = ((config.age_mean[1] - config.age_mean[0])
                 / (1.0 - 2.0 * m_disc) if m_disc else
                 config.age_mean[1] - config.age_mean[0])
    age_sum = config.age_mean[0] + config.age_mean[1]
    age_gen_mean = ((age_sum - age_shift) / 2.0, (age_sum + age_shift) / 2.0)

    # outcome model intercepts per class
    truth = config.outcomes
    icu_alpha = tuple(_solve_logit_intercept(truth.icu_rate[c], truth.icu_or[c],
                                             config.vaccinated_rate[c]) for c in (0, 1))
    mort_alpha = tuple(_solve_logit_intercept(truth.mortality_rate[c], truth.mortality_or[c],
                                              config.vaccinated_rate[c]) for c in (0, 1))
    los_base = tuple(
        truth.los_mean[c] / ((1 - config.vaccinated_rate[c])
                             + config.vaccinated_rate[c] * truth.los_rr[c])
        for c in (0, 1))

    # lexicon
    bg_words = background_lexicon(config.background_lexicon_size)
    ranks = np.arange(1, len(bg_words) + 1, dtype=np.float64)
    bg_unit = _normalized(ranks ** (-config.zipf_exponent))
    signal_names = sorted(config.signal_terms)
    signal_base = np.array([config.signal_terms[t][0] for t in signal_names])
    signal_mult = np.array([config.signal_terms[t][1] for t in signal_names])
    # severity raises covid-direction terms and lowers the surgical-direction ones
    signal_sign = np.where(signal_mult >= 1.0, 1.0, -1.0)
    # treatment mentions mirror the (possibly discordant) structured state
    is_treatment = np.array([t in config.treatment_terms for t in signal_names])
    all_words = bg_words + signal_names
    note_types = [t for t, _ in _NOTE_TYPE_DIST]
    note_type_p = _normalized([p for _, p in _NOTE_TYPE_DIST])
    kappa = config.note_kappa

    records: list[StructuredRecord] = []
    notes_by_patient: dict[str, tuple[NoteDocument, ...]] = {}
    labels: dict[str, bool] = {}
    width = max(4, len(str(n)))
    for i in range(n):
        rng = np.random.default_rng(np.random.SeedSequence([seed, _PATIENT_STREAM, i]))
        cls = int(labels_arr[i])
        pid = f"p{i:0{width}d}"
        u = rng.standard_normal()
        discordant = bool(rng.random() < m_disc)
        cls_struct = 1 - cls if discordant else cls

        values: dict[str, object] = {"patient_id": pid}
        age = age_gen_mean[cls_struct] + config.age_sd * (rho * u + rho_c * rng.standard_normal())
        values["age_years"] = float(round(min(max(age, 18.0), 100.0), 1))
        for f in bin_fields:
            z = rho * u + rho_c * rng.standard_normal()
            values[f] = bool(z > bin_thr[f][cls_struct])
        for f in cat_fields:
            levels, cuts0, cuts1 = cat_cuts[f]
            z = rho * u + rho_c * rng.standard_normal()
            cuts = cuts1 if cls_struct else cuts0
            values[f] = levels[int(np.searchsorted(cuts, z))]

        vaccinated = bool(rng.random() < config.vaccinated_rate[cls])
        values["vaccinated"] = vaccinated
        vax = 1.0 if vaccinated else 0.0

        icu_p = 1.0 / (1.0 + np.exp(-(icu_alpha[cls] + np.log(truth.icu_or[cls]) * vax)))
        values["icu_transfer"] = bool(rng.random() < icu_p)
        mort_p = 1.0 / (1.0 + np.exp(-(mort_alpha[cls] + np.log(truth.mortality_or[cls]) * vax)))
        died = bool(rng.random() < mort_p)
        los_mean = los_base[cls] * (truth.los_rr[cls] if vaccinated else 1.0)
        values["length_of_stay_days"] = float(rng.poisson(los_mean))
        if died:
            values["discharge_disposition"] = "Dead"
        else:
            home_frac = truth.disposition_home[cls] / max(1e-9, 1.0 - truth.mortality_rate[cls])
            values["discharge_disposition"] = (
                "Home" if rng.random() < min(home_frac, 1.0) else "OtherFacility")

        records.append(StructuredRecord(**values))  # type: ignore[arg-type]
        labels[pid] = bool(cls)

        # notes: per-term rates get a unit-mean lognormal tilt exp(+/-k*u - k^2/2);
        # treatment terms follow the structured state, narrative terms the label
        tilt = np.exp(signal_sign * (kappa * u) - 0.5 * kappa * kappa)
        term_cls = np.where(is_treatment, cls_struct, cls)
        rates = signal_base * np.where(term_cls == 1, signal_mult, 1.0) * tilt
        rates = np.minimum(rates, 0.02)
        signal_mass = float(rates.sum())
        probs = np.concatenate([bg_unit * (1.0 - signal_mass), rates])
        n_notes = 1 + int(rng.poisson(config.notes_extra_mean))
        bundle = []
        for _ in range(n_notes):
            ntype = note_types[int(rng.choice(len(note_types), p=note_type_p))]
            length = int(rng.poisson(config.tokens_per_note_mean))
            token_ids = rng.choice(len(all_words), size=length, p=probs)
            text = " ".join(all_words[t] for t in token_ids)
            bundle.append(NoteDocument(patient_id=pid, note_type=ntype, text=text))
        notes_by_patient[pid] = tuple(bundle)

    return CohortDataset(records=tuple(records), notes_by_patient=notes_by_patient,
                         labels=labels)


@dataclass(frozen=True)
class CalibrationRow:
    name: str
    group: str   # "negative" | "positive"
    target: float
    observed: float
    delta: float
    tolerance: float  # 3 * SE
    flagged: bool


@dataclass(frozen=True)
class CalibrationReport:
    rows: tuple[CalibrationRow, ...]

    @property
    def flags(self) -> list[CalibrationRow]:
        return [r for r in self.rows if r.flagged]

    @property
    def passed(self) -> bool:
        return not self.flags

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "n_flags": len(self.flags),
            "rows": [asdict(r) for r in self.rows],
        }


def calibration_report(dataset: CohortDataset, config: GeneratorConfig) -> CalibrationReport:
    """Observed class-conditional rates vs config targets, flagged beyond 3 SE."""
    flags_y = np.array(dataset.label_vector(), dtype=bool)
    groups = {"negative": [r for r, f in zip(dataset.records, flags_y) if not f],
              "positive": [r for r, f in zip(dataset.records, flags_y) if f]}
    rows: list[CalibrationRow] = []

    def add_rate(name: str, group: str, target: float, observed: float, n_group: int):
        se = float(np.sqrt(max(target * (1.0 - target), 1e-12) / max(n_group, 1)))
        delta = observed - target
        rows.append(CalibrationRow(name=name, group=group, target=target,
                                   observed=observed, delta=delta,
                                   tolerance=3.0 * se, flagged=abs(delta) > 3.0 * se))

    for cls, group in (("negative", groups["negative"]), ("positive", groups["positive"])):
        ci = 0 if cls == "negative" else 1
        m = len(group)
        for f in sorted(config.binary_conditionals):
            observed = sum(1 for r in group if getattr(r, f)) / m
            add_rate(f, cls, config.binary_conditionals[f][ci], observed, m)
        for f in sorted(config.categorical_conditionals):
            levels, p0, p1 = config.categorical_conditionals[f]
            targets = _normalized(p1 if ci else p0)
            for level, target in zip(levels, targets):
                observed = sum(1 for r in group if getattr(r, f) == level) / m
                add_rate(f"{f}={level}", cls, float(target), observed, m)
        add_rate("vaccinated", cls, config.vaccinated_rate[ci],
                 sum(1 for r in group if r.vaccinated) / m, m)
        # continuous: compare means with a normal 3*SE band
        ages = np.array([r.age_years for r in group])
        se = float(ages.std(ddof=1) / np.sqrt(m)) if m > 1 else 1.0
        delta = float(ages.mean() - config.age_mean[ci])
        rows.append(CalibrationRow(name="age_years_mean", group=cls,
                                   target=config.age_mean[ci],
                                   observed=float(ages.mean()), delta=delta,
                                   tolerance=3.0 * se, flagged=abs(delta) > 3.0 * se))
    return CalibrationReport(rows=tuple(rows))


def config_to_dict(config: GeneratorConfig) -> dict:
    payload = asdict(config)
    payload["categorical_conditionals"] = {
        k: {"levels": list(v[0]), "negative": list(v[1]), "positive": list(v[2])}
        for k, v in config.categorical_conditionals.items()}
    return payload


def config_from_dict(payload: dict) -> GeneratorConfig:
    kwargs = dict(payload)
    if "categorical_conditionals" in kwargs:
        kwargs["categorical_conditionals"] = {
            k: (tuple(v["levels"]), tuple(v["negative"]), tuple(v["positive"]))
            for k, v in kwargs["categorical_conditionals"].items()}
    if "binary_conditionals" in kwargs:
        kwargs["binary_conditionals"] = {
            k: (float(v[0]), float(v[1])) for k, v in kwargs["binary_conditionals"].items()}
    if "signal_terms" in kwargs:
        kwargs["signal_terms"] = {
            k: (float(v[0]), float(v[1])) for k, v in kwargs["signal_terms"].items()}
    if "age_mean" in kwargs:
        kwargs["age_mean"] = tuple(kwargs["age_mean"])
    if "vaccinated_rate" in kwargs:
        kwargs["vaccinated_rate"] = tuple(kwargs["vaccinated_rate"])
    if "outcomes" in kwargs:
        out = kwargs["outcomes"]
        kwargs["outcomes"] = OutcomeTruth(**{k: tuple(v) for k, v in out.items()})
    return GeneratorConfig(**kwargs)


def save_config(config: GeneratorConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(config), indent=2, sort_keys=True))


def load_config(path: str | Path) -> GeneratorConfig:
    return config_from_dict(json.loads(Path(path).read_text()))
