"""Note text to sparse TF-IDF features.

The document unit is one patient: all of a patient's notes are tokenized,
stemmed, and concatenated into a single token list. Vocabulary and IDF
weights are fit on a training subset only, so cross-validation folds stay
isolated by construction.

TF-IDF variant: raw term count times smoothed IDF, then L2 row
normalization. Smoothing and normalization are both configurable
(``smooth=False`` gives ``ln(N/df) + 1``; ``normalize=False`` leaves raw
count-times-IDF weights). Whether the source analysis used raw counts or
frequencies is not recoverable; raw counts are the documented default.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from .errors import BadConfig, EmptyVocabulary
from .ingest import NoteDocument
from .stemming import stem_tokens

# Fixed English stop-word list (~150 function words), pinned for determinism.
STOP_WORDS = frozenset("""
a about above after again against all almost also am an and any are as at
be because been before being below between both but by can cannot could
did do does doing down during each either few for from further had has
have having he her here hers herself him himself his how however i if in
into is it its itself just may me might more most must my myself neither
no nor not now of off on once only or other ought our ours ourselves out
over own per same shall she should since so some such than that the their
theirs them themselves then there therefore these they this those through
thus to too under until up upon very was we were what when where whether
which while who whom why will with within without would you your yours
yourself yourselves
""".split())

_TOKEN_RE = re.compile(r"[a-z]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on anything that is not an ASCII letter.

    Tokens shorter than two characters and stop words are dropped.
    """
    return [t for t in _TOKEN_RE.findall(text.lower())
            if len(t) >= 2 and t not in STOP_WORDS]


def concat_notes(notes: list[NoteDocument] | tuple[NoteDocument, ...]) -> list[str]:
    """Tokenize and stem each note, concatenated in stored order."""
    tokens: list[str] = []
    for note in notes:
        tokens.extend(stem_tokens(tokenize(note.text)))
    return tokens


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[str, ...]
    term_index: dict[str, int]
    total_counts: dict[str, int]
    min_count: int

    def __len__(self) -> int:
        return len(self.terms)


@dataclass(frozen=True)
class TfidfModel:
    vocabulary: Vocabulary
    idf: np.ndarray
    n_docs_fit: int
    smooth: bool = True


@dataclass(frozen=True)
class DocTermMatrix:
    row_ids: tuple[str, ...]
    terms: tuple[str, ...]
    matrix: sparse.csr_matrix

    def entries(self) -> list[tuple[int, int, float]]:
        coo = self.matrix.tocoo()
        return list(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))


def fit_vocabulary(docs: list[list[str]], min_count: int = 50) -> Vocabulary:
    """Retain terms whose total occurrence count across ``docs`` is >= min_count."""
    if min_count < 1:
        raise BadConfig(f"min_count must be >= 1, got {min_count}")
    counts: Counter[str] = Counter()
    for doc in docs:
        counts.update(doc)
    kept = sorted(t for t, c in counts.items() if c >= min_count)
    if not kept:
        raise EmptyVocabulary(
            f"no term reached min_count={min_count} across {len(docs)} documents")
    return Vocabulary(terms=tuple(kept),
                      term_index={t: i for i, t in enumerate(kept)},
                      total_counts={t: counts[t] for t in kept},
                      min_count=min_count)


def fit_tfidf(docs: list[list[str]], vocab: Vocabulary, *, smooth: bool = True) -> TfidfModel:
    """Compute per-term IDF weights on the supplied (training) documents."""
    n_docs = len(docs)
    df = np.zeros(len(vocab.terms), dtype=np.int64)
    for doc in docs:
        seen = set(doc)
        for term in seen:
            idx = vocab.term_index.get(term)
            if idx is not None:
                df[idx] += 1
    if smooth:
        idf = np.log((1.0 + n_docs) / (1.0 + df)) + 1.0
    else:
        idf = np.log(n_docs / np.maximum(df, 1)) + 1.0
    return TfidfModel(vocabulary=vocab, idf=idf, n_docs_fit=n_docs, smooth=smooth)


def transform(
    model: TfidfModel,
    docs: list[list[str]],
    *,
    row_ids: list[str] | tuple[str, ...] | None = None,
    normalize: bool = True,
) -> DocTermMatrix:
    """Weight each document by count(term) * idf and L2-normalize nonzero rows.

    Out-of-vocabulary tokens are ignored; empty or all-OOV documents produce
    all-zero rows.
    """
    index = model.vocabulary.term_index
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for doc in docs:
        counts: Counter[str] = Counter(doc)
        cols = sorted(index[t] for t in counts if t in index)
        row = np.fromiter((counts[model.vocabulary.terms[c]] for c in cols),
                          dtype=np.float64, count=len(cols))
        weights = row * model.idf[cols] if cols else row
        if normalize and len(cols):
            norm = float(np.sqrt(np.sum(weights * weights)))
            if norm > 0.0:
                weights = weights / norm
        indices.extend(cols)
        data.extend(weights.tolist())
        indptr.append(len(indices))
    matrix = sparse.csr_matrix(
        (np.asarray(data, dtype=np.float64),
         np.asarray(indices, dtype=np.int32),
         np.asarray(indptr, dtype=np.int32)),
        shape=(len(docs), len(model.vocabulary.terms)))
    if row_ids is None:
        row_ids = tuple(str(i) for i in range(len(docs)))
    return DocTermMatrix(row_ids=tuple(row_ids),
                         terms=model.vocabulary.terms,
                         matrix=matrix)


def model_to_dict(model: TfidfModel) -> dict:
    return {
        "terms": list(model.vocabulary.terms),
        "total_counts": [model.vocabulary.total_counts[t] for t in model.vocabulary.terms],
        "min_count": model.vocabulary.min_count,
        "idf": [float(v) for v in model.idf],
        "n_docs_fit": model.n_docs_fit,
        "smooth": model.smooth,
    }


def model_from_dict(payload: dict) -> TfidfModel:
    terms = tuple(payload["terms"])
    vocab = Vocabulary(terms=terms,
                       term_index={t: i for i, t in enumerate(terms)},
                       total_counts=dict(zip(terms, payload["total_counts"])),
                       min_count=int(payload["min_count"]))
    return TfidfModel(vocabulary=vocab,
                      idf=np.asarray(payload["idf"], dtype=np.float64),
                      n_docs_fit=int(payload["n_docs_fit"]),
                      smooth=bool(payload.get("smooth", True)))


def save_model(model: TfidfModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2, sort_keys=True))


def load_model(path: str | Path) -> TfidfModel:
    return model_from_dict(json.loads(Path(path).read_text()))
