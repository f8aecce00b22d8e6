"""Bag-of-words TF-IDF vectorizer over pre-tokenized documents."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import FitError, ShapeError

FORMAT_VERSION = 1


@dataclass(frozen=True)
class TfidfConfig:
    min_doc_freq: int = 1
    normalize: bool = True
    # recorded in the model file so runs are self-describing
    tf: str = "raw"
    idf: str = "smooth"


@dataclass(frozen=True, eq=False)
class SparseFeatureVector:
    indices: np.ndarray
    values: np.ndarray
    dimension: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.shape != val.shape:
            raise ShapeError("indices and values differ in length")
        if idx.size:
            if np.any(np.diff(idx) <= 0):
                raise ShapeError("indices must be strictly increasing")
            if idx[0] < 0 or idx[-1] >= self.dimension:
                raise ShapeError("index out of range")
        keep = val != 0.0
        object.__setattr__(self, "indices", idx[keep])
        object.__setattr__(self, "values", val[keep])

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseFeatureVector):
            return NotImplemented
        return (self.dimension == other.dimension and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.values, other.values))

    __hash__ = None

    @property
    def entries(self) -> list[tuple[int, float]]:
        return list(zip(self.indices.tolist(), self.values.tolist()))

    def norm(self) -> float:
        return float(np.sqrt(np.dot(self.values, self.values)))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dimension)
        out[self.indices] = self.values
        return out

    @classmethod
    def from_dense(cls, row: Sequence[float]) -> "SparseFeatureVector":
        arr = np.asarray(row, dtype=np.float64)
        nz = np.flatnonzero(arr)
        return cls(nz, arr[nz], arr.size)


def stack(vectors: Sequence[SparseFeatureVector]) -> sp.csr_matrix:
    """Stack feature vectors into a CSR matrix, checking dimensions agree."""
    if not vectors:
        raise ShapeError("no vectors to stack")
    dims = {v.dimension for v in vectors}
    if len(dims) != 1:
        raise ShapeError(f"mixed feature dimensions {sorted(dims)}")
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([v.indices.size for v in vectors])
    indices = np.concatenate([v.indices for v in vectors]) if indptr[-1] else np.zeros(0, np.int64)
    data = np.concatenate([v.values for v in vectors]) if indptr[-1] else np.zeros(0)
    return sp.csr_matrix((data, indices, indptr), shape=(len(vectors), dims.pop()))


def unstack(matrix) -> list[SparseFeatureVector]:
    m = sp.csr_matrix(matrix)
    m.sort_indices()
    return [
        SparseFeatureVector(m.indices[m.indptr[i]:m.indptr[i + 1]], m.data[m.indptr[i]:m.indptr[i + 1]], m.shape[1])
        for i in range(m.shape[0])
    ]


@dataclass(frozen=True)
class TfidfModel:
    vocabulary: dict[str, int]
    idf: np.ndarray
    doc_count: int
    config: TfidfConfig = field(default_factory=TfidfConfig)

    @property
    def dimension(self) -> int:
        return len(self.vocabulary)

    def transform(self, tokens: Sequence[str]) -> SparseFeatureVector:
        return transform(tokens, self)

    def transform_many(self, docs: Iterable[Sequence[str]]) -> sp.csr_matrix:
        return stack([transform(d, self) for d in docs])

    def save(self, path: str | Path) -> None:
        save_model(self, path)

    @classmethod
    def load(cls, path: str | Path) -> "TfidfModel":
        return load_model(path)


def fit(train_docs: Sequence[Sequence[str]], config: TfidfConfig = TfidfConfig()) -> TfidfModel:
    """Learn vocabulary and smoothed idf, ``ln((1 + N) / (1 + df)) + 1``."""
    if not any(len(d) for d in train_docs):
        raise FitError("every training document is empty")
    if config.min_doc_freq < 1:
        raise FitError("min_doc_freq must be >= 1")
    n_docs = len(train_docs)
    df = Counter()
    for doc in train_docs:
        df.update(set(doc))
    # sorted vocabulary keeps feature indices independent of document order
    kept = sorted(t for t, c in df.items() if c >= config.min_doc_freq)
    if not kept:
        raise FitError("min_doc_freq removed every token")
    vocab = {t: i for i, t in enumerate(kept)}
    idf = np.array([math.log((1 + n_docs) / (1 + df[t])) + 1.0 for t in kept])
    return TfidfModel(vocab, idf, n_docs, config)


def transform(tokens: Sequence[str], model: TfidfModel) -> SparseFeatureVector:
    counts = Counter(t for t in tokens if t in model.vocabulary)
    if not counts:
        return SparseFeatureVector(np.zeros(0, np.int64), np.zeros(0), model.dimension)
    idx = np.array(sorted(model.vocabulary[t] for t in counts), dtype=np.int64)
    inv = {model.vocabulary[t]: c for t, c in counts.items()}
    weights = np.array([inv[i] for i in idx], dtype=np.float64) * model.idf[idx]
    if model.config.normalize:
        weights = weights / np.sqrt(np.dot(weights, weights))
    return SparseFeatureVector(idx, weights, model.dimension)


# -- persistence --------------------------------------------------------------
# Layout (UTF-8, tab separated):
#   #vishbench-tfidf <version>
#   dimension <d>  doc_count <N>  min_doc_freq <m>  normalize <0|1>  tf <..>  idf <..>
#   token<TAB>index<TAB>idf      (one row per feature, idf in repr form)

def save_model(model: TfidfModel, path: str | Path) -> None:
    c = model.config
    lines = [
        f"#vishbench-tfidf\t{FORMAT_VERSION}",
        "\t".join([
            "dimension", str(model.dimension), "doc_count", str(model.doc_count),
            "min_doc_freq", str(c.min_doc_freq), "normalize", str(int(c.normalize)),
            "tf", c.tf, "idf", c.idf,
        ]),
    ]
    for tok, i in sorted(model.vocabulary.items(), key=lambda kv: kv[1]):
        if "\t" in tok or "\n" in tok:
            raise ValueError(f"token {tok!r} cannot be stored in the tab-separated layout")
        lines.append(f"{tok}\t{i}\t{float(model.idf[i])!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> TfidfModel:
    rows = Path(path).read_text(encoding="utf-8").split("\n")
    magic, version = rows[0].split("\t")
    if magic != "#vishbench-tfidf" or int(version) != FORMAT_VERSION:
        raise ValueError(f"{path}: not a version {FORMAT_VERSION} TF-IDF model")
    header = rows[1].split("\t")
    meta = dict(zip(header[::2], header[1::2]))
    dim = int(meta["dimension"])
    vocab: dict[str, int] = {}
    idf = np.zeros(dim)
    for row in rows[2:]:
        if not row:
            continue
        tok, i, w = row.split("\t")
        vocab[tok] = int(i)
        idf[int(i)] = float(w)
    if len(vocab) != dim:
        raise ValueError(f"{path}: header says {dim} features, found {len(vocab)}")
    config = TfidfConfig(int(meta["min_doc_freq"]), bool(int(meta["normalize"])), meta["tf"], meta["idf"])
    return TfidfModel(vocab, idf, int(meta["doc_count"]), config)
