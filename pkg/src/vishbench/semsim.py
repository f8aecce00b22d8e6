"""Greedy-matching BERTScore over pluggable token embeddings."""
from __future__ import annotations

import hashlib
import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence, runtime_checkable

import httpx
import numpy as np

from .corpus import Transcript
from .errors import AlignmentError, ProviderError, UndefinedScoreError

log = logging.getLogger(__name__)


@runtime_checkable
class EmbeddingProvider(Protocol):
    dim: int
    thread_safe: bool

    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        """Return a ``(len(tokens), dim)`` array."""


def _hash_vector(token: str, dim: int, seed: int, nonnegative: bool) -> np.ndarray:
    digest = hashlib.blake2b(f"{seed}\x00{token}".encode("utf-8"), digest_size=8).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    v = rng.standard_normal(dim)
    return np.abs(v) if nonnegative else v


class HashEmbeddingProvider:
    """Deterministic pseudo-random vector per token, for tests and offline runs."""

    thread_safe = True

    def __init__(self, dim: int = 64, seed: int = 0, nonnegative: bool = False):
        self.dim, self.seed, self.nonnegative = dim, seed, nonnegative

    def embed(self, tokens):
        if not tokens:
            return np.zeros((0, self.dim))
        return np.vstack([_hash_vector(t, self.dim, self.seed, self.nonnegative) for t in tokens])


class StaticEmbeddingProvider:
    """Token table loaded from a text file.

    File layout: a ``dim N`` header, then ``token<TAB>v1 v2 ... vN`` per line.
    Tokens missing from the table get a seeded hash vector and are recorded
    in ``oov_tokens``.
    """

    thread_safe = True

    def __init__(self, table: dict[str, np.ndarray], dim: int, oov_seed: int = 0):
        self.table, self.dim, self.oov_seed = table, dim, oov_seed
        self.oov_tokens: set[str] = set()
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path, oov_seed: int = 0) -> "StaticEmbeddingProvider":
        with open(path, encoding="utf-8") as fh:
            head = fh.readline().split()
            if len(head) != 2 or head[0] != "dim":
                raise ProviderError(f"{path}: first line must be 'dim N'")
            dim = int(head[1])
            table = {}
            for lineno, line in enumerate(fh, 2):
                line = line.rstrip("\n")
                if not line:
                    continue
                tok, _, rest = line.partition("\t")
                vec = np.array([float(x) for x in rest.split()])
                if vec.size != dim:
                    raise ProviderError(f"{path}:{lineno}: expected {dim} values, got {vec.size}")
                table[tok] = vec
        return cls(table, dim, oov_seed)

    def embed(self, tokens):
        rows = []
        for t in tokens:
            v = self.table.get(t)
            if v is None:
                with self._lock:
                    self.oov_tokens.add(t)
                v = _hash_vector(t, self.dim, self.oov_seed, False)
            rows.append(v)
        return np.vstack(rows) if rows else np.zeros((0, self.dim))


class HttpEmbeddingProvider:
    """Remote ``POST {base_url}/embeddings`` with ``{"input": [tokens]}``."""

    thread_safe = True

    def __init__(self, base_url: str, model: str | None = None, api_key: str | None = None,
                 timeout: float = 30.0, transport: httpx.BaseTransport | None = None):
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.client = httpx.Client(timeout=timeout, headers=headers, transport=transport)
        self.dim = 0

    def embed(self, tokens):
        body = {"input": list(tokens)}
        if self.model:
            body["model"] = self.model
        try:
            resp = self.client.post(f"{self.base_url}/embeddings", json=body)
            resp.raise_for_status()
            data = resp.json()["data"]
            vecs = np.array([row["embedding"] for row in data], dtype=np.float64)
        except (httpx.HTTPError, KeyError, TypeError, ValueError) as exc:
            raise ProviderError(f"embedding request failed: {exc}") from exc
        if vecs.ndim != 2 or vecs.shape[0] != len(tokens):
            raise ProviderError("embedding response does not match the request")
        if self.dim and vecs.shape[1] != self.dim:
            raise ProviderError(f"dimension changed from {self.dim} to {vecs.shape[1]}")
        self.dim = vecs.shape[1]
        return vecs


@dataclass(frozen=True)
class SemScore:
    precision: float
    recall: float
    f1: float

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


def harmonic_f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r != 0 else 0.0


def _unit_rows(E: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(E)):
        raise ProviderError("embedding contains NaN or inf")
    norms = np.linalg.norm(E, axis=1)
    if np.any(norms == 0):
        raise ProviderError("zero-norm embedding vector")
    return E / norms[:, None]


def similarity_matrix(ref_vecs: np.ndarray, cand_vecs: np.ndarray) -> np.ndarray:
    """Cosine similarities, shape ``(len(ref), len(cand))``."""
    if ref_vecs.shape[1] != cand_vecs.shape[1]:
        raise ProviderError(f"embedding dimensions differ: {ref_vecs.shape[1]} vs {cand_vecs.shape[1]}")
    sim = np.clip(_unit_rows(ref_vecs) @ _unit_rows(cand_vecs).T, -1.0, 1.0)
    # identical vectors have cosine exactly 1; keep rounding noise out of that case
    _, ids = np.unique(np.vstack([ref_vecs, cand_vecs]), axis=0, return_inverse=True)
    ids = ids.ravel()
    sim[ids[: len(ref_vecs), None] == ids[None, len(ref_vecs):]] = 1.0
    return sim


def bertscore(ref_tokens: Sequence[str], cand_tokens: Sequence[str], provider: EmbeddingProvider) -> SemScore:
    """Precision averages each candidate token's best match in the reference;
    recall averages each reference token's best match in the candidate."""
    if not ref_tokens or not cand_tokens:
        raise UndefinedScoreError("BERTScore needs non-empty token lists on both sides")
    sim = similarity_matrix(provider.embed(ref_tokens), provider.embed(cand_tokens))
    precision = float(sim.max(axis=0).mean())
    recall = float(sim.max(axis=1).mean())
    return SemScore(precision, recall, harmonic_f1(precision, recall))


@dataclass
class Histogram:
    bin_width: float
    edges: list[float]
    counts: list[int]
    below_range: int = 0

    def to_csv(self) -> str:
        lines = ["bin_low,bin_high,count"]
        for lo, hi, c in zip(self.edges, self.edges[1:], self.counts):
            lines.append(f"{lo:.4f},{hi:.4f},{c}")
        if self.below_range:
            lines.append(f"-inf,{self.edges[0]:.4f},{self.below_range}")
        return "\n".join(lines) + "\n"


def f1_histogram(values: Sequence[float], bin_width: float = 0.05) -> Histogram:
    """Bins over [0, 1], the last bin closed on the right; negatives counted separately."""
    n_bins = int(math.ceil(1.0 / bin_width - 1e-9))
    edges = [round(i * bin_width, 10) for i in range(n_bins)] + [1.0]
    counts = [0] * n_bins
    below = 0
    for v in values:
        if v < 0:
            below += 1
            continue
        i = min(int(v / bin_width + 1e-12), n_bins - 1)
        counts[i] += 1
    return Histogram(bin_width, edges, counts, below)


@dataclass
class CorpusScores:
    ids: list[str]
    scores: list[SemScore]
    histogram: Histogram
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        lines = ["id,precision,recall,f1"]
        for i, s in zip(self.ids, self.scores):
            lines.append(f"{i},{s.precision:.6f},{s.recall:.6f},{s.f1:.6f}")
        return "\n".join(lines) + "\n"


def score_corpus(
    pairs: Sequence[tuple[Transcript, Transcript]],
    provider: EmbeddingProvider,
    *,
    bin_width: float = 0.05,
    workers: int = 1,
) -> CorpusScores:
    """Score aligned (original, adversarial) pairs.

    Token lists come from ``Transcript.tokens`` when present, else a
    whitespace split.  Scoring runs in parallel only for providers that
    declare ``thread_safe``.
    """
    jobs = []
    for orig, adv in pairs:
        if orig.id != adv.id:
            raise AlignmentError(f"pair ids differ: {orig.id!r} vs {adv.id!r}")
        ref = list(orig.tokens) if orig.tokens is not None else orig.text.split()
        cand = list(adv.tokens) if adv.tokens is not None else adv.text.split()
        jobs.append((ref, cand))
    ids = [o.id for o, _ in pairs]
    if workers > 1 and getattr(provider, "thread_safe", False):
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(lambda rc: bertscore(rc[0], rc[1], provider), jobs))
    else:
        scores = [bertscore(r, c, provider) for r, c in jobs]
    meta = {"idf_weighting": False, "baseline_rescaling": False}
    return CorpusScores(ids, scores, f1_histogram([s.f1 for s in scores], bin_width), meta)
