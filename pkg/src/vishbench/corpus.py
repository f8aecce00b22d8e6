"""Transcript ingestion, cleaning, tokenization and seeded splitting."""
from __future__ import annotations

import csv
import enum
import json
import logging
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, CorpusError, MissingTokensError

log = logging.getLogger(__name__)


class Label(enum.IntEnum):
    BENIGN = 0
    VISHING = 1

    @classmethod
    def parse(cls, value) -> "Label":
        if isinstance(value, Label):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value))
        text = str(value).strip().lower()
        if text in ("vishing", "1", "scam", "phishing"):
            return cls.VISHING
        if text in ("benign", "0", "normal"):
            return cls.BENIGN
        raise CorpusError(f"unknown label {value!r}")

    @property
    def tag(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class Transcript:
    id: str
    text: str
    label: Label
    tokens: tuple[str, ...] | None = None
    # None means the transcript is an original; otherwise the attacker that produced it.
    attacker_id: str | None = None

    def __post_init__(self):
        if not self.id:
            raise CorpusError("transcript id must be non-empty")
        if self.tokens is not None:
            if any(not t for t in self.tokens):
                raise CorpusError(f"transcript {self.id}: empty token in pre-supplied tokens")

    @property
    def source(self) -> str:
        return "original" if self.attacker_id is None else f"adversarial:{self.attacker_id}"

    def to_dict(self) -> dict:
        out = {"id": self.id, "text": self.text, "label": self.label.tag}
        if self.tokens is not None:
            out["tokens"] = list(self.tokens)
        if self.attacker_id is not None:
            out["attacker_id"] = self.attacker_id
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "Transcript":
        try:
            tid, text, label = obj["id"], obj["text"], obj["label"]
        except KeyError as exc:
            raise CorpusError(f"record missing field {exc}") from None
        tokens = obj.get("tokens")
        return cls(
            id=str(tid),
            text=str(text),
            label=Label.parse(label),
            tokens=tuple(str(t) for t in tokens) if tokens is not None else None,
            attacker_id=obj.get("attacker_id"),
        )


@dataclass(frozen=True)
class Corpus:
    transcripts: tuple[Transcript, ...]

    def __post_init__(self):
        object.__setattr__(self, "transcripts", tuple(self.transcripts))
        seen = set()
        for t in self.transcripts:
            if t.id in seen:
                raise CorpusError(f"duplicate transcript id {t.id!r}")
            seen.add(t.id)

    def __len__(self) -> int:
        return len(self.transcripts)

    def __iter__(self):
        return iter(self.transcripts)

    def __getitem__(self, i):
        return self.transcripts[i]

    @property
    def class_counts(self) -> dict[Label, int]:
        counts = Counter(t.label for t in self.transcripts)
        return {lab: counts.get(lab, 0) for lab in Label}

    @property
    def ids(self) -> list[str]:
        return [t.id for t in self.transcripts]

    def labels(self) -> np.ndarray:
        return np.array([int(t.label) for t in self.transcripts], dtype=np.int64)

    def by_label(self, label: Label) -> "Corpus":
        return Corpus(tuple(t for t in self.transcripts if t.label == label))


# -- cleaning -----------------------------------------------------------------

PHONE_RE = re.compile(r"\d+(?:-\d+)+")


@dataclass(frozen=True)
class CleaningRules:
    remove_phone_numbers: bool = True
    remove_digits: bool = True
    remove_punctuation: bool = True
    lowercase: bool = False


def _is_number(ch: str) -> bool:
    return unicodedata.category(ch).startswith("N")


def _is_punct_or_symbol(ch: str) -> bool:
    return unicodedata.category(ch)[0] in "PS"


def clean_text(raw: str, rules: CleaningRules = CleaningRules()) -> str:
    """Strip phone numbers, digits and punctuation, then collapse whitespace.

    Digits are deleted in place (``"a1b2"`` becomes ``"ab"``) while phone
    numbers and punctuation become spaces so neighbouring words stay apart.
    """
    text = raw
    if rules.remove_phone_numbers:
        text = PHONE_RE.sub(" ", text)
    if rules.remove_digits:
        text = "".join(ch for ch in text if not _is_number(ch))
    if rules.remove_punctuation:
        text = "".join(" " if _is_punct_or_symbol(ch) else ch for ch in text)
    if rules.lowercase:
        text = text.lower()
    return " ".join(text.split())


# -- tokenization -------------------------------------------------------------

class TokenizerKind(str, enum.Enum):
    WHITESPACE = "whitespace"
    CHAR_NGRAM = "char_ngram"
    PASSTHROUGH = "passthrough"


def char_ngrams(word: str, n: int) -> list[str]:
    # words shorter than n are kept whole so they are not silently lost
    if len(word) <= n:
        return [word] if word else []
    return [word[i:i + n] for i in range(len(word) - n + 1)]


def tokenize(
    cleaned: str,
    tokenizer: TokenizerKind | str = TokenizerKind.WHITESPACE,
    *,
    ngram: int = 2,
    tokens: Sequence[str] | None = None,
) -> list[str]:
    kind = TokenizerKind(tokenizer)
    if kind is TokenizerKind.PASSTHROUGH:
        if tokens is None:
            raise MissingTokensError("passthrough tokenizer needs pre-supplied tokens")
        return list(tokens)
    words = cleaned.split()
    if kind is TokenizerKind.WHITESPACE:
        return words
    if ngram < 1:
        raise ConfigError("ngram must be >= 1")
    out: list[str] = []
    for w in words:
        out.extend(char_ngrams(w, ngram))
    return out


def load_stopwords(path: str | Path) -> frozenset[str]:
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            tok = line.strip()
            if tok and not tok.startswith("#"):
                words.add(tok)
    return frozenset(words)


def remove_stopwords(tokens: Sequence[str], stoplist: Iterable[str]) -> list[str]:
    stop = stoplist if isinstance(stoplist, (set, frozenset)) else set(stoplist)
    return [t for t in tokens if t not in stop]


# -- ingestion ----------------------------------------------------------------

def _read_jsonl(path: Path) -> list[Transcript]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            out.append(Transcript.from_dict(obj))
    return out


def _read_csv(path: Path) -> list[Transcript]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"id", "text", "label"} - set(reader.fieldnames or ())
        if missing:
            raise CorpusError(f"{path}: missing columns {sorted(missing)}")
        return [Transcript.from_dict(row) for row in reader]


def load_corpus(*paths: str | Path) -> Corpus:
    """Read one or more JSON-Lines / CSV files into a single corpus."""
    transcripts: list[Transcript] = []
    for p in paths:
        p = Path(p)
        if p.suffix.lower() == ".csv":
            transcripts.extend(_read_csv(p))
        else:
            transcripts.extend(_read_jsonl(p))
    for t in transcripts:
        if not t.text.strip():
            raise CorpusError(f"transcript {t.id}: empty text")
    return Corpus(tuple(transcripts))


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in corpus:
            fh.write(json.dumps(t.to_dict(), ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class Preprocessor:
    """Bundle of the cleaning + tokenization settings applied to every text.

    The same instance must be used for training data and for adversarial
    outputs, otherwise accuracy drops measure preprocessing drift.
    """

    rules: CleaningRules = CleaningRules()
    tokenizer: TokenizerKind = TokenizerKind.WHITESPACE
    ngram: int = 2
    stopwords: frozenset[str] = field(default_factory=frozenset)
    # used when the primary tokenizer is passthrough and a text carries no tokens
    fallback_tokenizer: TokenizerKind | None = None

    def tokens_for(self, t: Transcript) -> list[str]:
        cleaned = clean_text(t.text, self.rules)
        kind = self.tokenizer
        if kind is TokenizerKind.PASSTHROUGH and t.tokens is None and self.fallback_tokenizer:
            kind = self.fallback_tokenizer
        toks = tokenize(cleaned, kind, ngram=self.ngram, tokens=t.tokens)
        return remove_stopwords(toks, self.stopwords)

    def apply(self, t: Transcript) -> Transcript:
        return replace(t, text=clean_text(t.text, self.rules), tokens=tuple(self.tokens_for(t)))


def preprocess(corpus: Corpus, pre: Preprocessor, *, drop_duplicates: bool = True) -> Corpus:
    """Clean and tokenize every transcript, dropping empties and duplicates."""
    out = []
    seen: dict[str, str] = {}
    for t in corpus:
        p = pre.apply(t)
        if not p.text and not p.tokens:
            log.warning("transcript %s is empty after cleaning; dropped", t.id)
            continue
        if drop_duplicates:
            if p.text in seen:
                log.warning("transcript %s duplicates %s after cleaning; dropped", t.id, seen[p.text])
                continue
            seen[p.text] = t.id
        out.append(p)
    return Corpus(tuple(out))


# -- splitting ----------------------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    train_count: int
    val_count: int
    test_count: int
    seed: int = 0

    @property
    def total(self) -> int:
        return self.train_count + self.val_count + self.test_count

    @classmethod
    def from_fractions(cls, n: int, train: float, val: float, seed: int = 0) -> "SplitSpec":
        n_val = int(round(n * val))
        n_train = int(round(n * train))
        return cls(n_train, n_val, n - n_train - n_val, seed)


def split_corpus(corpus: Corpus, spec: SplitSpec) -> tuple[Corpus, Corpus, Corpus]:
    """Partition ``corpus`` with a PCG64 permutation seeded by ``spec.seed``.

    Each part keeps the original corpus order, so the result depends only
    on corpus order and seed.
    """
    counts = (spec.train_count, spec.val_count, spec.test_count)
    if min(counts) < 0:
        raise ConfigError("split counts must be non-negative")
    if spec.total != len(corpus):
        raise ConfigError(f"split counts sum to {spec.total}, corpus has {len(corpus)} transcripts")
    perm = np.random.Generator(np.random.PCG64(spec.seed)).permutation(len(corpus))
    a, b = spec.train_count, spec.train_count + spec.val_count
    parts = (np.sort(perm[:a]), np.sort(perm[a:b]), np.sort(perm[b:]))
    ts = corpus.transcripts
    return tuple(Corpus(tuple(ts[i] for i in idx)) for idx in parts)  # type: ignore[return-value]
