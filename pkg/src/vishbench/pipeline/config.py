"""Run configuration: a versioned YAML document.

Relative paths resolve against the config file's directory.  See the
README for the full schema; unknown top-level keys are rejected so typos
do not pass silently.
"""
from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from ..attack import LlmBackendConfig, MockBackend, OpenAIChatBackend, Price, PromptTemplate, skeleton_template_path
from ..attack.generate import default_refusal_patterns, load_refusal_patterns
from ..classify import Algorithm, ClassifierSpec
from ..corpus import CleaningRules, Preprocessor, SplitSpec, TokenizerKind, load_stopwords
from ..errors import ConfigError
from ..semsim import HashEmbeddingProvider, HttpEmbeddingProvider, StaticEmbeddingProvider
from ..tfidf import TfidfConfig

CONFIG_VERSION = 1
_TOP_KEYS = {"version", "seed", "corpus", "split", "tfidf", "classifiers", "attack",
             "evaluation", "embeddings", "output"}


class Composition(str, enum.Enum):
    VISHING_ONLY = "vishing_only"
    MIXED_WITH_BENIGN = "mixed_with_benign"


def derive_seed(global_seed: int, phase: str) -> int:
    """Per-phase seed: first 8 bytes of sha256("<seed>:<phase>"), masked to 63 bits."""
    digest = hashlib.sha256(f"{global_seed}:{phase}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & ((1 << 63) - 1)


@dataclass
class BackendSpec:
    id: str
    kind: str
    options: dict = field(default_factory=dict)

    def build(self, global_seed: int, **kwargs):
        o = dict(self.options)
        if self.kind == "mock":
            seed = o.pop("seed", None)
            seed = derive_seed(global_seed, f"mock:{self.id}") if seed is None else int(seed)
            return MockBackend(seed, mode=o.pop("mode", "perturb"), every=int(o.pop("every", 8)),
                               latency_per_token=float(o.pop("latency_per_token", 0.001)), name=o.pop("model_name", None))
        if self.kind == "openai":
            price = Price(**(o.pop("price", None) or {}))
            return OpenAIChatBackend(LlmBackendConfig(price=price, **o), **kwargs)
        raise ConfigError(f"backend {self.id}: unknown kind {self.kind!r}")


@dataclass
class RunConfig:
    seed: int
    corpus_paths: list[Path]
    preprocessor: Preprocessor
    drop_duplicates: bool
    split_counts: tuple[int, int, int] | None
    split_fractions: tuple[float, float] | None
    split_seed: int
    tfidf: TfidfConfig
    classifiers: list[ClassifierSpec]
    backends: list[BackendSpec]
    template: PromptTemplate
    concurrency: int
    cache_dir: Path
    refusal_patterns: list[str]
    composition: Composition
    alpha: float
    embeddings: dict
    out_dir: Path
    diff_samples: int = 3
    hist_bin_width: float = 0.05
    raw: dict = field(default_factory=dict)

    def split_spec(self, n: int) -> SplitSpec:
        if self.split_counts is not None:
            return SplitSpec(*self.split_counts, seed=self.split_seed)
        tr, va = self.split_fractions
        return SplitSpec.from_fractions(n, tr, va, seed=self.split_seed)

    def embedding_provider(self):
        e = dict(self.embeddings)
        kind = e.pop("kind", "hash")
        if kind == "hash":
            seed = e.get("seed")
            seed = derive_seed(self.seed, "embeddings") if seed is None else int(seed)
            return HashEmbeddingProvider(int(e.get("dim", 64)), seed, bool(e.get("nonnegative", False)))
        if kind == "file":
            return StaticEmbeddingProvider.from_file(e["path"], oov_seed=int(e.get("seed") or 0))
        if kind == "http":
            import os
            key = os.environ.get(e["api_key_env"]) if e.get("api_key_env") else None
            return HttpEmbeddingProvider(e["base_url"], e.get("model"), key)
        raise ConfigError(f"unknown embeddings kind {kind!r}")

    def echo(self) -> dict:
        """The config as written (paths unresolved), for the report."""
        return self.raw


def _resolve(base: Path, p) -> Path:
    path = Path(p)
    return path if path.is_absolute() else (base / path)


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise ConfigError(f"{what} not found: {path}")
    return path


def parse_config(raw: dict, base_dir: str | Path = ".", *, seed: int | None = None,
                 out_dir: str | Path | None = None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if int(raw.get("version", CONFIG_VERSION)) != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {raw.get('version')}")
    base = Path(base_dir)
    gseed = int(seed if seed is not None else raw.get("seed", 0))

    c = raw.get("corpus") or {}
    paths = c.get("paths") or ([c["path"]] if "path" in c else [])
    if not paths:
        raise ConfigError("corpus.paths is required")
    corpus_paths = [_require(_resolve(base, p), "corpus file") for p in paths]
    stop = frozenset()
    if c.get("stopwords"):
        stop = load_stopwords(_require(_resolve(base, c["stopwords"]), "stop-word file"))
    fallback = c.get("fallback_tokenizer")
    pre = Preprocessor(
        rules=CleaningRules(**(c.get("cleaning") or {})),
        tokenizer=TokenizerKind(c.get("tokenizer", "whitespace")),
        ngram=int(c.get("ngram", 2)),
        stopwords=stop,
        fallback_tokenizer=TokenizerKind(fallback) if fallback else None,
    )

    s = raw.get("split") or {}
    counts = fractions = None
    if "fractions" in s:
        fr = s["fractions"]
        fractions = (float(fr["train"]), float(fr.get("val", 0.0)))
        if not (0 <= fractions[0] and 0 <= fractions[1] and sum(fractions) <= 1):
            raise ConfigError("split fractions must be non-negative and sum to at most 1")
    elif {"train", "val", "test"} <= set(s):
        counts = (int(s["train"]), int(s["val"]), int(s["test"]))
    else:
        raise ConfigError("split needs train/val/test counts or fractions")
    split_seed = derive_seed(gseed, "split") if s.get("seed") is None else int(s["seed"])

    t = raw.get("tfidf") or {}
    tcfg = TfidfConfig(int(t.get("min_doc_freq", 1)), bool(t.get("normalize", True)))

    specs = []
    for entry in raw.get("classifiers") or [{"algorithm": a.value} for a in Algorithm]:
        name = entry.get("name") or entry["algorithm"]
        cseed = entry.get("seed")
        cseed = derive_seed(gseed, f"classifier:{name}") if cseed is None else int(cseed)
        specs.append(ClassifierSpec(entry["algorithm"], entry.get("hyperparams") or {}, cseed, entry.get("name")))
    if not specs:
        raise ConfigError("at least one classifier is required")
    labels = [sp.label for sp in specs]
    if len(set(labels)) != len(labels):
        raise ConfigError("classifier names must be unique")

    a = raw.get("attack") or {}
    backends = []
    for entry in a.get("backends") or []:
        entry = dict(entry)
        bid, kind = entry.pop("id", None), entry.pop("kind", None)
        if not bid or not kind:
            raise ConfigError("each backend needs an id and a kind")
        backends.append(BackendSpec(str(bid), kind, entry))
    if not backends:
        raise ConfigError("at least one attack backend is required")
    if len({b.id for b in backends}) != len(backends):
        raise ConfigError("backend ids must be unique")
    tpath = _resolve(base, a["template"]) if a.get("template") else skeleton_template_path()
    template = PromptTemplate.from_file(_require(tpath, "template"))
    if a.get("refusal_patterns"):
        refusals = load_refusal_patterns(_require(_resolve(base, a["refusal_patterns"]), "refusal pattern file"))
    else:
        refusals = default_refusal_patterns()

    ev = raw.get("evaluation") or {}
    emb = dict(raw.get("embeddings") or {"kind": "hash"})
    if emb.get("kind") == "file":
        emb["path"] = _require(_resolve(base, emb["path"]), "embedding file")

    o = raw.get("output") or {}
    out = Path(out_dir) if out_dir is not None else _resolve(base, o.get("dir", "run"))
    cache_dir = _resolve(out, a.get("cache_dir", "cache"))

    return RunConfig(
        seed=gseed,
        corpus_paths=corpus_paths,
        preprocessor=pre,
        drop_duplicates=bool(c.get("drop_duplicates", True)),
        split_counts=counts,
        split_fractions=fractions,
        split_seed=split_seed,
        tfidf=tcfg,
        classifiers=specs,
        backends=backends,
        template=template,
        concurrency=int(a.get("concurrency", 4)),
        cache_dir=cache_dir,
        refusal_patterns=refusals,
        composition=Composition(ev.get("composition", Composition.VISHING_ONLY.value)),
        alpha=float(ev.get("alpha", 0.05)),
        embeddings=emb,
        out_dir=out,
        diff_samples=int(o.get("diff_samples", 3)),
        hist_bin_width=float(o.get("hist_bin_width", 0.05)),
        raw=raw,
    )


def load_config(path: str | Path, *, seed: int | None = None, out_dir: str | Path | None = None) -> RunConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(raw, path.parent, seed=seed, out_dir=out_dir)


def config_to_yaml(raw: dict[str, Any]) -> str:
    return yaml.safe_dump(raw, sort_keys=False, allow_unicode=True)
