"""Generation records, the on-disk cache, and (batched) generation."""
from __future__ import annotations

import hashlib
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from ..errors import GenerationError, VishbenchError
from .backends import Backend
from .prompt import prompt_hash

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GenerationRecord:
    transcript_id: str
    attacker_id: str
    model_name: str
    prompt_hash: str
    output_text: str
    prompt_tokens: int
    completion_tokens: int
    latency: float
    cost: float
    refusal_flag: bool
    timestamp: str
    # runtime marker only; never serialized
    cached: bool = field(default=False, compare=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("cached")
        return d

    @classmethod
    def from_dict(cls, obj: dict) -> "GenerationRecord":
        obj = {k: v for k, v in obj.items() if k != "cached"}
        return cls(**obj)


def cache_key(model_name: str, prompt: str, temperature: float, max_output_tokens: int) -> str:
    payload = json.dumps([model_name, prompt, float(temperature), int(max_output_tokens)], ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class GenerationCache:
    """Append-only record log (``records.jsonl``) plus a digest index (``index.tsv``).

    The log is the source of truth; the index maps cache key to byte offset
    and is rebuilt from the log when missing or stale.  A torn final line
    left by an interrupted run is ignored.
    """

    def __init__(self, directory: str | Path):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.log_path = self.dir / "records.jsonl"
        self.index_path = self.dir / "index.tsv"
        self._lock = threading.Lock()
        self._offsets: dict[str, int] = {}
        self._load()

    def _load(self):
        if not self.log_path.exists():
            self.log_path.touch()
        size = self.log_path.stat().st_size
        if self.index_path.exists():
            offsets = {}
            for line in self.index_path.read_text(encoding="utf-8").splitlines():
                key, _, off = line.partition("\t")
                if off.isdigit() and int(off) < size:
                    offsets[key] = int(off)
            if self._valid(offsets):
                self._offsets = offsets
                return
        self._rebuild()

    def _valid(self, offsets):
        # the index is only trusted if it covers every complete log line
        return len(offsets) == sum(1 for _ in self._scan())

    def _scan(self):
        with open(self.log_path, "rb") as fh:
            off = 0
            for raw in fh:
                if raw.endswith(b"\n"):
                    try:
                        yield json.loads(raw)["key"], off
                    except (ValueError, KeyError):
                        log.warning("skipping unreadable cache line at offset %d", off)
                off += len(raw)

    def _rebuild(self):
        self._offsets = dict(self._scan())
        with open(self.index_path, "w", encoding="utf-8") as fh:
            for key, off in self._offsets.items():
                fh.write(f"{key}\t{off}\n")

    def __contains__(self, key: str) -> bool:
        return key in self._offsets

    def __len__(self) -> int:
        return len(self._offsets)

    def get(self, key: str) -> GenerationRecord | None:
        off = self._offsets.get(key)
        if off is None:
            return None
        with open(self.log_path, "rb") as fh:
            fh.seek(off)
            obj = json.loads(fh.readline())
        return GenerationRecord.from_dict(obj["record"])

    def put(self, key: str, record: GenerationRecord) -> None:
        line = (json.dumps({"key": key, "record": record.to_dict()}, ensure_ascii=False) + "\n").encode("utf-8")
        with self._lock:
            if key in self._offsets:
                return
            with open(self.log_path, "ab") as fh:
                off = fh.seek(0, 2)
                fh.write(line)
                fh.flush()
            with open(self.index_path, "a", encoding="utf-8") as fh:
                fh.write(f"{key}\t{off}\n")
            self._offsets[key] = off


def load_refusal_patterns(path: str | Path) -> list[str]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(line)
    return out


def default_refusal_patterns() -> list[str]:
    return load_refusal_patterns(Path(__file__).resolve().parent.parent / "data" / "refusal_patterns.txt")


def is_refusal(text: str, patterns: Iterable[str]) -> bool:
    low = text.lower()
    return any(p.lower() in low for p in patterns)


def generate(
    backend: Backend,
    prompt: str,
    *,
    transcript_id: str = "",
    attacker_id: str = "",
    cache: GenerationCache | None = None,
    refusal_patterns: Sequence[str] = (),
) -> GenerationRecord:
    key = cache_key(backend.model_name, prompt, backend.temperature, backend.max_output_tokens)
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            return replace(hit, transcript_id=transcript_id, attacker_id=attacker_id, cached=True)
    comp = backend.complete(prompt)
    record = GenerationRecord(
        transcript_id=transcript_id,
        attacker_id=attacker_id,
        model_name=backend.model_name,
        prompt_hash=prompt_hash(prompt),
        output_text=comp.text,
        prompt_tokens=comp.prompt_tokens,
        completion_tokens=comp.completion_tokens,
        latency=max(0.0, comp.latency),
        cost=backend.price.cost(comp.prompt_tokens, comp.completion_tokens),
        refusal_flag=is_refusal(comp.text, refusal_patterns),
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )
    if cache is not None:
        cache.put(key, record)
    return record


def generate_batch(
    backend: Backend,
    prompts: Sequence[tuple[str, str]],
    *,
    attacker_id: str,
    cache: GenerationCache | None = None,
    concurrency: int = 4,
    refusal_patterns: Sequence[str] = (),
) -> list[GenerationRecord]:
    """Generate for ``(transcript_id, prompt)`` pairs, returned in transcript-id order.

    Every request is attempted even if some fail, so the cache keeps all
    successes; the first failure is then re-raised.
    """
    def one(item):
        tid, prompt = item
        try:
            return generate(backend, prompt, transcript_id=tid, attacker_id=attacker_id,
                            cache=cache, refusal_patterns=refusal_patterns)
        except VishbenchError as exc:
            return exc

    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        results = list(pool.map(one, prompts))
    failures = [r for r in results if isinstance(r, Exception)]
    if failures:
        raise GenerationError(f"{len(failures)} of {len(prompts)} generations failed; first: {failures[0]}")
    return sorted(results, key=lambda r: r.transcript_id)


def cost_summary(records: Sequence[GenerationRecord]) -> dict:
    n = len(records)
    if not n:
        return {"n": 0, "refusals": 0, "total_cost_usd": 0.0, "mean_cost_usd": None, "mean_latency_s": None,
                "mean_prompt_tokens": None, "mean_completion_tokens": None}
    return {
        "n": n,
        "refusals": sum(r.refusal_flag for r in records),
        "total_cost_usd": sum(r.cost for r in records),
        "mean_cost_usd": sum(r.cost for r in records) / n,
        "mean_latency_s": sum(r.latency for r in records) / n,
        "mean_prompt_tokens": sum(r.prompt_tokens for r in records) / n,
        "mean_completion_tokens": sum(r.completion_tokens for r in records) / n,
    }


def write_records(records: Iterable[GenerationRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), ensure_ascii=False) + "\n")


def read_records(path: str | Path) -> list[GenerationRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(GenerationRecord.from_dict(json.loads(line)))
    return out
