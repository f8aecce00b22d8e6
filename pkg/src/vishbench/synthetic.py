"""Synthetic call transcripts for offline tests and smoke runs.

Each vishing document carries at least ``min_cue_tokens`` words drawn from
a scam-cue vocabulary and each benign document the same number from an
everyday vocabulary; the two cue sets are disjoint, so the corpus is
linearly separable under any bag-of-words featurization.
"""
from __future__ import annotations

import numpy as np

from .corpus import Corpus, Label, Transcript

SCAM_WORDS = (
    "account", "transfer", "prosecutor", "police", "bank", "loan", "refund", "card",
    "password", "verify", "urgent", "fraud", "security", "deposit", "investigation",
    "warrant", "suspicious", "credit", "otp", "remittance",
)
BENIGN_WORDS = (
    "weekend", "dinner", "movie", "family", "weather", "coffee", "lunch", "birthday",
    "garden", "holiday", "recipe", "music", "school", "friend", "walk", "game",
    "book", "travel", "shopping", "picnic",
)
SHARED_WORDS = (
    "today", "please", "call", "time", "yes", "okay", "well", "thanks", "hello", "really",
    "know", "think", "just", "maybe", "good", "right", "sure", "now", "later", "tomorrow",
)


def synthetic_corpus(
    n: int = 40,
    seed: int = 0,
    *,
    min_length: int = 10,
    max_length: int = 20,
    min_cue_tokens: int = 4,
    cue_vocab_size: int = 10,
    vishing_fraction: float = 0.5,
) -> Corpus:
    rng = np.random.default_rng(seed)
    n_vish = int(round(n * vishing_fraction))
    out: list[Transcript] = []
    seen: set[str] = set()
    while len(out) < n:
        label = Label.VISHING if len(out) < n_vish else Label.BENIGN
        cues = (SCAM_WORDS if label is Label.VISHING else BENIGN_WORDS)[:cue_vocab_size]
        length = int(rng.integers(min_length, max_length + 1))
        n_cue = int(rng.integers(min_cue_tokens, max(min_cue_tokens, length // 2) + 1))
        words = list(rng.choice(cues, n_cue)) + list(rng.choice(SHARED_WORDS, length - n_cue))
        rng.shuffle(words)
        text = " ".join(words)
        if text in seen:
            continue
        seen.add(text)
        out.append(Transcript(f"syn-{len(out):04d}", text, label))
    return Corpus(tuple(out))
