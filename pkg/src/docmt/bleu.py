"""Sentence- and corpus-level BLEU with clipped n-gram precisions."""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .core import Scheme, SchemaError, tokenize


class Smoothing(str, enum.Enum):
    NONE = "none"
    FLOOR_EPSILON = "floor_epsilon"


@dataclass(frozen=True)
class BleuConfig:
    max_order: int = 4
    smoothing: Smoothing = Smoothing.FLOOR_EPSILON
    epsilon: float = 0.1
    tokenization: Scheme = Scheme.MIXED

    def __post_init__(self):
        if not 1 <= self.max_order <= 9:
            raise SchemaError(f"max_order must be in [1, 9], got {self.max_order}")
        if self.smoothing is Smoothing.FLOOR_EPSILON and self.epsilon <= 0:
            raise SchemaError("epsilon must be > 0 with floor smoothing")


@dataclass(frozen=True)
class BleuScore:
    score: float
    precisions: tuple[float, ...]
    brevity_penalty: float
    hypothesis_length: int
    reference_length: int


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _clipped(hyp_tokens, ref_token_lists, n: int) -> tuple[int, int]:
    hyp_counts = _ngram_counts(hyp_tokens, n)
    total = max(len(hyp_tokens) - n + 1, 0)
    if not hyp_counts:
        return 0, total
    max_ref: Counter = Counter()
    for ref in ref_token_lists:
        for gram, count in _ngram_counts(ref, n).items():
            if count > max_ref[gram]:
                max_ref[gram] = count
    matches = sum(min(count, max_ref[gram]) for gram, count in hyp_counts.items())
    return matches, total


def _closest_ref_length(hyp_len: int, ref_token_lists) -> int:
    # Ties broken toward the shorter reference.
    return min((len(ref) for ref in ref_token_lists),
               key=lambda rl: (abs(rl - hyp_len), rl))


def _finish(match_sums, total_sums, hyp_len, ref_len, config: BleuConfig) -> BleuScore:
    precisions = []
    for matches, total in zip(match_sums, total_sums):
        if total == 0:
            # No hypothesis n-grams at this order (hypothesis shorter than
            # the order): neutral, so identity inputs still score 1.0.
            p = 1.0
        elif matches == 0:
            p = 0.0 if config.smoothing is Smoothing.NONE else config.epsilon / total
        else:
            p = matches / total
        precisions.append(p)
    if hyp_len == 0:
        bp = 0.0
    elif hyp_len >= ref_len:
        bp = 1.0
    else:
        bp = math.exp(1.0 - ref_len / hyp_len)
    if any(p == 0.0 for p in precisions) or hyp_len == 0:
        score = 0.0
    else:
        score = bp * math.exp(sum(math.log(p) for p in precisions) / config.max_order)
    return BleuScore(
        score=score,
        precisions=tuple(precisions),
        brevity_penalty=bp,
        hypothesis_length=hyp_len,
        reference_length=ref_len,
    )


def sentence_bleu(hypothesis: str, references: Sequence[str],
                  config: BleuConfig = BleuConfig()) -> BleuScore:
    """BLEU of one hypothesis against one or more references.

    N-gram counts are clipped against the per-gram max over references.
    An empty hypothesis scores 0 without raising.
    """
    if not references:
        raise SchemaError("references must be non-empty")
    hyp = tokenize(hypothesis, config.tokenization).tokens
    refs = [tokenize(r, config.tokenization).tokens for r in references]
    match_sums, total_sums = [], []
    for n in range(1, config.max_order + 1):
        matches, total = _clipped(hyp, refs, n)
        match_sums.append(matches)
        total_sums.append(total)
    return _finish(match_sums, total_sums, len(hyp),
                   _closest_ref_length(len(hyp), refs), config)


def corpus_bleu(pairs: Iterable[tuple[str, Sequence[str]]],
                config: BleuConfig = BleuConfig()) -> BleuScore:
    """Micro-averaged corpus BLEU: counts and lengths are summed over all
    pairs before precisions and the brevity penalty are computed."""
    match_sums = [0] * config.max_order
    total_sums = [0] * config.max_order
    hyp_len_sum = 0
    ref_len_sum = 0
    n_pairs = 0
    for hypothesis, references in pairs:
        if not references:
            raise SchemaError("references must be non-empty for every pair")
        n_pairs += 1
        hyp = tokenize(hypothesis, config.tokenization).tokens
        refs = [tokenize(r, config.tokenization).tokens for r in references]
        hyp_len_sum += len(hyp)
        ref_len_sum += _closest_ref_length(len(hyp), refs)
        for n in range(1, config.max_order + 1):
            matches, total = _clipped(hyp, refs, n)
            match_sums[n - 1] += matches
            total_sums[n - 1] += total
    if n_pairs == 0:
        raise SchemaError("corpus_bleu requires a non-empty corpus")
    return _finish(match_sums, total_sums, hyp_len_sum, ref_len_sum, config)
