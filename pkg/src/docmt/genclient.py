"""Candidate collection from an OpenAI-compatible chat-completion endpoint:
one deterministic output plus N temperature/nucleus samples per segment."""

from __future__ import annotations

import os
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

import httpx

from .core import CollectionError, SchemaError, Segment
from .mbr import Candidate, CandidateSet, Origin

DEFAULT_TOKEN_ENV = "DOCMT_API_TOKEN"


@dataclass(frozen=True)
class SamplingConfig:
    temperature: float = 0.7
    top_p: float = 0.95
    num_samples: int = 10
    deterministic_pass: bool = True
    max_output_tokens: int = 8192

    def __post_init__(self):
        if not 0 < self.temperature <= 2:
            raise SchemaError(f"temperature must be in (0, 2], got {self.temperature}")
        if not 0 < self.top_p <= 1:
            raise SchemaError(f"top_p must be in (0, 1], got {self.top_p}")
        if self.num_samples < 0:
            raise SchemaError("num_samples must be >= 0")
        if self.num_samples + (1 if self.deterministic_pass else 0) < 1:
            raise SchemaError("at least one candidate must be requested")


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model_name: str
    token_env: str = DEFAULT_TOKEN_ENV
    timeout: float = 120.0
    max_retries: int = 3
    max_concurrent_requests: int = 8
    backoff_base: float = 1.0
    backoff_cap: float = 30.0

    def __post_init__(self):
        if not self.base_url.startswith(("http://", "https://")):
            raise SchemaError(f"base_url must be an http(s) URL, got {self.base_url!r}")
        if self.max_retries < 0:
            raise SchemaError("max_retries must be >= 0")
        if self.max_concurrent_requests < 1:
            raise SchemaError("max_concurrent_requests must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "EndpointConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise SchemaError(f"unknown endpoint config keys: {sorted(unknown)}")
        return cls(**data)


def _build_messages(segment: Segment, prompt: str) -> list[dict]:
    if segment.image_ref:
        content = [
            {"type": "text", "text": prompt},
            {"type": "image_url", "image_url": {"url": segment.image_ref}},
        ]
    else:
        content = prompt
    return [{"role": "user", "content": content}]


class GenerationClient:
    """HTTP client with bounded request concurrency and retrying POSTs.

    The candidate text is never altered: it is exactly the content string
    the endpoint returned.
    """

    def __init__(self, endpoint: EndpointConfig,
                 transport: Optional[httpx.BaseTransport] = None):
        self.endpoint = endpoint
        headers = {}
        token = os.environ.get(endpoint.token_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._http = httpx.Client(
            base_url=endpoint.base_url,
            timeout=endpoint.timeout,
            headers=headers,
            transport=transport,
        )
        self._requests = ThreadPoolExecutor(
            max_workers=endpoint.max_concurrent_requests)

    def close(self):
        self._requests.shutdown(wait=True)
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _complete(self, payload: dict, kind: str, segment_id: str) -> tuple[str, int]:
        """POST one chat completion; returns (content, retries used)."""
        last_error: Optional[Exception] = None
        for attempt in range(self.endpoint.max_retries + 1):
            if attempt:
                delay = min(self.endpoint.backoff_base * 2 ** (attempt - 1),
                            self.endpoint.backoff_cap)
                time.sleep(delay * (0.5 + random.random() / 2))
            try:
                response = self._http.post("/v1/chat/completions", json=payload)
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = CollectionError(
                    f"segment {segment_id!r}: {kind} request got HTTP "
                    f"{response.status_code}")
                continue
            if response.status_code >= 400:
                raise CollectionError(
                    f"segment {segment_id!r}: {kind} request rejected with HTTP "
                    f"{response.status_code} (not retryable): {response.text[:200]}")
            try:
                content = response.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, ValueError) as exc:
                raise CollectionError(
                    f"segment {segment_id!r}: malformed completion response: {exc}")
            return content, attempt
        raise CollectionError(
            f"segment {segment_id!r}: {kind} request failed after "
            f"{self.endpoint.max_retries} retries: {last_error}")

    def collect_candidates(self, segment: Segment, prompt: str,
                           sampling: SamplingConfig = SamplingConfig()) -> CandidateSet:
        """Issue one greedy request (no sampling parameters) plus num_samples
        sampled requests; deterministic output lands at index 0."""
        if not prompt:
            raise SchemaError("prompt must be non-empty")
        messages = _build_messages(segment, prompt)
        base = {
            "model": self.endpoint.model_name,
            "messages": messages,
            "max_tokens": sampling.max_output_tokens,
            "n": 1,
        }
        jobs = []
        if sampling.deterministic_pass:
            jobs.append(("deterministic", None, dict(base)))
        for i in range(sampling.num_samples):
            payload = dict(base)
            payload["temperature"] = sampling.temperature
            payload["top_p"] = sampling.top_p
            jobs.append(("sampled", i, payload))
        futures = [
            self._requests.submit(self._complete, payload, kind, segment.id)
            for kind, _, payload in jobs
        ]
        candidates = []
        retries = 0
        for (kind, sample_index, _), future in zip(jobs, futures):
            text, attempts = future.result()
            retries += attempts
            if kind == "deterministic":
                candidates.append(Candidate(text=text, origin=Origin.DETERMINISTIC))
            else:
                candidates.append(Candidate(text=text, origin=Origin.SAMPLED,
                                            sample_index=sample_index))
        return CandidateSet(
            segment_id=segment.id,
            candidates=tuple(candidates),
            meta={"retries": retries, "model": self.endpoint.model_name},
        )

    def collect_batch(self, segments: Iterable[Segment], prompt_template: str,
                      sampling: SamplingConfig = SamplingConfig(),
                      fail_fast: bool = False,
                      errors: Optional[list] = None) -> Iterator[CandidateSet]:
        """Collect candidate sets for many segments, output in input order.

        Per-segment failures go to the errors list (as CollectionError)
        unless fail_fast is set.
        """
        if "{source_text}" not in prompt_template:
            raise SchemaError("prompt template must contain {source_text}")

        def one(segment: Segment):
            prompt = prompt_template.format(source_text=segment.source_text)
            try:
                return self.collect_candidates(segment, prompt, sampling)
            except CollectionError as exc:
                return exc

        # Separate pool: these tasks only block on the request pool, so the
        # request concurrency bound still holds.
        with ThreadPoolExecutor(
                max_workers=self.endpoint.max_concurrent_requests) as pool:
            for result in pool.map(one, segments):
                if isinstance(result, CollectionError):
                    if fail_fast:
                        raise result
                    if errors is not None:
                        errors.append(result)
                else:
                    yield result


def collect_candidates(segment: Segment, prompt: str,
                       sampling: SamplingConfig,
                       endpoint: EndpointConfig) -> CandidateSet:
    with GenerationClient(endpoint) as client:
        return client.collect_candidates(segment, prompt, sampling)


def collect_batch(segments: Iterable[Segment], prompt_template: str,
                  sampling: SamplingConfig, endpoint: EndpointConfig,
                  fail_fast: bool = False,
                  errors: Optional[list] = None) -> list[CandidateSet]:
    with GenerationClient(endpoint) as client:
        return list(client.collect_batch(segments, prompt_template, sampling,
                                         fail_fast=fail_fast, errors=errors))
