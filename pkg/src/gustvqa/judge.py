"""LLM-judge client for description answers.

Talks to any chat-completion style HTTP endpoint. The API key is read from
the environment variable named in the config and is never logged.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Optional, Sequence

import httpx

log = logging.getLogger(__name__)

PLACEHOLDERS = ("{question}", "{gt_ans}", "{gpt_ans}")
_SCORE = {i: re.compile(rf"Score\s*{i}\s*:\s*\**\s*([0-9]+(?:\.[0-9]+)?)", re.IGNORECASE) for i in (1, 2, 3)}


class JudgeError(RuntimeError):
    pass


class JudgeParseError(JudgeError):
    pass


@dataclass(frozen=True)
class JudgeConfig:
    endpoint: str
    model: str = "gpt-4"
    api_key_env: Optional[str] = "OPENAI_API_KEY"
    timeout_s: float = 60.0
    max_retries: int = 3
    requests_per_minute: float = 60.0
    prompt_template: Optional[str] = None  # path; bundled prompt when None
    max_concurrency: int = 4
    backoff_base_s: float = 1.0

    def __post_init__(self):
        if self.timeout_s <= 0 or self.requests_per_minute <= 0 or self.max_concurrency < 1:
            raise ValueError("timeout, rate cap and concurrency must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    @classmethod
    def from_file(cls, path) -> "JudgeConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown judge config keys: {', '.join(sorted(unknown))}")
        return cls(**raw)

    def __repr__(self):
        return f"JudgeConfig(endpoint={self.endpoint!r}, model={self.model!r}, api_key_env={self.api_key_env!r})"


def load_prompt(path=None) -> str:
    if path is None:
        return resources.files("gustvqa").joinpath("data/judge_prompt.txt").read_text(encoding="utf-8")
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def render_prompt(template: str, question: str, gt_ans: str, gpt_ans: str) -> str:
    missing = [p for p in PLACEHOLDERS if p not in template]
    if missing:
        raise ValueError(f"prompt template lacks placeholders: {', '.join(missing)}")
    # single pass so answers that contain placeholder text are not re-expanded
    values = {"{question}": question, "{gt_ans}": gt_ans, "{gpt_ans}": gpt_ans}
    return re.sub(r"\{question\}|\{gt_ans\}|\{gpt_ans\}", lambda m: values[m.group(0)], template)


def parse_scores(text: str) -> tuple[float, float, float]:
    scores = []
    for i in (1, 2, 3):
        m = _SCORE[i].search(text or "")
        if m is None:
            raise JudgeParseError(f"response has no 'Score {i}'")
        value = float(m.group(1))
        if not 1.0 <= value <= 5.0:
            raise JudgeParseError(f"Score {i} = {value} outside 1..5")
        scores.append(int(value) if value.is_integer() else value)
    return tuple(scores)


class RateLimiter:
    """Spaces request starts at least 60/rpm seconds apart across threads."""

    def __init__(self, per_minute: float, clock: Callable[[], float] = time.monotonic, sleep: Callable[[float], None] = time.sleep):
        self.interval = 60.0 / per_minute
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next = 0.0

    def acquire(self) -> None:
        with self._lock:
            now = self._clock()
            start = max(now, self._next)
            self._next = start + self.interval
        if start > now:
            self._sleep(start - now)


@dataclass
class JudgeOutcome:
    scores: Optional[tuple] = None
    error: Optional[str] = None
    retries: int = 0

    def to_dict(self) -> dict:
        d = {"retries": self.retries}
        if self.scores is not None:
            d["scores"] = list(self.scores)
        if self.error is not None:
            d["error"] = self.error
        return d


class JudgeClient:
    def __init__(
        self,
        cfg: JudgeConfig,
        http: Optional[httpx.Client] = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.cfg = cfg
        self.template = load_prompt(cfg.prompt_template)
        render_prompt(self.template, "", "", "")  # fail fast on a broken template
        headers = {"Content-Type": "application/json"}
        if cfg.api_key_env:
            key = os.environ.get(cfg.api_key_env)
            if not key:
                raise JudgeError(f"environment variable {cfg.api_key_env} is not set")
            headers["Authorization"] = f"Bearer {key}"
        self._http = http or httpx.Client(timeout=cfg.timeout_s)
        self._headers = headers
        self._sleep = sleep
        self._limiter = RateLimiter(cfg.requests_per_minute, sleep=sleep)

    def close(self) -> None:
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _post(self, prompt: str) -> str:
        body = {"model": self.cfg.model, "messages": [{"role": "user", "content": prompt}], "temperature": 0}
        self._limiter.acquire()
        resp = self._http.post(self.cfg.endpoint, json=body, headers=self._headers, timeout=self.cfg.timeout_s)
        if resp.status_code == 429 or resp.status_code >= 500:
            raise httpx.HTTPStatusError(f"server returned {resp.status_code}", request=resp.request, response=resp)
        resp.raise_for_status()
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise JudgeParseError(f"unexpected response body: {exc!r}") from None

    def judge(self, question: str, gt_ans: str, gpt_ans: str) -> JudgeOutcome:
        """Score one answer. Failures are returned in the outcome, never raised."""
        prompt = render_prompt(self.template, question, gt_ans, gpt_ans)
        retries = 0
        while True:
            try:
                text = self._post(prompt)
                break
            except (httpx.TransportError, httpx.HTTPStatusError) as exc:
                status = exc.response.status_code if isinstance(exc, httpx.HTTPStatusError) else None
                retryable = status is None or status == 429 or status >= 500
                if not retryable or retries >= self.cfg.max_retries:
                    return JudgeOutcome(error=f"transport: {type(exc).__name__}: {exc}", retries=retries)
                retries += 1
                delay = self.cfg.backoff_base_s * 2 ** (retries - 1)
                log.warning("judge request failed (%s), retry %d/%d in %.1fs", type(exc).__name__, retries, self.cfg.max_retries, delay)
                self._sleep(delay)
            except JudgeParseError as exc:
                return JudgeOutcome(error=f"parse: {exc}", retries=retries)
        try:
            return JudgeOutcome(scores=parse_scores(text), retries=retries)
        except JudgeParseError as exc:
            return JudgeOutcome(error=f"parse: {exc}", retries=retries)

    def judge_batch(self, items: Sequence[tuple[str, str, str]]) -> list[JudgeOutcome]:
        with ThreadPoolExecutor(max_workers=self.cfg.max_concurrency) as pool:
            return list(pool.map(lambda it: self.judge(*it), items))
