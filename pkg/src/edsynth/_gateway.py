"""Text-generation backends behind one gateway.

Two backends are provided: :class:`LiveBackend` speaks the OpenAI-compatible
chat-completions protocol over HTTP, :class:`ReplayBackend` serves responses
recorded in a replay log. :class:`Gateway` adds retries, bounded parallelism,
in-run memoisation and the exchange history used to record a replay log.
"""

import hashlib
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable
from typing import Dict
from typing import Iterable
from typing import List
from typing import Mapping
from typing import Optional
from typing import Protocol
from typing import Union

import httpx
import numpy as np
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from tenacity import RetryCallState
from tenacity import RetryError
from tenacity import Retrying
from tenacity import retry_if_exception_type
from tenacity import stop_after_attempt

from ._errors import BackendUnavailable
from ._errors import ConfigError
from ._errors import EdsynthError
from ._errors import ParseError
from ._errors import ReplayMiss
from ._errors import ValidationError
from ._io import iter_jsonl
from ._io import write_jsonl


logger = logging.getLogger(__name__)

API_KEY_ENV = "SNARE_API_KEY"
API_BASE_ENV = "SNARE_API_BASE"

TRANSIENT_STATUS = frozenset({429, 500, 502, 503, 504})


class GenerationConfig(BaseModel):
    """Decoding and execution settings shared by every request of a run."""

    model_config = ConfigDict(frozen=True, protected_namespaces=())

    model: str = "meta-llama/Meta-Llama-3-8B-Instruct"
    temperature: float = Field(default=0.6, ge=0)
    top_p: float = Field(default=0.9, gt=0, le=1)
    max_tokens: int = Field(default=250, gt=0)
    seed: int = 0
    parallelism: int = Field(default=8, ge=1)
    max_retries: int = Field(default=3, ge=0)
    timeout: float = Field(default=60.0, gt=0)
    backoff_base: float = Field(default=1.0, ge=0)
    backoff_max: float = Field(default=30.0, ge=0)


def prompt_digest(system: str, user: str) -> str:
    payload = json.dumps([system, user], ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class LlmRequest:
    system: str
    user: str
    config: GenerationConfig
    tag: str

    def __post_init__(self) -> None:
        if not self.user.strip():
            raise ValueError(f"request {self.tag!r} has an empty user prompt")

    @property
    def digest(self) -> str:
        return prompt_digest(self.system, self.user)


@dataclass(frozen=True)
class LlmExchange:
    request: LlmRequest
    response_text: str
    latency_ms: int
    attempt: int
    prompt_digest: str


BatchResult = Union[LlmExchange, EdsynthError]


class TransientBackendError(EdsynthError):
    """A failure worth retrying (rate limiting, server error, timeout)."""


class Backend(Protocol):
    def generate(self, request: LlmRequest) -> str:
        ...


class LiveBackend:
    """OpenAI-compatible ``/chat/completions`` client."""

    def __init__(
        self,
        base_url: str,
        api_key: Optional[str] = None,
        *,
        timeout: float = 60.0,
        client: Optional[httpx.Client] = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = client or httpx.Client(timeout=timeout)
        self._headers = headers

    @classmethod
    def from_env(cls, timeout: float = 60.0) -> "LiveBackend":
        base_url = os.environ.get(API_BASE_ENV, "").strip()
        if not base_url:
            raise ConfigError(
                f"no replay log given and {API_BASE_ENV} is not set; "
                "cannot reach a generation backend"
            )
        return cls(base_url, os.environ.get(API_KEY_ENV, "").strip() or None, timeout=timeout)

    def generate(self, request: LlmRequest) -> str:
        config = request.config
        messages = []
        if request.system:
            messages.append({"role": "system", "content": request.system})
        messages.append({"role": "user", "content": request.user})
        payload = {
            "model": config.model,
            "messages": messages,
            "temperature": config.temperature,
            "top_p": config.top_p,
            "max_tokens": config.max_tokens,
            "seed": config.seed,
        }
        try:
            response = self._client.post(
                f"{self.base_url}/chat/completions",
                json=payload,
                headers=self._headers,
                timeout=config.timeout,
            )
        except (httpx.TimeoutException, httpx.TransportError) as exc:
            raise TransientBackendError(f"{request.tag}: {exc!r}") from exc
        if response.status_code in TRANSIENT_STATUS:
            raise TransientBackendError(f"{request.tag}: HTTP {response.status_code}")
        if response.status_code >= 400:
            raise BackendUnavailable(
                f"{request.tag}: HTTP {response.status_code}: {response.text[:500]}"
            )
        try:
            content = response.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendUnavailable(f"{request.tag}: malformed response body") from exc
        return content or ""

    def close(self) -> None:
        self._client.close()


class ReplayBackend:
    """Serves recorded responses keyed by prompt digest. Read-only after construction."""

    def __init__(self, responses: Mapping[str, str]) -> None:
        self._responses = dict(responses)

    def __len__(self) -> int:
        return len(self._responses)

    def __contains__(self, digest: object) -> bool:
        return digest in self._responses

    def generate(self, request: LlmRequest) -> str:
        digest = request.digest
        try:
            return self._responses[digest]
        except KeyError:
            raise ReplayMiss(request.tag, digest) from None


def record_log(exchanges: Iterable[LlmExchange], path: Union[str, Path]) -> int:
    """Write exchanges as a replay log, one row per distinct digest."""
    seen = set()
    rows = []
    for exchange in exchanges:
        if exchange.prompt_digest in seen:
            continue
        seen.add(exchange.prompt_digest)
        rows.append(
            {
                "digest": exchange.prompt_digest,
                "tag": exchange.request.tag,
                "request": {
                    "system": exchange.request.system,
                    "user": exchange.request.user,
                },
                "response": exchange.response_text,
            }
        )
    return write_jsonl(path, rows)


def load_log(path: Union[str, Path]) -> ReplayBackend:
    """Build a :class:`ReplayBackend` from a replay log.

    Raises:
        ParseError: A line is not a valid log row.
        ValidationError: One digest maps to two different responses.
    """
    responses: Dict[str, str] = {}
    for line_number, row in iter_jsonl(path):
        digest = row.get("digest")
        response = row.get("response")
        if not isinstance(digest, str) or not isinstance(response, str):
            raise ParseError("log row needs string 'digest' and 'response'", path, line_number)
        if digest in responses and responses[digest] != response:
            raise ValidationError(
                f"{path}:{line_number}: digest {digest} recorded with two different responses"
            )
        responses[digest] = response
    logger.info("loaded %d replayed responses from %s", len(responses), path)
    return ReplayBackend(responses)


class _SeededJitter:
    """Exponential backoff whose jitter depends only on the run seed and the prompt."""

    def __init__(self, seed: int, digest: str, base: float, cap: float) -> None:
        self._entropy = [seed & 0xFFFFFFFF, int(digest[:8], 16)]
        self._base = base
        self._cap = cap

    def __call__(self, retry_state: RetryCallState) -> float:
        attempt = retry_state.attempt_number
        delay = min(self._cap, self._base * 2 ** (attempt - 1))
        rng = np.random.default_rng(self._entropy + [attempt])
        return float(delay * (0.5 + 0.5 * rng.random()))


class Gateway:
    """Retries, bounded parallelism and bookkeeping around one backend."""

    def __init__(
        self,
        backend: Backend,
        config: GenerationConfig,
        *,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.backend = backend
        self.config = config
        self._sleep = sleep
        self._lock = threading.Lock()
        self._memo: Dict[str, LlmExchange] = {}
        self.history: List[LlmExchange] = []

    def request(self, system: str, user: str, tag: str) -> LlmRequest:
        return LlmRequest(system=system, user=user, config=self.config, tag=tag)

    def _call(self, request: LlmRequest) -> LlmExchange:
        digest = request.digest
        config = request.config
        retrying = Retrying(
            stop=stop_after_attempt(config.max_retries + 1),
            wait=_SeededJitter(config.seed, digest, config.backoff_base, config.backoff_max),
            retry=retry_if_exception_type(TransientBackendError),
            sleep=self._sleep,
            before_sleep=lambda state: logger.warning(
                "%s: attempt %d failed (%s), retrying",
                request.tag,
                state.attempt_number,
                state.outcome.exception() if state.outcome else None,
            ),
        )
        start = time.perf_counter()
        text = ""
        attempt_number = 0
        try:
            for attempt in retrying:
                with attempt:
                    text = self.backend.generate(request)
                attempt_number = attempt.retry_state.attempt_number
        except RetryError as exc:
            last = exc.last_attempt.exception()
            raise BackendUnavailable(
                f"{request.tag}: gave up after {config.max_retries + 1} attempts: {last}"
            ) from last
        latency_ms = int((time.perf_counter() - start) * 1000)
        logger.debug("%s: %s answered in %d ms", request.tag, digest[:12], latency_ms)
        return LlmExchange(
            request=request,
            response_text=text,
            latency_ms=latency_ms,
            attempt=attempt_number,
            prompt_digest=digest,
        )

    def _memoised(self, digest: str) -> Optional[LlmExchange]:
        with self._lock:
            return self._memo.get(digest)

    def _remember(self, exchange: LlmExchange) -> None:
        with self._lock:
            if exchange.prompt_digest not in self._memo:
                self._memo[exchange.prompt_digest] = exchange
                self.history.append(exchange)

    def complete(self, request: LlmRequest) -> LlmExchange:
        """Run one request.

        Identical prompts within one gateway are only sent once.

        Raises:
            BackendUnavailable: Retries were exhausted or the backend refused the call.
            ReplayMiss: The replay log has no response for this prompt.
        """
        cached = self._memoised(request.digest)
        if cached is not None:
            return cached
        exchange = self._call(request)
        self._remember(exchange)
        return exchange

    def complete_batch(self, requests: List[LlmRequest]) -> List[BatchResult]:
        """Run requests with at most ``config.parallelism`` in flight.

        Results come back in request order. A failing item holds its exception
        instead of an exchange; the rest of the batch still runs.
        """
        if not requests:
            return []
        unique: Dict[str, LlmRequest] = {}
        for request in requests:
            unique.setdefault(request.digest, request)
        pending = [r for d, r in unique.items() if self._memoised(d) is None]

        def _run(request: LlmRequest) -> BatchResult:
            try:
                return self._call(request)
            except EdsynthError as exc:
                logger.warning("%s failed: %s", request.tag, exc)
                return exc

        with ThreadPoolExecutor(max_workers=self.config.parallelism) as pool:
            outcomes = list(pool.map(_run, pending))

        by_digest: Dict[str, BatchResult] = {}
        for request, outcome in zip(pending, outcomes):
            if isinstance(outcome, LlmExchange):
                self._remember(outcome)
            by_digest[request.digest] = outcome
        results: List[BatchResult] = []
        for request in requests:
            cached = self._memoised(request.digest)
            results.append(cached if cached is not None else by_digest[request.digest])
        return results
