import json
import logging
import os
import threading
import time
from pathlib import Path
from typing import Callable, Optional

import httpx
from tenacity import RetryError, Retrying, retry_if_exception_type, stop_after_attempt, wait_exponential

from llm_gateway.errors import AuthFailure, ExhaustedRetries, GatewayError, MalformedResponse
from llm_gateway.mock import MockPolicy, mock_chat
from llm_gateway.request import HTTP, MOCK, ChatRequest, GatewayConfig


logger = logging.getLogger(__name__)

RETRYABLE_STATUS = {429, 500, 502, 503, 504}


class TransientError(GatewayError):
    pass


class ChatGateway:
    """
    Chat-completions client with admission control, retries and a transcript
    """

    def __init__(
        self,
        config: GatewayConfig,
        mock_policy: Optional[MockPolicy] = None,
        transport: Optional[httpx.BaseTransport] = None,
        sleep: Callable[[float], None] = time.sleep,
        keep_transcript: bool = True,
    ) -> None:
        self.config = config
        self.mock_policy = mock_policy or MockPolicy()
        self.transcript: list[dict] = []
        self.keep_transcript = keep_transcript
        self.calls = 0
        self._transport = transport
        self._sleep = sleep
        self._client: Optional[httpx.Client] = None
        self._admission = threading.BoundedSemaphore(config.max_in_flight)
        self._transcript_lock = threading.Lock()
        self._client_lock = threading.Lock()

    def _api_key(self) -> str:
        api_key = os.environ.get(self.config.api_key_env_var, "")
        if not api_key:
            raise AuthFailure(f"environment variable {self.config.api_key_env_var} is not set")

        return api_key

    def _http_client(self) -> httpx.Client:
        with self._client_lock:
            if self._client is None:
                self._client = httpx.Client(
                    base_url=self.config.base_url,
                    timeout=self.config.timeout,
                    transport=self._transport,
                )
            return self._client

    def _post(self, req: ChatRequest, api_key: str) -> str:
        try:
            response = self._http_client().post(
                "/chat/completions",
                json=req.payload(),
                headers={"Authorization": f"Bearer {api_key}"},
            )
        except httpx.TimeoutException as error:
            raise TransientError(f"timeout: {error}") from error
        except httpx.TransportError as error:
            raise TransientError(f"transport error: {error}") from error

        if response.status_code in (401, 403):
            raise AuthFailure(f"server rejected the API key ({response.status_code})")
        if response.status_code in RETRYABLE_STATUS:
            raise TransientError(f"server returned {response.status_code}")
        if response.status_code >= 400:
            raise GatewayError(f"server returned {response.status_code}: {response.text[:200]}")

        try:
            return response.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as error:
            raise MalformedResponse(f"unexpected response body: {response.text[:200]}") from error

    def _chat_http(self, req: ChatRequest) -> tuple[str, int]:
        api_key = self._api_key()
        retries = 0

        def count_retry(retry_state) -> None:
            nonlocal retries
            retries += 1
            logger.warning(
                "request %s attempt %d failed (%s), retrying",
                req.request_id,
                retry_state.attempt_number,
                retry_state.outcome.exception(),
            )

        retrying = Retrying(
            stop=stop_after_attempt(self.config.max_retries + 1),
            wait=wait_exponential(multiplier=self.config.backoff_base, exp_base=2),
            retry=retry_if_exception_type(TransientError),
            before_sleep=count_retry,
            sleep=self._sleep,
        )
        try:
            reply = retrying(self._post, req, api_key)
        except RetryError as error:
            raise ExhaustedRetries(
                f"request {req.request_id} failed after {retries + 1} attempts: "
                f"{error.last_attempt.exception()}",
                attempts=retries + 1,
            ) from error

        if retries:
            logger.info("request %s succeeded after %d retries", req.request_id, retries)

        return reply, retries

    def _record(self, req: ChatRequest, reply: Optional[str], retries: int, error: Optional[str]) -> None:
        entry = {
            "request_id": req.request_id,
            "agent_id": req.agent_id,
            "role": req.role,
            "sequence": req.sequence,
            "model": req.model,
            "system_prompt": req.system_prompt,
            "user_prompt": req.user_prompt,
            "reply": reply,
            "retries": retries,
            "error": error,
        }
        with self._transcript_lock:
            self.calls += 1
            if self.keep_transcript:
                self.transcript.append(entry)
            if self.config.transcript_path:
                path = Path(self.config.transcript_path)
                path.parent.mkdir(parents=True, exist_ok=True)
                with open(path, "a") as file:
                    file.write(json.dumps(entry) + "\n")

    def chat(self, req: ChatRequest) -> str:
        if self.config.backend == MOCK:
            reply = mock_chat(req, self.mock_policy)
            self._record(req, reply, 0, None)
            logger.debug("mock %s -> %s", req.request_id, reply)
            return reply

        # no network call without a key
        self._api_key()
        with self._admission:
            try:
                reply, retries = self._chat_http(req)
            except GatewayError as error:
                self._record(req, None, getattr(error, "attempts", 1) - 1, str(error))
                raise
        self._record(req, reply, retries, None)

        return reply

    def close(self) -> None:
        with self._client_lock:
            if self._client is not None:
                self._client.close()
                self._client = None

    def __enter__(self) -> "ChatGateway":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def chat(req: ChatRequest, cfg: GatewayConfig, mock_policy: Optional[MockPolicy] = None) -> str:
    with ChatGateway(cfg, mock_policy=mock_policy) as gateway:
        return gateway.chat(req)


def load_transcript(path) -> list[dict]:
    with open(path, "r") as file:
        return [json.loads(line) for line in file if line.strip()]


def build_gateway(
    config: GatewayConfig, mock_policy: Optional[MockPolicy] = None, keep_transcript: bool = True
) -> ChatGateway:
    if config.backend == HTTP:
        logger.info("HTTP gateway to %s (model %s)", config.base_url, config.model)

    return ChatGateway(config, mock_policy=mock_policy, keep_transcript=keep_transcript)
