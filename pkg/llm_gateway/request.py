from dataclasses import dataclass, field


MOCK = "MOCK"
HTTP = "HTTP"
BACKENDS = (MOCK, HTTP)

ROLES = ("worker", "planner", "voter", "candidate", "satisfaction")


@dataclass(frozen=True)
class ChatRequest:
    """
    One chat-completion call. `sequence` is the calling agent's own call
    counter; `context` feeds the mock backend and is never sent over HTTP
    """

    model: str
    system_prompt: str
    user_prompt: str
    temperature: float = 0.7
    max_tokens: int = 512
    request_id: str = ""
    agent_id: str = ""
    role: str = "worker"
    sequence: int = 0
    context: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if not 0 <= self.temperature <= 2:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if not self.system_prompt.strip() or not self.user_prompt.strip():
            raise ValueError("system and user prompts must be nonempty")
        if self.max_tokens < 1:
            raise ValueError(f"max_tokens must be positive, got {self.max_tokens}")
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}, expected one of {ROLES}")
        if not self.request_id:
            object.__setattr__(self, "request_id", f"{self.role}-{self.agent_id}-{self.sequence}")

    def payload(self) -> dict:
        return {
            "model": self.model,
            "messages": [
                {"role": "system", "content": self.system_prompt},
                {"role": "user", "content": self.user_prompt},
            ],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }


@dataclass(frozen=True)
class GatewayConfig:
    backend: str = MOCK
    base_url: str = "http://localhost:8000/v1"
    model: str = "meta-llama/Llama-3.1-8B-Instruct"
    api_key_env_var: str = "LLM_API_KEY"
    timeout: float = 30.0
    max_retries: int = 3
    max_in_flight: int = 8
    backoff_base: float = 0.5
    temperature: float = 0.7
    max_tokens: int = 512
    transcript_path: str = ""

    def __post_init__(self) -> None:
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}, expected one of {BACKENDS}")
        if not self.timeout > 0:
            raise ValueError(f"timeout must be positive, got {self.timeout}")
        if self.max_in_flight < 1:
            raise ValueError(f"max_in_flight must be at least 1, got {self.max_in_flight}")
        if self.max_retries < 0:
            raise ValueError(f"max_retries must be nonnegative, got {self.max_retries}")
        if self.backoff_base < 0:
            raise ValueError(f"backoff_base must be nonnegative, got {self.backoff_base}")
