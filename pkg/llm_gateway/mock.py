import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from llm_gateway.request import ChatRequest


RATIONAL_ECHO = "RATIONAL_ECHO"
NOISY = "NOISY"
SCRIPT = "SCRIPT"
MALFORMED_EVERY_N = "MALFORMED_EVERY_N"
MODES = (RATIONAL_ECHO, NOISY, SCRIPT, MALFORMED_EVERY_N)

MALFORMED_REPLY = "Honestly I am not sure, maybe somewhere around forty hours or so."


@dataclass(frozen=True)
class MockPolicy:
    """
    Offline stand-in for a model server. Agents put the scripted answer for
    the request into its context and the mock echoes it, optionally jittered
    """

    mode: str = RATIONAL_ECHO
    seed: int = 0
    precision: int = 2
    noise_hours: float = 2.0
    script: tuple = field(default=())
    malformed_every: int = 3
    explore_step: float = 10.0
    uncued_step: float = 5.0

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mock mode {self.mode!r}, expected one of {MODES}")
        if self.mode == SCRIPT and not self.script:
            raise ValueError("SCRIPT mode needs a nonempty script")
        if self.malformed_every < 1:
            raise ValueError("malformed_every must be at least 1")
        object.__setattr__(self, "script", tuple(self.script))


def request_rng(policy: MockPolicy, req: ChatRequest) -> np.random.Generator:
    """
    Generator keyed on the policy seed and a digest of the request
    """
    digest = hashlib.sha256(
        "|".join([req.role, req.agent_id, str(req.sequence), req.user_prompt]).encode()
    ).digest()

    return np.random.default_rng([policy.seed, int.from_bytes(digest[:8], "little")])


def _planner_delta(req: ChatRequest, policy: MockPolicy, rng: np.random.Generator) -> list[float]:
    context = req.context
    current = np.asarray(context["current_rates"], dtype=float)
    best = context.get("best_rates")
    phase = context.get("phase", "EXPLORE")

    if phase == "EXPLOIT" and context.get("exploit_cue", True) and best is not None:
        delta = (np.asarray(best, dtype=float) - current) * 100
    elif phase == "EXPLORE" and context.get("explore_cue", True):
        delta = rng.uniform(-policy.explore_step, policy.explore_step, size=current.size)
    else:
        delta = rng.uniform(-policy.uncued_step, policy.uncued_step, size=current.size)

    return [round(float(v), policy.precision) for v in delta]


def _echo(req: ChatRequest, policy: MockPolicy, rng: np.random.Generator, noisy: bool) -> str:
    context = req.context
    if req.role == "worker":
        labor = float(context["rational_labor"])
        if noisy:
            labor += rng.normal(0.0, policy.noise_hours)
        return json.dumps({"LABOR": round(labor, policy.precision)})
    if req.role == "planner":
        return "Adjusting the brackets. " + json.dumps({"DELTA": _planner_delta(req, policy, rng)})
    if req.role == "voter":
        return json.dumps({"VOTE": int(context["preferred_candidate"])})
    if req.role == "satisfaction":
        return str(context["verdict_text"])
    if req.role == "candidate":
        return str(context.get("pitch", "I will keep the economy on a steady course."))

    return "{}"


def mock_chat(req: ChatRequest, policy: MockPolicy) -> str:
    """
    Pure function of (policy, request)
    """
    if policy.mode == SCRIPT:
        return policy.script[req.sequence % len(policy.script)]
    if policy.mode == MALFORMED_EVERY_N and (req.sequence + 1) % policy.malformed_every == 0:
        return MALFORMED_REPLY

    return _echo(req, policy, request_rng(policy, req), noisy=policy.mode == NOISY)
