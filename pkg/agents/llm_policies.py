import logging
import re
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Callable, Optional

import numpy as np

from agents.actions import DELTA, LABOR, VOTE, ActionParseError, parse_action
from agents.observations import PlannerObservation, WorkerObservation, best_entry
from agents.prompts import planner_prompts, satisfaction_prompts, worker_prompts
from agents.replay_buffer import ReplayBuffer
from agents.satisfaction import scripted_verdict
from fiscal_core.tax_schedule import TaxSchedule
from llm_gateway.errors import GatewayError
from llm_gateway.request import ChatRequest
from population.personas import Persona
from utils import DELTA_CLIP, LABOR_BOUNDS


logger = logging.getLogger(__name__)

MAX_RETRIES = 3
VERDICT_PATTERN = re.compile(r"Verdict:\s*\**\s*(SATISFIED|UNSATISFIED)", re.IGNORECASE)


@dataclass(frozen=True)
class Decision:
    """
    Value chosen by an agent plus what it took to get there; `calls` is how
    many gateway requests were issued, `failures` the rejected replies
    """

    value: Any
    calls: int
    failures: tuple = field(default=())
    fell_back: bool = False


def _ask(
    gateway,
    system: str,
    user: str,
    parse: Callable[[str], Any],
    agent_id: str,
    role: str,
    sequence: int,
    context: dict,
    max_retries: int,
):
    """
    Re-prompts until `parse` accepts the reply; returns (parsed, calls,
    failures). `parse` raises ActionParseError on a reply it rejects
    """
    failures = []
    calls = 0
    for attempt in range(max_retries):
        request = ChatRequest(
            model=gateway.config.model,
            system_prompt=system,
            user_prompt=user,
            temperature=gateway.config.temperature,
            max_tokens=gateway.config.max_tokens,
            agent_id=agent_id,
            role=role,
            sequence=sequence + attempt,
            context=context,
        )
        calls += 1
        try:
            reply = gateway.chat(request)
        except GatewayError as error:
            logger.warning("%s %s: gateway failure %s", role, agent_id, error)
            failures.append(f"gateway error: {error}")
            break
        try:
            return parse(reply), calls, tuple(failures)
        except ActionParseError as error:
            logger.debug("%s %s: unparsable reply (%s): %r", role, agent_id, type(error).__name__, reply)
            failures.append(reply)

    return None, calls, tuple(failures)


def worker_decide_llm(
    obs: WorkerObservation,
    persona: Persona,
    phase: str,
    gateway,
    agent_id: str = "0",
    sequence: int = 0,
    context: Optional[dict] = None,
    max_retries: int = MAX_RETRIES,
) -> Decision:
    """
    Labor from a prompted worker, clamped to the action space; keeps the
    previous labor when no reply parses
    """
    system, user = worker_prompts(obs, persona, phase)
    parse = partial(parse_action, kind=LABOR, arity=1)
    action, calls, failures = _ask(gateway, system, user, parse, agent_id, "worker", sequence, context or {}, max_retries)
    if action is None:
        logger.warning("worker %s: falling back to previous labor %.2f", agent_id, obs.labor)
        return Decision(value=float(obs.labor), calls=calls, failures=failures, fell_back=True)

    return Decision(value=float(np.clip(action.labor, *LABOR_BOUNDS)), calls=calls, failures=failures)


def planner_propose(
    obs: PlannerObservation,
    buffer: ReplayBuffer,
    phase: str,
    gateway,
    schedule: TaxSchedule,
    tax_year: int = 0,
    swf_range: Optional[tuple[float, float]] = None,
    include_explore_cue: bool = True,
    include_exploit_cue: bool = True,
    agent_id: str = "planner",
    sequence: int = 0,
    max_retries: int = MAX_RETRIES,
) -> Decision:
    """
    Percentage-point rate changes clipped to +-20; a zero delta holds the
    policy when no reply parses
    """
    if not obs.best_trajectories and len(buffer):
        obs = PlannerObservation(
            income_histogram=obs.income_histogram,
            utility_histogram=obs.utility_histogram,
            swf_moving_average=obs.swf_moving_average,
            best_trajectories=tuple(buffer.entries),
        )
    system, user = planner_prompts(
        obs, schedule, phase, tax_year, swf_range, include_explore_cue, include_exploit_cue
    )
    best = best_entry(obs)
    context = {
        "current_rates": list(schedule.rates),
        "best_rates": list(best.schedule.rates) if best else None,
        "phase": phase,
        "explore_cue": include_explore_cue,
        "exploit_cue": include_exploit_cue,
    }
    parse = partial(parse_action, kind=DELTA, arity=schedule.n_brackets)
    action, calls, failures = _ask(gateway, system, user, parse, agent_id, "planner", sequence, context, max_retries)
    if action is None:
        logger.warning("planner %s: no usable delta, holding policy", agent_id)
        return Decision(value=[0.0] * schedule.n_brackets, calls=calls, failures=failures, fell_back=True)

    delta = np.clip(np.asarray(action.delta), -DELTA_CLIP, DELTA_CLIP)

    return Decision(value=[float(d) for d in delta], calls=calls, failures=failures)


def parse_verdict(text: str) -> Optional[int]:
    """
    Last `Verdict: SATISFIED|UNSATISFIED` line, or None
    """
    matches = VERDICT_PATTERN.findall(text or "")
    if not matches:
        return None

    return int(matches[-1].upper() == "SATISFIED")


def _verdict(reply: str) -> int:
    flag = parse_verdict(reply)
    if flag is None:
        raise ActionParseError("reply carries no verdict")

    return flag


def satisfaction_flag_llm(
    pre_tax: float,
    persona: Persona,
    schedule: TaxSchedule,
    gateway,
    agent_id: str = "0",
    sequence: int = 0,
    max_retries: int = MAX_RETRIES,
) -> Decision:
    """
    Chain-of-thought verdict from the worker; the persona rule decides when
    the reply carries no verdict
    """
    verdict = scripted_verdict(pre_tax, persona, schedule)
    system, user = satisfaction_prompts(persona, verdict, pre_tax)
    context = {"verdict_text": verdict.reasoning(persona)}
    flag, calls, failures = _ask(
        gateway, system, user, _verdict, agent_id, "satisfaction", sequence, context, max_retries
    )
    if flag is None:
        logger.warning("worker %s: no verdict, using the persona rule", agent_id)
        return Decision(value=verdict.satisfied, calls=calls, failures=failures, fell_back=True)

    return Decision(value=flag, calls=calls, failures=failures)


def vote_llm(
    system: str,
    user: str,
    candidate_ids: list[int],
    fallback: int,
    gateway,
    agent_id: str = "0",
    sequence: int = 0,
    context: Optional[dict] = None,
    max_retries: int = MAX_RETRIES,
) -> Decision:
    parse = partial(parse_action, kind=VOTE, arity=1)
    action, calls, failures = _ask(gateway, system, user, parse, agent_id, "voter", sequence, context or {}, max_retries)
    if action is None or action.vote not in candidate_ids:
        if action is not None:
            failures = failures + (action.raw_text,)
        return Decision(value=fallback, calls=calls, failures=failures, fell_back=True)

    return Decision(value=action.vote, calls=calls, failures=failures)
