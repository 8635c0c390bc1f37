import logging
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

import numpy as np

from agents.actions import DELTA, ActionParseError, parse_action
from agents.best_response import best_response_utility
from agents.llm_policies import Decision, vote_llm
from agents.prompts import candidate_prompts, format_rates, voter_prompts
from fiscal_core.tax_schedule import TaxSchedule, apply_delta
from fiscal_core.utility import UtilityParams
from llm_gateway.errors import GatewayError
from llm_gateway.request import MOCK, ChatRequest
from population.personas import Persona
from utils import DELTA_CLIP, LABOR_BOUNDS


logger = logging.getLogger(__name__)

INCUMBENT = "INCUMBENT"
CHALLENGER = "CHALLENGER"


class Voter(Protocol):
    skill: float


@dataclass(frozen=True)
class Platform:
    candidate_id: int
    proposed_schedule: TaxSchedule
    pitch_text: str

    def to_dict(self) -> dict:
        return {
            "candidate_id": self.candidate_id,
            "proposed_schedule": self.proposed_schedule.to_dict(),
            "pitch_text": self.pitch_text,
        }


def templated_pitch(kind: str, proposed: TaxSchedule, current: TaxSchedule) -> str:
    if kind == INCUMBENT or proposed.rates == current.rates:
        return f"Stay the course: keep marginal rates at {format_rates(proposed.rates)}."

    return f"Time for a change: I will move marginal rates from {format_rates(current.rates)} to {format_rates(proposed.rates)}."


def _gateway_text(gateway, system: str, user: str, agent_id: str, sequence: int, context: dict) -> Optional[str]:
    try:
        return gateway.chat(
            ChatRequest(
                model=gateway.config.model,
                system_prompt=system,
                user_prompt=user,
                temperature=gateway.config.temperature,
                max_tokens=gateway.config.max_tokens,
                agent_id=agent_id,
                role="candidate",
                sequence=sequence,
                context=context,
            )
        )
    except GatewayError as error:
        logger.warning("candidate %s: gateway failure %s", agent_id, error)
        return None


def candidate_platform(
    candidate_kind: str,
    schedule: TaxSchedule,
    gateway,
    rng: np.random.Generator,
    candidate_id: int,
    income_histogram: Sequence[int] = (),
    sequence: int = 0,
) -> Platform:
    """
    The incumbent runs on the current schedule; the challenger on a random
    +-20 pp perturbation (mock) or a model-proposed one (live)
    """
    if candidate_kind not in (INCUMBENT, CHALLENGER):
        raise ValueError(f"unknown candidate kind {candidate_kind!r}")
    agent_id = f"candidate-{candidate_id}"
    proposed = schedule

    if candidate_kind == CHALLENGER:
        delta = rng.uniform(-DELTA_CLIP, DELTA_CLIP, size=schedule.n_brackets)
        if gateway.config.backend != MOCK:
            system, user = candidate_prompts(schedule, schedule, income_histogram)
            reply = _gateway_text(
                gateway,
                system,
                user + f'\nFirst state your proposal as {{"DELTA": [...]}} with {schedule.n_brackets} entries.',
                agent_id,
                sequence,
                {},
            )
            try:
                delta = parse_action(reply or "", DELTA, schedule.n_brackets).delta
            except ActionParseError:
                logger.warning("challenger proposal unparsable, using a random perturbation")
        proposed = apply_delta(schedule, delta)

    pitch = templated_pitch(candidate_kind, proposed, schedule)
    system, user = candidate_prompts(proposed, schedule, income_histogram)
    text = _gateway_text(gateway, system, user, agent_id, sequence + 1, {"pitch": pitch})

    return Platform(candidate_id=candidate_id, proposed_schedule=proposed, pitch_text=(text or pitch).strip())


def platform_utilities(
    skills: Sequence[float],
    platforms: Sequence[Platform],
    rebate: float,
    params: UtilityParams,
    labor_bounds: Sequence[float] = LABOR_BOUNDS,
) -> np.ndarray:
    """
    Own best-response utility of every worker under every platform, rebate
    held at its current value; shape (workers, platforms)
    """
    return np.column_stack(
        [best_response_utility(skills, p.proposed_schedule, rebate, params, labor_bounds) for p in platforms]
    )


def scripted_votes(
    skills: Sequence[float],
    platforms: Sequence[Platform],
    rebate: float,
    params: UtilityParams,
    labor_bounds: Sequence[float] = LABOR_BOUNDS,
) -> list[int]:
    """
    Argmax vote per worker; platforms[0] is the incumbent and wins ties
    """
    if len(platforms) < 2:
        raise ValueError("an election needs at least two platforms")
    utilities = platform_utilities(skills, platforms, rebate, params, labor_bounds)
    # argmax returns the first maximum
    choices = utilities.argmax(axis=1)

    return [platforms[choice].candidate_id for choice in choices]


def cast_vote_scripted(
    worker: Voter,
    platforms: Sequence[Platform],
    rebate: float,
    params: UtilityParams,
    labor_bounds: Sequence[float] = LABOR_BOUNDS,
) -> int:
    return scripted_votes([worker.skill], platforms, rebate, params, labor_bounds)[0]


def cast_vote_llm(
    worker: Voter,
    persona: Persona,
    platforms: Sequence[Platform],
    rebate: float,
    params: UtilityParams,
    gateway,
    agent_id: str = "0",
    sequence: int = 0,
    labor_bounds: Sequence[float] = LABOR_BOUNDS,
) -> Decision:
    """
    Prompted vote; an unusable reply counts as the scripted vote
    """
    scripted = cast_vote_scripted(worker, platforms, rebate, params, labor_bounds)
    system, user = voter_prompts(persona, worker.skill, rebate, platforms)

    return vote_llm(
        system,
        user,
        [p.candidate_id for p in platforms],
        scripted,
        gateway,
        agent_id=agent_id,
        sequence=sequence,
        context={"preferred_candidate": scripted},
    )


def tally(votes: Sequence[int], platforms: Sequence[Platform]) -> tuple[int, dict]:
    """
    Majority winner; ties go to the incumbent (first platform)
    """
    counts = {p.candidate_id: 0 for p in platforms}
    for vote in votes:
        counts[vote] += 1
    incumbent = platforms[0].candidate_id
    top = max(counts.values())
    winner = incumbent if counts[incumbent] == top else next(cid for cid, c in counts.items() if c == top)

    return winner, counts
