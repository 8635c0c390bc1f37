from functools import lru_cache
from pathlib import Path
from typing import Optional, Sequence

from agents.observations import EXPLOIT, EXPLORE, PlannerObservation, WorkerObservation, best_entry
from agents.satisfaction import SatisfactionVerdict
from fiscal_core.tax_schedule import TaxSchedule
from population.personas import Persona


PROMPT_DIR = Path(__file__).parent / "prompt_templates"

EXPLORE_CUE = (
    "Explore: try a schedule that is clearly different from the ones in memory "
    "so you learn how workers respond."
)
EXPLOIT_CUE = (
    "Exploit: move the schedule toward the best-performing schedule in memory "
    "and refine it with small changes."
)


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    with open(PROMPT_DIR / f"{name}.txt", "r") as file:
        return file.read()


def render(name: str, **fields) -> str:
    return load_template(name).format(**fields)


def format_rates(rates: Sequence[float]) -> str:
    return "[" + " ".join(f"{100 * rate:.1f}%" for rate in rates) + "]"


def format_money(value: float) -> str:
    return f"{value:,.0f}"


def format_history(obs: WorkerObservation) -> str:
    if not obs.history:
        return "(none yet)"

    return "\n".join(
        f"- {entry.labor:.1f} h, utility {entry.utility:.3f}"
        + ("" if entry.satisfied is None else f", {'satisfied' if entry.satisfied else 'unsatisfied'}")
        for entry in obs.history
    )


def worker_phase_hint(obs: WorkerObservation, phase: str) -> str:
    """
    Directional hint from the sign of the last utility change
    """
    if phase == EXPLORE or len(obs.history) < 2:
        return "Try a noticeably different number of hours to learn how your utility responds."

    previous, last = obs.history[-2], obs.history[-1]
    if last.labor == previous.labor:
        return "Your hours did not change last week; small adjustments may still raise your utility."
    went_up = last.labor > previous.labor
    improved = last.utility > previous.utility
    direction = "increased" if went_up == improved else "decreased"

    return (
        f"Your utility went {'up' if improved else 'down'} when you moved from "
        f"{previous.labor:.1f} to {last.labor:.1f} hours, so your hours probably need to be "
        f"{direction} from {last.labor:.1f}."
    )


def worker_prompts(obs: WorkerObservation, persona: Persona, phase: str) -> tuple[str, str]:
    system = render("worker_system", persona=persona.text)
    user = render(
        "worker_user",
        labor=f"{obs.labor:.1f}",
        pre_tax=format_money(obs.pre_tax),
        post_tax=format_money(obs.post_tax),
        marginal_rate=f"{100 * obs.marginal_rate_at_income:.1f}%",
        rebate=format_money(obs.rebate),
        history=format_history(obs),
        phase_hint=worker_phase_hint(obs, phase),
    )

    return system, user


def planner_phase_hint(phase: str, include_explore_cue: bool = True, include_exploit_cue: bool = True) -> str:
    if phase == EXPLORE and include_explore_cue:
        return EXPLORE_CUE
    if phase == EXPLOIT and include_exploit_cue:
        return EXPLOIT_CUE

    return "Choose the changes you believe will raise social welfare."


def normalise_swf(swf: float, swf_range: Optional[tuple[float, float]]) -> float:
    """
    Min-max scaling over the year averages seen so far
    """
    if swf_range is None:
        return 1.0
    low, high = swf_range
    if high <= low:
        return 1.0

    return (swf - low) / (high - low)


def planner_prompts(
    obs: PlannerObservation,
    schedule: TaxSchedule,
    phase: str,
    tax_year: int,
    swf_range: Optional[tuple[float, float]] = None,
    include_explore_cue: bool = True,
    include_exploit_cue: bool = True,
) -> tuple[str, str]:
    best = best_entry(obs)
    memory = "\n".join(
        f"- {format_rates(entry.schedule.rates)} welfare {normalise_swf(entry.swf, swf_range):.3f}"
        for entry in obs.best_trajectories
    )
    system = render("planner_system", n_brackets=schedule.n_brackets)
    user = render(
        "planner_user",
        tax_year=tax_year,
        thresholds=", ".join(format_money(z) for z in schedule.thresholds),
        current_tax=format_rates(schedule.rates),
        income_histogram=list(obs.income_histogram),
        utility_histogram=[round(u, 3) for u in obs.utility_histogram],
        swf=f"{normalise_swf(obs.swf_moving_average, swf_range):.3f}",
        memory=memory or "(empty)",
        best_tax=format_rates(best.schedule.rates) if best else "none yet",
        best_swf=f"{normalise_swf(best.swf, swf_range):.3f}" if best else "n/a",
        phase_hint=planner_phase_hint(phase, include_explore_cue, include_exploit_cue),
        n_brackets=schedule.n_brackets,
    )

    return system, user


def satisfaction_prompts(persona: Persona, verdict: SatisfactionVerdict, pre_tax: float) -> tuple[str, str]:
    system = render("worker_system", persona=persona.text)
    user = render(
        "satisfaction_user",
        pre_tax=format_money(pre_tax),
        tax_paid=format_money(verdict.effective_rate * pre_tax),
        effective_rate=f"{100 * verdict.effective_rate:.1f}%",
        retention=f"{100 * verdict.retention:.1f}%",
    )

    return system, user


def voter_prompts(persona: Persona, skill: float, rebate: float, platforms) -> tuple[str, str]:
    system = render("worker_system", persona=persona.text)
    user = render(
        "voter_user",
        skill=f"{skill:,.2f}",
        rebate=format_money(rebate),
        platforms="\n".join(
            f"- candidate {p.candidate_id}: rates {format_rates(p.proposed_schedule.rates)}. {p.pitch_text}"
            for p in platforms
        ),
    )

    return system, user


CANDIDATE_SYSTEM = "You are a candidate for tax planner in a simulated economy."


def candidate_prompts(
    proposed: TaxSchedule, current: TaxSchedule, income_histogram: Sequence[int]
) -> tuple[str, str]:
    user = render(
        "candidate_user",
        proposed_tax=format_rates(proposed.rates),
        current_tax=format_rates(current.rates),
        income_histogram=list(income_histogram),
    )

    return CANDIDATE_SYSTEM, user
