import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Callable, Optional, Sequence

import numpy as np

from agents.best_response import best_response_labor, bounded_best_response
from agents.elections import CHALLENGER, INCUMBENT, candidate_platform, cast_vote_llm, scripted_votes, tally
from agents.llm_policies import Decision, planner_propose, satisfaction_flag_llm, worker_decide_llm
from agents.observations import EXPLOIT, EXPLORE, HistoryEntry, bracket_histograms, planner_observation, push_history
from agents.replay_buffer import ReplayBuffer, buffer_update
from agents.satisfaction import satisfaction_flags
from engine.config import BOUNDED, DEMOCRATIC, SimConfig, evaluation_config
from engine.event_log import ELECTION, PARSE_FAILURE, POLICY, STEP, EventLog, make_header
from engine.metrics import MetricsSummary, summarize
from engine.state import SimState, WorkerState
from fiscal_core.tax_schedule import TaxSchedule, apply_delta, apply_taxes
from fiscal_core.utility import UtilityParams, bounded_utility, isoelastic_utility
from fiscal_core.welfare import social_welfare
from llm_gateway.gateway import ChatGateway, build_gateway
from population.builder import build_population
from population.personas import Persona, assign_personas, load_persona_library
from population.skills import calibrate_psi
from saez.economy import build_economy
from utils import VERSION


logger = logging.getLogger(__name__)

# share of the year-start isoelastic utility lost when unsatisfied
PHI_SHARE = 0.5


def resolve_utility(config: SimConfig, skills: np.ndarray) -> UtilityParams:
    """
    Utility parameters of a run, psi calibrated on the median skill when asked
    """
    if not config.calibrate_psi:
        return config.utility
    psi = calibrate_psi(float(np.median(skills)), config.population.calibration_hours, config.utility)
    logger.info("calibrated psi = %.6g for median skill %.2f", psi, float(np.median(skills)))

    return replace(config.utility, psi=psi)


def _failure_entry(role: str, agent_id: str, decision: Decision) -> dict:
    return {"agent_id": agent_id, "role": role, "replies": list(decision.failures), "fell_back": decision.fell_back}


class Simulation:
    """
    The two-level loop: workers act every step, the planner every
    two_timescale steps, elections at tax-year boundaries
    """

    def __init__(
        self,
        config: SimConfig,
        gateway: Optional[ChatGateway] = None,
        skills: Optional[Sequence[float]] = None,
        personas: Optional[Sequence[Persona]] = None,
    ) -> None:
        self.config = config
        if skills is None:
            skills, built = build_population(config.population, config.n_workers, config.seed)
            personas = personas if personas is not None else built
        skills = np.asarray(skills, dtype=float)
        if skills.shape != (config.n_workers,):
            raise ValueError(f"{skills.size} skills given for {config.n_workers} workers")
        if personas is None:
            personas = assign_personas(
                config.n_workers, load_persona_library(config.population.persona_library), config.seed + 1
            )
        if len(personas) != config.n_workers:
            raise ValueError(f"{len(personas)} personas given for {config.n_workers} workers")

        self.skills = skills
        self.personas = list(personas)
        self.params = resolve_utility(config, skills)
        self.economy = build_economy(skills, self.params, config.labor_bounds)
        self.max_effective_rates = np.array([p.max_effective_rate for p in self.personas])
        self.min_marginal_retentions = np.array([p.min_marginal_retention for p in self.personas])
        self.owns_gateway = gateway is None
        self.gateway = gateway or build_gateway(config.gateway, config.mock, keep_transcript=False)
        self.initial_schedule = config.initial_tax_schedule()
        self.log = EventLog(
            header=make_header(config.to_dict(), config.n_workers, self.initial_schedule.thresholds, VERSION)
        )
        self.actions = 0
        self.stats: dict = {}
        self.final_state: Optional[SimState] = None
        self._pool: Optional[ThreadPoolExecutor] = None

    def planner_phase(self, tax_year: int) -> str:
        return EXPLORE if tax_year < self.config.explore_fraction * self.config.n_years else EXPLOIT

    def worker_phase(self, t: int) -> str:
        return EXPLORE if t % self.config.steps_per_year < self.config.explore_fraction * self.config.steps_per_year else EXPLOIT

    def fan_out(self, decide: Callable[[int], Decision]) -> list[Decision]:
        """
        Per-worker decisions on a thread pool, returned in worker order
        """
        if self._pool is None:
            self._pool = ThreadPoolExecutor(max_workers=self.config.gateway.max_in_flight)

        return list(self._pool.map(decide, range(self.config.n_workers)))

    def initial_state(self) -> SimState:
        config = self.config
        labor = np.full(config.n_workers, float(config.initial_labor))
        pre_tax = self.skills * labor
        post_tax, _, rebate = apply_taxes(self.initial_schedule, pre_tax)
        utilities = isoelastic_utility(post_tax, labor, self.params)
        workers = tuple(
            WorkerState(
                skill=float(self.skills[i]),
                persona=self.personas[i],
                labor=float(labor[i]),
                pre_tax=float(pre_tax[i]),
                post_tax=float(post_tax[i]),
                utility=float(utilities[i]),
            )
            for i in range(config.n_workers)
        )

        return SimState(
            t=0,
            steps_per_year=config.steps_per_year,
            schedule=self.initial_schedule,
            workers=workers,
            rebate=float(rebate),
            buffer=ReplayBuffer(capacity=config.buffer_capacity),
            phase=self.planner_phase(0),
        )

    def close_period(self, state: SimState) -> tuple[SimState, float]:
        """
        Credits the average SWF since the last planner boundary to the
        schedule that was in force
        """
        average = float(np.mean(state.period_swf))
        buffer = buffer_update(state.buffer, state.period_schedule, average, (state.t - 1) // state.steps_per_year)
        low, high = state.swf_range or (average, average)
        logger.info(
            "steps %d-%d: mean SWF %.6g under rates %s, best in memory %.6g",
            state.t - len(state.period_swf),
            state.t - 1,
            average,
            np.round(state.period_schedule.rates, 4).tolist(),
            buffer.best.swf,
        )

        return replace(state, buffer=buffer, swf_range=(min(low, average), max(high, average)), period_swf=()), average

    def run_election(self, state: SimState, failures: Optional[list] = None) -> SimState:
        """
        Incumbent against a challenger, one vote per worker; the winner's
        schedule is installed and the shared memory carries over
        """
        failures = failures if failures is not None else []
        config = self.config
        rng = np.random.default_rng([config.seed, state.tax_year, 1])
        counts, _ = bracket_histograms(state.schedule, state.pre_tax, state.utilities)
        platforms = [
            candidate_platform(INCUMBENT, state.schedule, self.gateway, rng, 0, counts, state.candidate_sequence),
            candidate_platform(CHALLENGER, state.schedule, self.gateway, rng, 1, counts, state.candidate_sequence + 2),
        ]

        workers = state.workers
        if config.worker_policy == "llm":

            def decide(i: int) -> Decision:
                worker = state.workers[i]
                return cast_vote_llm(
                    worker,
                    worker.persona,
                    platforms,
                    state.rebate,
                    self.params,
                    self.gateway,
                    agent_id=str(i),
                    sequence=worker.sequence,
                    labor_bounds=config.labor_bounds,
                )

            decisions = self.fan_out(decide)
            votes = [int(decision.value) for decision in decisions]
            workers = tuple(replace(w, sequence=w.sequence + d.calls) for w, d in zip(workers, decisions))
            failures += [_failure_entry("voter", str(i), d) for i, d in enumerate(decisions) if d.failures]
        else:
            votes = scripted_votes(state.skills, platforms, state.rebate, self.params, config.labor_bounds)
        self.actions += len(votes)

        winner, tallies = tally(votes, platforms)
        installed = next(p for p in platforms if p.candidate_id == winner).proposed_schedule
        self.log.append(
            {
                "kind": ELECTION,
                "t": state.t,
                "tax_year": state.tax_year,
                "platforms": [platform.to_dict() for platform in platforms],
                "votes": votes,
                "counts": {str(cid): count for cid, count in tallies.items()},
                "winner": winner,
            }
        )
        logger.info("tax year %d election: votes %s, candidate %d installed", state.tax_year, tallies, winner)

        return replace(
            state,
            schedule=installed,
            workers=workers,
            candidate_sequence=state.candidate_sequence + 4,
        )

    def planner_update(self, state: SimState, average: float, failures: list) -> SimState:
        config = self.config
        phase = self.planner_phase(state.tax_year)
        obs = planner_observation(state.schedule, state.pre_tax, state.utilities, average, state.buffer)
        decision = planner_propose(
            obs,
            state.buffer,
            phase,
            self.gateway,
            state.schedule,
            tax_year=state.tax_year,
            swf_range=state.swf_range,
            include_explore_cue=config.include_explore_cue,
            include_exploit_cue=config.include_exploit_cue,
            sequence=state.planner_sequence,
            max_retries=config.max_parse_retries,
        )
        self.actions += 1
        if decision.failures:
            failures.append(_failure_entry("planner", "planner", decision))
        schedule = apply_delta(state.schedule, decision.value)
        self.log.append(
            {
                "kind": POLICY,
                "t": state.t,
                "tax_year": state.tax_year,
                "phase": phase,
                "old_schedule": state.schedule.to_dict(),
                "new_schedule": schedule.to_dict(),
                "delta": list(decision.value),
                "fell_back": decision.fell_back,
            }
        )
        logger.debug("t=%d %s planner: %s -> %s", state.t, phase, state.schedule.rates, schedule.rates)

        return replace(
            state, schedule=schedule, phase=phase, planner_sequence=state.planner_sequence + decision.calls
        )

    def calibrate_phi(self, state: SimState) -> SimState:
        phi = PHI_SHARE * np.abs(isoelastic_utility(state.post_tax, state.labor, self.params))

        return replace(state, workers=tuple(replace(w, phi=float(p)) for w, p in zip(state.workers, phi)))

    def anticipated_rebate(self, state: SimState, prior: TaxSchedule) -> float:
        """
        Rebate the rational best response is taken against: the previous
        step's, except on the first step under a new schedule, where it is the
        balanced rebate of that schedule and labor is stationary from there on
        """
        if self.config.scenario == BOUNDED or (state.t > 0 and state.schedule == prior):
            return state.rebate
        rebate, _ = self.economy.balanced_rebate(state.schedule)

        return rebate

    def choose_labor(self, state: SimState, rebate: float, failures: list) -> tuple[np.ndarray, list[int]]:
        config = self.config
        if config.scenario == BOUNDED:
            scripted = bounded_best_response(
                self.skills,
                state.schedule,
                state.rebate,
                self.params,
                self.max_effective_rates,
                self.min_marginal_retentions,
                config.labor_bounds,
                phi=state.phi,
            )
        else:
            scripted = best_response_labor(self.skills, state.schedule, rebate, self.params, config.labor_bounds)
        sequences = [worker.sequence for worker in state.workers]
        if config.worker_policy != "llm":
            return scripted, sequences

        phase = self.worker_phase(state.t)

        def decide(i: int) -> Decision:
            worker = state.workers[i]
            return worker_decide_llm(
                worker.observation(state.schedule, state.rebate, config.history_window),
                worker.persona,
                phase,
                self.gateway,
                agent_id=str(i),
                sequence=worker.sequence,
                context={"rational_labor": float(scripted[i])},
                max_retries=config.max_parse_retries,
            )

        decisions = self.fan_out(decide)
        failures += [_failure_entry("worker", str(i), d) for i, d in enumerate(decisions) if d.failures]
        labor = np.clip([decision.value for decision in decisions], *config.labor_bounds)

        return labor, [s + d.calls for s, d in zip(sequences, decisions)]

    def satisfaction(
        self, schedule: TaxSchedule, pre_tax: np.ndarray, sequences: list[int], failures: list
    ) -> tuple[np.ndarray, list[int]]:
        if self.config.satisfaction != "llm":
            return satisfaction_flags(schedule, pre_tax, self.max_effective_rates, self.min_marginal_retentions), sequences

        def decide(i: int) -> Decision:
            return satisfaction_flag_llm(
                float(pre_tax[i]),
                self.personas[i],
                schedule,
                self.gateway,
                agent_id=str(i),
                sequence=sequences[i],
                max_retries=self.config.max_parse_retries,
            )

        decisions = self.fan_out(decide)
        failures += [_failure_entry("satisfaction", str(i), d) for i, d in enumerate(decisions) if d.failures]

        return np.array([d.value for d in decisions], dtype=int), [s + d.calls for s, d in zip(sequences, decisions)]

    def step(self, state: SimState) -> SimState:
        """
        One loop body: boundary work (memory, election, planner), then every
        worker picks labor against the previous rebate (the balanced one on a
        schedule's first step)
        """
        config = self.config
        t = state.t
        if t >= config.total_steps:
            raise ValueError(f"step {t} is past the horizon {config.total_steps}")
        failures = []
        prior = state.schedule

        if t > 0 and t % config.two_timescale == 0:
            state, average = self.close_period(state)
            if config.governance == DEMOCRATIC and t % config.steps_per_year == 0:
                state = self.run_election(state, failures)
            if config.planner_policy == "llm":
                state = self.planner_update(state, average, failures)
            state = replace(state, period_schedule=state.schedule)
        if config.scenario == BOUNDED and t % config.steps_per_year == 0:
            state = self.calibrate_phi(state)

        schedule = state.schedule
        labor, sequences = self.choose_labor(state, self.anticipated_rebate(state, prior), failures)
        pre_tax = self.skills * labor
        post_tax, total_tax, rebate = apply_taxes(schedule, pre_tax)
        flags = None
        if config.scenario == BOUNDED:
            flags, sequences = self.satisfaction(schedule, pre_tax, sequences, failures)
            utilities = bounded_utility(post_tax, labor, flags, self.params, phi=state.phi)
        else:
            utilities = isoelastic_utility(post_tax, labor, self.params)
        swf = social_welfare(pre_tax, utilities)
        self.actions += config.n_workers

        if failures:
            self.log.append({"kind": PARSE_FAILURE, "t": t, "failures": failures})
            logger.warning("t=%d: %d agents sent unusable replies", t, len(failures))
        record = {
            "kind": STEP,
            "t": t,
            "tax_year": state.tax_year,
            "rates": list(schedule.rates),
            "labor": labor.tolist(),
            "pre_tax": pre_tax.tolist(),
            "post_tax": post_tax.tolist(),
            "utilities": utilities.tolist(),
            "swf": swf,
            "rebate": rebate,
            "total_tax": total_tax,
        }
        if flags is not None:
            record["satisfied"] = flags.tolist()
        self.log.append(record)
        logger.debug("t=%d swf=%.6g rebate=%.2f", t, swf, rebate)

        workers = tuple(
            replace(
                worker,
                labor=float(labor[i]),
                pre_tax=float(pre_tax[i]),
                post_tax=float(post_tax[i]),
                utility=float(utilities[i]),
                satisfied=None if flags is None else int(flags[i]),
                history=push_history(
                    worker.history,
                    HistoryEntry(
                        labor=float(labor[i]),
                        utility=float(utilities[i]),
                        satisfied=None if flags is None else int(flags[i]),
                    ),
                    config.history_window,
                ),
                sequence=sequences[i],
            )
            for i, worker in enumerate(state.workers)
        )

        return replace(
            state,
            t=t + 1,
            workers=workers,
            rebate=float(rebate),
            period_swf=state.period_swf + (swf,),
            last_swf=swf,
        )

    def run(self) -> tuple[EventLog, MetricsSummary]:
        config = self.config
        logger.info(
            "simulation start: %d workers, %d steps, tax year %d, %s/%s, %s backend",
            config.n_workers,
            config.total_steps,
            config.steps_per_year,
            config.scenario,
            config.governance,
            config.backend,
        )
        started = time.perf_counter()
        state = self.initial_state()
        try:
            while state.t < config.total_steps:
                state = self.step(state)
            if state.period_swf:
                state, _ = self.close_period(state)
        finally:
            if self._pool is not None:
                self._pool.shutdown()
                self._pool = None
            if self.owns_gateway:
                self.gateway.close()
        elapsed = time.perf_counter() - started

        self.final_state = state
        self.stats = {
            "steps": config.total_steps,
            "actions": self.actions,
            "gateway_calls": self.gateway.calls,
            "elapsed_seconds": elapsed,
            "actions_per_second": self.actions / elapsed if elapsed > 0 else None,
            "frames_per_second": config.total_steps / elapsed if elapsed > 0 else None,
        }
        summary = summarize(self.log)
        logger.info(
            "simulation end: final SWF %.6g, %.0f actions/s, %.1f steps/s",
            summary.final_swf,
            self.stats["actions_per_second"] or 0.0,
            self.stats["frames_per_second"] or 0.0,
        )

        return self.log, summary


def run_simulation(
    config: SimConfig,
    gateway: Optional[ChatGateway] = None,
    skills: Optional[Sequence[float]] = None,
    personas: Optional[Sequence[Persona]] = None,
) -> tuple[EventLog, MetricsSummary]:
    return Simulation(config, gateway, skills, personas).run()


def evaluate_schedule(config: SimConfig, schedule: TaxSchedule, skills: Optional[Sequence[float]] = None) -> float:
    """
    SWF at the last step of one tax year of scripted workers under a frozen
    schedule
    """
    log, _ = run_simulation(evaluation_config(config, schedule), skills=skills)

    return log.steps[-1]["swf"]
