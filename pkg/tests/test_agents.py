import numpy as np
import pytest

from agents import (
    CHALLENGER,
    INCUMBENT,
    EXPLOIT,
    EXPLORE,
    ActionMessage,
    HistoryEntry,
    NoJsonFound,
    NonNumeric,
    Platform,
    ReplayBuffer,
    WorkerObservation,
    WrongArity,
    WrongKey,
    best_response_labor,
    bounded_best_response,
    buffer_update,
    candidate_platform,
    cast_vote_llm,
    cast_vote_scripted,
    parse_action,
    planner_observation,
    planner_propose,
    rational_best_response,
    render_action,
    satisfaction_flag_llm,
    satisfaction_flag_scripted,
    worker_decide_llm,
)
from agents.llm_policies import parse_verdict
from agents.observations import push_history
from agents.prompts import EXPLOIT_CUE, EXPLORE_CUE, planner_prompts, worker_phase_hint
from agents.satisfaction import scripted_verdict
from fiscal_core import TaxSchedule, UtilityParams, flat_schedule, isoelastic_utility, tax_due_vector, three_bracket_schedule
from llm_gateway import ChatGateway, GatewayConfig, MockPolicy
from population import Persona, calibrate_psi


PARAMS = UtilityParams(eta=0.5, psi=0.01, delta=2.0)
PERSONA = Persona(
    id=0,
    text="You are a 45-year-old nurse.",
    age=45,
    occupation="nurse",
    income_anchor=70000.0,
    satisfaction_rule=(0.25, 0.65),
)


def scripted_gateway(*replies: str) -> ChatGateway:
    return ChatGateway(GatewayConfig(), mock_policy=MockPolicy(mode="SCRIPT", script=replies))


def observation(labor: float = 30.0, history: tuple = ()) -> WorkerObservation:
    return WorkerObservation(
        pre_tax=60000.0, post_tax=52000.0, marginal_rate_at_income=0.22, rebate=3000.0, labor=labor, history=history
    )


def closed_form_labor(skill: float, tau: float, params: UtilityParams) -> float:
    base = ((1 - tau) * skill) ** (1 - params.eta) / (params.psi * params.delta)
    return base ** (1 / (params.delta - 1 + params.eta))


def test_best_response_cases():
    assert rational_best_response(10.0, flat_schedule(0.0), 0.0, PARAMS) == pytest.approx(29.24, abs=0.01)
    assert rational_best_response(10.0, flat_schedule(0.5), 0.0, PARAMS) == pytest.approx(23.21, abs=0.01)
    lazy = UtilityParams(eta=0.5, psi=1e6, delta=2.0)
    assert rational_best_response(10.0, flat_schedule(0.2), 0.0, lazy) == pytest.approx(0.0, abs=1e-6)


def test_best_response_matches_closed_form_on_flat_schedules():
    rng = np.random.default_rng(0)
    for _ in range(100):
        params = UtilityParams(eta=rng.uniform(0.0, 0.9), delta=rng.uniform(1.5, 3.0), psi=0.01)
        skill, tau = rng.uniform(5.0, 3000.0), rng.uniform(0.0, 0.9)
        params = UtilityParams(eta=params.eta, delta=params.delta, psi=calibrate_psi(skill, rng.uniform(10.0, 60.0), params))
        expected = closed_form_labor(skill, tau, params)
        if not 1.0 < expected < 99.0:
            continue
        labor = rational_best_response(skill, flat_schedule(tau), 0.0, params)
        assert labor == pytest.approx(expected, rel=1e-4)


def test_best_response_matches_dense_grid_on_piecewise_schedules():
    rng = np.random.default_rng(1)
    grid = np.arange(0.0, 100.0 + 1e-9, 1e-3)
    for _ in range(100):
        n = int(rng.integers(2, 8))
        thresholds = np.concatenate([[0.0], np.sort(rng.uniform(1000.0, 300000.0, n - 1))])
        schedule = TaxSchedule(thresholds=tuple(thresholds), rates=tuple(rng.uniform(0.0, 0.9, n)))
        skill = rng.uniform(100.0, 3000.0)
        params = UtilityParams(eta=0.5, delta=2.0, psi=calibrate_psi(skill, rng.uniform(20.0, 60.0), PARAMS))
        rebate = rng.uniform(0.0, 20000.0)

        def utility(labor):
            z = skill * labor
            return isoelastic_utility(z - tax_due_vector(schedule, z) + rebate, labor, params)

        values = utility(grid)
        grid_best = grid[values.argmax()]
        labor = rational_best_response(skill, schedule, rebate, params)
        assert 0.0 <= labor <= 100.0
        assert utility(labor) >= values.max() - 1e-9 * abs(values.max())
        assert abs(labor - grid_best) < 1e-3 or utility(grid_best) == pytest.approx(utility(labor), rel=1e-9)


def test_best_response_respects_bounds_and_is_vectorised():
    skills = np.array([10.0, 500.0, 5000.0])
    labor = best_response_labor(skills, flat_schedule(0.3), 100.0, PARAMS, labor_bounds=(10.0, 60.0))
    assert labor.shape == (3,)
    assert np.all((labor >= 10.0) & (labor <= 60.0))
    with pytest.raises(ValueError):
        best_response_labor(skills, flat_schedule(0.3), 0.0, PARAMS, labor_bounds=(0.0, 120.0))


def test_bounded_best_response_stays_in_satisfied_bracket():
    schedule = TaxSchedule(thresholds=(0.0, 50000.0), rates=(0.1, 0.5))
    skill = 2000.0
    params = UtilityParams(eta=0.5, delta=2.0, psi=calibrate_psi(skill, 40.0, PARAMS), phi=1e6)
    unrestricted = rational_best_response(skill, schedule, 0.0, params)
    assert skill * unrestricted > 50000.0

    bounded = bounded_best_response([skill], schedule, 0.0, params, [1.0], [0.6])[0]
    assert skill * bounded < 50000.0
    assert bounded == pytest.approx(25.0, abs=1e-6)


def test_bounded_best_response_reduces_to_rational_for_trivial_personas():
    skills = np.array([300.0, 1500.0, 4000.0])
    schedule = three_bracket_schedule()
    params = UtilityParams(eta=0.5, delta=2.0, psi=calibrate_psi(1500.0, 40.0, PARAMS), phi=5.0)
    rational = best_response_labor(skills, schedule, 1000.0, params)
    always = bounded_best_response(skills, schedule, 1000.0, params, [1.0] * 3, [0.0] * 3)
    never = bounded_best_response(skills, schedule, 1000.0, params, [0.0] * 3, [1.0] * 3)
    assert always == pytest.approx(rational, abs=1e-6)
    assert never == pytest.approx(rational, abs=1e-6)


def test_satisfaction_flag_scripted():
    schedule = TaxSchedule(thresholds=(0.0, 50000.0), rates=(0.0, 0.32))
    obs = WorkerObservation(pre_tax=160000.0, post_tax=124800.0, marginal_rate_at_income=0.32, rebate=0.0)
    assert satisfaction_flag_scripted(obs, PERSONA, schedule) == 1

    impossible = Persona(id=1, text="x", age=30, occupation="x", income_anchor=1.0, satisfaction_rule=(0.0, 1.0))
    assert satisfaction_flag_scripted(obs, impossible, schedule) == 0

    zero = WorkerObservation(pre_tax=0.0, post_tax=0.0, marginal_rate_at_income=0.1, rebate=0.0)
    assert satisfaction_flag_scripted(zero, PERSONA, flat_schedule(0.1)) == 1


def test_scripted_verdict_reasoning_parses_back():
    verdict = scripted_verdict(60000.0, PERSONA, flat_schedule(0.3))
    assert verdict.satisfied == 0
    assert parse_verdict(verdict.reasoning(PERSONA)) == 0
    assert parse_verdict("Thinking... Verdict: **SATISFIED**") == 1
    assert parse_verdict("no decision") is None


@pytest.mark.parametrize("reply, expected", [('{"LABOR": 40}', 40.0), ('Sure. {"LABOR": 150}', 100.0)])
def test_worker_decide_llm(reply, expected):
    decision = worker_decide_llm(observation(), PERSONA, EXPLOIT, scripted_gateway(reply))
    assert decision.value == expected
    assert decision.calls == 1
    assert not decision.fell_back


def test_worker_falls_back_to_previous_labor():
    gateway = scripted_gateway("forty hours", '{"HOURS": 3}', '{"LABOR": "forty"}')
    decision = worker_decide_llm(observation(labor=33.0), PERSONA, EXPLORE, gateway)
    assert decision.value == 33.0
    assert decision.fell_back
    assert decision.calls == 3
    assert len(decision.failures) == 3


def test_worker_retries_until_a_reply_parses():
    decision = worker_decide_llm(observation(), PERSONA, EXPLORE, scripted_gateway("no idea", '{"LABOR": 45}'))
    assert decision.value == 45.0
    assert decision.calls == 2
    assert decision.failures == ("no idea",)


def planner_inputs(buffer: ReplayBuffer = ReplayBuffer()):
    schedule = three_bracket_schedule()
    obs = planner_observation(schedule, [50000.0, 100000.0, 200000.0], [1.0, 2.0, 3.0], 0.5, buffer)
    return obs, schedule


@pytest.mark.parametrize(
    "reply, expected",
    [
        ('{"DELTA":[5,-10,0]}', [5.0, -10.0, 0.0]),
        ('{"DELTA":[30,-40,0]}', [20.0, -20.0, 0.0]),
        ('{"DELTA":[1,2]}', [0.0, 0.0, 0.0]),
    ],
)
def test_planner_propose(reply, expected):
    obs, schedule = planner_inputs()
    decision = planner_propose(obs, ReplayBuffer(), EXPLORE, scripted_gateway(reply), schedule)
    assert decision.value == expected


def test_planner_prompt_carries_memory_and_cues():
    buffer = buffer_update(ReplayBuffer(), three_bracket_schedule([0.1, 0.2, 0.3]), 2.0)
    obs, schedule = planner_inputs(buffer)
    _, explore = planner_prompts(obs, schedule, EXPLORE, 1)
    _, exploit = planner_prompts(obs, schedule, EXPLOIT, 1)
    _, uncued = planner_prompts(obs, schedule, EXPLOIT, 1, include_exploit_cue=False)
    assert "[10.0% 20.0% 30.0%]" in explore
    assert EXPLORE_CUE in explore
    assert EXPLOIT_CUE in exploit
    assert EXPLOIT_CUE not in uncued


def test_worker_phase_hint_follows_last_utility_change():
    history = (HistoryEntry(labor=30.0, utility=1.0), HistoryEntry(labor=35.0, utility=1.5))
    assert "increased from 35.0" in worker_phase_hint(observation(history=history), EXPLOIT)
    history = (HistoryEntry(labor=30.0, utility=1.0), HistoryEntry(labor=35.0, utility=0.5))
    assert "decreased from 35.0" in worker_phase_hint(observation(history=history), EXPLOIT)


def test_history_window():
    history = ()
    for labor in range(15):
        history = push_history(history, HistoryEntry(labor=float(labor), utility=0.0), 10)
    assert len(history) == 10
    assert history[0].labor == 5.0
    with pytest.raises(ValueError):
        WorkerObservation(pre_tax=1.0, post_tax=1.0, marginal_rate_at_income=0.0, rebate=0.0, history=history, window=5)


def test_buffer_update_cases():
    a, b, c = (flat_schedule(rate) for rate in (0.1, 0.2, 0.3))
    buffer = buffer_update(ReplayBuffer(capacity=2), a, 1.0)
    assert [(e.schedule, e.swf) for e in buffer.entries] == [(a, 1.0)]

    full = ReplayBuffer(capacity=2)
    full = buffer_update(buffer_update(full, a, 3.0), b, 2.0)
    assert buffer_update(full, c, 1.0).entries == full.entries
    assert [(e.schedule, e.swf) for e in buffer_update(full, c, 4.0).entries] == [(c, 4.0), (a, 3.0)]


def test_buffer_best_is_monotone():
    rng = np.random.default_rng(2)
    buffer = ReplayBuffer(capacity=3)
    best = -np.inf
    for value in rng.normal(size=50):
        buffer = buffer_update(buffer, flat_schedule(0.1), value)
        assert buffer.best.swf >= best
        best = buffer.best.swf
        assert len(buffer) <= 3
        assert [e.swf for e in buffer.entries] == sorted((e.swf for e in buffer.entries), reverse=True)


def test_parse_action_cases():
    assert parse_action('I will work hard. {"LABOR": 35.5}', "LABOR").labor == 35.5
    assert parse_action('{"LABOR": 10} then {"LABOR": 20}', "LABOR").labor == 20.0
    with pytest.raises(WrongArity):
        parse_action('{"DELTA":[1,2]}', "DELTA", 3)
    with pytest.raises(NonNumeric):
        parse_action('{"LABOR":"forty"}', "LABOR")
    with pytest.raises(NoJsonFound):
        parse_action("forty hours", "LABOR")
    with pytest.raises(WrongKey):
        parse_action('{"HOURS": 40}', "LABOR")


def test_render_inverts_parse():
    for message, arity in [
        (ActionMessage(kind="LABOR", labor=37.25), 1),
        (ActionMessage(kind="DELTA", delta=(1.5, -20.0, 0.0)), 3),
        (ActionMessage(kind="VOTE", vote=1), 1),
    ]:
        assert parse_action(render_action(message), message.kind, arity) == message
    with pytest.raises(ValueError):
        ActionMessage(kind="LABOR", labor=1.0, vote=2)


def test_candidate_platforms():
    schedule = three_bracket_schedule()
    gateway = ChatGateway(GatewayConfig())
    incumbent = candidate_platform(INCUMBENT, schedule, gateway, np.random.default_rng(0), 0)
    assert incumbent.proposed_schedule == schedule
    assert incumbent.pitch_text

    first = candidate_platform(CHALLENGER, schedule, gateway, np.random.default_rng(4), 1)
    second = candidate_platform(CHALLENGER, schedule, gateway, np.random.default_rng(4), 1)
    assert first == second
    change = np.asarray(first.proposed_schedule.rates) - np.asarray(schedule.rates)
    assert np.all(np.abs(change) <= 0.2 + 1e-12)
    assert all(0.0 <= rate <= 0.99 for rate in first.proposed_schedule.rates)


def platforms(*rates: float) -> list[Platform]:
    return [Platform(candidate_id=i, proposed_schedule=flat_schedule(r), pitch_text="") for i, r in enumerate(rates)]


def test_cast_vote_scripted():
    class Worker:
        skill = 1000.0

    params = UtilityParams(eta=0.5, delta=2.0, psi=calibrate_psi(1000.0, 40.0, PARAMS))
    assert cast_vote_scripted(Worker(), platforms(0.3, 0.3), 0.0, params) == 0
    assert cast_vote_scripted(Worker(), platforms(0.5, 0.1), 0.0, params) == 1
    assert cast_vote_scripted(Worker(), platforms(0.1, 0.5), 0.0, params) == 0


def test_cast_vote_llm_and_fallback():
    class Worker:
        skill = 1000.0

    params = UtilityParams(eta=0.5, delta=2.0, psi=calibrate_psi(1000.0, 40.0, PARAMS))
    options = platforms(0.1, 0.5)
    decision = cast_vote_llm(Worker(), PERSONA, options, 0.0, params, scripted_gateway('{"VOTE": 1}'))
    assert decision.value == 1

    decision = cast_vote_llm(Worker(), PERSONA, options, 0.0, params, scripted_gateway('{"VOTE": 7}'))
    assert decision.value == 0
    assert decision.fell_back


def test_satisfaction_flag_llm():
    schedule = flat_schedule(0.1)
    echoed = satisfaction_flag_llm(60000.0, PERSONA, schedule, ChatGateway(GatewayConfig()))
    assert echoed.value == scripted_verdict(60000.0, PERSONA, schedule).satisfied
    assert not echoed.fell_back

    silent = satisfaction_flag_llm(60000.0, PERSONA, schedule, scripted_gateway("I am not sure."))
    assert silent.fell_back
    assert silent.value == 1
    assert silent.calls == 3
    assert silent.failures == ("I am not sure.",) * 3


def test_satisfaction_flag_llm_retries_until_verdict():
    schedule = flat_schedule(0.1)
    gateway = scripted_gateway("Let me think about this.", "Too much goes to taxes. Verdict: UNSATISFIED")
    decision = satisfaction_flag_llm(60000.0, PERSONA, schedule, gateway)

    assert decision.value == 0
    assert decision.calls == 2
    assert decision.failures == ("Let me think about this.",)
    assert not decision.fell_back

    shifted = satisfaction_flag_llm(60000.0, PERSONA, schedule, gateway, sequence=1, max_retries=1)
    assert (shifted.value, shifted.calls, shifted.failures) == (0, 1, ())
