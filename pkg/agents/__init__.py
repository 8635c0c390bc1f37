from agents.actions import (
    ActionMessage,
    ActionParseError,
    NoJsonFound,
    NonNumeric,
    WrongArity,
    WrongKey,
    parse_action,
    render_action,
)
from agents.best_response import (
    best_response_labor,
    best_response_utility,
    bounded_best_response,
    rational_best_response,
)
from agents.elections import (
    CHALLENGER,
    INCUMBENT,
    Platform,
    candidate_platform,
    cast_vote_llm,
    cast_vote_scripted,
    scripted_votes,
    tally,
)
from agents.llm_policies import Decision, planner_propose, satisfaction_flag_llm, worker_decide_llm
from agents.observations import (
    EXPLOIT,
    EXPLORE,
    HistoryEntry,
    PlannerObservation,
    WorkerObservation,
    planner_observation,
)
from agents.replay_buffer import BufferEntry, ReplayBuffer, buffer_update
from agents.satisfaction import satisfaction_flag_scripted, satisfaction_flags
