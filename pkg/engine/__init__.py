from engine.config import ConfigError, SaezConfig, SimConfig, apply_overrides, build_config, load_config
from engine.event_log import EventLog, EventLogError, read_event_log
from engine.exports import EXPORT_KINDS, export, export_all
from engine.metrics import MetricsSummary, convergence_step, replay, summarize, swf_moving_average
from engine.simulation import Simulation, evaluate_schedule, run_simulation
from engine.state import SimState, WorkerState
