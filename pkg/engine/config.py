import json
import logging
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Iterable, Optional, Union

from fiscal_core.tax_schedule import TaxSchedule, flat_schedule, three_bracket_schedule, us_2024_schedule
from fiscal_core.utility import UtilityParams
from llm_gateway.mock import MockPolicy
from llm_gateway.request import GatewayConfig
from population.builder import SOURCES, PopulationConfig
from saez.economy import WEIGHTINGS
from saez.solvers import DEFAULT_OFFSETS, ELASTICITY_METHODS
from utils import DEFAULT_LABOR, LABOR_BOUNDS, to_jsonable


logger = logging.getLogger(__name__)

ISOELASTIC = "ISOELASTIC"
BOUNDED = "BOUNDED"
SCENARIOS = (ISOELASTIC, BOUNDED)

FIXED = "FIXED"
DEMOCRATIC = "DEMOCRATIC"
GOVERNANCE = (FIXED, DEMOCRATIC)

WORKER_POLICIES = ("scripted", "llm")
PLANNER_POLICIES = ("llm", "fixed")
SATISFACTION_MODES = ("scripted", "llm")
INITIAL_SCHEDULES = ("us_2024", "three_bracket", "flat")
SAEZ_METHODS = ("piecewise", "grid", "flat", "coordinate")


class ConfigError(ValueError):
    """
    Every violated constraint of a configuration, one diagnostic per field
    """

    def __init__(self, diagnostics: Iterable[str]) -> None:
        self.diagnostics = list(diagnostics)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {d}" for d in self.diagnostics))


@dataclass(frozen=True)
class SaezConfig:
    method: str = "piecewise"
    dtau: float = 0.01
    damping: float = 0.5
    max_iters: int = 50
    tolerance: float = 1e-3
    elasticity_method: str = "perturbation"
    weighting: str = "current"
    marginal_utility: bool = False
    report_gap: bool = False
    grid_offsets: tuple = DEFAULT_OFFSETS
    max_sweeps: int = 50
    flat_grid_step: float = 0.01
    max_workers: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "grid_offsets", tuple(self.grid_offsets))
        if self.method not in SAEZ_METHODS:
            raise ValueError(f"unknown method {self.method!r}, expected one of {SAEZ_METHODS}")
        if self.elasticity_method not in ELASTICITY_METHODS:
            raise ValueError(f"unknown elasticity_method {self.elasticity_method!r}")
        if self.weighting not in WEIGHTINGS:
            raise ValueError(f"unknown weighting {self.weighting!r}, expected one of {WEIGHTINGS}")
        if self.dtau == 0:
            raise ValueError("dtau must be nonzero")
        if not 0 < self.damping <= 1:
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")
        if self.max_iters < 1 or self.max_sweeps < 1 or self.max_workers < 1:
            raise ValueError("max_iters, max_sweeps and max_workers must be positive")
        if not self.grid_offsets:
            raise ValueError("grid_offsets must be nonempty")
        if not 0 < self.flat_grid_step < 1:
            raise ValueError(f"flat_grid_step must lie in (0, 1), got {self.flat_grid_step}")


SECTIONS = {
    "utility": UtilityParams,
    "population": PopulationConfig,
    "gateway": GatewayConfig,
    "mock": MockPolicy,
    "saez": SaezConfig,
}
TUPLE_FIELDS = ("labor_bounds", "brackets", "initial_rates")
INT_FIELDS = (
    "n_workers",
    "total_steps",
    "steps_per_year",
    "buffer_capacity",
    "seed",
    "history_window",
    "swf_window",
    "max_parse_retries",
)
FLOAT_FIELDS = ("initial_labor", "explore_fraction", "convergence_tolerance")


@dataclass(frozen=True)
class SimConfig:
    """
    One simulation run. `planner_update_period` None means once per tax
    year; `calibrate_psi` sets psi so the median-skill worker supplies
    population.calibration_hours under zero tax
    """

    n_workers: int = 100
    total_steps: int = 3000
    steps_per_year: int = 128
    planner_update_period: Optional[int] = None
    buffer_capacity: int = 5
    labor_bounds: tuple = LABOR_BOUNDS
    initial_schedule: str = "us_2024"
    brackets: Optional[tuple] = None
    initial_rates: Optional[tuple] = None
    scenario: str = ISOELASTIC
    governance: str = FIXED
    seed: int = 0
    worker_policy: str = "scripted"
    planner_policy: str = "llm"
    satisfaction: str = "scripted"
    initial_labor: float = DEFAULT_LABOR
    history_window: int = 10
    explore_fraction: float = 0.5
    convergence_tolerance: float = 1e-3
    swf_window: int = 16
    include_explore_cue: bool = True
    include_exploit_cue: bool = True
    max_parse_retries: int = 3
    calibrate_psi: bool = True
    utility: UtilityParams = field(default_factory=UtilityParams)
    population: PopulationConfig = field(default_factory=PopulationConfig)
    gateway: GatewayConfig = field(default_factory=GatewayConfig)
    mock: MockPolicy = field(default_factory=MockPolicy)
    saez: SaezConfig = field(default_factory=SaezConfig)

    @property
    def two_timescale(self) -> int:
        return self.planner_update_period or self.steps_per_year

    @property
    def n_years(self) -> int:
        return math.ceil(self.total_steps / self.steps_per_year)

    @property
    def backend(self) -> str:
        return self.gateway.backend

    def initial_tax_schedule(self) -> TaxSchedule:
        if self.initial_schedule == "us_2024":
            schedule = us_2024_schedule()
        elif self.initial_schedule == "three_bracket":
            schedule = three_bracket_schedule()
        else:
            schedule = flat_schedule(0.0)

        thresholds = self.brackets if self.brackets is not None else schedule.thresholds
        rates = self.initial_rates
        if rates is None:
            rates = schedule.rates if len(thresholds) == schedule.n_brackets else (schedule.rates[0],) * len(thresholds)

        return TaxSchedule(thresholds=tuple(thresholds), rates=tuple(rates))

    def to_dict(self) -> dict:
        data = {f.name: to_jsonable(getattr(self, f.name)) for f in fields(self) if f.name != "calibrate_psi"}
        # a null psi stands for calibration
        if self.calibrate_psi:
            data["utility"]["psi"] = None

        return data

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        return build_config(data)


def _build_section(name: str, cls: type, data: Any, diagnostics: list[str]):
    if not isinstance(data, dict):
        diagnostics.append(f"{name}: expected an object, got {type(data).__name__}")
        return cls()
    known = {f.name for f in fields(cls)}
    for key in sorted(set(data) - known):
        diagnostics.append(f"{name}.{key}: unknown field")
    try:
        return cls(**{key: value for key, value in data.items() if key in known})
    except (TypeError, ValueError) as error:
        diagnostics.append(f"{name}: {error}")
        return cls()


def _type_errors(config: SimConfig) -> list[str]:
    diagnostics = []
    for name in INT_FIELDS:
        value = getattr(config, name)
        if isinstance(value, bool) or not isinstance(value, int):
            diagnostics.append(f"{name}: expected an integer, got {value!r}")
    for name in FLOAT_FIELDS:
        value = getattr(config, name)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            diagnostics.append(f"{name}: expected a number, got {value!r}")
    if config.planner_update_period is not None and not isinstance(config.planner_update_period, int):
        diagnostics.append(f"planner_update_period: expected an integer or null, got {config.planner_update_period!r}")
    if not isinstance(config.labor_bounds, tuple) or len(config.labor_bounds) != 2:
        diagnostics.append(f"labor_bounds: expected [low, high], got {config.labor_bounds!r}")

    return diagnostics


def validate_config(config: SimConfig) -> list[str]:
    diagnostics = _type_errors(config)
    if diagnostics:
        return diagnostics
    if config.n_workers < 1:
        diagnostics.append(f"n_workers: must be at least 1, got {config.n_workers}")
    if config.steps_per_year < 1:
        diagnostics.append(f"steps_per_year: must be at least 1, got {config.steps_per_year}")
    elif config.total_steps < config.steps_per_year:
        diagnostics.append(
            f"total_steps: must be at least steps_per_year ({config.steps_per_year}), got {config.total_steps}"
        )
    elif not 1 <= config.two_timescale <= config.steps_per_year:
        diagnostics.append(
            f"planner_update_period: must lie in [1, steps_per_year], got {config.planner_update_period}"
        )
    elif config.steps_per_year % config.two_timescale:
        diagnostics.append(
            f"planner_update_period: {config.two_timescale} does not divide steps_per_year {config.steps_per_year}"
        )
    if config.buffer_capacity < 1:
        diagnostics.append(f"buffer_capacity: must be at least 1, got {config.buffer_capacity}")
    low, high = config.labor_bounds
    if not LABOR_BOUNDS[0] <= low < high <= LABOR_BOUNDS[1]:
        diagnostics.append(f"labor_bounds: must be an interval inside {list(LABOR_BOUNDS)}, got {list(config.labor_bounds)}")
    elif not low <= config.initial_labor <= high:
        diagnostics.append(f"initial_labor: {config.initial_labor} outside labor_bounds")
    for name, value, allowed in (
        ("scenario", config.scenario, SCENARIOS),
        ("governance", config.governance, GOVERNANCE),
        ("worker_policy", config.worker_policy, WORKER_POLICIES),
        ("planner_policy", config.planner_policy, PLANNER_POLICIES),
        ("satisfaction", config.satisfaction, SATISFACTION_MODES),
        ("initial_schedule", config.initial_schedule, INITIAL_SCHEDULES),
        ("population.source", config.population.source, SOURCES),
    ):
        if value not in allowed:
            diagnostics.append(f"{name}: {value!r} is not one of {list(allowed)}")
    if config.initial_schedule in INITIAL_SCHEDULES:
        try:
            config.initial_tax_schedule()
        except (TypeError, ValueError) as error:
            diagnostics.append(f"brackets/initial_rates: {error}")
    if config.history_window < 0:
        diagnostics.append(f"history_window: must be nonnegative, got {config.history_window}")
    if not 0 <= config.explore_fraction <= 1:
        diagnostics.append(f"explore_fraction: must lie in [0, 1], got {config.explore_fraction}")
    if not config.convergence_tolerance > 0:
        diagnostics.append(f"convergence_tolerance: must be positive, got {config.convergence_tolerance}")
    if config.swf_window < 1:
        diagnostics.append(f"swf_window: must be at least 1, got {config.swf_window}")
    if config.max_parse_retries < 1:
        diagnostics.append(f"max_parse_retries: must be at least 1, got {config.max_parse_retries}")

    return diagnostics


def build_config(data: dict) -> SimConfig:
    """
    Nested JSON object to a validated SimConfig; raises ConfigError listing
    every problem found
    """
    if not isinstance(data, dict):
        raise ConfigError([f"configuration must be a JSON object, got {type(data).__name__}"])
    diagnostics = []
    known = {f.name for f in fields(SimConfig)}
    for key in sorted(set(data) - known):
        diagnostics.append(f"{key}: unknown field")

    values = {}
    for key, value in data.items():
        if key not in known or key in SECTIONS:
            continue
        values[key] = tuple(value) if key in TUPLE_FIELDS and isinstance(value, list) else value

    utility = dict(data.get("utility", {}) or {})
    if "psi" in utility:
        values.setdefault("calibrate_psi", utility["psi"] is None)
        if utility["psi"] is None:
            utility.pop("psi")
    for name, cls in SECTIONS.items():
        section = utility if name == "utility" else data.get(name, {})
        values[name] = _build_section(name, cls, section, diagnostics)

    try:
        config = SimConfig(**values)
    except TypeError as error:
        raise ConfigError(diagnostics + [str(error)]) from error
    diagnostics += validate_config(config)
    if diagnostics:
        raise ConfigError(diagnostics)

    return config


def parse_override(text: str) -> tuple[str, Any]:
    """
    `key=value` with the value read as JSON, else kept as a string
    """
    key, sep, raw = text.partition("=")
    if not sep or not key.strip():
        raise ConfigError([f"override {text!r}: expected key=value"])
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw

    return key.strip(), value


def apply_overrides(data: dict, overrides: Iterable[str]) -> dict:
    """
    Dotted-key overrides on the raw configuration object
    """
    data = json.loads(json.dumps(data))
    known = {f.name for f in fields(SimConfig)}
    diagnostics = []
    for text in overrides:
        try:
            key, value = parse_override(text)
        except ConfigError as error:
            diagnostics += error.diagnostics
            continue
        top, _, rest = key.partition(".")
        if top not in known:
            diagnostics.append(f"override {key}: unknown field {top!r}")
            continue
        if not rest:
            data[top] = value
            continue
        if top not in SECTIONS or "." in rest or rest not in {f.name for f in fields(SECTIONS[top])}:
            diagnostics.append(f"override {key}: unknown field")
            continue
        section = data.setdefault(top, {})
        if not isinstance(section, dict):
            diagnostics.append(f"override {key}: {top} is not an object")
            continue
        section[rest] = value
    if diagnostics:
        raise ConfigError(diagnostics)

    return data


def load_config(path: Union[str, Path, None] = None, overrides: Iterable[str] = ()) -> SimConfig:
    """
    Reads a JSON config (defaults when path is None) and applies overrides
    """
    data = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError([f"{path}: no such config file"])
        try:
            with open(path, "r") as file:
                data = json.load(file)
        except json.JSONDecodeError as error:
            raise ConfigError([f"{path}: invalid JSON at line {error.lineno} column {error.colno}: {error.msg}"]) from error
    config = build_config(apply_overrides(data, overrides))
    logger.debug("loaded configuration from %s", path or "defaults")

    return config


def with_overrides(config: SimConfig, overrides: Iterable[str]) -> SimConfig:
    return build_config(apply_overrides(config.to_dict(), overrides))


def evaluation_config(config: SimConfig, schedule: TaxSchedule) -> SimConfig:
    """
    One tax year of scripted workers under a frozen schedule
    """
    return replace(
        config,
        total_steps=config.steps_per_year,
        planner_update_period=None,
        governance=FIXED,
        planner_policy="fixed",
        worker_policy="scripted",
        satisfaction="scripted",
        brackets=schedule.thresholds,
        initial_rates=schedule.rates,
    )
