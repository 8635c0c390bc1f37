from typing import Callable, Optional, Sequence, Union

import numpy as np

from agents.satisfaction import satisfaction_flags
from fiscal_core.tax_schedule import TaxSchedule, tax_due_vector
from fiscal_core.utility import UtilityParams, bounded_utility, isoelastic_utility
from utils import LABOR_BOUNDS


INV_PHI = (np.sqrt(5) - 1) / 2
GOLDEN_ITERATIONS = 80
# keeps candidates strictly inside the satisfied region
BOUNDARY_NUDGE = 1e-12


def check_labor_bounds(labor_bounds: Sequence[float]) -> tuple[float, float]:
    lower, upper = (float(v) for v in labor_bounds)
    if not LABOR_BOUNDS[0] <= lower <= upper <= LABOR_BOUNDS[1]:
        raise ValueError(f"labor bounds {labor_bounds} must lie within {LABOR_BOUNDS}")

    return lower, upper


def golden_section_max(
    objective: Callable[[np.ndarray], np.ndarray],
    lower: np.ndarray,
    upper: np.ndarray,
    iterations: int = GOLDEN_ITERATIONS,
) -> np.ndarray:
    """
    Elementwise golden-section maximisation of a unimodal objective over
    [lower, upper]; ties keep the left part of the interval
    """
    a, b = np.array(lower, dtype=float), np.array(upper, dtype=float)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = objective(c), objective(d)

    for _ in range(iterations):
        left = fc >= fd
        a = np.where(left, a, c)
        b = np.where(left, d, b)
        kept = np.where(left, c, d)
        f_kept = np.where(left, fc, fd)
        trial = np.where(left, b - INV_PHI * (b - a), a + INV_PHI * (b - a))
        f_trial = objective(trial)
        c, d = np.where(left, trial, kept), np.where(left, kept, trial)
        fc, fd = np.where(left, f_trial, f_kept), np.where(left, f_kept, f_trial)

    return (a + b) / 2


def _bracket_labor_intervals(
    skills: np.ndarray, schedule: TaxSchedule, labor_bounds: tuple[float, float]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Labor interval [z_j / s, z_{j+1} / s] of every bracket intersected with the
    bounds, shape (workers, brackets), plus a mask of nonempty intersections
    """
    lo, hi = labor_bounds
    s = skills[:, None]
    lower_z = np.asarray(schedule.thresholds)[None, :]
    upper_z = schedule.upper_bounds[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        l_lower = np.where(s > 0, lower_z / np.where(s > 0, s, 1.0), np.where(lower_z > 0, np.inf, 0.0))
        l_upper = np.where(s > 0, upper_z / np.where(s > 0, s, 1.0), np.inf)
    valid = (l_lower <= hi) & (l_upper >= lo)

    return np.clip(l_lower, lo, hi), np.clip(l_upper, lo, hi), valid


def _bracket_objective(
    skills: np.ndarray, schedule: TaxSchedule, rebate: np.ndarray, params: UtilityParams
) -> Callable[[np.ndarray], np.ndarray]:
    """
    Isoelastic utility with the tax written as the affine piece of each bracket
    """
    rates = np.asarray(schedule.rates)[None, :]
    lower_z = np.asarray(schedule.thresholds)[None, :]
    tax_at_lower = tax_due_vector(schedule, np.asarray(schedule.thresholds))[None, :]
    s = skills[:, None]
    r = rebate[:, None]

    def objective(labor: np.ndarray) -> np.ndarray:
        z = s * labor
        post_tax = z - tax_at_lower - rates * (z - lower_z) + r

        return isoelastic_utility(post_tax, labor, params)

    return objective


def _exact_utility(
    skills: np.ndarray, labor: np.ndarray, schedule: TaxSchedule, rebate: np.ndarray, params: UtilityParams
) -> np.ndarray:
    z = skills[:, None] * labor
    post_tax = z - tax_due_vector(schedule, z) + rebate[:, None]

    return isoelastic_utility(post_tax, labor, params)


def _pick(candidates: np.ndarray, values: np.ndarray) -> np.ndarray:
    """
    Row-wise argmax, ties toward the smallest labor
    """
    best = values.max(axis=1, keepdims=True)

    return np.where(values >= best, candidates, np.inf).min(axis=1)


def _as_vector(value: Union[float, Sequence[float], np.ndarray], n: int) -> np.ndarray:
    return np.broadcast_to(np.asarray(value, dtype=float), (n,)).copy()


def _isoelastic_candidates(
    skills: np.ndarray,
    schedule: TaxSchedule,
    rebate: np.ndarray,
    params: UtilityParams,
    labor_bounds: tuple[float, float],
) -> np.ndarray:
    a, b, valid = _bracket_labor_intervals(skills, schedule, labor_bounds)
    interior = golden_section_max(_bracket_objective(skills, schedule, rebate, params), a, b)
    candidates = np.concatenate([interior, a, b], axis=1)
    mask = np.concatenate([valid, valid, valid], axis=1)

    return np.where(mask, candidates, labor_bounds[0])


def best_response_labor(
    skills: Union[Sequence[float], np.ndarray],
    schedule: TaxSchedule,
    rebate: Union[float, Sequence[float], np.ndarray],
    params: UtilityParams,
    labor_bounds: Sequence[float] = LABOR_BOUNDS,
) -> np.ndarray:
    """
    Utility-maximising labor of every worker, treating the rebate as given.
    Golden section inside each bracket's labor interval, then the interior
    optima are compared with the interval endpoints (the kinks)
    """
    labor_bounds = check_labor_bounds(labor_bounds)
    skills = np.asarray(skills, dtype=float)
    rebate = _as_vector(rebate, skills.size)

    candidates = _isoelastic_candidates(skills, schedule, rebate, params, labor_bounds)
    values = _exact_utility(skills, candidates, schedule, rebate, params)

    return np.clip(_pick(candidates, values), *labor_bounds)


def rational_best_response(
    skill: float,
    schedule: TaxSchedule,
    rebate_guess: float,
    params: UtilityParams,
    labor_bounds: Sequence[float] = LABOR_BOUNDS,
) -> float:
    return float(best_response_labor([skill], schedule, rebate_guess, params, labor_bounds)[0])


def best_response_utility(
    skills: Union[Sequence[float], np.ndarray],
    schedule: TaxSchedule,
    rebate: Union[float, Sequence[float], np.ndarray],
    params: UtilityParams,
    labor_bounds: Sequence[float] = LABOR_BOUNDS,
) -> np.ndarray:
    """
    Own utility each worker reaches when best-responding to the schedule
    """
    skills = np.asarray(skills, dtype=float)
    rebate = _as_vector(rebate, skills.size)
    labor = best_response_labor(skills, schedule, rebate, params, labor_bounds)

    return _exact_utility(skills, labor[:, None], schedule, rebate, params)[:, 0]


def _satisfied_labor_intervals(
    skills: np.ndarray,
    schedule: TaxSchedule,
    max_effective_rates: np.ndarray,
    min_marginal_retentions: np.ndarray,
    labor_bounds: tuple[float, float],
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Inside a bracket the tax is affine, so the effective-rate test
    (tau_j - cap) z <= tau_j z_j - T(z_j) holds on an interval and the
    marginal test is constant
    """
    a, b, valid = _bracket_labor_intervals(skills, schedule, labor_bounds)
    rates = np.asarray(schedule.rates)[None, :]
    lower_z = np.asarray(schedule.thresholds)[None, :]
    slack = rates * lower_z - tax_due_vector(schedule, np.asarray(schedule.thresholds))[None, :]
    cap = max_effective_rates[:, None]
    gap = rates - cap

    with np.errstate(divide="ignore", invalid="ignore"):
        bound_z = slack / np.where(gap != 0, gap, 1.0)
    z_from = np.where(gap < 0, bound_z * (1 + BOUNDARY_NUDGE), 0.0)
    z_to = np.where(gap > 0, bound_z * (1 - BOUNDARY_NUDGE), np.inf)
    z_to = np.where((gap == 0) & (slack < 0), -np.inf, z_to)

    s = skills[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        l_from = np.where(s > 0, z_from / np.where(s > 0, s, 1.0), np.where(z_from > 0, np.inf, 0.0))
        l_to = np.where(s > 0, z_to / np.where(s > 0, s, 1.0), np.where(z_to >= 0, np.inf, -np.inf))

    sat_a = np.maximum(a, l_from)
    # the upper threshold itself is taxed at the next bracket's rate
    sat_b = np.minimum(b * (1 - BOUNDARY_NUDGE), l_to)
    marginal_ok = (1 - rates) >= min_marginal_retentions[:, None]
    sat_valid = valid & marginal_ok & (sat_a <= sat_b)

    return np.where(sat_valid, sat_a, a), np.where(sat_valid, sat_b, a), sat_valid


def bounded_best_response(
    skills: Union[Sequence[float], np.ndarray],
    schedule: TaxSchedule,
    rebate: Union[float, Sequence[float], np.ndarray],
    params: UtilityParams,
    max_effective_rates: Union[Sequence[float], np.ndarray],
    min_marginal_retentions: Union[Sequence[float], np.ndarray],
    labor_bounds: Sequence[float] = LABOR_BOUNDS,
    phi: Optional[Union[float, Sequence[float], np.ndarray]] = None,
) -> np.ndarray:
    """
    Labor maximising the bounded utility: the best unrestricted point pays the
    penalty unless satisfied, so it competes with the best point of the
    satisfied labor set
    """
    labor_bounds = check_labor_bounds(labor_bounds)
    skills = np.asarray(skills, dtype=float)
    n = skills.size
    rebate = _as_vector(rebate, n)
    caps = _as_vector(max_effective_rates, n)
    retentions = _as_vector(min_marginal_retentions, n)
    penalty = _as_vector(params.phi if phi is None else phi, n)

    unrestricted = _isoelastic_candidates(skills, schedule, rebate, params, labor_bounds)
    sat_a, sat_b, sat_valid = _satisfied_labor_intervals(skills, schedule, caps, retentions, labor_bounds)
    restricted = golden_section_max(_bracket_objective(skills, schedule, rebate, params), sat_a, sat_b)
    restricted = np.concatenate([restricted, sat_a, sat_b], axis=1)
    restricted = np.where(np.concatenate([sat_valid] * 3, axis=1), restricted, labor_bounds[0])
    candidates = np.clip(np.concatenate([unrestricted, restricted], axis=1), *labor_bounds)

    z = skills[:, None] * candidates
    post_tax = z - tax_due_vector(schedule, z) + rebate[:, None]
    flags = satisfaction_flags(schedule, z, caps[:, None], retentions[:, None])
    values = bounded_utility(post_tax, candidates, flags, params, penalty[:, None])

    return _pick(candidates, values)
