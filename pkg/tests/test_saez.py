import numpy as np
import pytest
from scipy import integrate
from scipy.special import beta

from fiscal_core import TaxSchedule, UtilityParams, flat_schedule, three_bracket_schedule
from fiscal_core.utility import marginal_consumption_utility
from population import Gb2Params, calibrate_psi, gb2_cdf, gb2_sample
from saez import (
    EmpiricalIncomeDist,
    attach_reference,
    bracket_statistics,
    brute_force_coordinate_search,
    brute_force_flat_tax,
    build_economy,
    estimate_elasticity,
    grid_perturb_search,
    iterated_grid_search,
    nonlinear_statistics,
    pareto_parameter,
    perturbation_run,
    saez_rate,
    solve_piecewise_saez,
    top_rate_statistics,
    weight_response,
    welfare_weights,
)
from saez.solvers import flat_grid


ACS_LIKE = Gb2Params(a=3.0, b=60000.0, p=0.8, q=1.2)


def calibrated_params(skills) -> UtilityParams:
    base = UtilityParams()
    return UtilityParams(psi=calibrate_psi(float(np.median(skills)), 40.0, base))


def identical_economy(n: int = 20, skill: float = 1500.0, **options):
    skills = np.full(n, skill)
    return build_economy(skills, calibrated_params(skills), **options)


def anchored_economy(n: int = 20, skill: float = 1500.0):
    return identical_economy(n, skill, weighting="anchor")


def gb2_economy(n: int = 100, seed: int = 11, **options):
    skills = gb2_sample(n, ACS_LIKE, seed) / 40.0
    return build_economy(skills, calibrated_params(skills), **options)


def test_elasticity_recovers_closed_form():
    skills = np.random.default_rng(0).uniform(15.0, 60.0, 100)
    economy = build_economy(skills, calibrated_params(skills))
    run = perturbation_run(economy, flat_schedule(0.0), 0, dtau=0.01, rebate="fixed")

    expected = (1 - 0.5) / (2 - 1 + 0.5)
    assert estimate_elasticity(run) == pytest.approx(expected, rel=0.05)


def test_balanced_elasticity_includes_rebate_response():
    economy = identical_economy()
    run = perturbation_run(economy, flat_schedule(0.2), 0, dtau=0.01)
    # with the rebate returned in full, labor scales with (1 - tau)^(1 / (delta - 1 + eta))
    assert estimate_elasticity(run) == pytest.approx(2 / 3, rel=0.05)


def test_elasticity_of_fixed_labor_is_zero():
    skills = np.linspace(10.0, 80.0, 10)
    economy = build_economy(skills, UtilityParams(), fixed_labor=np.full(10, 40.0))
    run = perturbation_run(economy, flat_schedule(0.3), 0)
    assert estimate_elasticity(run) == 0.0


def test_elasticity_rejects_bad_perturbations():
    economy = identical_economy()
    with pytest.raises(ValueError):
        perturbation_run(economy, flat_schedule(0.3), 0, dtau=0.0)
    with pytest.raises(ValueError):
        perturbation_run(economy, flat_schedule(0.3), 0, rebate="partial")


def test_perturbation_flips_at_rate_bounds():
    run = perturbation_run(identical_economy(), flat_schedule(0.99), 0, dtau=0.01)
    assert run.dtau == -0.01
    assert run.perturbed_schedule.rates[0] == pytest.approx(0.98)


def test_elasticity_of_empty_bracket_is_none():
    skills = np.full(5, 20.0)
    economy = build_economy(skills, calibrated_params(skills))
    schedule = TaxSchedule(thresholds=(0.0, 1e7), rates=(0.2, 0.3))
    run = perturbation_run(economy, schedule, 1)
    assert estimate_elasticity(run) is None


def test_elasticity_only_of_perturbed_bracket():
    economy = gb2_economy(n=60)
    run = perturbation_run(economy, three_bracket_schedule(), 2, dtau=0.01)

    assert estimate_elasticity(run, 2) == estimate_elasticity(run)
    with pytest.raises(ValueError, match="perturbs bracket 2"):
        estimate_elasticity(run, 0)
    with pytest.raises(ValueError):
        estimate_elasticity(run, 1)


def test_pareto_parameter_of_pareto_samples():
    alpha, scale = 2.5, 20000.0
    rng = np.random.default_rng(5)
    dist = EmpiricalIncomeDist.from_incomes(scale * (1 + rng.pareto(alpha, 100_000)))
    for u in (0.3, 0.5, 0.8):
        z = scale * (1 - u) ** (-1 / alpha)
        assert pareto_parameter(z, dist) == pytest.approx(alpha, rel=0.1)


def test_pareto_parameter_edges_and_scale():
    incomes = np.random.default_rng(2).lognormal(np.log(50000), 0.6, 2000)
    dist = EmpiricalIncomeDist.from_incomes(incomes)
    doubled = EmpiricalIncomeDist.from_incomes(2 * incomes)

    z = float(np.median(incomes))
    assert pareto_parameter(2 * z, doubled) == pytest.approx(pareto_parameter(z, dist), rel=1e-9)
    low = 0.5 * incomes.min()
    assert pareto_parameter(low, dist) == pytest.approx(low * dist.density(low))
    with pytest.raises(ValueError):
        pareto_parameter(2 * incomes.max(), dist)


def test_empirical_distribution_contract():
    dist = EmpiricalIncomeDist.from_incomes([30000.0, 10000.0, 50000.0, 20000.0])
    assert dist.cdf(50000.0) == 1.0
    assert dist.cdf(15000.0) == 0.25
    assert np.all(dist.density(np.linspace(0, 80000, 50)) >= 0)
    assert dist.count_above(20000.0) == 3
    assert dist.mean_above(20000.0) == pytest.approx(100000.0 / 3)
    assert dist.mean_above(60000.0) is None
    with pytest.raises(ValueError):
        EmpiricalIncomeDist.from_incomes([40000.0, 40000.0])


def test_single_bracket_from_zero_is_flat_tax():
    z = np.random.default_rng(1).lognormal(np.log(50000), 0.7, 500)
    stats = bracket_statistics(z, 1 / z, flat_schedule(0.3), 0)

    assert stats.alpha == 1.0
    harmonic = z.size / np.sum(1 / z)
    assert stats.G == pytest.approx(harmonic / z.mean(), rel=1e-12)


def test_identical_incomes_have_unit_G():
    z = np.full(7, 45000.0)
    assert bracket_statistics(z, 1 / z, flat_schedule(0.2), 0).G == pytest.approx(1.0)


def test_bracket_statistics_small_example():
    schedule = TaxSchedule(thresholds=(0.0, 100.0), rates=(0.1, 0.2))
    z = np.array([50.0, 150.0, 300.0])
    g = np.array([3.0, 2.0, 1.0])

    lower = bracket_statistics(z, g, schedule, 0)
    assert lower.B == pytest.approx((50 + 100 + 100) / 3)
    assert lower.A == pytest.approx((3 * 50 + 2 * 100 + 1 * 100) / 6)
    assert lower.C == pytest.approx(50 / 3)

    upper = bracket_statistics(z, g, schedule, 1)
    assert upper.B == pytest.approx((50 + 200) / 3)
    assert upper.alpha == pytest.approx(450 / 250)
    assert bracket_statistics(np.array([10.0, 20.0]), [1.0, 1.0], schedule, 1) is None


def top_rate_by_hand(z, g, z_star):
    n = len(z)
    above = [(zi, gi) for zi, gi in zip(z, g) if zi >= z_star]
    m = len(above)
    z_m = sum(zi for zi, _ in above) / m
    a = sum(gi * (zi - z_star) for zi, gi in above) / sum(g)
    b = sum(zi - z_star for zi, _ in above) / n
    c = sum(zi for zi, _ in above) / n
    g_bar = (sum(gi * (zi - z_star) for zi, gi in above) / m) / ((sum(g) / n) * (z_m - z_star))

    return a, b, c, g_bar, z_m / (z_m - z_star)


def test_top_rate_statistics_match_direct_sums():
    rng = np.random.default_rng(9)
    z = rng.lognormal(np.log(60000), 0.8, 1000)
    g = 1 / z
    z_star = 120000.0

    a, b, c, g_bar, alpha = top_rate_by_hand(z.tolist(), g.tolist(), z_star)
    top = top_rate_statistics(z, g, z_star)
    assert (top.A, top.B, top.C, top.G, top.alpha) == pytest.approx((a, b, c, g_bar, alpha), rel=1e-12)

    # an open top bracket starting at z_star is the same tax
    bracket = bracket_statistics(z, g, TaxSchedule(thresholds=(0.0, z_star), rates=(0.2, 0.4)), 1)
    assert (bracket.A, bracket.B, bracket.C) == pytest.approx((a, b, c), rel=1e-12)
    assert (bracket.G, bracket.alpha) == pytest.approx((g_bar, alpha), rel=1e-12)
    assert top_rate_statistics(z, g, 10 * z.max()) is None


def test_discrete_sums_match_integrals():
    z = gb2_sample(1_000_000, ACS_LIKE, 4)
    schedule = TaxSchedule(thresholds=(0.0, 60000.0), rates=(0.2, 0.4))
    cut = 60000.0

    def cdf(t: float) -> float:
        return float(gb2_cdf(max(t, 1e-9), ACS_LIKE))

    a, b, p, q = ACS_LIKE.a, ACS_LIKE.b, ACS_LIKE.p, ACS_LIKE.q
    mean = b * beta(p + 1 / a, q - 1 / a) / beta(p, q)
    b_lower = integrate.quad(lambda t: 1 - cdf(t), 0.0, cut, limit=200)[0]
    mass_below = integrate.quad(cdf, 0.0, cut, limit=200)[0]
    # integral of z h(z) over [0, cut] by parts
    c_lower = cut * cdf(cut) - mass_below

    lower = bracket_statistics(z, np.ones_like(z), schedule, 0)
    upper = bracket_statistics(z, np.ones_like(z), schedule, 1)
    assert lower.B == pytest.approx(b_lower, rel=0.01)
    assert lower.C == pytest.approx(c_lower, rel=0.01)
    assert upper.B == pytest.approx(mean - b_lower, rel=0.01)
    assert upper.C == pytest.approx(mean - c_lower, rel=0.01)
    assert lower.G == pytest.approx(1.0)


def test_thin_bracket_recovers_nonlinear_rate_inputs():
    z = np.random.default_rng(3).lognormal(np.log(50000), 0.5, 1_000_000)
    g = 1 / z
    dist = EmpiricalIncomeDist.from_incomes(z)
    at = 50000.0
    schedule = TaxSchedule(thresholds=(0.0, at, 1.01 * at), rates=(0.2, 0.3, 0.4))

    thin = bracket_statistics(z, g, schedule, 1)
    G, a = nonlinear_statistics(at, z, g, dist)
    assert thin.G == pytest.approx(G, rel=0.05)
    assert thin.alpha == pytest.approx(a, rel=0.05)


@pytest.mark.parametrize(
    "G, alpha, e, expected",
    [(0.0, 2.0, 0.25, 2 / 3), (1.0, 1.5, 0.4, 0.0), (0.5, 1.0, 0.0, 0.99)],
)
def test_saez_rate_cases(G, alpha, e, expected):
    assert saez_rate(G, alpha, e) == pytest.approx(expected)


@pytest.mark.parametrize(
    "G, alpha, e, W, expected",
    [(1.0, 1.0, 0.5, 0.4, 0.4), (0.5, 1.5, 0.4, 1.0, 0.9 / 1.1), (1.0, 1.0, 0.5, 2.0, 0.99), (0.3, 2.0, 0.2, 0.0, 0.7 / 1.1)],
)
def test_saez_rate_with_weight_response(G, alpha, e, W, expected):
    assert saez_rate(G, alpha, e, weight_response=W) == pytest.approx(expected)


def test_saez_rate_rejects_degenerate_inputs():
    with pytest.raises(ValueError):
        saez_rate(float("nan"), 1.0, 0.3)
    with pytest.raises(ValueError):
        saez_rate(0.2, float("inf"), 0.3)
    with pytest.raises(ValueError):
        saez_rate(1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        saez_rate(0.2, 1.0, 0.3, weight_response=float("nan"))


def test_saez_rate_decreases_in_elasticity_and_alpha():
    es = np.linspace(0.05, 2.0, 40)
    by_e = [saez_rate(0.3, 1.5, e) for e in es]
    by_alpha = [saez_rate(0.3, a, 0.4) for a in np.linspace(1.0, 4.0, 40)]
    assert np.all(np.diff(by_e) < 0)
    assert np.all(np.diff(by_alpha) < 0)


def test_flat_grid_contract():
    assert flat_grid(0.5).tolist() == [0.0, 0.5]
    grid = flat_grid(0.01)
    assert grid.size == 100
    assert grid[-1] == pytest.approx(0.99)
    with pytest.raises(ValueError):
        flat_grid(0.0)


def test_default_objective_is_logged_swf():
    economy = gb2_economy(n=40)
    for schedule in (flat_schedule(0.2), three_bracket_schedule()):
        outcome = economy.equilibrium(schedule)
        assert economy.evaluate(schedule) == outcome.swf

    anchored = gb2_economy(n=40, weighting="anchor")
    outcome = anchored.equilibrium(flat_schedule(0.2))
    assert anchored.evaluate(flat_schedule(0.2)) == pytest.approx(np.sum(anchored.anchor_weights * outcome.utilities))


def test_welfare_weights_default_to_inverse_income():
    economy = gb2_economy(n=30)
    outcome = economy.equilibrium(flat_schedule(0.2))
    inverse = 1 / np.maximum(outcome.pre_tax, 1e-6)
    assert np.allclose(welfare_weights(outcome, economy).g, inverse)

    with_marginal = gb2_economy(n=30, marginal_utility=True)
    outcome = with_marginal.equilibrium(flat_schedule(0.2))
    expected = inverse * marginal_consumption_utility(outcome.post_tax, with_marginal.params)
    assert np.allclose(welfare_weights(outcome, with_marginal).g, expected)


def test_weight_response_vanishes_for_frozen_weights():
    schedule = flat_schedule(0.3)
    economy = identical_economy()
    anchored = anchored_economy()

    assert weight_response(economy.equilibrium(schedule), economy, schedule, 0) > 0
    assert weight_response(anchored.equilibrium(schedule), anchored, schedule, 0) == 0.0


def test_brute_force_flat_tax_cases():
    tau, _ = brute_force_flat_tax(anchored_economy(), 0.01)
    assert tau == 0.0
    # 1/z weights grow as incomes shrink, so identical workers want the top rate
    tau, _ = brute_force_flat_tax(identical_economy(), 0.01)
    assert tau == pytest.approx(0.99)

    skills = np.linspace(10.0, 200.0, 30)
    inelastic = build_economy(skills, UtilityParams(), fixed_labor=np.full(30, 40.0))
    tau, _ = brute_force_flat_tax(inelastic, 0.01)
    assert tau == pytest.approx(0.99)


@pytest.mark.parametrize("weighting", ["current", "anchor"])
def test_piecewise_saez_on_identical_workers(weighting):
    economy = identical_economy(weighting=weighting)
    report = solve_piecewise_saez(economy, flat_schedule(0.3))
    tau_star, _ = brute_force_flat_tax(economy, 0.01)

    assert report.converged
    assert report.schedule.rates[0] == pytest.approx(tau_star, abs=0.02)
    assert report.best_swf >= report.swf[0]


@pytest.mark.parametrize(
    "options",
    [{}, {"weighting": "anchor", "marginal_utility": True}],
    ids=["current", "anchor-marginal"],
)
def test_piecewise_saez_matches_flat_grid_on_gb2_population(options):
    economy = gb2_economy(**options)
    report = solve_piecewise_saez(economy, flat_schedule(0.3))
    tau_star, _ = brute_force_flat_tax(economy, 0.01)

    assert report.schedule.rates[0] == pytest.approx(tau_star, abs=0.02)
    assert report.best_swf >= report.swf[0]
    assert len(report.elasticities) == report.iterations
    assert len(report.weight_response) == report.iterations


@pytest.mark.parametrize("weighting, tau", [("anchor", 0.0), ("current", 0.99)])
def test_piecewise_saez_stays_at_fixed_point(weighting, tau):
    report = solve_piecewise_saez(identical_economy(weighting=weighting), flat_schedule(tau))
    assert report.iterations == 1
    assert report.converged
    assert report.schedule.rates[0] == pytest.approx(tau, abs=1e-3)


def test_attach_reference_reports_gap():
    economy = gb2_economy(n=40)
    report = attach_reference(solve_piecewise_saez(economy, three_bracket_schedule(), max_iters=3), economy, 0.05)

    assert report.reference_swf >= report.best_swf
    assert report.swf_gap >= 0
    assert report.to_dict()["swf_gap"] == report.swf_gap
    assert solve_piecewise_saez(economy, flat_schedule(0.3), max_iters=1).swf_gap is None


def test_piecewise_saez_regression_elasticity_runs():
    economy = gb2_economy(n=60)
    report = solve_piecewise_saez(
        economy, three_bracket_schedule(), max_iters=3, elasticity_method="regression"
    )
    assert report.iterations <= 3
    assert report.best_swf >= report.swf[0]
    assert set(report.to_dict()) >= {"schedules", "swf", "elasticities", "G", "alpha", "best_schedule"}


def test_piecewise_saez_rejects_bad_arguments():
    with pytest.raises(ValueError):
        solve_piecewise_saez(identical_economy(), flat_schedule(0.3), damping=0.0)
    with pytest.raises(ValueError):
        solve_piecewise_saez(identical_economy(), flat_schedule(0.3), elasticity_method="oracle")


def test_grid_perturb_search_keeps_best():
    economy = gb2_economy(n=50)
    start = three_bracket_schedule()

    assert grid_perturb_search(start, economy, (0,)) == start
    improved = grid_perturb_search(start, economy)
    assert economy.evaluate(improved) >= economy.evaluate(start)
    assert all(0.0 <= rate <= 0.99 for rate in improved.rates)
    with pytest.raises(ValueError):
        grid_perturb_search(start, economy, ())


def test_iterated_grid_search_matches_flat_grid():
    economy = gb2_economy(weighting="anchor", marginal_utility=True)
    report = iterated_grid_search(economy, flat_schedule(0.5))
    tau_star, _ = brute_force_flat_tax(economy, 0.01)

    assert report.converged
    assert report.schedule.rates[0] == pytest.approx(tau_star, abs=0.02)


def test_parallel_evaluation_matches_serial():
    economy = gb2_economy(n=40)
    serial = brute_force_flat_tax(economy, 0.1)
    parallel = brute_force_flat_tax(gb2_economy(n=40), 0.1, max_workers=4)
    assert serial == parallel


def test_welfare_weights_are_positive():
    economy = gb2_economy(n=30)
    weights = welfare_weights(economy.equilibrium(flat_schedule(0.2)), economy)
    assert np.all(weights.g > 0)


@pytest.mark.slow
def test_grid_search_improves_bad_schedule_to_coordinate_optimum():
    economy = gb2_economy(n=100, weighting="anchor", marginal_utility=True)
    bad = three_bracket_schedule([0.9, 0.9, 0.9])
    report = iterated_grid_search(economy, bad)
    oracle, _ = brute_force_coordinate_search(economy, bad, 0.01)

    assert report.best_swf > report.swf[0]
    assert np.allclose(report.schedule.rates, oracle.rates, atol=0.05)
