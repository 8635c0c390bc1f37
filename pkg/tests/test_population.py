import numpy as np
import pytest
from scipy import integrate

from agents.best_response import rational_best_response
from fiscal_core import UtilityParams, flat_schedule
from population import (
    Gb2Params,
    IncomeDataError,
    Persona,
    PopulationConfig,
    assign_personas,
    build_population,
    calibrate_psi,
    fit_gb2,
    gb2_cdf,
    gb2_loglik,
    gb2_pdf,
    gb2_quantile,
    gb2_sample,
    load_income_csv,
    load_persona_library,
    qq_correlation,
    qq_points,
    skills_from_incomes,
)


ACS_LIKE = Gb2Params(a=3.0, b=60000.0, p=0.8, q=1.2)
LOG_LOGISTIC = Gb2Params(a=2.0, b=1.0, p=1.0, q=1.0)


def test_log_logistic_special_case():
    assert gb2_pdf(1.0, LOG_LOGISTIC) == pytest.approx(0.5)
    assert gb2_cdf(1.0, LOG_LOGISTIC) == pytest.approx(0.5)
    x = np.array([0.3, 2.0, 7.5])
    assert gb2_cdf(x, LOG_LOGISTIC) == pytest.approx(x**2 / (1 + x**2))


def test_pdf_integrates_to_one_and_decays():
    b = ACS_LIKE.b
    lower, _ = integrate.quad(lambda x: gb2_pdf(x, ACS_LIKE), 1e-6, b, limit=200)
    upper, _ = integrate.quad(lambda x: gb2_pdf(x, ACS_LIKE), b, 1e9, points=[10 * b, 100 * b], limit=200)
    assert lower + upper == pytest.approx(1.0, abs=1e-4)
    assert gb2_pdf(1e12, ACS_LIKE) < 1e-30


def test_pdf_rejects_nonpositive_income():
    with pytest.raises(ValueError):
        gb2_pdf(0.0, ACS_LIKE)


def test_quantile_inverts_cdf():
    assert gb2_cdf(gb2_quantile(0.25, ACS_LIKE), ACS_LIKE) == pytest.approx(0.25, abs=1e-10)
    u = np.linspace(0.01, 0.99, 50)
    assert gb2_cdf(gb2_quantile(u, ACS_LIKE), ACS_LIKE) == pytest.approx(u, rel=1e-10)
    assert np.all(np.diff(gb2_cdf(np.linspace(1000.0, 5e5, 200), ACS_LIKE)) >= 0)


def test_symmetric_median_is_scale():
    assert gb2_quantile(0.5, Gb2Params(a=2.5, b=45000.0, p=1.3, q=1.3)) == pytest.approx(45000.0)


@pytest.mark.parametrize("u", [0.0, 1.0, -0.1, 1.5])
def test_quantile_rejects_levels_outside_unit_interval(u):
    with pytest.raises(ValueError):
        gb2_quantile(u, ACS_LIKE)


def test_sampling_is_seeded():
    first = gb2_sample(1000, ACS_LIKE, seed=11)
    assert np.array_equal(first, gb2_sample(1000, ACS_LIKE, seed=11))
    assert not np.array_equal(first, gb2_sample(1000, ACS_LIKE, seed=12))
    assert np.all(first > 0)


def test_sample_median_matches_quantile():
    samples = gb2_sample(100_000, ACS_LIKE, seed=0)
    assert np.median(samples) == pytest.approx(gb2_quantile(0.5, ACS_LIKE), rel=0.02)


def test_params_must_be_positive():
    with pytest.raises(ValueError):
        Gb2Params(a=0.0, b=1.0, p=1.0, q=1.0)


def test_fit_is_close_to_the_generating_distribution():
    samples = gb2_sample(10_000, ACS_LIKE, seed=1)
    fitted = fit_gb2(samples)
    assert fitted.loglik == pytest.approx(gb2_loglik(samples, fitted))
    assert fitted.loglik >= gb2_loglik(samples, ACS_LIKE) - 1e-3 * samples.size
    assert qq_correlation(samples, fitted) > 0.99
    u = np.array([0.1, 0.25, 0.5, 0.75, 0.9])
    assert gb2_quantile(u, fitted) == pytest.approx(gb2_quantile(u, ACS_LIKE), rel=0.05)


@pytest.mark.slow
def test_fit_recovers_parameters():
    # a, p and q trade off along a likelihood ridge at 10^4 samples, so single
    # parameters are checked at 10^5
    fitted = fit_gb2(gb2_sample(100_000, ACS_LIKE, seed=2))
    for name in ("a", "b", "p", "q"):
        assert getattr(fitted, name) == pytest.approx(getattr(ACS_LIKE, name), rel=0.10)


def test_fit_is_scale_equivariant():
    samples = gb2_sample(2000, ACS_LIKE, seed=3)
    base = fit_gb2(samples)
    scaled = fit_gb2(samples * 3.0)
    assert scaled.b == pytest.approx(3.0 * base.b, rel=0.02)
    for name in ("a", "p", "q"):
        assert getattr(scaled, name) == pytest.approx(getattr(base, name), rel=0.02)


def test_fit_rejects_small_or_degenerate_samples():
    with pytest.raises(ValueError):
        fit_gb2(gb2_sample(50, ACS_LIKE, seed=0))
    with pytest.raises(ValueError):
        fit_gb2(np.full(500, 42000.0))


def test_qq_points_are_sorted_plotting_positions():
    samples = gb2_sample(400, ACS_LIKE, seed=4)
    probabilities, sample_q, model_q = qq_points(samples, ACS_LIKE)
    assert probabilities[0] == pytest.approx(0.5 / 400)
    assert np.all(np.diff(sample_q) >= 0)
    assert np.all(np.diff(model_q) > 0)


@pytest.mark.parametrize("income, hours, skill", [(80000.0, 40.0, 2000.0), (52000.0, 1.0, 52000.0)])
def test_skills_from_incomes(income, hours, skill):
    (profile,) = skills_from_incomes([income], hours)
    assert profile.skill == pytest.approx(skill)
    assert profile.anchor_income == pytest.approx(income)


def test_skills_preserve_order_and_reject_nonpositive_income():
    incomes = [30000.0, 10000.0, 90000.0]
    skills = [p.skill for p in skills_from_incomes(incomes)]
    assert np.argsort(skills).tolist() == np.argsort(incomes).tolist()
    with pytest.raises(ValueError):
        skills_from_incomes([10000.0, 0.0])


def test_calibrated_psi_gives_target_hours():
    params = UtilityParams(eta=0.5, delta=2.0)
    skill = 1500.0
    psi = calibrate_psi(skill, 40.0, params)
    calibrated = UtilityParams(eta=0.5, psi=psi, delta=2.0)
    assert rational_best_response(skill, flat_schedule(0.0), 0.0, calibrated) == pytest.approx(40.0, rel=1e-4)


def test_load_income_csv(tmp_path):
    path = tmp_path / "incomes.csv"
    path.write_text("income\n50000\n80000\n")
    assert load_income_csv(path) == [50000.0, 80000.0]


def test_load_income_csv_reports_bad_lines(tmp_path):
    path = tmp_path / "incomes.csv"
    path.write_text("income\n50000\nabc\n70000\n\n")
    with pytest.raises(IncomeDataError, match=r"\[3\]"):
        load_income_csv(path)

    path.write_text("salary\n50000\n")
    with pytest.raises(IncomeDataError, match="income"):
        load_income_csv(path)


def test_shipped_income_data_loads():
    incomes = load_income_csv()
    assert len(incomes) >= 100
    assert min(incomes) > 0


def test_persona_library_and_assignment():
    library = load_persona_library()
    assert len(library) >= 10
    assert all(0 <= p.max_effective_rate <= 1 and 0 <= p.min_marginal_retention <= 1 for p in library)

    first = assign_personas(3, library, seed=5)
    assert first == assign_personas(3, library, seed=5)
    assert [p.id for p in first] == [0, 1, 2]
    assert assign_personas(0, library, seed=5) == []
    with pytest.raises(ValueError):
        assign_personas(2, [], seed=0)


def test_persona_rule_bounds():
    with pytest.raises(ValueError):
        Persona(id=0, text="", age=30, occupation="x", income_anchor=1.0, satisfaction_rule=(1.5, 0.0))
    persona = Persona.from_dict(
        {
            "id": 4,
            "text": "bio",
            "age": 40,
            "occupation": "nurse",
            "income_anchor": 70000,
            "satisfaction_rule": {"max_effective_rate": 0.3, "min_marginal_retention": 0.6},
        }
    )
    assert Persona.from_dict(persona.to_dict()) == persona


def test_build_population_identical_source():
    config = PopulationConfig(source="identical", identical_income=60000.0)
    skills, personas = build_population(config, 5, seed=0)
    assert skills.tolist() == [1500.0] * 5
    assert len(personas) == 5


def test_build_population_is_seeded():
    config = PopulationConfig()
    first, _ = build_population(config, 50, seed=9)
    second, _ = build_population(config, 50, seed=9)
    assert np.array_equal(first, second)
