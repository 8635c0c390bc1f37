from fiscal_core.tax_schedule import (
    TaxSchedule,
    apply_delta,
    apply_taxes,
    average_rate,
    flat_schedule,
    marginal_rate,
    marginal_rate_vector,
    tax_due,
    tax_due_vector,
    three_bracket_schedule,
    us_2024_schedule,
)
from fiscal_core.utility import (
    UtilityParams,
    bounded_utility,
    consumption_utility,
    isoelastic_utility,
    marginal_consumption_utility,
)
from fiscal_core.welfare import social_welfare
