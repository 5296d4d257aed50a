"""Reverting random walks, their clocks, integrals and branching analogues."""
from __future__ import annotations

__version__ = "0.1.0"

from .branching import (
    OffspringLaw,
    extinction_probability,
    gw_iterate,
    reverting_gw_pgf,
    sample_reverting_gw,
    simulate_reverting_gw,
    verify_H_recursion,
)
from .clock import (
    clock_clt_diagnostic,
    clock_moments,
    clock_pmf,
    simulate_clock_bernoulli,
    simulate_clock_recursive,
    stirling_first,
)
from .core import (
    UNIFORM,
    ConfigurationError,
    Explicit,
    FiniteDiscrete,
    GeneralStep,
    InvariantError,
    Occasional,
    Pmf,
    PowerLaw,
    Rademacher,
    RandomStream,
    SizeError,
    Uniform,
)
from .integral import clock_covariance, hoeffding_check, integrated_trace, martingale_variance
from .nonuniform import (
    lyapunov_diagnostic,
    weighted_clock_moments,
    weighted_clock_pmf,
    weighted_martingale_trace,
    weighted_martingale_variance,
)
from .occasional import (
    dobrushin_diagnostic,
    occasional_bivariate_gf,
    occasional_martingale_trace,
    occasional_moments,
    occasional_pmf,
    simulate_occasional,
)
from .walk import (
    simulate_walk_recursive,
    simulate_walk_subordinated,
    walk_char_function,
    walk_moments,
    walk_pmf,
    walk_pmf_simple,
)
