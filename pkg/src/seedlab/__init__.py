"""k-means++ seeding variants, adversarial instances, exact oracles and a Monte Carlo harness."""

from .core import CenterSet, Dataset, cost, cost_decomposition, mean, one_means_cost
from .errors import BudgetExceeded, ConfigError, DegeneratePotential, InputError, ParseError
from .instances import (
    InstanceSpec,
    build_instance,
    gaussian_mixture,
    read_dataset,
    simplex_lower_bound,
    three_point_line,
    write_dataset,
)
from .lloyd import LloydConfig, lloyd_refine
from .oracle import (
    EnumerationBudget,
    RemovalExperimentConfig,
    brute_force_opt,
    exact_expected_cost,
    phi_i_closed_form,
    removal_experiment,
)
from .rng import SeedStreams
from .seeding import (
    Algorithm,
    PerturbationModel,
    SamplingDistribution,
    SeedingTrace,
    d2_distribution,
    greedy_seed,
    kmeanspp_seed,
    moderately_greedy_seed,
    noisy_seed,
    sample,
)

__version__ = "0.1.0"
