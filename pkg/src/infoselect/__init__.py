"""Kernel-based training data selection and information-loss diagnostics."""

from ._backend import BACKEND
from .approx import (
    BoundReport,
    PowerProfile,
    bound_report,
    eps_h,
    pointwise_projection_bound_check,
    power_profile,
    projection_estimate,
    ted_half,
    ted_objective,
)
from .data import (
    ConditionalDistribution,
    Dataset,
    LogisticProblem,
    SelectionMask,
    conditional_total_variation,
    load_csv,
    make_gaussian_mixture,
    split_indices,
    write_csv,
)
from .kernel import (
    GramMatrix,
    KernelSpec,
    SpectralModel,
    gram,
    inverse_diagonal,
    rescale,
    spectral_model,
    stable_inverse_apply,
)
from .select import (
    SelectionResult,
    facility_location_value,
    select_facility_location,
    select_facility_location_weighted,
    select_inverse_diagonal,
    select_random,
    select_ted_greedy,
    select_ted_sequential,
    select_uncertainty,
)

__version__ = "0.1.0"
