"""Finite i.i.d. size-biased permutations: samplers, exact laws, limits and checks."""

from .dist_models import DiscreteModel, DistributionModel, GammaModel, laplace_inv_numeric, parse_model, sample_iid
from .errors import (CapabilityError, ConvergenceError, DomainError, ResourceError, SbpError, SizeError,
                     SpecParseError)
from .sampler import (CouplingPermutation, SbpSample, coupling_permutation, exact_sbp_law, nested_subsample,
                      order_statistics, sbp_by_definition, sbp_by_exponential_keys)

__all__ = [
    "CapabilityError", "ConvergenceError", "CouplingPermutation", "DiscreteModel", "DistributionModel",
    "DomainError", "GammaModel", "ResourceError", "SbpError", "SbpSample", "SizeError", "SpecParseError",
    "coupling_permutation", "exact_sbp_law", "laplace_inv_numeric", "nested_subsample", "order_statistics",
    "parse_model", "sample_iid", "sbp_by_definition", "sbp_by_exponential_keys",
]
