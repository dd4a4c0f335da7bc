"""Spectral learning and Baum-Welch identification of discrete HMMs."""

from .em import EmResult, baum_welch, forward_backward, random_init
from .errors import HmmError
from .evaluation import AlignedEstimate, align_permutation, cond_OT, mse, validity_fraction
from .hmm import (
    HmmModel,
    ObservationSequence,
    ValidationReport,
    load_model,
    random_model,
    sample_sequence,
    stationary_distribution,
    validate_model,
)
from .kernels import BACKEND
from .moments import (
    MomentSet,
    TripletMultiset,
    estimate_moments,
    exact_moments,
    triplets_independent,
    triplets_sliding,
)
from .spectral import (
    SpectralEstimate,
    SpectralOptions,
    ValidityReport,
    pseudo_inverse,
    recover_O,
    recover_pi_T,
    spectral_learn,
    top_left_singular,
    validity_check,
)
from .systems import ExampleSystem, bundled_examples, get_example

__version__ = "0.1.0"

__all__ = [
    "AlignedEstimate",
    "BACKEND",
    "EmResult",
    "ExampleSystem",
    "HmmError",
    "HmmModel",
    "MomentSet",
    "ObservationSequence",
    "SpectralEstimate",
    "SpectralOptions",
    "TripletMultiset",
    "ValidationReport",
    "ValidityReport",
    "align_permutation",
    "baum_welch",
    "bundled_examples",
    "cond_OT",
    "estimate_moments",
    "exact_moments",
    "forward_backward",
    "get_example",
    "load_model",
    "mse",
    "pseudo_inverse",
    "random_init",
    "random_model",
    "recover_O",
    "recover_pi_T",
    "sample_sequence",
    "spectral_learn",
    "stationary_distribution",
    "top_left_singular",
    "triplets_independent",
    "triplets_sliding",
    "validate_model",
    "validity_check",
    "validity_fraction",
]
