"""Cut-trees of size-conditioned Galton-Watson trees and of the Brownian CRT."""

from .crt import (
    FragmentationState,
    MarkSequence,
    delta_matrix_estimate,
    estimate_delta,
    estimate_height,
    line_break_reduced_tree,
    poisson_marks,
)
from .cut_process import (
    CutTree,
    ReducedTree,
    RemovalSchedule,
    build_cut_tree,
    count_cuts,
    cut_distance,
    distance_matrix,
    expected_cut_distance_exact,
    modified_distance,
    reduce_cut_tree,
    sample_schedule,
)
from .errors import GWCutError, HorizonError, ModeError, PreconditionError, SamplingError
from .gw_sampler import PlantedTree, RootedTree, plant, sample_conditioned_tree
from .offspring import OffspringLaw, make_offspring
from .replant import PointedPlantedTree, enumerate_gw_star, pushforward, replant_transform
from .stats import chi2k_cdf, ks_statistic, mu_bound_check, permutation_oracle, rayleigh

__version__ = "0.1.0"
