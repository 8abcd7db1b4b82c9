"""Collective photon emission from ordered arrays of multilevel atoms.

Builds dipole-dipole coupling matrices for the Zeeman-resolved decay
channels of Yb and Sr metastable D states, evaluates closed-form burst
criteria, and integrates the emission dynamics with second-order
cumulant equations benchmarked against exact solvers for small arrays.
"""

__version__ = "0.1.0"

from .analysis import (FitResult, find_peak, fit_power_law, fit_share,
                       photon_shares)
from .atoms import (DecayChannel, LevelScheme, Transition, build_level_scheme,
                    min_zeeman_field, relative_line_strength,
                    species_transitions, two_level_scheme)
from .criteria import (CriterionResult, SweepCurve, brute_force_g2,
                       criterion_sweep, directional_criterion, directional_g2,
                       per_channel_g2, variance_criterion)
from .cumulant import (ChannelConstants, CumulantState, channel_constants,
                       cumulant_rhs, directional_rate, evolve_cumulant,
                       init_fully_excited, reduce_two_level)
from .dicke_point import (PointModelSpec, evolve_point, ladder_model,
                          lambda_model, two_level_model)
from .exact import master_equation_evolve, mcwf_ensemble
from .geometry import (ArrayGeometry, Detector, detector_direction,
                       random_cloud, square_lattice)
from .interactions import (ChannelCoupling, CouplingSet, coupling_matrices,
                           greens_coupling)
from .records import EmissionRecord, read_csv, read_json, write_json

__all__ = [
    "ArrayGeometry", "ChannelConstants", "ChannelCoupling", "CouplingSet",
    "CriterionResult", "CumulantState", "DecayChannel", "Detector",
    "EmissionRecord", "FitResult", "LevelScheme", "PointModelSpec",
    "SweepCurve", "Transition", "__version__", "brute_force_g2",
    "build_level_scheme", "channel_constants", "coupling_matrices",
    "criterion_sweep", "cumulant_rhs", "detector_direction",
    "directional_criterion", "directional_g2", "directional_rate",
    "evolve_cumulant", "evolve_point", "find_peak", "fit_power_law",
    "fit_share", "greens_coupling", "init_fully_excited", "ladder_model",
    "lambda_model", "master_equation_evolve", "mcwf_ensemble",
    "min_zeeman_field", "per_channel_g2", "photon_shares", "random_cloud",
    "read_csv", "read_json", "reduce_two_level", "relative_line_strength",
    "species_transitions", "square_lattice", "two_level_model",
    "two_level_scheme", "variance_criterion", "write_json",
]
