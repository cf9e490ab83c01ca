"""Pressure out of equilibrium for 2x2 matrix cocycles over Markov shifts.

Submodules:

- :mod:`poelab.shift` words, irreducibility, Markov measures and entropy
- :mod:`poelab.transfer` transfer matrices, pressure, Gibbs measures, linear response
- :mod:`poelab.cocycle` projective fiber maps, expansion margins, two-sided reduction
- :mod:`poelab.poe` anchored partition sums, certified brackets, Fekete bounds
- :mod:`poelab.variational` instability averages, kernels, Markov lower bounds
- :mod:`poelab.moments` contraction moments, decay fits, tail bounds
- :mod:`poelab.cli` the ``poelab`` command
"""

from .cocycle import CocycleSystem, PotentialFamily, fiber_grid, two_sided_reduce, uniform_expansion_margin
from .errors import ConfigurationError, ConvergenceError, DomainError, EnumerationCapError, InvariantViolation
from .moments import contraction_moment_exact, contraction_moment_mc, decay_rate_report, moment_ratio_check
from .poe import CombinedPotential, partition_sums, poe_estimate
from .sampling import gibbs_sample, stream
from .shift import MarkovMeasure, ShiftSpec, enumerate_words, is_irreducible, markov_entropy
from .systems import golden_b, past_twist, sys_a, sys_b
from .transfer import GibbsModel, Potential, gap_bound_check, gibbs_model, pressure, ruelle_spectrum
from .variational import markov_lower_bound, max_instability, variational_sandwich

__version__ = "0.1.0"

__all__ = [
    "CocycleSystem",
    "CombinedPotential",
    "ConfigurationError",
    "ConvergenceError",
    "DomainError",
    "EnumerationCapError",
    "GibbsModel",
    "InvariantViolation",
    "MarkovMeasure",
    "Potential",
    "PotentialFamily",
    "ShiftSpec",
    "contraction_moment_exact",
    "contraction_moment_mc",
    "decay_rate_report",
    "enumerate_words",
    "fiber_grid",
    "gap_bound_check",
    "gibbs_model",
    "gibbs_sample",
    "golden_b",
    "is_irreducible",
    "markov_entropy",
    "markov_lower_bound",
    "max_instability",
    "moment_ratio_check",
    "partition_sums",
    "past_twist",
    "poe_estimate",
    "pressure",
    "ruelle_spectrum",
    "stream",
    "sys_a",
    "sys_b",
    "two_sided_reduce",
    "uniform_expansion_margin",
    "variational_sandwich",
]
