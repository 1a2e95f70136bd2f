"""Numerical laboratory for Beurling generalized prime systems.

Generate generalized integers from arbitrary atomic prime configurations,
measure their density empirically, compute it analytically as C(1) through
the Dirichlet-series transfer chain, probe the closeness integral that
controls density, and reproduce swap-construction counterexamples at desk
scale.
"""

from .errors import (BeurlingLabError, CapacityError, ConditioningError,
                     DomainError, EvaluationError, PoleError, ResolutionError,
                     SchemaError, ToleranceError, UnsupportedError)
from .lattice import (DensityReport, IntegerMultiset, classify_ratio_trend,
                      density_estimate, euler_density, generate,
                      partial_density_product)
from .reference import (integers_with_generators, lemma_corpus,
                        naturals_staircase, reference_step,
                        staircase_from_target)
from .smoothing import (SmoothedCounting, density_via_C1, fourier_counting,
                        fourier_derivative, gamma, gauss_kernel, lemma_check,
                        smooth_counting, theorem2_residual)
from .steps import (PiecewiseLinear, SignedMeasure, StepFunction,
                    adaptive_simpson, combine_max, combine_min, eval_step,
                    stieltjes)
from .systems import (GenPrimeSystem, Perturbation, Reference,
                      alternating_block_system, block_coinflip_system,
                      check_multiplicative_freeness, jitter_atoms,
                      minus_system, perturb_bounded, perturbation_of,
                      plus_system, random_sign_system, system_from_json, tau,
                      usual_primes)
from .transfer import (A_of, B_of, C_of, LineSamples, ModulusEstimate, Z_of,
                       c_modulus_bound_check, diamond_integral, holder_modulus,
                       sample_line, zeta_line)

__version__ = "0.1.0"
