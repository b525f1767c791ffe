"""Numerical phase-space calculus on uniform lattices: symmetric
quantization, metaplectic propagators, Dyson-series parametrices, and
windowed-transform concentration diagnostics, all on finite boxes with
quantified discretization error."""

__version__ = "0.1.0"

from .errors import (BoxDecayWarning, ConfigError, GuardError,
                     InsufficientRangeError, ParseError)
from .phasespace import (PhaseGrid, chirp_state, delta_state, fourier,
                         gaussian_state, hermite_state, make_grid, norm,
                         quadrature, random_state, random_symbol)
from .symplectic import (LagrangianFrame, QuadraticHamiltonian,
                         SymplecticMap, anisotropic, dist_to_plane, flow,
                         free, harmonic, jmat, lagrangian_map,
                         symplectic_form, twisted_graph_basis, williamson)
from .weyl import (OperatorMatrix, ShubinWitness, bulk_localizer, dequantize,
                   quantize, shubin_fit, weyl_product, wigner)
from .gabor import (WindowedTransformPlan, default_window, fbi, fbi_adjoint,
                    fbi_chi, fbi_direct, fbi_lagrangian, localization_symbol,
                    qs_norm)
from .propagator import (DysonTruncation, EvolutionProblem,
                         covariance_defect, dyson_corrector, dyson_terms,
                         exact_propagator, metaplectic, p_flowed, parametrix,
                         regularizer_defect, residual_symbol)
from .wavefront import (ConeEstimate, DecayFit, KernelReport,
                        LagrangianReport, PropagationReport,
                        check_propagation, estimate_wf, kernel_estimates,
                        lagrangian_solution_estimates)
from .expressions import SymbolExpression, parse_symbol_expr
from .scenario import Scenario, canonical_hash, load_scenario
