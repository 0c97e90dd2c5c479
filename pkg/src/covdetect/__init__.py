"""Covariance-based sparse activity detection for multi-cell massive MIMO."""

from .model import (SystemConfig, NetworkInstance, SignatureSet, ActivityPattern,
                    CovarianceSet, build_network, sample_activity,
                    generate_signatures, simulate_received, sample_covariance,
                    model_covariance, ideal_covariance_set, sample_covariance_set)
from .detect import (SolverOptions, SolutionVector, DetectionReport,
                     solve_single_cell, solve_multicell_coop,
                     solve_multicell_unknown_lsf, local_detect_all_cells,
                     baseline_tin, baseline_best_bs, equal_error_threshold)
from .phase import (khatri_rao_real_rows, condition_known_lsf,
                    condition_unknown_lsf, condition_multicell, phase_sweep)
from .lp import FeasibilityProblem, LpOutcome, solve_feasibility
from .fronthaul import (UniformQuantizer, QuantizedPayload, HuffmanCode,
                        quantize_covariance, dequantize_covariance,
                        quantize_indicators, reconstruct_covariances,
                        detect_with_fronthaul)

__version__ = "0.1.0"
