"""Bivariate means, their integral means and trigonometric transforms.

The double-precision paths are vectorised over numpy arrays; passing an
mpmath context as ``xp`` runs the same formulas at arbitrary precision.
"""

__version__ = "0.1.0"

from ._backend import PrecisionUnavailable, hp_context
from .chains import ChainReport
from .integral_means import (BOUNDS, bound_ratio, bound_tightness_scan, closed_form_integral_mean,
                             integral_mean, j_mean, oracle_check)
from .lab import (PrecisionConfig, ScanCertificate, gamma_sandwich_check, high_precision_eval,
                  reproduce_incomparability, scan_counterexample, verify_bounds, verify_chain)
from .means import (MEANS, Mean, PairSampler, PositivePair, complement_A, complement_G, convex,
                    eval_mean, get_mean, is_homogeneous_order1, is_mean_function)
from .quadrature import QuadratureError, Tolerance, integrate_1d, integrate_2d
from .transforms import (WeightPair, elliptic_arc_sandwich, j_psi_mean, l_mean, n_mean,
                         p_transform, s_hat, s_mean, s_transform, t_mean)
from .special import gamma
