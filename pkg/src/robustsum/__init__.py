"""Robust sums of (possibly infinite) families of extended-real functions.

The robust sum of ``a_i`` is the supremum of the finite partial sums.  The
package evaluates it with certified brackets, computes conjugates of robust
sums and the infimal decompositions bounding them, certifies zero and strong
duality gaps, decides membership in the epsilon-subdifferential
multifunctions built from the family, and solves the regression and
approximation problems these objects come from.
"""

__version__ = "0.1.0"

from .bracket import Bracket
from .errors import *  # noqa: F401,F403
from .scalar import (ScalarFamily, TailCertificate, brute_force_robust_sum, builtin,
                     infinite_sum_classify, is_finite_robust_sum, negative_part_sum,
                     positive_part_sum, robust_sum_scalar, sup_scalar)
from .families import (Affine, Constant, CountableConstants, DiagonalQuadratic, FiniteFamily,
                       HingeResidual, PowerResidual, RobustSumFunction, named_family,
                       nonneg_infinite_sum_eval, robust_lp_norm, robust_sum_eval)
from .conjugate import (EpiUnionSet, closed_convex_regarding, conjugate_atom, conjugate_numeric,
                        convexity_witness_nonneg, epi_union_membership, gap_report, is_closed_convex,
                        lemma7_check, phi_eval, weak_duality_check)
from .certificates import (B_eps_membership, M_eps_membership, N_eps_membership, Ns_Pis_membership,
                           Pi_eps_membership, S_alpha, T_alpha_membership, eps_subdiff_membership,
                           lemma10_theorem6_check, theorem1_verify, theorem2_verify,
                           theorem3_verify, theorem4_verify)
from .solvers import (LinearSystem, PointCloud, SolveResult, best_approx_solution,
                      robust_regression, subgradient_of_truncation)
