from jax import config

config.update("jax_enable_x64", True)

from hhjax.version import __version__

from hhjax import functions

from hhjax.utils import HHError
from hhjax.utils import ValidationError
from hhjax.utils import NotConvexError
from hhjax.utils import KinkError
from hhjax.utils import NumericFailure
from hhjax.utils import AssumptionWarning

from hhjax.quad import QuadConfig
from hhjax.quad import integrate
from hhjax.quad import integrate_with_kinks
from hhjax.quad import integrate_batch
from hhjax.quad import integrate_stieltjes

from hhjax.measure import Measure
from hhjax.measure import make_measure
from hhjax.measure import make_uniform
from hhjax.measure import make_beta22
from hhjax.measure import make_trunc_exp
from hhjax.measure import make_discrete
from hhjax.measure import make_mixture
from hhjax.measure import measure_from_config
from hhjax.measure import parse_measure
from hhjax.measure import cdf
from hhjax.measure import mean
from hhjax.measure import partial_deficit
from hhjax.measure import partial_excess
from hhjax.measure import partial_cdf_integral

from hhjax.convex import ConvexFn
from hhjax.convex import VeeParams
from hhjax.convex import make_affine
from hhjax.convex import make_vee
from hhjax.convex import make_pivot_abs
from hhjax.convex import make_kink_combination
from hhjax.convex import fit_kink_combination
from hhjax.convex import check_convex
from hhjax.convex import mollify

from hhjax.functions import get_function

from hhjax.bounds import jensen_lower
from hhjax.bounds import h_upper
from hhjax.bounds import th_weights
from hhjax.bounds import th_upper
from hhjax.bounds import th_upper_form2
from hhjax.bounds import th_upper_discrete
from hhjax.bounds import pivot_gap
from hhjax.bounds import optimal_pivot
from hhjax.bounds import stationary_pivot
from hhjax.bounds import all_bounds

from hhjax.karamata import InequalitySpec
from hhjax.karamata import second_measure
from hhjax.karamata import check_moment_conditions
from hhjax.karamata import make_inequality
from hhjax.karamata import make_custom_inequality
from hhjax.karamata import parse_inequality
from hhjax.karamata import karamata_phi_generic
from hhjax.karamata import karamata_phi_closed
from hhjax.karamata import karamata_phi
from hhjax.karamata import abs_probe_residual
from hhjax.karamata import dominance_test
from hhjax.karamata import sample_curve
from hhjax.karamata import write_curve_csv

from hhjax.residual import direct_residual
from hhjax.residual import curvature_residual
from hhjax.residual import calibrate_kappa
from hhjax.residual import average_residual
from hhjax.residual import relative_average_residual
from hhjax.residual import relative_residual
from hhjax.residual import smoothing_error_bounds
from hhjax.residual import residual_report
from hhjax.residual import table_one

del version
del utils
del quad
del measure
del convex
del bounds
del karamata
del residual
