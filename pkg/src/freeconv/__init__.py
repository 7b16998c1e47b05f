"""Unitary Weingarten calculus, matricial cumulants and free, monotone and
conditionally free convolutions, with random matrix experiments."""

from ._config import CapExceeded
from .convolve import (
    ConvergenceError,
    cfree_conv,
    free_conv,
    monotone_conv,
    omega_real,
    outlier_predict,
    subordinate,
    support_of_free_conv,
)
from .cumulants import (
    MatrixTuple,
    free_product_eval,
    higher_order_matrices,
    kappa2g,
    matricial_cumulants,
    mixed_moment_exact,
    mixed_moment_expansion,
    symbolic_cumulant,
    tr_sigma,
)
from .measures import SpectralMeasure, cauchy, esd, named_measure, parse_measure_literal, stieltjes_invert, vesd
from .symgroup import Permutation, defect, from_cycles, full_cycle, identity, kreweras, parse_cycles
from .weingarten import moeb_n, moeb_series, weingarten_symbolic, weingarten_value

__version__ = "0.1.0"
