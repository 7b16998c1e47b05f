"""Random matrix sampling and Monte Carlo experiments."""

from .experiments import *  # noqa: F401,F403
from .experiments import __all__ as _exp_all
from .sampling import *  # noqa: F401,F403
from .sampling import __all__ as _samp_all

__all__ = list(_samp_all) + list(_exp_all)
