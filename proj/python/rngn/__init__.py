"""Neural risk-neutral density estimation from option prices."""

from ._rngn import *  # noqa: F401,F403
from ._rngn import __doc__  # noqa: F401

__version__ = "0.1.0"
