"""Bayesian shape inversion with tailored randomly shifted lattice rules."""

from ._shapeqmc import *  # noqa: F401,F403
from ._shapeqmc import Error, InvalidArgument  # noqa: F401
