"""Exact solutions and symmetry operators for the nonlocal Gross-Pitaevskii
equation with quadratic Hamiltonian and quadratic nonlocal kernel."""

from .phase_space import *  # noqa: F401,F403
from .moments import *  # noqa: F401,F403
from .states import *  # noqa: F401,F403
from .grid import *  # noqa: F401,F403
from .ehrenfest_flow import *  # noqa: F401,F403
from .ehrenfest_flow import metaplectic_flow  # noqa: F401
from .linear_propagator import *  # noqa: F401,F403
from .reconstruction import *  # noqa: F401,F403
from .reference_solver import *  # noqa: F401,F403
from .formats import *  # noqa: F401,F403
from .scenario import *  # noqa: F401,F403

__version__ = "0.1.0"
