"""huflow: implicit finite-volume simulation of immiscible porous-media flow.

The package is organised bottom-up:

* :mod:`huflow.ad` -- forward-mode dual numbers used for exact Jacobians.
* :mod:`huflow.mesh` -- grids, connections, two-point transmissibilities.
* :mod:`huflow.fluid` -- phases, relative permeability, capillary splines.
* :mod:`huflow.flux` -- the pluggable interface-flux schemes.
* :mod:`huflow.solver` -- implicit time stepping with a damped Newton loop.
* :mod:`huflow.analysis` -- single-interface residual-space diagnostics.
* :mod:`huflow.cases` -- built-in benchmark cases and config files.
* :mod:`huflow.compare` -- scheme-by-case run matrices.
* :mod:`huflow.report` -- delimited output and figure rendering.
* :mod:`huflow.cli` -- the ``huflow`` command-line entry point.
"""

__version__ = "0.1.0"

from .flux import SCHEME_LABELS, SchemeConfig  # noqa: F401
from .solver import Problem, RunReport, SolverSettings, State, run_schedule  # noqa: F401

__all__ = [
    "SCHEME_LABELS",
    "SchemeConfig",
    "Problem",
    "RunReport",
    "SolverSettings",
    "State",
    "run_schedule",
    "__version__",
]
