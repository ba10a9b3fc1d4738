"""Coefficient recovery from internal data for ``-div(a grad u) + q u = 0`` on the unit square.

Submodules: :mod:`fields`, :mod:`operators`, :mod:`norms` and :mod:`hif` for
grids, discrete operators, norms and field files; :mod:`admissibility` for
coefficient classes and samplers; :mod:`solver` for the Dirichlet solver;
:mod:`internal_data` and :mod:`reconstruction` for data synthesis and
recovery; :mod:`stability` for the certification experiments; :mod:`cli`
for the command-line front end.
"""

from .fields import BoundaryTrace, Grid, MatrixField, ScalarField
from .solver import solve

__version__ = "0.1.0"

__all__ = ["BoundaryTrace", "Grid", "MatrixField", "ScalarField", "solve", "__version__"]
