"""laxlab: a desk-scale laboratory for recurrent viscosity solutions.

Builds an explicit drift Hamiltonian on the flat torus, evolves initial
data with a semi-Lagrangian Lax-Oleinik solver, estimates periodic
barriers, assembles recurrent initial data, and verifies the quantitative
structure (minimal periods, recurrence bounds, odometer factor maps,
closed-form differentials).
"""

from .params import ConstructionParams, ToleranceBundle, validate_params

__all__ = ["ConstructionParams", "ToleranceBundle", "validate_params"]
__version__ = "0.1.0"
