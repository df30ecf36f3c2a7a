"""Simulation and numerical analysis of the symmetric simple exclusion process on the torus.

Submodules
----------
lattice    configurations and torus arithmetic
sampling   initial laws and seeded random streams
dynamics   exact symmetric and tilted engines
pde        heat, lattice-mean and controlled-equation solvers
fields     path observables and exponential martingales
rates      rate functionals by variational evaluation
harness    ensembles, importance sampling, export and CLI
"""
__version__ = "0.1.0"

from .basis import DensityField, SignedField, TestFunction, TrigSeries  # noqa: E402
from .control import ControlField  # noqa: E402
from .lattice import Configuration, active_edges, make_configuration, swap_edge  # noqa: E402
from .sampling import (Profile, SeedSpec, sample_canonical, sample_equilibrium,  # noqa: E402
                       sample_perturbed, sample_product, scaling_sequence)
from .dynamics import Trajectory, run_symmetric, run_tilted, state_at, tilted_swap_rate  # noqa: E402

__all__ = [
    "TrigSeries", "DensityField", "TestFunction", "SignedField", "ControlField",
    "Configuration", "make_configuration", "swap_edge", "active_edges",
    "Profile", "SeedSpec", "sample_product", "sample_equilibrium", "sample_canonical",
    "sample_perturbed", "scaling_sequence",
    "Trajectory", "run_symmetric", "run_tilted", "state_at", "tilted_swap_rate",
]
