"""Quantum Brownian motion in the pilot-wave picture.

Modules
-------
bath        Caldeira-Leggett oscillator bath, memory kernel, microscopic reference.
coherent    Closed-form Bohmian dynamics of a coherent state.
thermal     Thermal coherent-state sampling and Monte Carlo averages.
langevin    Generalized and Markovian Langevin integrators, MSD and diffusion.
relaxation  Fokker-Planck relaxation toward |psi|^2 and the H-functional.
kostin      Schrodinger-Langevin field solver, trajectories and residual.
estimators  Estimator-style diffusion fit.
cli         ``pwbrownian`` command-line driver.
"""

from .bath import BathSpec, CoherentSample, bath_force, discretize_ohmic, memory_kernel, zpf_constant
from .coherent import CoherentState
from .estimators import DiffusionRegressor
from .kostin import KostinState, evolve_kostin
from .langevin import GleConfig, integrate_gle, integrate_markovian
from .relaxation import FieldGrid, evolve_fp_bohm_hiley, evolve_fp_drezet, h_functional
from .thermal import ThermalSampler
from .units import HBAR, KB

__all__ = [
    "BathSpec", "CoherentSample", "CoherentState", "DiffusionRegressor", "FieldGrid",
    "GleConfig", "HBAR", "KB", "KostinState", "ThermalSampler", "bath_force",
    "discretize_ohmic", "evolve_fp_bohm_hiley", "evolve_fp_drezet", "evolve_kostin",
    "h_functional", "integrate_gle", "integrate_markovian", "memory_kernel", "zpf_constant",
]
