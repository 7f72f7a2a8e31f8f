"""Fundamental solutions of du/dt = (-i)^p alpha d^p u/dx^p + V u, Fresnel
integrals with polynomial phase on cylinder functions, and Dyson-series /
Feynman-Kac solvers cross-checked by a split-step spectral solver."""

from .cylinder import (AtomicMeasure, TimePartition, cylinder_set_measure,
                       fresnel_cylinder_closed, fresnel_cylinder_quadrature,
                       total_variation_estimate)
from .dyson import (DysonConfig, PlaneWaveState, StateExplosionError, apply_potential,
                    dyson_solve, dyson_term, feynman_kac_eval, free_propagate, state_eval)
from .kernel import (AdmissibilityError, EvolutionParams, KernelValue, Method,
                     OutsideRegimeError, ShiftTooSmallError, kernel_asymptotic,
                     kernel_decaying, kernel_rotated, kernel_shifted, kernel_table,
                     validate_params)
from .quad import QuadResult, QuadSpec, convolve, integrate_interval, truncation_radius
from .spectral import (GridState, dft, free_step, idft, sample_potential, sample_state,
                       strang_refined, strang_solve)

# ``polyheat.kernel`` stays the submodule; the dispatcher is ``polyheat.kernel.kernel``.
__version__ = "0.1.0"
