"""Single table of run defaults shared by the library entry points and the CLI.

==========================  ==========  ==========================================
key                         value       meaning
==========================  ==========  ==========================================
``grid_N``                  256         spectral grid size (power of two)
``grid_L``                  2 pi        spectral period
``n_max``                   6           Dyson truncation order
``time_mesh``               64          Volterra mesh nodes M
``tol``                     1e-6        comparison tolerance of ``solve compare``
``p``                       4           derivative order of the standard case
``alpha``                   i           coefficient of the standard case
``t``                       1           horizon of the standard case
``u0_atoms``                {(0, 1)}    initial datum of the standard case
``V_atoms``                 {(1, 0.4)}  potential of the standard case
``strang_start_steps``      32          first Strang step count when refining
``strang_max_steps``        2**16       refinement stops here
==========================  ==========  ==========================================
"""

import math

DEFAULTS = {
    "grid_N": 256,
    "grid_L": 2.0 * math.pi,
    "n_max": 6,
    "time_mesh": 64,
    "tol": 1e-6,
    "p": 4,
    "alpha": (0.0, 1.0),
    "t": 1.0,
    "u0_atoms": ((0.0, 1.0, 0.0),),
    "V_atoms": ((1.0, 0.4, 0.0),),
    "strang_start_steps": 32,
    "strang_max_steps": 2**16,
}
