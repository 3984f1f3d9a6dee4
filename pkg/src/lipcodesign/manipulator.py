"""Single-link flexible manipulator driven by a DC motor.

States are motor angle, motor rate, link angle and link rate. The motor
viscous damping ``b_m`` is the single design variable. Gravity on the link
gives the nonlinearity ``-(m g l / J_l) sin(x3)`` acting on the link rate.
"""

import numpy as np

from .plant import NonlinearitySpec, PlantFamily, Transform

PARAMS = dict(J_m=0.0037, J_l=0.0093, m=0.021, l=0.15, k_m=0.18, k_t=0.08, g=9.81)

D0 = 0.0046
D_BOUNDS = (0.002, 0.1)
POLE_TARGETS = (-9.0, -7.0, -6.0, -4.0)
TRANSFORM_DIAG = (1.0, 1.0, 1.0, 10.0)
X0 = (-1.0, 1.0, 1.0, -1.0)


def manipulator_plant(J_m=PARAMS["J_m"], J_l=PARAMS["J_l"], m=PARAMS["m"],
                      l=PARAMS["l"], k_m=PARAMS["k_m"], k_t=PARAMS["k_t"],
                      g=PARAMS["g"]):
    """Build the manipulator :class:`PlantFamily` with ``d = (b_m,)``."""
    A0 = np.array([
        [0.0, 1.0, 0.0, 0.0],
        [-k_m / J_m, 0.0, k_m / J_m, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [k_m / J_l, 0.0, -k_m / J_l, 0.0],
    ])
    A_damping = np.zeros((4, 4))
    A_damping[1, 1] = -1.0 / J_m
    return PlantFamily(
        A0=A0,
        A_terms=((0, A_damping),),
        B=np.array([[0.0], [k_t / J_m], [0.0], [0.0]]),
        B_w=np.array([[0.0], [0.0], [1.0], [0.0]]),
        C=np.diag([1.0, 1.0, 1.0, 0.0]),
        D=np.array([[0.0], [0.0], [0.0], [1.0]]),
        nonlinearity=NonlinearitySpec("scaled-sine", slot=3, arg_index=2,
                                      gain=-m * g * l / J_l),
        d_lower=np.array([D_BOUNDS[0]]),
        d_upper=np.array([D_BOUNDS[1]]),
    )


def manipulator_transform():
    return Transform.diag(TRANSFORM_DIAG)
