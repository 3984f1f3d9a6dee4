# coding: utf-8

# # Closed-loop simulation and the output-energy bound

# In[1]:

import numpy as np

from lipcodesign import CoDesignConfig, run_codesign
from lipcodesign.codesign import solve_design_certificate
from lipcodesign.manipulator import (
    D0,
    POLE_TARGETS,
    X0,
    manipulator_plant,
    manipulator_transform,
)
from lipcodesign.simulate import DisturbanceSignal, integrate, l2_output_cost, verify_trace_bound

plant = manipulator_plant()
run = run_codesign(plant, CoDesignConfig(
    eta=1e-4, eta_bar=1e-4, mu=0.01, transform=manipulator_transform(),
    pole_targets=POLE_TARGETS, initial_d=np.array([D0])))
d, K = run.final_d, run.final_K_original


# ## Step disturbance
#
# Start away from the origin, push with w = 1 for four seconds, then let
# the loop recover.

# In[2]:

w = DisturbanceSignal.constant(1.0, t_on=0.0, t_off=4.0)
traj = integrate(plant, d, K, X0, w, t_end=10.0, dt=1e-3)
for t in (0.0, 1.0, 4.0, 6.0, 10.0):
    k = int(round(t / traj.dt))
    print(f"t = {t:4.1f}  x = {np.round(traj.states[k], 4)}")
print("output energy over the run:", l2_output_cost(traj))


# ## Certificate bound
#
# Releasing the loop from x(0+) = B_w e_k with w = 0 mimics an impulse.
# The integrated output energy must not exceed tr(B_w^T P B_w) / mu.

# In[3]:

plant_bar = run.plant_bar
for label, rec in (("start", run.iterations[0]), ("final", run.iterations[-1])):
    P = solve_design_certificate(plant_bar, rec.d, rec.K, run.mu)
    out = verify_trace_bound(plant_bar, rec.d, rec.K, P, run.mu)
    print(f"{label}: cost {out.total_cost:.4f} <= bound {out.bound:.2f}  {out.passed}")


# The bound is loose because mu = 0.01 weights the output lightly inside
# the certificate equation; the guarantee is still rigorous.

# ## Lyapunov function along a trajectory

# In[4]:

P = run.final_P.P
x0 = np.array([-1.0, 1.0, 1.0, -0.1])
traj = integrate(plant_bar, run.final_d, run.final_K_bar, x0, t_end=5.0)
V = np.einsum("ij,jk,ik->i", traj.states, P, traj.states)
print("V(0) =", V[0], " V(5) =", V[-1], " monotone:", bool(np.all(np.diff(V) <= 0)))
