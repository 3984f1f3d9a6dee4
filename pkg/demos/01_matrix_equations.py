# coding: utf-8

# # Matrix equations
#
# The co-design loop rests on three dense solvers: a Lyapunov solver, a
# Hamiltonian-based solver for quadratic matrix equations, and a bisection
# estimate of the distance-like quantity delta0(M, N). This walk-through
# checks each one against a brute-force reference.

# In[1]:

import numpy as np

from lipcodesign.matrix_equations import (
    delta0_bisect,
    delta0_grid_oracle,
    hamiltonian,
    is_hyperbolic,
    qme_residual,
    solve_lyapunov,
    solve_qme,
)

rng = np.random.default_rng(0)


# ## Lyapunov equation
#
# Solve F^T X + X F + Q = 0 and compare with the Kronecker-vectorized
# linear system, which is O(n^6) but obviously correct.

# In[2]:

n = 5
F = rng.normal(size=(n, n))
F -= (np.linalg.eigvals(F).real.max() + 1.0) * np.eye(n)
Q = np.eye(n)

X = solve_lyapunov(F, Q).P
kron = np.kron(np.eye(n), F.T) + np.kron(F.T, np.eye(n))
X_ref = np.linalg.solve(kron, -Q.reshape(-1, order="F")).reshape(n, n, order="F")
print("relative error:", np.linalg.norm(X - X_ref) / np.linalg.norm(X_ref))


# ## Quadratic matrix equation
#
# F^T P + P F + P W P + V = 0. In the scalar case F = -2, W = V = 1 the
# stabilizing root of p^2 - 4p + 1 = 0 is 2 - sqrt(3).

# In[3]:

sol = solve_qme([[-2.0]], [[1.0]], [[1.0]])
print(sol.P[0, 0], 2 - np.sqrt(3))


# A larger instance: the solution comes from the stable invariant subspace
# of the Hamiltonian, and F + W P must be Hurwitz.

# In[4]:

W = 0.1 * np.eye(n)
sol = solve_qme(F, W, Q)
print("residual:", np.abs(qme_residual(F, W, Q, sol.P)).max())
print("F + W P eigenvalues:", np.round(np.linalg.eigvals(F + W @ sol.P), 3))


# Increase W far enough and the Hamiltonian picks up imaginary-axis
# eigenvalues; then no certificate exists.

# In[5]:

for scale in (0.1, 1.0, 10.0, 100.0):
    H = hamiltonian(F, scale * np.eye(n), Q)
    print(f"W = {scale:6.1f} I  hyperbolic: {is_hyperbolic(H).is_hyperbolic}")


# ## delta0 by bisection
#
# delta0(M, N) = min over omega of sigma_min([i omega I - M; N]). Two
# closed forms: (M, N) = (-1, 0) gives 1 and (-3, 4) gives 5.

# In[6]:

print(delta0_bisect([[-1.0]], [[0.0]]), delta0_bisect([[-3.0]], [[4.0]]))


# Against a dense frequency sweep:

# In[7]:

M = F
N = rng.normal(size=(1, n))
print("bisection:", delta0_bisect(M, N))
print("grid     :", delta0_grid_oracle(M, N, omega_max=50.0, steps=20001))
