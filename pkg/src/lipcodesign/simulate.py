"""Fixed-step simulation of the closed loop and output-energy bounds."""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import trapezoid

from .exceptions import DivergenceError
from .matrix_equations import CertificateSolution, eigenvalues

__all__ = [
    "DisturbanceSignal",
    "Trajectory",
    "TraceBoundReport",
    "integrate",
    "l2_output_cost",
    "default_horizon",
    "verify_trace_bound",
]

DIVERGENCE_LIMIT = 1e9


@dataclass(frozen=True)
class DisturbanceSignal:
    """Disturbance input ``w(t)``.

    ``zero``: ``w = 0``. ``constant``: ``w = value`` on ``[t_on, t_off)``
    and 0 elsewhere. ``canonical-initial``: ``w = 0`` but the state starts
    from ``x0 + B_w e_k``, the jump an impulse along ``e_k`` produces.
    """

    kind: str = "zero"
    value: object = 0.0
    t_on: float = 0.0
    t_off: float = np.inf
    k: int = 0

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "canonical-initial"):
            raise ValueError(f"unknown disturbance kind {self.kind!r}")
        if self.t_on > self.t_off:
            raise ValueError("t_on must not exceed t_off")

    @classmethod
    def constant(cls, value, t_on=0.0, t_off=np.inf):
        return cls("constant", value=value, t_on=t_on, t_off=t_off)

    @classmethod
    def canonical_initial(cls, k):
        return cls("canonical-initial", k=k)

    def __call__(self, t, n_w):
        if self.kind == "constant" and self.t_on <= t < self.t_off:
            return np.broadcast_to(np.asarray(self.value, dtype=float), (n_w,)).copy()
        return np.zeros(n_w)

    def initial_jump(self, B_w):
        if self.kind != "canonical-initial":
            return np.zeros(B_w.shape[0])
        if not 0 <= self.k < B_w.shape[1]:
            raise ValueError(f"disturbance direction {self.k} out of range")
        return B_w[:, self.k].copy()


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    outputs: np.ndarray
    disturbance: np.ndarray
    truncated: bool = False

    @property
    def dt(self):
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0


def integrate(plant, d, K, x0, signal=None, t_end=10.0, dt=1e-3, truncate=False):
    """Classical RK4 on ``x' = (A(d) + B K) x + Phi(x) + B_w w(t)``.

    Parameters
    ----------
    plant : PlantFamily
    d, K : array_like
        Design vector and gain (``u = K x``).
    x0 : array_like
        Initial state. A ``canonical-initial`` signal adds ``B_w e_k``.
    signal : DisturbanceSignal, optional
        Defaults to ``w = 0``.
    t_end, dt : float
        Horizon and step; ``t_end >= dt > 0``.
    truncate : bool
        Stop once ``z^T z < 1e-12`` for 100 consecutive steps.

    Raises
    ------
    DivergenceError
        If the state norm exceeds ``1e9``.
    """
    if dt <= 0 or t_end < dt:
        raise ValueError("need dt > 0 and t_end >= dt")
    signal = signal or DisturbanceSignal()
    K = np.atleast_2d(np.asarray(K, dtype=float))
    Ac = plant.closed_loop(d, K)
    Cz = plant.output_matrix(K)
    B_w = plant.B_w
    n_w = plant.n_w
    phi = plant.eval_phi

    def rhs(t, x):
        return Ac @ x + phi(x) + B_w @ signal(t, n_w)

    steps = int(round(t_end / dt))
    times = dt * np.arange(steps + 1)
    x = np.asarray(x0, dtype=float) + signal.initial_jump(B_w)
    states = np.empty((steps + 1, plant.n_x))
    states[0] = x
    quiet = 0
    last = steps
    for k in range(steps):
        t = times[k]
        k1 = rhs(t, x)
        k2 = rhs(t + dt / 2, x + dt / 2 * k1)
        k3 = rhs(t + dt / 2, x + dt / 2 * k2)
        k4 = rhs(t + dt, x + dt * k3)
        x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > DIVERGENCE_LIMIT:
            raise DivergenceError(f"state norm exceeded {DIVERGENCE_LIMIT:g} at t = {times[k + 1]:g}",
                                  float(times[k + 1]))
        states[k + 1] = x
        if truncate:
            z = Cz @ x
            quiet = quiet + 1 if z @ z < 1e-12 else 0
            if quiet >= 100:
                last = k + 1
                break
    times = times[:last + 1]
    states = states[:last + 1]
    inputs = states @ K.T
    outputs = states @ Cz.T
    dist = np.array([signal(t, n_w) for t in times]).reshape(len(times), n_w)
    return Trajectory(times, states, inputs, outputs, dist, truncated=last < steps)


def l2_output_cost(traj):
    """Trapezoidal approximation of the integral of ``z^T z`` over the horizon."""
    if len(traj.times) < 2:
        return 0.0
    zz = np.sum(traj.outputs**2, axis=1)
    return float(trapezoid(zz, traj.times))


def default_horizon(Ac):
    """``20 / |max Re lambda(Ac)|``, capped at 100."""
    slow = abs(float(np.max(eigenvalues(Ac).real)))
    if slow == 0:
        return 100.0
    return min(20.0 / slow, 100.0)


@dataclass(frozen=True)
class TraceBoundReport:
    costs: tuple
    total_cost: float
    bound: float
    passed: bool
    truncated: tuple
    witness: Optional[int] = None
    message: str = ""


def verify_trace_bound(plant, d, K, P, mu=1.0, t_end=None, dt=1e-3):
    """Compare simulated output energy with the certificate bound.

    For each disturbance direction ``k`` the plant is released from
    ``x(0+) = B_w e_k`` with ``w = 0`` and ``integral z_k^T z_k dt`` is
    accumulated. The sum is checked against ``tr(B_w^T P B_w) / mu``.
    """
    Pm = P.P if isinstance(P, CertificateSolution) else np.asarray(P, dtype=float)
    bound = float(np.trace(plant.B_w.T @ Pm @ plant.B_w)) / mu
    if t_end is None:
        t_end = default_horizon(plant.closed_loop(d, K))
    x0 = np.zeros(plant.n_x)
    costs, truncated = [], []
    for k in range(plant.n_w):
        try:
            traj = integrate(plant, d, K, x0, DisturbanceSignal.canonical_initial(k),
                             t_end, dt, truncate=True)
        except DivergenceError as exc:
            return TraceBoundReport(tuple(costs), np.inf, bound, False, tuple(truncated),
                                    witness=k, message=str(exc))
        costs.append(l2_output_cost(traj))
        truncated.append(traj.truncated)
    total = float(sum(costs))
    passed = total <= bound * (1 + 1e-6)
    return TraceBoundReport(tuple(costs), total, bound, passed, tuple(truncated))
