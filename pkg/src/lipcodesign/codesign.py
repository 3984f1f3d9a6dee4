"""Plant/controller co-design by projected gradient descent.

The optimization runs on the (possibly transformed) plant and minimizes

    f(d, K) = beta_d * f_d(d) + beta_c * trace(P B_w B_w^T)

where ``P`` is the stabilizing solution of the certificate equation

    A_c^T P + P A_c + alpha^2 P P + I + mu C_z^T C_z = 0,
    A_c = A(d) + B K,  C_z = C + D K.

Any point without a positive definite certificate is assigned ``+inf`` so
the line search never leaves the certified-stable region.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .exceptions import (
    CodesignError,
    ConditioningError,
    EigenvalueError,
    InfeasibleSynthesisError,
    LineSearchStalled,
    NoCertificateError,
    SolvabilityError,
)
from .matrix_equations import (
    CertificateSolution,
    delta0_bisect,
    eigenvalues,
    solve_lyapunov,
    solve_qme,
)
from .plant import PlantFamily, Transform, is_hurwitz, place_poles

__all__ = [
    "DesignFunction",
    "CoDesignConfig",
    "InitialController",
    "IterationRecord",
    "RunReport",
    "synth_initial_controller",
    "solve_design_certificate",
    "objective",
    "grad_d",
    "grad_K",
    "armijo_backtrack",
    "armijo_step",
    "run_codesign",
    "backmap_controller",
]

log = logging.getLogger(__name__)

# failures that mean "no usable certificate at this point"
_CERT_FAILURES = (NoCertificateError, ConditioningError, EigenvalueError, SolvabilityError)


@dataclass(frozen=True)
class DesignFunction:
    """Design cost ``f_d`` and its gradient.

    ``zero``: 0. ``linear``: ``c . d``. ``quadratic``:
    ``sum c_i (d_i - center_i)^2`` (``center`` defaults to 0).
    ``custom``: user callables ``fn(d)`` and ``grad(d)``.
    """

    kind: str = "zero"
    c: Optional[np.ndarray] = None
    center: Optional[np.ndarray] = None
    fn: Optional[Callable] = None
    grad: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in ("zero", "linear", "quadratic", "custom"):
            raise ValueError(f"unknown design function kind {self.kind!r}")
        if self.kind in ("linear", "quadratic") and self.c is None:
            raise ValueError(f"{self.kind} design function needs coefficients c")
        if self.kind == "custom" and (self.fn is None or self.grad is None):
            raise ValueError("custom design function needs fn and grad")

    @classmethod
    def custom(cls, fn, grad):
        return cls("custom", fn=fn, grad=grad)

    def _center(self, d):
        return np.zeros_like(d) if self.center is None else np.asarray(self.center, float)

    def value(self, d):
        d = np.asarray(d, dtype=float)
        if self.kind == "zero":
            return 0.0
        if self.kind == "linear":
            return float(np.dot(self.c, d))
        if self.kind == "quadratic":
            return float(np.sum(np.asarray(self.c) * (d - self._center(d)) ** 2))
        return float(self.fn(d))

    def gradient(self, d):
        d = np.asarray(d, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(d)
        if self.kind == "linear":
            return np.broadcast_to(np.asarray(self.c, float), d.shape).copy()
        if self.kind == "quadratic":
            return 2.0 * np.asarray(self.c) * (d - self._center(d))
        return np.asarray(self.grad(d), dtype=float)


@dataclass(frozen=True)
class CoDesignConfig:
    """Scalar knobs and start data for :func:`run_codesign`.

    ``mu=None`` selects the output weight automatically: start at 1 and
    halve (at most 20 times) until the start point admits a certificate.
    ``eta_bar=None`` reuses ``eta`` for the transformed plant.
    """

    eta: float = 1e-4
    eta_bar: Optional[float] = None
    mu: Optional[float] = 0.01
    beta_d: float = 0.0
    beta_c: float = 1.0
    design_fn: DesignFunction = field(default_factory=DesignFunction)
    armijo_nu: float = 0.5
    armijo_zeta: float = 0.3
    eps_g: float = 1e-3
    max_iters: int = 1000
    max_halvings: int = 60
    transform: Optional[Transform] = None
    pole_targets: Optional[tuple] = None
    initial_d: Optional[np.ndarray] = None
    delta0_iterations: int = 40
    require_output_definite: bool = True

    def __post_init__(self):
        if not 0 < self.armijo_nu < 1 or not 0 < self.armijo_zeta < 1:
            raise ValueError("Armijo parameters must lie in (0, 1)")
        if self.eps_g <= 0:
            raise ValueError("eps_g must be positive")
        if self.mu is not None and self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.eta <= 0 or (self.eta_bar is not None and self.eta_bar <= 0):
            raise ValueError("eta and eta_bar must be positive")
        if self.beta_d < 0 or self.beta_c < 0:
            raise ValueError("objective weights must be nonnegative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True)
class InitialController:
    """Result of the initial-controller synthesis.

    ``K0`` is ``None`` when the sufficient condition ``delta0 > threshold``
    fails. ``gain_form`` records which composition of the Riccati part was
    kept, and ``verified`` whether it passed the certificate check.
    """

    K0: Optional[np.ndarray]
    Kp0: np.ndarray
    Ks0: Optional[np.ndarray]
    P0: Optional[CertificateSolution]
    delta0: float
    threshold: float
    feasible: bool
    gain_form: Optional[str] = None
    verified: bool = False


@dataclass(frozen=True)
class IterationRecord:
    d: np.ndarray
    K: np.ndarray
    objective: float
    grad_d_norm: float
    grad_K_norm: float
    step_size: Optional[float]


@dataclass
class RunReport:
    iterations: list
    final_d: np.ndarray
    final_K_bar: np.ndarray
    final_K_original: np.ndarray
    final_P: CertificateSolution
    converged: bool
    objective_initial: float
    objective_final: float
    mu: float
    eta_bar: float
    transform: Transform
    plant_bar: PlantFamily
    Kp0: np.ndarray
    initial_original: InitialController
    initial_transformed: Optional[InitialController] = None
    stalled: bool = False
    message: str = ""

    @property
    def improvement_percent(self):
        if self.objective_initial == 0:
            return 0.0
        return 100.0 * (self.objective_initial - self.objective_final) / self.objective_initial

    @property
    def initial(self):
        """The controller the descent actually started from."""
        return self.initial_transformed or self.initial_original

    @property
    def K0_bar(self):
        return self.initial.K0

    @property
    def objectives(self):
        return np.array([r.objective for r in self.iterations])


def _fro(B):
    return float(np.linalg.norm(B))


def synth_initial_controller(plant, d, Kp0, eta, mu=0.0, delta0_iterations=40):
    """Initial stabilizing gain for a Lipschitz plant.

    With ``A_c0 = A(d) + B Kp0`` Hurwitz, computes
    ``delta0 = delta0(A_c0, alpha sqrt(1+eta) B^T / ||B||)``. When it exceeds
    ``alpha sqrt(1+eta)``, solves

        A_c0^T P0 + P0 A_c0 + alpha^2 P0 (I - B B^T/||B||^2) P0 + (1+eta) I = 0

    and returns ``K0 = Kp0 + alpha^2 Ks0 / ||B||^2`` with
    ``Ks0 = -alpha^2 B^T P0 / 2``. If that gain fails the certificate check
    at weight ``mu``, ``K0 = Kp0 + Ks0 / ||B||^2`` is tried instead.

    ``Kp0`` must be expressed in the coordinates of ``plant``. An
    infeasible result (``feasible=False``) is a signal, not an error.
    """
    Kp0 = np.atleast_2d(np.asarray(Kp0, dtype=float))
    Ac0 = plant.closed_loop(d, Kp0)
    if not is_hurwitz(Ac0):
        raise ValueError("A + B Kp0 must be Hurwitz")
    if eta <= 0:
        raise ValueError("eta must be positive")
    B = plant.B
    nB = _fro(B)
    if nB == 0:
        raise ValueError("B must be nonzero")
    alpha = plant.alpha
    n = plant.n_x

    threshold = alpha * np.sqrt(1.0 + eta)
    N = threshold * B.T / nB
    delta0 = float(delta0_bisect(Ac0, N, delta0_iterations))
    log.info("delta0 = %.6g, threshold alpha*sqrt(1+eta) = %.6g", delta0, threshold)
    if delta0 <= threshold:
        return InitialController(None, Kp0, None, None, delta0, threshold, False)

    W = alpha**2 * (np.eye(n) - B @ B.T / nB**2)
    P0 = solve_qme(Ac0, W, (1.0 + eta) * np.eye(n))
    if not P0.is_positive_definite:
        return InitialController(None, Kp0, None, P0, delta0, threshold, False)

    Ks0 = -alpha**2 * B.T @ P0.P / 2.0
    candidates = (("statement", Kp0 + alpha**2 * Ks0 / nB**2),
                  ("proof", Kp0 + Ks0 / nB**2))
    for form, K0 in candidates:
        try:
            solve_design_certificate(plant, d, K0, mu)
        except _CERT_FAILURES:
            log.info("%s-form initial gain failed the certificate check", form)
            continue
        return InitialController(K0, Kp0, Ks0, P0, delta0, threshold, True, form, True)
    form, K0 = candidates[0]
    return InitialController(K0, Kp0, Ks0, P0, delta0, threshold, True, form, False)


def solve_design_certificate(plant, d, K, mu):
    """Positive definite solution of the certificate equation at ``(d, K)``.

    Solves ``A_c^T P + P A_c + alpha^2 P P + I + mu C_z^T C_z = 0``.

    Raises
    ------
    NoCertificateError
        If the closed loop is unstable, no stabilizing solution exists, or
        it is not positive definite.
    """
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    K = np.atleast_2d(np.asarray(K, dtype=float))
    Ac = plant.closed_loop(d, K)
    # P > 0 with A_c^T P + P A_c < 0 forces A_c Hurwitz
    if not is_hurwitz(Ac):
        raise NoCertificateError("closed loop is not Hurwitz")
    Cz = plant.output_matrix(K)
    n = plant.n_x
    sol = solve_qme(Ac, plant.alpha**2 * np.eye(n), np.eye(n) + mu * Cz.T @ Cz)
    if not sol.is_positive_definite:
        raise NoCertificateError(f"certificate is not positive definite (min eig {sol.min_eig:.3e})")
    return sol


def _output_definite(plant, K):
    Cz = plant.output_matrix(K)
    return np.linalg.eigvalsh(Cz.T @ Cz)[0] > 1e-12 * (1 + np.linalg.norm(Cz) ** 2)


def evaluate(plant, d, K, config):
    """Objective value and certificate; ``(inf, None)`` where infeasible."""
    if config.require_output_definite and not _output_definite(plant, K):
        return np.inf, None
    try:
        cert = solve_design_certificate(plant, d, K, config.mu)
    except _CERT_FAILURES:
        return np.inf, None
    value = (config.beta_d * config.design_fn.value(d)
             + config.beta_c * float(np.trace(cert.P @ plant.B_w @ plant.B_w.T)))
    return value, cert


def objective(plant, d, K, config):
    """``beta_d f_d(d) + beta_c tr(P B_w B_w^T)``, or ``inf`` without a certificate."""
    return evaluate(plant, d, K, config)[0]


def _P(P):
    return P.P if isinstance(P, CertificateSolution) else np.asarray(P, dtype=float)


def grad_d(plant, d, K, P, config):
    """Gradient of the objective with respect to the design vector.

    For each ``i`` the sensitivity ``dP_i`` solves the Lyapunov equation

        F^T dP_i + dP_i F + dA_i^T P + P dA_i = 0,   F = A_c + alpha^2 P,

    and the component is ``beta_d df_d/dd_i + beta_c tr(dP_i B_w B_w^T)``.
    """
    P = _P(P)
    d = np.atleast_1d(np.asarray(d, dtype=float))
    F = plant.closed_loop(d, K) + plant.alpha**2 * P
    BwBw = plant.B_w @ plant.B_w.T
    out = config.beta_d * config.design_fn.gradient(d)
    if config.beta_c == 0:
        return out
    for i in range(plant.n_d):
        dA = plant.dA_dd(i, d)
        if not np.any(dA):
            continue
        dP = solve_lyapunov(F, dA.T @ P + P @ dA).P
        out[i] += config.beta_c * np.trace(dP @ BwBw)
    return out


def grad_K(plant, d, K, P, config):
    """Gradient of the objective with respect to the gain.

    ``2 beta_c (B^T P + mu D^T C_z) L`` where ``L`` solves
    ``F L + L F^T + B_w B_w^T = 0``. Under ``D^T C = 0`` the middle term is
    ``mu R K`` with ``R = D^T D``.
    """
    P = _P(P)
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if config.beta_c == 0:
        return np.zeros_like(K)
    F = plant.closed_loop(d, K) + plant.alpha**2 * P
    L = solve_lyapunov(F, plant.B_w @ plant.B_w.T, dual=True).P
    Cz = plant.output_matrix(K)
    return 2.0 * config.beta_c * (plant.B.T @ P + config.mu * plant.D.T @ Cz) @ L


def armijo_backtrack(f, x, grads, f0, nu=0.5, zeta=0.3, project=None, max_halvings=60):
    """Backtracking line search along the negative gradient.

    Tries ``s = 1, nu, nu^2, ...`` and accepts the first candidate
    ``x(s) = project(x - s g)`` with ``f(x(s)) < f0 - zeta g . (x - x(s))``.
    Without projection the decrease term is ``s zeta |g|^2``; with it, only
    the realizable part of the step counts, so a point on the boundary
    with an outward gradient does not stall the search. ``x`` and
    ``grads`` are matching tuples of arrays.

    Returns
    -------
    s : float
    x_new : tuple of ndarray
    f_new : float

    Raises
    ------
    LineSearchStalled
        If no step passes after ``max_halvings`` reductions.
    """
    s = 1.0
    for _ in range(max_halvings + 1):
        cand = tuple(np.asarray(xi) - s * np.asarray(gi) for xi, gi in zip(x, grads))
        if project is not None:
            cand = project(cand)
        decrease = sum(float(np.sum(np.asarray(gi) * (np.asarray(xi) - ci)))
                       for xi, gi, ci in zip(x, grads, cand))
        fc = f(*cand)
        if np.isfinite(fc) and fc < f0 - zeta * decrease:
            return s, cand, fc
        s *= nu
    raise LineSearchStalled(f"no sufficient decrease after {max_halvings} halvings")


def armijo_step(plant, d, K, grads, config, f0=None):
    """Armijo step for the co-design objective with box projection on ``d``.

    Returns ``(s, (d_new, K_new), f_new)``.
    """
    if f0 is None:
        f0 = objective(plant, d, K, config)

    def project(cand):
        return np.clip(cand[0], plant.d_lower, plant.d_upper), cand[1]

    return armijo_backtrack(lambda dd, KK: objective(plant, dd, KK, config),
                            (d, K), grads, f0, config.armijo_nu, config.armijo_zeta,
                            project, config.max_halvings)


def backmap_controller(K_bar, T):
    """Gain for the original coordinates: ``K = K_bar T^{-1}``."""
    if not isinstance(T, Transform):
        T = Transform.from_matrix(T)
    return np.atleast_2d(K_bar) @ T.T_inv


def _select_mu(plant, d, K, mu):
    if mu is not None:
        solve_design_certificate(plant, d, K, mu)
        return mu
    mu = 1.0
    for _ in range(21):
        try:
            solve_design_certificate(plant, d, K, mu)
            return mu
        except _CERT_FAILURES:
            mu /= 2.0
    raise NoCertificateError("no output weight mu in [2^-20, 1] admits a certificate")


def run_codesign(plant, config):
    """Run the full co-design procedure.

    1. Assemble ``A(d0)``; ``Kp0 = 0`` if Hurwitz, else pole placement.
    2. Synthesize the initial controller; if the sufficient condition
       fails, apply ``config.transform`` and synthesize again.
    3. Fix the output weight ``mu`` (checked or auto-selected).
    4. Projected gradient descent with Armijo steps until
       ``|d+ - d| + |K+ - K|_F <= eps_g`` (or the gradient norm drops
       below ``eps_g / 10``), ``max_iters``, or a stalled line search.
    5. Map the final gain back to the original coordinates.

    Raises
    ------
    InfeasibleSynthesisError
        If the initial controller cannot be synthesized even after the
        transform (or no transform is configured).
    NoCertificateError
        If the configured ``mu`` admits no certificate at the start point.
    """
    d0 = (0.5 * (plant.d_lower + plant.d_upper) if config.initial_d is None
          else np.atleast_1d(np.asarray(config.initial_d, dtype=float)))
    A = plant.assemble_A(d0)
    if is_hurwitz(A):
        Kp0 = np.zeros((plant.n_u, plant.n_x))
    else:
        if config.pole_targets is None:
            raise CodesignError("A(d0) is not Hurwitz and no pole targets were given")
        Kp0 = place_poles(A, plant.B, config.pole_targets)
    log.info("Kp0 = %s", Kp0)

    mu_check = config.mu or 0.0
    init = synth_initial_controller(plant, d0, Kp0, config.eta, mu_check,
                                    config.delta0_iterations)
    init_bar = None
    if init.feasible:
        T = Transform.identity(plant.n_x)
        plant_bar, eta_bar, start = plant, config.eta, init
    else:
        T = config.transform
        if T is None or T.is_identity:
            raise InfeasibleSynthesisError(
                f"delta0 = {init.delta0:.6g} <= alpha*sqrt(1+eta) = {init.threshold:.6g} "
                "and no coordinate transform is configured",
                init.delta0, init.threshold)
        eta_bar = config.eta if config.eta_bar is None else config.eta_bar
        plant_bar = plant.transform(T)
        init_bar = synth_initial_controller(plant_bar, d0, Kp0 @ T.T, eta_bar, mu_check,
                                            config.delta0_iterations)
        if not init_bar.feasible:
            raise InfeasibleSynthesisError(
                f"transformed delta0 = {init_bar.delta0:.6g} <= "
                f"{init_bar.threshold:.6g}; choose a different transform",
                init_bar.delta0, init_bar.threshold)
        start = init_bar

    K0 = start.K0
    mu = _select_mu(plant_bar, d0, K0, config.mu)
    if mu != config.mu:
        config = replace(config, mu=mu)

    d, K = d0.copy(), K0.copy()
    f, cert = evaluate(plant_bar, d, K, config)
    if cert is None:
        raise NoCertificateError("start point has no admissible certificate")
    f_initial = f
    records = []
    converged = stalled = False
    message = "iteration limit reached"
    for j in range(config.max_iters):
        gd = grad_d(plant_bar, d, K, cert, config)
        gK = grad_K(plant_bar, d, K, cert, config)
        gd_n, gK_n = float(np.linalg.norm(gd)), float(np.linalg.norm(gK))
        if np.hypot(gd_n, gK_n) <= config.eps_g / 10:
            records.append(IterationRecord(d, K, f, gd_n, gK_n, None))
            converged, message = True, "gradient norm below eps_g / 10"
            break
        try:
            s, (d_new, K_new), f_new = armijo_step(plant_bar, d, K, (gd, gK), config, f)
        except LineSearchStalled as exc:
            records.append(IterationRecord(d, K, f, gd_n, gK_n, None))
            stalled, message = True, str(exc)
            break
        records.append(IterationRecord(d, K, f, gd_n, gK_n, s))
        move = np.linalg.norm(d_new - d) + np.linalg.norm(K_new - K)
        if move <= config.eps_g:
            converged, message = True, "step below eps_g"
            break
        d, K, f = d_new, K_new, f_new
        cert = evaluate(plant_bar, d, K, config)[1]
    log.info("stopped after %d iterations: %s", len(records), message)

    return RunReport(
        iterations=records,
        final_d=d,
        final_K_bar=K,
        final_K_original=backmap_controller(K, T),
        final_P=cert,
        converged=converged,
        objective_initial=f_initial,
        objective_final=f,
        mu=mu,
        eta_bar=eta_bar,
        transform=T,
        plant_bar=plant_bar,
        Kp0=Kp0,
        initial_original=init,
        initial_transformed=init_bar,
        stalled=stalled,
        message=message,
    )


def closed_loop_spectra(plant, plant_bar, d, K, K_bar):
    """Eigenvalues of ``A(d) + B K`` and ``A_bar(d) + B_bar K_bar``, sorted."""
    e1 = np.sort_complex(eigenvalues(plant.closed_loop(d, K)))
    e2 = np.sort_complex(eigenvalues(plant_bar.closed_loop(d, K_bar)))
    return e1, e2
