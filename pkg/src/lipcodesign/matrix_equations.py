"""Dense solvers for Lyapunov and quadratic matrix equations.

The quadratic matrix equation (QME) handled here is

    F^T P + P F + P W P + V = 0,

with ``W`` symmetric positive semidefinite and ``V`` symmetric. Its
stabilizing solution is read off the stable invariant subspace of the
Hamiltonian ``[[F, W], [-V, -F^T]]``. The subspace is taken from a full
eigendecomposition, so clusters of nearly defective eigenvalues show up as
an ill-conditioned basis and raise :class:`ConditioningError`; this is fine
for the small dense problems (n up to a few dozen) this package targets.

The module also computes the distance-type quantity

    delta0(M, N) = min over real w of sigma_min([i w I - M; N])

by bisection on Hamiltonian hyperbolicity, together with a brute-force grid
evaluation used as a cross-check.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import (
    ConditioningError,
    EigenvalueError,
    NoCertificateError,
    SolvabilityError,
)

__all__ = [
    "CertificateSolution",
    "HyperbolicityReport",
    "eigenvalues",
    "is_hyperbolic",
    "default_im_axis_tol",
    "hamiltonian",
    "solve_lyapunov",
    "solve_qme",
    "delta0_hamiltonian",
    "delta0_bisect",
    "delta0_grid_oracle",
    "sigma_min_stacked",
]

# cond(X) limit for the invariant-subspace basis [X; Y]
_MAX_BASIS_COND = 1e12
_LYAP_RTOL = 1e-9
_QME_RTOL = 1e-8
_IMAG_RTOL = 1e-8


@dataclass(frozen=True)
class CertificateSolution:
    """Symmetric solution of a Lyapunov or quadratic matrix equation.

    Attributes
    ----------
    P : ndarray, shape (n, n)
        Symmetric solution.
    residual_norm : float
        Frobenius norm of the equation residual at ``P``.
    min_eig : float
        Smallest eigenvalue of ``P``. Positivity is checked by the callers
        that need it.
    """

    P: np.ndarray
    residual_norm: float
    min_eig: float

    @property
    def is_positive_definite(self):
        return self.min_eig > 0.0


@dataclass(frozen=True)
class HyperbolicityReport:
    is_hyperbolic: bool
    min_abs_real: float


def _as_square(M, name="M"):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    if M.shape[0] < 1:
        raise ValueError(f"{name} must be at least 1x1")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def eigenvalues(M):
    """Eigenvalues of a dense real square matrix as a complex array."""
    M = _as_square(M)
    try:
        ev = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise EigenvalueError(f"eigenvalue iteration failed: {exc}") from exc
    if not np.all(np.isfinite(ev)):
        raise EigenvalueError("eigenvalue iteration returned non-finite values")
    return ev.astype(complex)


def default_im_axis_tol(H):
    """Scale-aware margin ``1e-7 * (1 + ||H||_2)`` around the imaginary axis."""
    return 1e-7 * (1.0 + np.linalg.norm(H, 2))


def is_hyperbolic(H, im_axis_tol=None):
    """Test whether ``H`` has no eigenvalues on (or near) the imaginary axis.

    Parameters
    ----------
    H : array_like, shape (m, m)
    im_axis_tol : float, optional
        Eigenvalues with ``|Re(lambda)| <= im_axis_tol`` count as imaginary.
        Defaults to :func:`default_im_axis_tol`.
    """
    H = _as_square(H, "H")
    if im_axis_tol is None:
        im_axis_tol = default_im_axis_tol(H)
    if im_axis_tol <= 0:
        raise ValueError("im_axis_tol must be positive")
    min_abs_real = float(np.min(np.abs(eigenvalues(H).real)))
    return HyperbolicityReport(min_abs_real > im_axis_tol, min_abs_real)


def hamiltonian(F, W, V):
    """Block matrix ``[[F, W], [-V, -F^T]]`` of the QME ``F^T P + P F + P W P + V = 0``."""
    F = np.asarray(F, dtype=float)
    return np.block([[F, np.asarray(W, dtype=float)],
                     [-np.asarray(V, dtype=float), -F.T]])


def solve_lyapunov(F, Q, dual=False):
    """Solve a continuous Lyapunov equation.

    With ``dual=False`` solves ``F^T X + X F + Q = 0``; with ``dual=True``
    solves ``F X + X F^T + Q = 0``. Bartels-Stewart via
    :func:`scipy.linalg.solve_continuous_lyapunov`.

    Raises
    ------
    SolvabilityError
        If two eigenvalues of ``F`` sum to (numerically) zero, so the
        Lyapunov operator is singular.
    """
    F = _as_square(F, "F")
    Q = _as_square(Q, "Q")
    if Q.shape != F.shape:
        raise ValueError(f"Q shape {Q.shape} does not match F shape {F.shape}")
    if not np.allclose(Q, Q.T, rtol=0, atol=1e-12 * (1 + np.abs(Q).max())):
        raise ValueError("Q must be symmetric")

    ev = eigenvalues(F)
    gap = np.min(np.abs(ev[:, None] + ev[None, :]))
    if gap <= 1e-10 * (1.0 + np.linalg.norm(F, 2)):
        raise SolvabilityError(
            f"spectrum violates solvability: min |l_i + l_j| = {gap:.3e}")

    a = F if dual else F.T
    X = scipy.linalg.solve_continuous_lyapunov(a, -Q)
    X = 0.5 * (X + X.T)

    residual = np.linalg.norm(a @ X + X @ a.T + Q)
    scale = 1.0 + np.linalg.norm(F) * np.linalg.norm(X) + np.linalg.norm(Q)
    if residual > _LYAP_RTOL * scale:
        raise ConditioningError(
            f"Lyapunov residual {residual:.3e} exceeds {_LYAP_RTOL:g} * {scale:.3e}")
    return CertificateSolution(X, float(residual), float(np.linalg.eigvalsh(X)[0]))


def qme_residual(F, W, V, P):
    return F.T @ P + P @ F + P @ W @ P + V


def solve_qme(F, W, V, im_axis_tol=None):
    """Stabilizing solution of ``F^T P + P F + P W P + V = 0``.

    The stable invariant subspace of the Hamiltonian is spanned by the
    eigenvectors with ``Re(lambda) < 0``; stacking them as ``[X; Y]`` gives
    ``P = Y X^{-1}``. The returned branch makes ``F + W P`` Hurwitz.

    Parameters
    ----------
    F : array_like, shape (n, n)
    W : array_like, shape (n, n)
        Symmetric positive semidefinite.
    V : array_like, shape (n, n)
        Symmetric.
    im_axis_tol : float, optional
        Hyperbolicity margin, see :func:`is_hyperbolic`.

    Returns
    -------
    CertificateSolution

    Raises
    ------
    NoCertificateError
        If the Hamiltonian is not hyperbolic; no stabilizing solution exists.
    ConditioningError
        If the subspace basis is ill-conditioned, the solution has a
        significant imaginary part, or the residual check fails.
    """
    F = _as_square(F, "F")
    W = _as_square(W, "W")
    V = _as_square(V, "V")
    n = F.shape[0]
    if W.shape != F.shape or V.shape != F.shape:
        raise ValueError("F, W and V must have the same shape")

    H = hamiltonian(F, W, V)
    if im_axis_tol is None:
        im_axis_tol = default_im_axis_tol(H)
    report = is_hyperbolic(H, im_axis_tol)
    if not report.is_hyperbolic:
        raise NoCertificateError(
            "no certificate exists: Hamiltonian has eigenvalues within "
            f"{report.min_abs_real:.3e} of the imaginary axis")

    try:
        ev, vecs = np.linalg.eig(H)
    except np.linalg.LinAlgError as exc:
        raise EigenvalueError(f"eigendecomposition failed: {exc}") from exc
    stable = ev.real < -im_axis_tol
    if np.count_nonzero(stable) != n:
        raise ConditioningError(
            f"expected {n} stable Hamiltonian eigenvalues, found {np.count_nonzero(stable)}")

    X = vecs[:n, stable]
    Y = vecs[n:, stable]
    cond = np.linalg.cond(X)
    if not np.isfinite(cond) or cond > _MAX_BASIS_COND:
        raise ConditioningError(f"invariant subspace basis has cond(X) = {cond:.3e}")

    Pc = np.linalg.solve(X.T, Y.T).T
    P = Pc.real
    pnorm = np.linalg.norm(P)
    if np.linalg.norm(Pc.imag) > _IMAG_RTOL * max(pnorm, 1e-300):
        raise ConditioningError(
            f"solution has imaginary part of norm {np.linalg.norm(Pc.imag):.3e}")
    P = 0.5 * (P + P.T)

    residual = np.linalg.norm(qme_residual(F, W, V, P))
    pnorm = np.linalg.norm(P)
    scale = (1.0 + 2 * np.linalg.norm(F) * pnorm + np.linalg.norm(W) * pnorm**2
             + np.linalg.norm(V))
    if residual > _QME_RTOL * scale:
        raise ConditioningError(
            f"QME residual {residual:.3e} exceeds {_QME_RTOL:g} * {scale:.3e}")
    return CertificateSolution(P, float(residual), float(np.linalg.eigvalsh(P)[0]))


def delta0_hamiltonian(M, N, delta):
    """``[[M, I], [N^T N - delta^2 I, -M^T]]``; hyperbolic iff ``delta < delta0(M, N)``."""
    M = np.asarray(M, dtype=float)
    N = np.atleast_2d(np.asarray(N, dtype=float))
    n = M.shape[0]
    eye = np.eye(n)
    return np.block([[M, eye], [N.T @ N - delta**2 * eye, -M.T]])


def _check_mn(M, N):
    M = _as_square(M, "M")
    N = np.atleast_2d(np.asarray(N, dtype=float))
    if N.shape[1] != M.shape[0]:
        raise ValueError(f"N must have {M.shape[0]} columns, got shape {N.shape}")
    return M, N


def delta0_bisect(M, N, iterations=40, im_axis_tol=None, return_bracket=False):
    """Bisection estimate of ``delta0(M, N)``.

    Starts from the bracket ``[0, ||M||_2 + ||N||_2]`` and halves it
    ``iterations`` times: a hyperbolic Hamiltonian at the midpoint raises
    the lower end, otherwise the upper end drops. Returns the final midpoint,
    or the final ``(lower, upper)`` bracket when ``return_bracket`` is set.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    M, N = _check_mn(M, N)
    lo = 0.0
    hi = np.linalg.norm(M, 2) + np.linalg.norm(N, 2)
    mid = 0.5 * (lo + hi)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if is_hyperbolic(delta0_hamiltonian(M, N, mid), im_axis_tol).is_hyperbolic:
            lo = mid
        else:
            hi = mid
    if return_bracket:
        return lo, hi
    return mid


def sigma_min_stacked(M, N, omega):
    """Smallest singular value of ``[i omega I - M; N]``.

    Computed from the smallest eigenvalue of the Hermitian Gram matrix
    ``(i w I - M)^H (i w I - M) + N^T N``. ``omega`` may be an array, in
    which case an array of values is returned.
    """
    M = np.asarray(M, dtype=float)
    N = np.atleast_2d(np.asarray(N, dtype=float))
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    n = M.shape[0]
    Delta = 1j * w[:, None, None] * np.eye(n) - M
    gram = np.conj(np.swapaxes(Delta, 1, 2)) @ Delta + N.T @ N
    lam = np.linalg.eigvalsh(gram)[:, 0]
    sig = np.sqrt(np.maximum(lam, 0.0))
    return float(sig[0]) if np.ndim(omega) == 0 else sig


def delta0_grid_oracle(M, N, omega_max=10.0, steps=1001):
    """Grid minimum of :func:`sigma_min_stacked` over ``[-omega_max, omega_max]``."""
    if steps < 2 or omega_max <= 0:
        raise ValueError("need steps >= 2 and omega_max > 0")
    M, N = _check_mn(M, N)
    omegas = np.linspace(-omega_max, omega_max, steps)
    best = np.inf
    for chunk in np.array_split(omegas, max(1, steps // 4096)):
        best = min(best, float(np.min(sigma_min_stacked(M, N, chunk))))
    return best
