"""Design-parameterized Lipschitz plants.

A plant follows

    x' = A(d) x + B u + Phi(x) + B_w w,    z = C x + D u,    u = K x,

where ``A(d) = A0 + sum_i d_i A_i`` is affine in the design vector ``d``
and ``Phi`` is globally Lipschitz with constant ``alpha``. Only ``A``
depends on ``d``; ``B``, ``B_w``, ``C`` and ``D`` are fixed.
"""

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .exceptions import UncontrollableError
from .matrix_equations import eigenvalues

__all__ = [
    "NonlinearitySpec",
    "TransformedNonlinearity",
    "PlantFamily",
    "Transform",
    "AssumptionCheck",
    "AssumptionReport",
    "check_assumptions",
    "is_hurwitz",
    "place_poles",
    "controllability_matrix",
]

_NONLINEARITY_KINDS = ("none", "scaled-sine")


@dataclass(frozen=True)
class NonlinearitySpec:
    """Catalog nonlinearity.

    ``kind="scaled-sine"`` gives ``Phi(x)[slot] = gain * sin(arg_scale * x[arg_index])``
    with every other component zero; ``kind="none"`` gives ``Phi = 0``.
    ``arg_scale`` is 1 for physical models and changes under diagonal
    coordinate transformations.
    """

    kind: str = "none"
    slot: int = 0
    arg_index: int = 0
    gain: float = 0.0
    arg_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in _NONLINEARITY_KINDS:
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        if self.kind == "scaled-sine":
            out[self.slot] = self.gain * np.sin(self.arg_scale * x[self.arg_index])
        return out

    @property
    def lipschitz_constant(self):
        if self.kind == "none":
            return 0.0
        return abs(self.gain) * abs(self.arg_scale)


class TransformedNonlinearity:
    """``phi -> T^{-1} Phi(T phi)`` for an arbitrary callable ``Phi``."""

    def __init__(self, base, T, T_inv):
        self.base = base
        self.T = T
        self.T_inv = T_inv

    def __call__(self, x):
        return self.T_inv @ self.base(self.T @ np.asarray(x, dtype=float))


@dataclass(frozen=True)
class Transform:
    """Nonsingular state coordinate change ``x = T phi``."""

    T: np.ndarray
    T_inv: np.ndarray

    @classmethod
    def from_matrix(cls, T):
        T = np.atleast_2d(np.asarray(T, dtype=float))
        if T.shape[0] != T.shape[1]:
            raise ValueError("transform must be square")
        if not np.all(np.isfinite(T)) or np.linalg.cond(T) > 1e12:
            raise ValueError("transform matrix is singular or nearly so")
        T_inv = np.linalg.inv(T)
        n = T.shape[0]
        if np.linalg.norm(T @ T_inv - np.eye(n)) > 1e-10 * n:
            raise ValueError("transform inverse is inaccurate")
        return cls(T, T_inv)

    @classmethod
    def diag(cls, entries):
        return cls.from_matrix(np.diag(np.asarray(entries, dtype=float)))

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n), np.eye(n))

    @property
    def is_identity(self):
        return np.array_equal(self.T, np.eye(self.T.shape[0]))

    @property
    def is_diagonal(self):
        return np.count_nonzero(self.T - np.diag(np.diag(self.T))) == 0


def _mat(M, name):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


@dataclass(frozen=True)
class PlantFamily:
    """Lipschitz plant whose state matrix depends on design variables.

    Parameters
    ----------
    A0 : array_like, shape (n_x, n_x)
    A_terms : sequence of (int, array_like)
        Pairs ``(i, A_i)``; ``A(d) = A0 + sum d_i A_i``. An index may repeat,
        in which case its matrices add.
    B, B_w, C, D : array_like
        Input, disturbance, output and feedthrough matrices.
    nonlinearity : NonlinearitySpec or callable
        ``Phi``; arbitrary callables need an explicit ``alpha``.
    alpha : float, optional
        Lipschitz constant. Computed from catalog nonlinearities when omitted.
    d_lower, d_upper : array_like
        Box bounds on ``d``; their length fixes ``n_d``.
    A_fn : callable, optional
        Black-box ``d -> A(d)`` used instead of the affine form.
        Derivatives then come from central differences.
    """

    A0: np.ndarray
    B: np.ndarray
    B_w: np.ndarray
    C: np.ndarray
    D: np.ndarray
    d_lower: np.ndarray
    d_upper: np.ndarray
    A_terms: tuple = ()
    nonlinearity: object = field(default_factory=NonlinearitySpec)
    alpha: Optional[float] = None
    A_fn: Optional[Callable] = None

    def __post_init__(self):
        set_ = object.__setattr__
        A0 = _mat(self.A0, "A0")
        n = A0.shape[0]
        if A0.shape != (n, n):
            raise ValueError("A0 must be square")
        B = _mat(self.B, "B").reshape(n, -1) if np.size(self.B) else np.zeros((n, 0))
        B_w = _mat(self.B_w, "B_w").reshape(n, -1)
        C = _mat(self.C, "C")
        D = _mat(self.D, "D")
        if C.shape[1] != n:
            raise ValueError(f"C must have {n} columns")
        if D.shape != (C.shape[0], B.shape[1]):
            raise ValueError(f"D must have shape {(C.shape[0], B.shape[1])}, got {D.shape}")
        lo = np.atleast_1d(np.asarray(self.d_lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.d_upper, dtype=float))
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError("design bounds must satisfy d_lower <= d_upper")
        terms = []
        for i, Ai in self.A_terms:
            Ai = _mat(Ai, f"A_terms[{i}]")
            if Ai.shape != (n, n):
                raise ValueError(f"A_terms matrix for index {i} has wrong shape")
            if not 0 <= int(i) < lo.size:
                raise ValueError(f"A_terms index {i} out of range for n_d={lo.size}")
            terms.append((int(i), Ai))
        nl = self.nonlinearity if self.nonlinearity is not None else NonlinearitySpec()
        if isinstance(nl, NonlinearitySpec) and nl.kind != "none":
            if not (0 <= nl.slot < n and 0 <= nl.arg_index < n):
                raise ValueError("nonlinearity indices out of range")
        alpha = self.alpha
        if alpha is None:
            if not isinstance(nl, NonlinearitySpec):
                raise ValueError("alpha is required for custom nonlinearities")
            alpha = nl.lipschitz_constant
        if alpha < 0:
            raise ValueError("alpha must be nonnegative")
        for name, val in (("A0", A0), ("B", B), ("B_w", B_w), ("C", C), ("D", D),
                          ("d_lower", lo), ("d_upper", hi), ("A_terms", tuple(terms)),
                          ("nonlinearity", nl), ("alpha", float(alpha))):
            set_(self, name, val)

    @property
    def n_x(self):
        return self.A0.shape[0]

    @property
    def n_u(self):
        return self.B.shape[1]

    @property
    def n_w(self):
        return self.B_w.shape[1]

    @property
    def n_z(self):
        return self.C.shape[0]

    @property
    def n_d(self):
        return self.d_lower.size

    def _check_d(self, d):
        d = np.atleast_1d(np.asarray(d, dtype=float))
        if d.shape != (self.n_d,):
            raise ValueError(f"design vector must have length {self.n_d}")
        if np.any(d < self.d_lower) or np.any(d > self.d_upper):
            warnings.warn("design vector lies outside its bounds", stacklevel=3)
        return d

    def assemble_A(self, d):
        """State matrix ``A(d)``."""
        d = self._check_d(d)
        if self.A_fn is not None:
            return _mat(self.A_fn(d), "A(d)")
        A = self.A0.copy()
        for i, Ai in self.A_terms:
            A = A + d[i] * Ai
        return A

    def dA_dd(self, i, d=None):
        """Derivative of ``A(d)`` with respect to ``d[i]``.

        Exact for the affine form. For a black-box ``A_fn`` a central
        difference with step ``1e-6 * (1 + |d_i|)`` is taken at ``d``.
        """
        if not 0 <= i < self.n_d:
            raise IndexError(f"design index {i} out of range")
        if self.A_fn is None:
            out = np.zeros_like(self.A0)
            for j, Ai in self.A_terms:
                if j == i:
                    out = out + Ai
            return out
        if d is None:
            raise ValueError("black-box A(d) needs d to differentiate")
        d = np.atleast_1d(np.asarray(d, dtype=float))
        h = 1e-6 * (1.0 + abs(d[i]))
        e = np.zeros_like(d)
        e[i] = h
        return (_mat(self.A_fn(d + e), "A(d)") - _mat(self.A_fn(d - e), "A(d)")) / (2 * h)

    def eval_phi(self, x):
        x = np.asarray(x, dtype=float)
        return np.asarray(self.nonlinearity(x), dtype=float)

    def closed_loop(self, d, K):
        """``A(d) + B K``."""
        return self.assemble_A(d) + self.B @ np.atleast_2d(K)

    def output_matrix(self, K):
        """``C_z = C + D K``."""
        return self.C + self.D @ np.atleast_2d(K)

    def transform(self, T):
        """Plant in the coordinates ``x = T phi``.

        State-space matrices follow the similarity ``A -> T^{-1} A T``,
        ``B -> T^{-1} B``, ``B_w -> T^{-1} B_w``, ``C -> C T``. For a
        diagonal ``T`` and a scaled-sine nonlinearity the new Lipschitz
        constant is exact; otherwise the bound ``||T^{-1}|| alpha ||T||``
        is used and a warning is issued.
        """
        if not isinstance(T, Transform):
            T = Transform.from_matrix(T)
        Tm, Ti = T.T, T.T_inv
        if Tm.shape != (self.n_x, self.n_x):
            raise ValueError("transform dimension does not match the plant")
        nl = self.nonlinearity
        if isinstance(nl, NonlinearitySpec) and (nl.kind == "none" or T.is_diagonal):
            if nl.kind == "none":
                new_nl = nl
            else:
                new_nl = replace(nl, gain=nl.gain * Ti[nl.slot, nl.slot],
                                 arg_scale=nl.arg_scale * Tm[nl.arg_index, nl.arg_index])
            # a user-supplied alpha may exceed the catalog value; scale it the same way
            ratio = (new_nl.lipschitz_constant / nl.lipschitz_constant
                     if nl.lipschitz_constant > 0 else 0.0)
            alpha = self.alpha * ratio if nl.kind != "none" else self.alpha
        else:
            new_nl = TransformedNonlinearity(nl, Tm, Ti)
            alpha = np.linalg.norm(Ti, 2) * self.alpha * np.linalg.norm(Tm, 2)
            warnings.warn("non-diagonal transform: using conservative Lipschitz bound",
                          stacklevel=2)
        A_fn = None
        if self.A_fn is not None:
            base = self.A_fn
            A_fn = lambda d: Ti @ base(d) @ Tm  # noqa: E731
        return PlantFamily(
            A0=Ti @ self.A0 @ Tm,
            A_terms=tuple((i, Ti @ Ai @ Tm) for i, Ai in self.A_terms),
            B=Ti @ self.B,
            B_w=Ti @ self.B_w,
            C=self.C @ Tm,
            D=self.D,
            nonlinearity=new_nl,
            alpha=alpha,
            d_lower=self.d_lower,
            d_upper=self.d_upper,
            A_fn=A_fn,
        )


def is_hurwitz(M, margin=0.0):
    """True iff every eigenvalue of ``M`` has real part below ``-margin``."""
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    return bool(np.max(eigenvalues(M).real) < -margin)


def controllability_matrix(A, B):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float)).reshape(A.shape[0], -1)
    blocks = [B]
    for _ in range(A.shape[0] - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def place_poles(A, B, desired):
    """Single-input pole placement by Ackermann's formula.

    Returns the ``1 x n`` gain ``K`` (convention ``u = K x``) such that
    ``A + B K`` has eigenvalues ``desired``:
    ``K = -e_n^T Ctrb^{-1} p(A)``, with ``p`` the desired characteristic
    polynomial.

    Raises
    ------
    ValueError
        If ``B`` has more than one column or ``desired`` is not closed
        under conjugation.
    UncontrollableError
        If the controllability matrix is rank deficient.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    B = np.asarray(B, dtype=float).reshape(n, -1)
    if B.shape[1] != 1:
        raise ValueError("only single-input pole placement is supported")
    desired = np.asarray(desired, dtype=complex).ravel()
    if desired.size != n:
        raise ValueError(f"need {n} desired poles, got {desired.size}")
    coeffs = np.poly(desired)
    if np.max(np.abs(coeffs.imag)) > 1e-9 * (1 + np.max(np.abs(coeffs))):
        raise ValueError("desired poles must be closed under complex conjugation")
    coeffs = coeffs.real

    ctrb = controllability_matrix(A, B)
    if np.linalg.matrix_rank(ctrb) < n:
        raise UncontrollableError("(A, B) is not controllable")

    # Horner evaluation of p(A)
    pA = np.zeros_like(A)
    for c in coeffs:
        pA = pA @ A + c * np.eye(n)
    e_n = np.zeros(n)
    e_n[-1] = 1.0
    row = np.linalg.solve(ctrb.T, e_n)
    return -(row @ pA).reshape(1, n)


@dataclass(frozen=True)
class AssumptionCheck:
    """Outcome of one assumption; ``passed is None`` means not checked."""

    name: str
    passed: Optional[bool]
    detail: str
    witness: Optional[tuple] = None


@dataclass(frozen=True)
class AssumptionReport:
    checks: tuple
    R: Optional[np.ndarray] = None

    @property
    def all_passed(self):
        return all(c.passed is not False for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self):
        return [c for c in self.checks if c.passed is False]


def _check_detectable(A, C, tol=1e-9):
    n = A.shape[0]
    for lam in eigenvalues(A):
        if lam.real < -tol:
            continue
        pbh = np.vstack([lam * np.eye(n) - A, C.astype(complex)])
        sv = np.linalg.svd(pbh, compute_uv=False)
        if sv[-1] <= tol * max(1.0, sv[0]):
            return False, lam
    return True, None


def _lipschitz_probes(plant, probe_count, rng):
    """Random pairs; half of them tight pairs near a maximal-slope point."""
    n = plant.n_x
    nl = plant.nonlinearity
    pairs = []
    for k in range(probe_count):
        x1 = rng.normal(scale=2.0, size=n)
        if k % 2:
            step = rng.normal(scale=1e-4, size=n)
            if isinstance(nl, NonlinearitySpec) and nl.kind == "scaled-sine":
                # sine slope is maximal at the origin of its argument
                scale = max(abs(nl.arg_scale), 1e-300)
                x1[nl.arg_index] = rng.normal(scale=1e-3) / scale
                step = np.zeros(n)
                step[nl.arg_index] = rng.normal(scale=1e-4) / scale
        else:
            step = rng.normal(scale=2.0, size=n)
        pairs.append((x1, x1 + step))
    return pairs


def check_assumptions(plant, probe_count=200, d=None, rng=None):
    """Check the standing assumptions that can be verified numerically.

    * A1 (structural stabilizability) is reported as not checked.
    * A2: PBH detectability of ``(A(d), C)`` at ``d`` (default: the
      midpoint of the design bounds).
    * A3: ``D^T D = R`` positive definite and ``D^T C = 0`` to 1e-10.
    * A4: ``Phi(0) = 0``.
    * Lipschitz: sampled ratios ``|Phi(x2)-Phi(x1)| / |x2-x1|`` on
      ``probe_count`` pairs never exceed ``alpha``.

    Parameters
    ----------
    rng : numpy.random.Generator or int, optional
        Source of the Lipschitz probe pairs.
    """
    rng = np.random.default_rng(rng)
    if d is None:
        d = 0.5 * (plant.d_lower + plant.d_upper)
    checks = [AssumptionCheck("A1", None, "structural stabilizability is not checked")]

    ok, lam = _check_detectable(plant.assemble_A(d), plant.C)
    checks.append(AssumptionCheck(
        "A2", ok, "(A, C) detectable" if ok else f"undetectable mode at {lam:.6g}"))

    R = plant.D.T @ plant.D
    cross = plant.D.T @ plant.C
    r_eigs = np.linalg.eigvalsh(R) if R.size else np.array([])
    r_ok = R.size > 0 and r_eigs[0] > 1e-10
    c_ok = np.max(np.abs(cross), initial=0.0) <= 1e-10
    if r_ok and c_ok:
        detail = "D^T D = R > 0 and D^T C = 0"
    elif not c_ok:
        detail = f"D^T C != 0 (max entry {np.max(np.abs(cross)):.3e})"
    else:
        detail = "D^T D is not positive definite"
    checks.append(AssumptionCheck("A3", bool(r_ok and c_ok), detail))

    phi0 = plant.eval_phi(np.zeros(plant.n_x))
    a4 = bool(np.all(phi0 == 0.0))
    checks.append(AssumptionCheck("A4", a4, "Phi(0) = 0" if a4 else "Phi(0) != 0"))

    worst, witness = 0.0, None
    for x1, x2 in _lipschitz_probes(plant, probe_count, rng):
        gap = np.linalg.norm(x2 - x1)
        if gap == 0:
            continue
        ratio = np.linalg.norm(plant.eval_phi(x2) - plant.eval_phi(x1)) / gap
        if ratio > worst:
            worst, witness = ratio, (x1, x2)
    lip_ok = worst <= plant.alpha * (1 + 1e-9)
    checks.append(AssumptionCheck(
        "Lipschitz", bool(lip_ok),
        f"max sampled ratio {worst:.6g} vs alpha {plant.alpha:.6g}",
        None if lip_ok else witness))
    return AssumptionReport(tuple(checks), R)
