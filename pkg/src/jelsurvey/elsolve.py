"""Lagrange-multiplier equations of weighted (pseudo) empirical likelihood.

For normalized weights ``w`` and constraint values ``u_i`` the EL weights are
``p_i = w_i / (1 + lam' u_i)`` where ``lam`` solves

    g(lam) = sum_i w_i u_i / (1 + lam' u_i) = 0.

``g`` is the gradient of the concave dual ``F(lam) = sum_i w_i log(1 + lam' u_i)``,
so the root is the dual maximizer and ``2 F(lam)`` is the (unscaled) log
likelihood ratio.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BoundaryViolation,
    InfeasibleConstraint,
    InputError,
    NonConvergence,
    SingularJacobian,
)

TOL = 1e-10
MAX_ITER = 100


@dataclass(frozen=True)
class ELSolution:
    lam: np.ndarray
    p: np.ndarray = field(repr=False)
    iterations: int
    residual_norm: float
    converged: bool

    def log_ratio(self, weights) -> float:
        """``sum_i w_i log(w_i / p_i)``, i.e. the dual objective at ``lam``."""
        w = np.asarray(weights, dtype=float)
        return float(np.sum(w * np.log(w / self.p)))


def _check_weights(weights, n):
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise InputError(f"weights must have shape ({n},), got {w.shape}")
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise InputError("weights must be finite and strictly positive")
    if abs(w.sum() - 1.0) > 1e-8:
        raise InputError("weights must be normalized to sum to one")
    return w


def el_weights(weights, lam, u) -> np.ndarray:
    """EL probabilities ``weights / (1 + lam' u)``."""
    w = np.asarray(weights, dtype=float)
    u = np.asarray(u, dtype=float)
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    denom = 1.0 + (u * lam[0] if u.ndim == 1 else u @ lam)
    if np.any(denom <= 0):
        raise BoundaryViolation("1 + lam'u_i must be positive for every unit")
    return w / denom


def solve_lambda_scalar(weights, u, tol: float = TOL, max_iter: int = MAX_ITER, lam0: float = 0.0) -> ELSolution:
    """Root of ``sum w_i u_i / (1 + lam u_i)`` by safeguarded Newton.

    The function is strictly decreasing on the feasible interval
    ``(-1/max(u), -1/min(u))``; a bracket is carried along and a bisection
    step replaces any Newton step that leaves it.

    Examples
    --------
    >>> sol = solve_lambda_scalar([0.5, 0.5], [-1.0, 3.0])
    >>> round(float(sol.lam[0]), 12), sol.p.round(12).tolist()
    (0.333333333333, [0.75, 0.25])
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 1:
        raise InputError("scalar solver expects a 1-D constraint vector")
    w = _check_weights(weights, u.size)
    umin, umax = u.min(), u.max()
    if not (umin < 0.0 < umax):
        raise InfeasibleConstraint("zero is not inside (min u, max u)")

    lo, hi = -1.0 / umax, -1.0 / umin
    eps = 1e-12 * (hi - lo)
    lo, hi = lo + eps, hi - eps

    lam = float(lam0) if lo < lam0 < hi else 0.0
    for it in range(1, max_iter + 1):
        denom = 1.0 + lam * u
        q = w * u / denom
        g = q.sum()
        # sum(p) = 1 - lam * g, so a small g alone is not enough when |lam| is large
        if abs(g) <= tol and abs(lam * g) <= tol:
            return ELSolution(np.array([lam]), w / denom, it, abs(g), True)
        if g > 0:
            lo = lam
        else:
            hi = lam
        dg = -np.sum(q * u / denom)
        step = lam - g / dg
        lam = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 1e-15 * max(1.0, abs(lam)):
            break
    denom = 1.0 + lam * u
    g = float(np.sum(w * u / denom))
    if abs(g) <= tol and abs(lam * g) <= tol:
        return ELSolution(np.array([lam]), w / denom, max_iter, abs(g), True)
    raise NonConvergence(f"scalar multiplier did not converge (|g| = {abs(g):.3g})")


def zero_in_hull(u) -> bool:
    """Whether the origin is an interior point of the convex hull of the rows of ``u``.

    Exact for one and two columns; higher dimensions return ``True`` and leave
    the verdict to the solver.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim == 1 or u.shape[1] == 1:
        v = u.ravel()
        return bool(v.min() < 0.0 < v.max())
    if u.shape[1] == 2:
        nz = np.any(u != 0.0, axis=1)
        if not nz.any():
            return False
        ang = np.sort(np.arctan2(u[nz, 1], u[nz, 0]))
        gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * np.pi]]))
        return bool(gaps.max() < np.pi - 1e-12)
    return True


def solve_lambda_vector(weights, u, tol: float = TOL, max_iter: int = MAX_ITER, lam0=None) -> ELSolution:
    """Vector multiplier by damped Newton ascent on the concave dual.

    Parameters
    ----------
    weights : array_like, shape (n,)
        Normalized positive weights.
    u : array_like, shape (n, k)
        Constraint vectors, ``k < n``.
    lam0 : array_like, optional
        Warm start; ignored when it is not strictly feasible.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    n, k = u.shape
    w = _check_weights(weights, n)
    if k >= n:
        raise InputError(f"need more units than constraints (n={n}, k={k})")
    scale = np.abs(u).max(axis=0)
    scale[scale == 0] = 1.0
    gram = (u / scale * w[:, None]).T @ (u / scale)
    if np.linalg.matrix_rank(gram, tol=1e-12 * max(1.0, np.abs(gram).max())) < k:
        raise SingularJacobian("weighted outer-product matrix of u is rank deficient")
    if not zero_in_hull(u):
        raise InfeasibleConstraint("zero is not an interior point of the convex hull of u")

    lam = np.zeros(k)
    if lam0 is not None:
        lam0 = np.atleast_1d(np.asarray(lam0, dtype=float))
        if lam0.shape == (k,) and np.all(1.0 + u @ lam0 > 0):
            lam = lam0.copy()

    denom = 1.0 + u @ lam
    obj = np.sum(w * np.log(denom))
    for it in range(1, max_iter + 1):
        q = w / denom
        g = u.T @ q
        gnorm = np.abs(g).max()
        if gnorm <= tol and abs(lam @ g) <= tol:
            return ELSolution(lam, q, it, float(gnorm), True)
        H = (u * (q / denom)[:, None]).T @ u
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            raise SingularJacobian("dual Hessian is singular") from None
        t = 1.0
        for _ in range(60):
            cand = lam + t * step
            cd = 1.0 + u @ cand
            if np.all(cd > 0):
                cobj = np.sum(w * np.log(cd))
                if cobj >= obj - 1e-15 * max(1.0, abs(obj)):
                    break
            t *= 0.5
        else:
            break
        lam, denom, obj = cand, cd, cobj
        if np.abs(lam).max() > 1e12:
            raise InfeasibleConstraint("multiplier diverged; zero is outside the hull of u")
    q = w / denom
    g = u.T @ q
    gnorm = float(np.abs(g).max())
    if gnorm <= tol and abs(lam @ g) <= tol:
        return ELSolution(lam, q, max_iter, gnorm, True)
    if q.sum() < 1.0 - 1e-3:
        # probability mass drains away only when the dual is unbounded
        raise InfeasibleConstraint("multiplier diverged; zero is outside the hull of u")
    raise NonConvergence(f"vector multiplier did not converge (max|g| = {gnorm:.3g})")
