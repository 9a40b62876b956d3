"""Finite populations, inclusion probabilities and without-replacement sampling designs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    DegenerateAuxiliary,
    DegenerateDesign,
    InfeasibleDesign,
    InputError,
    InvalidCorrelation,
    NonConvergence,
    PositivityViolation,
)

MAX_ATTEMPTS = 10**6


def make_rng(seed, *keys: int) -> np.random.Generator:
    """Seeded PCG64 generator for the stream identified by ``(seed, *keys)``.

    Streams are derived through ``SeedSequence`` entropy lists, so replicate
    ``r`` of cell ``c`` always sees ``make_rng(master, c, r)`` no matter which
    worker runs it or in which order.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    head = list(seed) if isinstance(seed, (tuple, list)) else [seed]
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in (*head, *keys)]))


def _aux_matrix(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x


@dataclass(frozen=True)
class FinitePopulation:
    y: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.y) != len(self.x):
            raise InputError("y and x must have one entry per population unit")

    @property
    def N(self) -> int:
        return len(self.y)

    @property
    def x_bar(self):
        xb = np.mean(self.x, axis=0)
        return float(xb) if np.ndim(xb) == 0 else xb


def model_sigma(rho: float, beta1: float = 1.0, sd_x: float = 1.0) -> float:
    """Noise level giving ``corr(y, x) = rho`` under ``y = b0 + b1 x + sigma e``."""
    if not 0.0 < rho < 1.0:
        raise InvalidCorrelation(f"rho must lie in (0, 1), got {rho}")
    return abs(beta1) * sd_x * np.sqrt(1.0 / rho**2 - 1.0)


def generate_population(N: int = 1000, beta0: float = 1.0, beta1: float = 1.0, rho: float = 0.3,
                        shift: float = 1.0, seed=0) -> FinitePopulation:
    """Draw ``x ~ shift + Exp(1)`` and ``y = beta0 + beta1 x + sigma N(0, 1)``.

    ``sigma`` is chosen analytically from ``rho`` (Exp(1) has unit variance,
    and the shift changes neither the variance nor the correlation).
    """
    if N < 2:
        raise InputError(f"population size must be at least 2, got {N}")
    if shift < 0:
        raise InputError(f"shift must be non-negative, got {shift}")
    sigma = model_sigma(rho, beta1)
    rng = make_rng(seed)
    x = rng.exponential(1.0, size=N) + shift
    eps = rng.standard_normal(N)
    y = beta0 + beta1 * x + sigma * eps
    params = dict(beta0=beta0, beta1=beta1, sigma=sigma, rho=rho, shift=shift, seed=seed)
    return FinitePopulation(y, x, params)


def inclusion_probabilities(size, n: int) -> np.ndarray:
    """Probabilities proportional to ``size`` summing to ``n``, capped at 1.

    Units whose share would reach 1 become certainty units and the remaining
    sample size is spread over the others, repeatedly, until nothing exceeds 1.
    """
    size = np.asarray(size, dtype=float)
    N = size.size
    if n > N:
        raise InfeasibleDesign(f"cannot select n={n} units from N={N}")
    if n < 0 or not np.all(np.isfinite(size)) or np.any(size <= 0):
        raise InputError("size measures must be finite and strictly positive, and n >= 0")
    pi = np.zeros(N)
    certain = np.zeros(N, dtype=bool)
    while True:
        free = ~certain
        remaining = n - certain.sum()
        pi[free] = remaining * size[free] / size[free].sum()
        over = free & (pi >= 1.0)
        if not over.any():
            break
        certain |= over
        pi[certain] = 1.0
    return pi


def _check_sampford(pi: np.ndarray) -> int:
    if np.any(pi >= 1.0):
        raise DegenerateDesign("certainty units (pi >= 1) must be removed before a Sampford draw")
    if np.any(pi <= 0.0):
        raise InputError("inclusion probabilities must be positive")
    total = pi.sum()
    n = int(round(total))
    if abs(total - n) > 1e-8 or n < 1:
        raise InputError(f"inclusion probabilities must sum to an integer, got {total!r}")
    if n >= pi.size:
        raise InfeasibleDesign(f"Sampford draw needs n < N (n={n}, N={pi.size})")
    return n


def _sampford_multinomial(pi, n, rng, max_attempts):
    # First unit with prob pi/n, the other n-1 with replacement prop. to pi/(1-pi);
    # keep the draw only when all n units differ.
    N = pi.size
    p_first = pi / n
    odds = pi / (1.0 - pi)
    p_rest = odds / odds.sum()
    attempts = 0
    batch = 64
    while attempts < max_attempts:
        k = min(batch, max_attempts - attempts)
        first = rng.choice(N, size=(k, 1), p=p_first)
        rest = rng.choice(N, size=(k, n - 1), p=p_rest)
        draws = np.sort(np.hstack([first, rest]), axis=1)
        ok = np.all(np.diff(draws, axis=1) != 0, axis=1)
        if ok.any():
            return draws[np.argmax(ok)]
        attempts += k
        batch = min(batch * 2, 4096)
    raise NonConvergence(f"Sampford rejective draw found no distinct sample in {max_attempts} attempts")


def _sampford_poisson(pi, n, rng, max_attempts):
    # Poisson sample with probabilities pi, kept when it has size n, then accepted
    # with probability sum_{i in s}(1 - pi_i)/n. The product of the two steps is
    # proportional to sum_s(1 - pi_i) prod_s pi_i/(1 - pi_i), the Sampford design.
    N = pi.size
    batch = 32
    attempts = 0
    while attempts < max_attempts:
        k = min(batch, max_attempts - attempts)
        hit = rng.random((k, N)) < pi
        accept_u = rng.random(k)
        sizes = hit.sum(axis=1)
        for row in np.flatnonzero(sizes == n):
            s = np.flatnonzero(hit[row])
            if accept_u[row] * n < np.sum(1.0 - pi[s]):
                return s
        attempts += k
        batch = min(batch * 2, 512)
    raise NonConvergence(f"Sampford Poisson draw found no accepted sample in {max_attempts} attempts")


def rao_sampford_draw(pi, rng, method: str = "poisson", max_attempts: int = MAX_ATTEMPTS) -> np.ndarray:
    """Draw a Rao-Sampford sample; returns sorted unit indices.

    Parameters
    ----------
    pi : array_like, shape (N,)
        Inclusion probabilities in (0, 1) summing to the sample size.
    rng : numpy Generator or int seed
    method : {"poisson", "multinomial"}
        Two exact samplers of the same design. ``"multinomial"`` is the
        classical rejective scheme; its acceptance rate decays like
        ``exp(-n^2 / 2N)`` and it stalls for samples beyond a few dozen units
        out of a thousand. ``"poisson"`` stays cheap at those sizes.
    max_attempts : int
        Rejection cap before :class:`NonConvergence` is raised.
    """
    pi = np.asarray(pi, dtype=float)
    n = _check_sampford(pi)
    rng = make_rng(rng)
    if method == "poisson":
        return _sampford_poisson(pi, n, rng, max_attempts)
    if method == "multinomial":
        return _sampford_multinomial(pi, n, rng, max_attempts)
    raise InputError(f"unknown Sampford method {method!r}")


def pps_draw(pi, rng, method: str = "poisson", max_attempts: int = MAX_ATTEMPTS) -> np.ndarray:
    """Sampford draw that takes certainty units (``pi == 1``) deterministically."""
    pi = np.asarray(pi, dtype=float)
    certain = pi >= 1.0 - 1e-12
    if not certain.any():
        return rao_sampford_draw(pi, rng, method, max_attempts)
    rest = np.flatnonzero(~certain)
    sub = pi[rest]
    if np.round(sub.sum()) == 0:
        return np.flatnonzero(certain)
    picked = rest[rao_sampford_draw(sub, rng, method, max_attempts)]
    return np.sort(np.concatenate([np.flatnonzero(certain), picked]))


def srswor_draw(N: int, n: int, rng) -> np.ndarray:
    """Simple random sample without replacement; sorted indices."""
    if not 0 <= n <= N:
        raise InfeasibleDesign(f"cannot select n={n} units from N={N}")
    return np.sort(make_rng(rng).choice(N, size=n, replace=False))


def calibration_weights(d, x, x_bar) -> np.ndarray:
    """Linear (chi-square distance) calibration of design weights.

    Returns ``w_i = d_i (1 + (x_i - xhat)' lam)`` where ``xhat`` is the
    d-weighted sample mean. Centering at ``xhat`` keeps ``sum(w) == sum(d)``,
    and ``lam`` is solved so that the normalized weights reproduce ``x_bar``.

    Examples
    --------
    >>> calibration_weights([1.0, 1.0], [0.0, 2.0], 1.5)
    array([0.5, 1.5])
    """
    d = np.asarray(d, dtype=float)
    X = _aux_matrix(x)
    target = np.atleast_1d(np.asarray(x_bar, dtype=float))
    if X.shape[0] != d.size or target.size != X.shape[1]:
        raise InputError("d, x and x_bar have inconsistent shapes")
    dt = d / d.sum()
    xhat = dt @ X
    Xc = X - xhat
    M = (Xc * dt[:, None]).T @ Xc
    if np.linalg.matrix_rank(M, tol=1e-12 * max(1.0, np.abs(M).max())) < M.shape[0]:
        raise DegenerateAuxiliary("auxiliary variables have no spread in the sample")
    lam = np.linalg.solve(M, target - xhat)
    w = d * (1.0 + Xc @ lam)
    if np.any(w <= 0):
        raise PositivityViolation(f"{np.sum(w <= 0)} calibration weight(s) are not positive")
    return w


@dataclass(frozen=True)
class SurveySample:
    """Sampled units with their inclusion probabilities and optional calibration weights."""

    y: np.ndarray = field(repr=False)
    pi: np.ndarray = field(repr=False)
    x: Optional[np.ndarray] = field(default=None, repr=False)
    w: Optional[np.ndarray] = field(default=None, repr=False)
    indices: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        n = len(self.y)
        if len(self.pi) != n or (self.x is not None and len(self.x) != n) \
                or (self.w is not None and len(self.w) != n):
            raise InputError("sample arrays must all have length n")
        if np.any(np.asarray(self.pi) <= 0) or np.any(np.asarray(self.pi) > 1 + 1e-12):
            raise InputError("inclusion probabilities must lie in (0, 1]")
        if self.indices is not None and np.unique(self.indices).size != n:
            raise InputError("sample indices must be distinct")

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def d(self) -> np.ndarray:
        return 1.0 / np.asarray(self.pi)

    @classmethod
    def from_weights(cls, y, d, x=None, w=None) -> "SurveySample":
        """Build a sample from design weights ``d = 1/pi`` (weights below 1 are rejected)."""
        d = np.asarray(d, dtype=float)
        if np.any(~np.isfinite(d)) or np.any(d < 1.0 - 1e-12):
            raise InputError("design weights must be finite and at least 1")
        return cls(np.asarray(y, dtype=float), 1.0 / d,
                   None if x is None else np.asarray(x, dtype=float),
                   None if w is None else np.asarray(w, dtype=float))


def draw_sample(pop: FinitePopulation, n: int, rng, design: str = "sampford",
                calibrate: bool = True, size=None) -> SurveySample:
    """Draw a sample from ``pop`` and attach calibration weights against ``pop.x_bar``.

    ``size`` defaults to ``pop.x``; with ``design="srswor"`` it is ignored.
    """
    rng = make_rng(rng)
    if design == "sampford":
        pi_all = inclusion_probabilities(pop.x if size is None else size, n)
        idx = pps_draw(pi_all, rng)
        pi = pi_all[idx]
    elif design == "srswor":
        idx = srswor_draw(pop.N, n, rng)
        pi = np.full(n, n / pop.N)
    else:
        raise InputError(f"unknown design {design!r}")
    x = pop.x[idx]
    w = calibration_weights(1.0 / pi, x, pop.x_bar) if calibrate else None
    return SurveySample(pop.y[idx], pi, x, w, idx)
