"""One-sample U-statistics and their jackknife pseudo-values."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Callable

import numpy as np

from .errors import IndexOutOfRange, InputError, NonFiniteInput, SampleTooSmall

# Rows of the pairwise kernel matrix evaluated at once; bounds memory at n * _BLOCK floats.
_BLOCK = 1024


@dataclass(frozen=True)
class Kernel:
    """Symmetric kernel ``h`` of a U-statistic.

    ``eval`` takes ``degree`` array arguments and must broadcast like a numpy
    ufunc, so that a whole block of kernel values is computed in one call.
    """

    degree: int
    eval: Callable[..., np.ndarray]
    name: str = "custom"

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 1:
            raise InputError(f"kernel degree must be a positive integer, got {self.degree!r}")

    def __call__(self, *args):
        if len(args) != self.degree:
            raise InputError(f"kernel {self.name!r} takes {self.degree} arguments, got {len(args)}")
        return self.eval(*args)


def _variance_kernel(x, y):
    return 0.5 * (x - y) ** 2


def _pwm_kernel(x, y):
    return 0.5 * np.maximum(x, y)


KERNELS = {
    "variance": Kernel(2, _variance_kernel, "variance"),
    "pwm": Kernel(2, _pwm_kernel, "pwm"),
}


def get_kernel(kernel: str | Kernel) -> Kernel:
    """Look up a built-in kernel by name; ``Kernel`` instances pass through."""
    if isinstance(kernel, Kernel):
        return kernel
    try:
        return KERNELS[kernel]
    except KeyError:
        raise InputError(f"unknown kernel {kernel!r}; choose from {sorted(KERNELS)}") from None


def is_symmetric(kernel: Kernel, n_checks: int = 200, seed: int = 0, rtol: float = 1e-12) -> bool:
    """Randomized check that permuting the arguments leaves ``kernel`` unchanged."""
    rng = np.random.default_rng(seed)
    args = rng.normal(size=(kernel.degree, n_checks)) * 3.0
    base = np.asarray(kernel(*args), dtype=float)
    for perm in rng.permuted(np.tile(np.arange(kernel.degree), (5, 1)), axis=1):
        other = np.asarray(kernel(*args[perm]), dtype=float)
        if not np.allclose(base, other, rtol=rtol, atol=rtol):
            return False
    return True


def _as_values(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise InputError(f"expected a 1-D vector of values, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput("values contain NaN or infinite entries")
    return arr


def _pair_row_sums(y: np.ndarray, kernel: Kernel) -> np.ndarray:
    """``S_i = sum_{j != i} h(y_i, y_j)`` for every i, in O(n^2) time and O(n) blocks."""
    n = y.size
    rows = np.empty(n)
    for start in range(0, n, _BLOCK):
        blk = y[start:start + _BLOCK]
        block = np.broadcast_to(kernel(blk[:, None], y[None, :]), (blk.size, n))
        rows[start:start + blk.size] = block.sum(axis=1) - np.broadcast_to(kernel(blk, blk), blk.shape)
    return rows


def _naive_u(y: np.ndarray, kernel: Kernel) -> float:
    idx = np.array(list(combinations(range(y.size), kernel.degree)), dtype=np.intp)
    vals = np.broadcast_to(kernel(*y[idx].T), (idx.shape[0],))
    return float(vals.mean())


def u_statistic(values, kernel: str | Kernel) -> float:
    """Average of the kernel over all unordered ``degree``-subsets of ``values``.

    Examples
    --------
    >>> u_statistic([1.0, 2.0, 3.0], "variance")
    1.0
    """
    kernel = get_kernel(kernel)
    y = _as_values(values)
    m = kernel.degree
    if y.size < m:
        raise SampleTooSmall(f"need at least {m} values for a degree-{m} kernel, got {y.size}")
    if m == 1:
        return float(np.mean(kernel(y)))
    if m == 2:
        return float(_pair_row_sums(y, kernel).sum() / 2.0 / comb(y.size, 2))
    return _naive_u(y, kernel)


def leave_one_out(values, kernel: str | Kernel, i: int) -> float:
    """U-statistic of the sample with position ``i`` (0-based) removed."""
    kernel = get_kernel(kernel)
    y = _as_values(values)
    if y.size < kernel.degree + 1:
        raise SampleTooSmall(f"leave-one-out needs n >= {kernel.degree + 1}, got {y.size}")
    if not 0 <= i < y.size:
        raise IndexOutOfRange(f"index {i} outside [0, {y.size})")
    return u_statistic(np.delete(y, i), kernel)


@dataclass(frozen=True)
class PseudoValueSet:
    """The full-sample U-statistic ``t_n`` and the jackknife pseudo-values."""

    t_n: float
    values: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return int(self.values.size)

    @property
    def max_abs(self) -> float:
        """``max_i |V_i|``; grows slower than sqrt(n) on well-behaved designs."""
        return float(np.max(np.abs(self.values)))

    def mean_gap(self) -> float:
        """Relative discrepancy between mean(values) and ``t_n`` (zero in exact arithmetic)."""
        return abs(float(self.values.mean()) - self.t_n) / max(1.0, abs(self.t_n))


def jackknife_pseudo_values(values, kernel: str | Kernel, method: str = "auto") -> PseudoValueSet:
    """Jackknife pseudo-values ``V_i = n T_n - (n - 1) T_{n-1}^{(-i)}``.

    Parameters
    ----------
    values : array_like, shape (n,)
    kernel : str or Kernel
    method : {"auto", "fast", "naive"}
        ``"fast"`` uses pairwise row sums and needs a degree-2 kernel; it costs
        O(n^2) in total. ``"naive"`` recomputes every leave-one-out statistic.
        ``"auto"`` picks ``"fast"`` whenever the kernel has degree 2.

    Returns
    -------
    PseudoValueSet
    """
    kernel = get_kernel(kernel)
    y = _as_values(values)
    n, m = y.size, kernel.degree
    if n < m + 1:
        raise SampleTooSmall(f"pseudo-values need n >= {m + 1}, got {n}")
    if method == "auto":
        method = "fast" if m == 2 else "naive"
    if method == "fast":
        if m != 2:
            raise InputError("the fast pseudo-value path requires a degree-2 kernel")
        rows = _pair_row_sums(y, kernel)
        total = rows.sum() / 2.0
        t_n = total / comb(n, 2)
        loo = (total - rows) / comb(n - 1, 2)
    elif method == "naive":
        t_n = u_statistic(y, kernel)
        loo = np.array([u_statistic(np.delete(y, i), kernel) for i in range(n)])
    else:
        raise InputError(f"unknown method {method!r}")
    pv = n * t_n - (n - 1) * loo
    return PseudoValueSet(float(t_n), pv)


def population_u_statistic(values, kernel: str | Kernel) -> float:
    """Exhaustive U-statistic over a whole finite population (every pair, no sampling)."""
    return u_statistic(values, kernel)
