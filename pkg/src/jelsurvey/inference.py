"""Point estimators, design effects and interval construction for pseudo-value data."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize, stats

from .designs import SurveySample, _aux_matrix
from .elsolve import solve_lambda_scalar, solve_lambda_vector
from .errors import (
    DegenerateAuxiliary,
    DegenerateSample,
    InfeasibleConstraint,
    InputError,
    MissingWeights,
    NonConvergence,
    NumericalError,
    SampleTooSmall,
)
from .ustat import PseudoValueSet

METHODS = ("NA", "JEL", "JEL_d", "JEL_w")
JEL_METHODS = ("JEL", "JEL_d", "JEL_w")


def chi2_quantile(level: float, df: int = 1) -> float:
    return float(stats.chi2.ppf(level, df))


def _normalize(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    return w / w.sum()


def sample_weights(sample: SurveySample, weight_mode: str = "design") -> np.ndarray:
    """Normalized design (``d~``) or calibration (``w~``) weights of ``sample``."""
    if weight_mode == "design":
        return _normalize(sample.d)
    if weight_mode == "calibration":
        if sample.w is None:
            raise MissingWeights("calibration weights are not available for this sample")
        return _normalize(sample.w)
    raise InputError(f"unknown weight mode {weight_mode!r}")


def _pv_values(pv) -> np.ndarray:
    return np.asarray(pv.values if isinstance(pv, PseudoValueSet) else pv, dtype=float)


def hajek_estimate(sample: SurveySample, pv, weight_mode: str = "design") -> float:
    """``sum_i w~_i V_i`` with the normalized weights of ``weight_mode``."""
    return float(sample_weights(sample, weight_mode) @ _pv_values(pv))


def variance_estimate(sample: SurveySample, values, weight_mode: str = "design") -> float:
    """With-replacement style variance of the normalized-weight mean of ``values``.

    ``n/(n-1) * sum_i w~_i^2 (v_i - sum_j w~_j v_j)^2``; reduces to ``s^2/n``
    for equal weights.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise SampleTooSmall("variance estimation needs at least two units")
    w = sample_weights(sample, weight_mode)
    return _wr_variance(w, v)


def _wr_variance(w, v) -> float:
    n = v.size
    return float(n / (n - 1) * np.sum(w**2 * (v - w @ v) ** 2))


def regression_coefficients(x, v, weights=None, x_center=None, v_center=None) -> np.ndarray:
    """Weighted least-squares slope(s) of ``v`` on ``x``.

    ``{sum w (x - xc)(x - xc)'}^{-1} sum w (x - xc)(v - vc)``. Centers default
    to the weighted means; pass a known population mean for ``x_center`` to get
    the population-level form.
    """
    X = _aux_matrix(x)
    v = np.asarray(v, dtype=float)
    w = np.full(v.size, 1.0 / v.size) if weights is None else _normalize(weights)
    xc = w @ X if x_center is None else np.atleast_1d(np.asarray(x_center, dtype=float))
    vc = w @ v if v_center is None else float(v_center)
    Xc = X - xc
    M = (Xc * w[:, None]).T @ Xc
    if np.linalg.matrix_rank(M, tol=1e-12 * max(1.0, np.abs(M).max())) < M.shape[0]:
        raise DegenerateAuxiliary("auxiliary variables have no spread")
    return np.linalg.solve(M, (Xc * w[:, None]).T @ (v - vc))


@dataclass(frozen=True)
class GregResult:
    estimate: float
    B: np.ndarray
    residuals: np.ndarray = field(repr=False)


def _require_aux(sample: SurveySample, x_bar):
    if sample.x is None or x_bar is None:
        raise MissingWeights("auxiliary values and their population mean are required")
    X = _aux_matrix(sample.x)
    xb = np.atleast_1d(np.asarray(x_bar, dtype=float))
    if xb.size != X.shape[1]:
        raise InputError(f"x_bar has {xb.size} entries but x has {X.shape[1]} columns")
    return X, xb


def greg_estimate(sample: SurveySample, pv, x_bar) -> GregResult:
    """Regression estimator ``V_H + B'(X_bar - Xhat_H)`` and its residuals.

    ``B`` is the d-weighted regression slope of the pseudo-values on ``x``;
    residuals are ``r_i = V_i - Vbar - B'(x_i - X_bar)`` with ``Vbar`` the
    plain mean of the pseudo-values.
    """
    v = _pv_values(pv)
    X, xb = _require_aux(sample, x_bar)
    d = sample_weights(sample, "design")
    B = regression_coefficients(X, v, d)
    est = d @ v + B @ (xb - d @ X)
    resid = v - v.mean() - (X - xb) @ B
    return GregResult(float(est), B, resid)


@dataclass(frozen=True)
class DesignSummary:
    mode: str
    v_hat_point: float
    v_p_hat: float
    s_v2_hat: float
    deff: float
    n_eff: float
    m_scale: float
    B: Optional[np.ndarray] = field(default=None, repr=False)
    residuals: Optional[np.ndarray] = field(default=None, repr=False)


def design_effect(sample: SurveySample, pv, mode: str = "H", x_bar=None, v_p: Optional[float] = None) -> DesignSummary:
    """Estimated design effect, effective sample size and calibration scale factor.

    Parameters
    ----------
    mode : {"H", "GR", "W"}
        ``"H"``: Hajek estimator with design weights. ``"GR"``: regression
        estimator, using residuals ``r_i``. ``"W"``: calibration weights with
        no auxiliary data; the residual variance is then unavailable and the
        w-weighted variance of the pseudo-values stands in for it.
    v_p : float, optional
        Replaces the estimated design variance, e.g. by a Monte Carlo value.
    """
    v = _pv_values(pv)
    n = v.size
    if mode == "H":
        d = sample_weights(sample, "design")
        point = float(d @ v)
        vp = _wr_variance(d, v) if v_p is None else float(v_p)
        s2 = float(d @ (v - point) ** 2)
        B = resid = None
    elif mode == "GR":
        greg = greg_estimate(sample, v, x_bar)
        d = sample_weights(sample, "design")
        point, B, resid = greg.estimate, greg.B, greg.residuals
        vp = _wr_variance(d, resid) if v_p is None else float(v_p)
        s2 = float(d @ (resid - d @ resid) ** 2)
    elif mode == "W":
        wt = sample_weights(sample, "calibration")
        point = float(wt @ v)
        vp = _wr_variance(wt, v) if v_p is None else float(v_p)
        s2 = float(wt @ (v - point) ** 2)
        B = resid = None
    else:
        raise InputError(f"unknown design-effect mode {mode!r}")
    if s2 <= 0 or vp <= 0:
        raise DegenerateSample("pseudo-values (or residuals) have no spread")
    deff = vp / (s2 / n)
    # Scale factor of the calibration-weight likelihood: S_V^2 / V_p(regression estimator).
    if sample.w is not None:
        wt = sample_weights(sample, "calibration")
        sv_w = float(wt @ (v - wt @ v) ** 2)
        m_scale = sv_w / vp if mode in ("GR", "W") else s2 / vp
    else:
        m_scale = s2 / vp
    return DesignSummary(mode, point, vp, s2, deff, n / deff, m_scale, B, resid)



class ProfileRatio:
    """``theta -> r(theta)`` for one sample and one JEL variant.

    Weights, scale factor, the unconstrained maximum and the feasible range
    of ``theta`` are computed once; each call solves one multiplier equation,
    warm-started from the previous solution.

    Parameters
    ----------
    method : {"JEL", "JEL_d", "JEL_w"}
    x_bar : float or array, optional
        Known population mean of ``x``; required by ``JEL_d``. ``JEL_w`` uses
        it (when given) to compute the scale factor from regression residuals.
    v_p : float, optional
        Override for the estimated design variance.
    """

    def __init__(self, sample: SurveySample, pv, method: str = "JEL", x_bar=None, v_p: Optional[float] = None):
        if method not in JEL_METHODS:
            raise InputError(f"unknown JEL method {method!r}; choose from {JEL_METHODS}")
        self.method = method
        self.v = _pv_values(pv)
        self.n = self.v.size
        self._lam = None
        self.evaluations = 0
        if method == "JEL":
            self.summary = design_effect(sample, self.v, "H", v_p=v_p)
            self.weights = sample_weights(sample, "design")
            self.factor = self.summary.n_eff
        elif method == "JEL_w":
            has_aux = sample.x is not None and x_bar is not None
            self.summary = design_effect(sample, self.v, "GR" if has_aux else "W", x_bar, v_p=v_p)
            self.weights = sample_weights(sample, "calibration")
            self.factor = self.summary.m_scale
        else:
            self.summary = design_effect(sample, self.v, "GR", x_bar, v_p=v_p)
            self.weights = sample_weights(sample, "design")
            self.factor = self.summary.n_eff
            X, xb = _require_aux(sample, x_bar)
            self.xc = X - xb
            base = solve_lambda_vector(self.weights, self.xc)
            self.baseline = base.log_ratio(self.weights)
            self.point = float(base.p @ self.v)
            self.lower_bound, self.upper_bound = self._hull_range()
            return
        self.baseline = 0.0
        self.point = float(self.weights @ self.v)
        self.lower_bound, self.upper_bound = float(self.v.min()), float(self.v.max())

    def _hull_range(self):
        # Range of sum p_i V_i over probability vectors with sum p_i x_i = X_bar.
        A_eq = np.vstack([np.ones(self.n), self.xc.T])
        b_eq = np.concatenate([[1.0], np.zeros(self.xc.shape[1])])
        out = []
        for sign in (1.0, -1.0):
            res = optimize.linprog(sign * self.v, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
            if res.status != 0:
                raise InfeasibleConstraint("population mean of x is outside the sample hull")
            out.append(sign * res.fun)
        return out[0], out[1]

    def __call__(self, theta: float) -> float:
        """Ratio statistic at ``theta``; ``inf`` when ``theta`` is outside the feasible range."""
        self.evaluations += 1
        if not self.lower_bound < theta < self.upper_bound:
            return np.inf
        try:
            if self.method == "JEL_d":
                u = np.column_stack([self.v - theta, self.xc])
                sol = solve_lambda_vector(self.weights, u, lam0=self._lam)
            else:
                sol = solve_lambda_scalar(self.weights, self.v - theta,
                                          lam0=0.0 if self._lam is None else float(self._lam[0]))
        except (InfeasibleConstraint, NonConvergence):
            return np.inf
        self._lam = sol.lam
        self.last_solution = sol
        return max(0.0, 2.0 * self.factor * (sol.log_ratio(self.weights) - self.baseline))


def jel_ratio(theta: float, sample: SurveySample, pv, mode: str = "JEL", x_bar=None) -> float:
    """Pseudo empirical likelihood ratio statistic ``-2 {l(p(theta)) - l(p_hat)}``.

    ``inf`` is returned for ``theta`` outside the convex hull of the pseudo-values
    (or, for ``JEL_d``, outside the hull compatible with the ``x`` constraint).
    """
    return ProfileRatio(sample, pv, mode, x_bar)(theta)


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    level: float
    method: str
    point: float
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def length(self) -> float:
        return self.upper - self.lower

    def covers(self, theta: float) -> bool:
        return self.lower <= theta <= self.upper


def _endpoint(f, point, bound, q, step, max_expand=200):
    """Solve ``f(theta) = q`` between ``point`` (where f = 0) and ``bound``."""
    direction = 1.0 if bound > point else -1.0
    a, fa = point, 0.0
    expansions = 0
    t = point + direction * step
    while True:
        if direction * (t - bound) >= 0:
            t = a + 0.5 * (bound - a)
        ft = f(t)
        if ft > q:
            b, fb = t, ft
            break
        a, fa = t, ft
        expansions += 1
        if expansions > max_expand or abs(bound - a) <= 1e-14 * max(1.0, abs(bound)):
            return a, {"expansions": expansions, "hit_boundary": True}
        step *= 2.0
        t = a + direction * step
    # Shrink an infinite side (solver failure at the hull edge) before Brent.
    while not np.isfinite(fb):
        m = 0.5 * (a + b)
        fm = f(m)
        if fm > q:
            b, fb = m, fm
        else:
            a, fa = m, fm
    scale = max(1.0, abs(point), abs(b - a))
    root = optimize.brentq(lambda th: f(th) - q, min(a, b), max(a, b), xtol=1e-13 * scale, rtol=1e-15, maxiter=200)
    # Brent's last iterate may sit a hair outside the tolerance band; polish by bisection.
    fr = f(root)
    inside, outside = a, b
    for _ in range(100):
        if abs(fr - q) <= 1e-9 or not np.isfinite(fr):
            break
        if fr > q:
            outside = root
        else:
            inside = root
        root = 0.5 * (inside + outside)
        fr = f(root)
    return root, {"expansions": expansions, "hit_boundary": False, "residual": abs(fr - q)}


def profile_ci(sample: SurveySample, pv, mode: str = "JEL", level: float = 0.95, x_bar=None,
               v_p: Optional[float] = None) -> ConfidenceInterval:
    """Interval ``{theta : r(theta) <= chi2_1 quantile}`` for a JEL variant.

    Endpoints are found by geometric bracket expansion from the point
    estimate followed by Brent's method, to ``|r - q| <= 1e-9``.
    """
    if not 0.0 < level < 1.0:
        raise InputError(f"level must lie in (0, 1), got {level}")
    v = _pv_values(pv)
    if np.ptp(v) == 0:
        c = float(v[0])
        return ConfidenceInterval(c, c, level, mode, c, {"degenerate": True})
    f = ProfileRatio(sample, v, mode, x_bar, v_p=v_p)
    q = chi2_quantile(level)
    step = 0.5 * np.sqrt(f.summary.v_p_hat)
    if not np.isfinite(step) or step <= 0:
        step = 1e-3 * (f.upper_bound - f.lower_bound)
    step = min(step, 0.25 * (f.upper_bound - f.lower_bound))
    lo, dlo = _endpoint(f, f.point, f.lower_bound, q, step)
    f._lam = None
    hi, dhi = _endpoint(f, f.point, f.upper_bound, q, step)
    diag = {"degenerate": False, "lower": dlo, "upper": dhi, "evaluations": f.evaluations,
            "deff": f.summary.deff, "n_eff": f.summary.n_eff, "factor": f.factor}
    return ConfidenceInterval(float(lo), float(hi), level, mode, f.point, diag)


def normal_ci(sample: SurveySample, pv, level: float = 0.95, weight_mode: str = "design") -> ConfidenceInterval:
    """Wald interval ``point +/- z * sqrt(v)`` around the normalized-weight estimator."""
    if not 0.0 < level < 1.0:
        raise InputError(f"level must lie in (0, 1), got {level}")
    v = _pv_values(pv)
    point = hajek_estimate(sample, v, weight_mode)
    if np.ptp(v) == 0.0:
        c = float(v[0])
        return ConfidenceInterval(c, c, level, "NA", c, {"variance": 0.0, "degenerate": True})
    var = variance_estimate(sample, v, weight_mode)
    half = stats.norm.ppf(0.5 + level / 2.0) * np.sqrt(var)
    return ConfidenceInterval(point - half, point + half, level, "NA", point, {"variance": var})


def confidence_interval(sample: SurveySample, pv, method: str, level: float = 0.95, x_bar=None,
                        v_p: Optional[float] = None) -> ConfidenceInterval:
    """Dispatch on the method tag (``NA``, ``JEL``, ``JEL_d``, ``JEL_w``)."""
    if method == "NA":
        return normal_ci(sample, pv, level)
    if method in JEL_METHODS:
        return profile_ci(sample, pv, method, level, x_bar, v_p)
    raise InputError(f"unknown method {method!r}; choose from {METHODS}")


def quadratic_approximation(theta: float, sample: SurveySample, pv, weight_mode: str = "design") -> float:
    """Leading term ``(sum w~ V - theta)^2 / v_p`` of the ratio statistic's expansion."""
    v = _pv_values(pv)
    return (hajek_estimate(sample, v, weight_mode) - theta) ** 2 / variance_estimate(sample, v, weight_mode)


__all__ = [
    "ConfidenceInterval", "DesignSummary", "GregResult", "ProfileRatio", "chi2_quantile",
    "confidence_interval", "design_effect", "greg_estimate", "hajek_estimate", "jel_ratio",
    "normal_ci", "profile_ci", "quadratic_approximation", "regression_coefficients",
    "sample_weights", "variance_estimate", "NumericalError",
]
