import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from jelsurvey.designs import SurveySample, calibration_weights
from jelsurvey.errors import InputError
from jelsurvey.estimator import JackknifePseudoValues, JELInterval
from jelsurvey.inference import profile_ci
from jelsurvey.ustat import jackknife_pseudo_values


@pytest.fixture
def data():
    rng = np.random.default_rng(11)
    x = 1 + rng.exponential(size=60)
    y = 1 + x + rng.normal(size=60)
    pi = 0.5 * x / x.max()
    return y, 1 / pi, x


def test_params_and_clone():
    est = JELInterval(kernel="variance", method="JEL_w", level=0.9, x_bar=2.0)
    assert est.get_params() == {"kernel": "variance", "method": "JEL_w", "level": 0.9, "x_bar": 2.0}
    c = clone(est).set_params(level=0.8)
    assert c.level == 0.8 and est.level == 0.9


def test_fit_matches_functional_api(data):
    y, d, x = data
    est = JELInterval(kernel="pwm", method="JEL").fit(y, sample_weight=d)
    ref = profile_ci(SurveySample(y, 1 / d), jackknife_pseudo_values(y, "pwm"), "JEL")
    assert est.interval_ == pytest.approx((ref.lower, ref.upper), rel=1e-10)
    assert est.point_ == pytest.approx(ref.point)
    assert est.covers(est.point_)
    assert est.pseudo_values_.mean() == pytest.approx(est.t_n_)
    assert est.deff_ > 0 and est.n_eff_ > 0


@pytest.mark.parametrize("method", ["NA", "JEL", "JEL_d", "JEL_w"])
def test_all_methods(data, method):
    y, d, x = data
    xbar = x.mean()
    w = calibration_weights(d, x, xbar)
    est = JELInterval(method=method, x_bar=xbar).fit(y, sample_weight=d, X=x[:, None], calibration_weight=w)
    lo, hi = est.interval_
    assert lo < est.point_ < hi


def test_errors(data):
    y, d, x = data
    with pytest.raises(InputError):
        JELInterval(method="bogus").fit(y, d)
    with pytest.raises(InputError):
        JELInterval().fit(y, -d)
    with pytest.raises(ValueError):
        JELInterval().fit(y, d[:-1])
    with pytest.raises(ValueError):
        JELInterval().fit(np.append(y[:-1], np.nan), d)
    with pytest.raises(NotFittedError):
        JELInterval().covers(1.0)


def test_pseudo_value_transformer():
    y = np.array([1.0, 2.0, 3.0])
    t = JackknifePseudoValues(kernel="variance")
    out = t.fit_transform(y)
    assert out.shape == (3, 1)
    np.testing.assert_allclose(out[:, 0], jackknife_pseudo_values(y, "variance").values)
    assert t.t_n_ == pytest.approx(1.0)
    with pytest.raises(NotFittedError):
        JackknifePseudoValues().transform(y)
