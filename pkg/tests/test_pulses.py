import math

import numpy as np
import pytest
from scipy.integrate import quad

from twophoton.pulses import (
    EPS_W,
    delayed_rising_exp,
    eval_lambda,
    eval_w,
    eval_xi,
    gaussian,
    rising_exp,
    vacuum,
)

RNG = np.random.default_rng(7)

PHOTON_PULSES = [
    rising_exp(1.0),
    rising_exp(2.0),
    rising_exp(5.0),
    delayed_rising_exp(1.0, 10.0),
    delayed_rising_exp(2.0, 5.0),
    gaussian(1.46, 3.0),
    gaussian(2.92, 0.0),
]


def sample_times(p, n=50):
    lo = p.default_start() - 1.0
    hi = (0.0 if p.kind != "gaussian" else p.tau + 6.0 / p.omega) + 1.0
    return RNG.uniform(lo, hi, size=n)


def test_xi_rising_exp_values():
    p = rising_exp(1.0)
    assert eval_xi(p, -1e-12) == pytest.approx(-1.0, abs=1e-9)
    assert eval_xi(p, 0.5) == 0.0
    assert eval_xi(p, 0.0) == 0.0  # support is strictly t < 0


def test_xi_gaussian_peak_value():
    p = gaussian(1.0, 0.0)
    assert eval_xi(p, 0.0) == pytest.approx((2 * math.pi) ** -0.25, abs=1e-5)
    assert eval_xi(p, 0.0) == pytest.approx(0.63162, abs=1e-5)


def test_xi_delayed_shift():
    p = delayed_rising_exp(1.0, 10.0)
    assert eval_xi(p, -10.0 - 1e-12) == pytest.approx(-1.0, abs=1e-9)
    assert eval_xi(p, -10.0) == 0.0


def test_w_closed_form_values():
    assert eval_w(rising_exp(2.0), -1.0) == pytest.approx(1 - math.exp(-2), abs=1e-12)
    assert eval_w(rising_exp(2.0), -1.0) == pytest.approx(0.86466, abs=1e-5)
    assert eval_w(gaussian(1.3, 0.0), 0.0) == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("p", PHOTON_PULSES, ids=lambda p: f"{p.kind}")
def test_normalization_by_quadrature(p):
    lo = p.default_start() - 40.0
    hi = 1.0 if p.kind != "gaussian" else p.tau + 12.0 / p.omega
    val, err = quad(lambda s: float(eval_xi(p, s)) ** 2, lo, hi, limit=400)
    assert val == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("p", PHOTON_PULSES, ids=lambda p: f"{p.kind}")
def test_w_matches_quadrature(p):
    hi = 10.0 if p.kind != "gaussian" else p.tau + 14.0 / p.omega
    anchor = p.grid_anchor()
    for t in sample_times(p):
        points = [anchor] if anchor is not None and t < anchor < hi else None
        val, _ = quad(
            lambda s: float(eval_xi(p, s)) ** 2, t, hi, limit=400, points=points
        )
        assert float(eval_w(p, t)) == pytest.approx(val, abs=1e-8)


@pytest.mark.parametrize("p", PHOTON_PULSES, ids=lambda p: f"{p.kind}")
def test_w_monotonic_with_limits(p):
    ts = np.linspace(p.default_start() - 5.0, 10.0, 400)
    ws = np.asarray(eval_w(p, ts))
    assert np.all(np.diff(ws) <= 1e-15)
    assert float(eval_w(p, p.default_start() - 60.0)) == pytest.approx(1.0, abs=1e-9)
    assert float(eval_w(p, 1e3)) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("p", PHOTON_PULSES, ids=lambda p: f"{p.kind}")
def test_w_derivative_is_minus_intensity(p):
    # central differences away from the support edge
    h = 1e-5
    for t in sample_times(p, n=25):
        anchor = p.grid_anchor()
        if anchor is not None and abs(t - anchor) < 10 * h:
            continue
        dw = (float(eval_w(p, t + h)) - float(eval_w(p, t - h))) / (2 * h)
        assert dw == pytest.approx(-float(eval_xi(p, t)) ** 2, abs=1e-6)


def test_lambda_limit_and_matched_point():
    p = rising_exp(1.0)
    # w ~ 1 deep in the tail: lambda ~ xi
    assert float(eval_lambda(p, -20.0)) == pytest.approx(
        float(eval_xi(p, -20.0)), rel=1e-7
    )
    # at t = -ln 2 the tail mass is 1/2 and lambda = -1 exactly
    t = -math.log(2.0)
    assert float(eval_lambda(p, t)) == pytest.approx(-1.0, abs=1e-12)
    val, _ = quad(lambda s: float(eval_xi(p, s)) ** 2, t, 1.0, limit=200)
    assert float(eval_xi(p, t)) / math.sqrt(val) == pytest.approx(-1.0, abs=1e-7)


def test_lambda_clamped_when_exhausted():
    p = rising_exp(1.0)
    assert float(eval_lambda(p, 1.0)) == 0.0
    # just before the cutoff w < EPS_W and the clamp kicks in
    t = -1e-13
    assert float(eval_w(p, t)) < EPS_W
    assert float(eval_lambda(p, t)) == 0.0


@pytest.mark.parametrize("p", PHOTON_PULSES, ids=lambda p: f"{p.kind}")
def test_lambda_sq_times_w_is_intensity(p):
    for t in sample_times(p):
        w = float(eval_w(p, t))
        if w < EPS_W:
            continue
        lam = float(eval_lambda(p, t))
        assert lam * lam * w == pytest.approx(float(eval_xi(p, t)) ** 2, abs=1e-10)


def test_vacuum_channel():
    p = vacuum()
    ts = np.linspace(-5, 5, 11)
    assert np.all(np.asarray(eval_xi(p, ts)) == 0.0)
    assert np.all(np.asarray(eval_w(p, ts)) == 1.0)
    assert np.all(np.asarray(eval_lambda(p, ts)) == 0.0)
    assert p.default_start() is None


def test_invalid_parameters():
    with pytest.raises(ValueError):
        rising_exp(0.0)
    with pytest.raises(ValueError):
        delayed_rising_exp(1.0, -1.0)
    with pytest.raises(ValueError):
        gaussian(-1.0, 0.0)
