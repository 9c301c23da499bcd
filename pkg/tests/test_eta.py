import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shapedpulse.eta import (
    EtaSecond,
    eta_all,
    eta_first,
    eta_quadrature_oracle,
    eta_second,
    predicted_deviation,
)
from shapedpulse.pulse import PRESET_NAMES, flip_sign, make_pulse, preset, scale_duration

from strategies import pulses


def _oracle_all(p):
    e1, e2 = eta_quadrature_oracle(p)
    return np.array(e1.as_tuple() + e2.as_tuple())


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_closed_form_matches_quadrature_presets(name):
    p = preset(name)
    assert np.max(np.abs(np.array(eta_all(p)) - _oracle_all(p))) < 1e-9


@settings(max_examples=25)
@given(pulses(max_segments=5, max_amp=5.0))
def test_closed_form_matches_quadrature_random(p):
    assert np.max(np.abs(np.array(eta_all(p)) - _oracle_all(p))) < 1e-9


def test_constant_pulse_first_order():
    # a single square pi pulse
    e = eta_first(preset("SGLPi"))
    assert math.hypot(*e.as_tuple()) == pytest.approx(2 / math.pi, rel=1e-12)


def test_zero_pulse():
    p = make_pulse(1.0, 0.3, [], [0.0])
    e = eta_all(p)
    # psi == 0: eta11 = 0, eta12 = tau_p - tau_s + tau_s - tau_p = 0
    assert np.allclose(e, 0.0, atol=1e-15)


def test_tiny_segment_slopes_use_series():
    # amplitudes near zero exercise the small-argument branch
    for a in (1e-9, 1e-4, 0.2, 0.24, 0.26):
        p = make_pulse(1.0, 0.4, [0.25, 0.6], [a, -a, 2 * a])
        assert np.max(np.abs(np.array(eta_all(p)) - _oracle_all(p))) < 1e-10


@given(st.floats(0.05, 0.45), st.floats(0.5, 4.0), st.floats(0.5, 4.0))
def test_symmetric_pulses_zero_eta11_eta22(t1, a, b):
    p = make_pulse(1.0, 0.5, [t1, 1 - t1], [a, -b, a])
    e = eta_all(p)
    assert abs(e[0]) < 1e-13
    assert abs(e[3]) < 1e-13


@given(pulses())
def test_sign_flip_parity(p):
    e = np.array(eta_all(p))
    f = np.array(eta_all(flip_sign(p)))
    # odd in v: eta11, eta21, eta23; even: eta12, eta22
    assert np.allclose(f, e * np.array([-1, 1, -1, 1, -1]), atol=1e-12)


@given(pulses(), st.floats(0.2, 5.0))
def test_power_counting(p, s):
    e = np.array(eta_all(p))
    q = np.array(eta_all(scale_duration(p, s)))
    assert np.allclose(q[:2], s * e[:2], rtol=1e-9, atol=1e-12)
    assert np.allclose(q[2:], s * s * e[2:], rtol=1e-9, atol=1e-12)


def test_prediction_examples():
    upi = eta_second(preset("UPi"))
    assert predicted_deviation(upi, 1.0, 0.0) == pytest.approx(0.12295, abs=1e-4)
    assert predicted_deviation(upi, 1.0, 10.0) == pytest.approx(1.76469, abs=2e-4)
    assert predicted_deviation(EtaSecond(0.0, 0.0, 0.0), 0.3, 5.0) == 0.0
    assert predicted_deviation(upi, 0.01, 1.0) == pytest.approx(1e-4 * predicted_deviation(upi, 1.0, 1.0))
    with pytest.raises(ValueError):
        predicted_deviation(upi, -1.0, 1.0)


@given(st.floats(0.0, 50.0))
def test_prediction_linear_in_alpha_at_large_alpha(al):
    e = eta_second(preset("UPi2"))
    a = predicted_deviation(e, 1.0, al)
    assert a >= abs(e.eta23) - 1e-15
    assert a >= 4 * al * math.hypot(e.eta21, e.eta22) - 1e-12
