import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shapedpulse import analysis
from shapedpulse.analysis import (
    DeviationCurve,
    FitError,
    crossover,
    fit_prefactor,
    local_slope,
    log_grid,
    prefactor_vs_alpha,
    read_csv,
    slope_windows,
    sweep,
    write_csv,
)
from shapedpulse.pulse import preset


def synth(fn, lo=1e-4, hi=1e-1, per_decade=20, name="X", B=1.0):
    J = log_grid(lo, hi, per_decade=per_decade)
    return DeviationCurve(name, 3, 1.0, B, J, fn(J))


def test_log_grid():
    g = log_grid(1e-3, 1.0)
    assert len(g) == 61 and g[0] == pytest.approx(1e-3) and g[-1] == pytest.approx(1.0)
    assert len(log_grid(1e-3, 1.0, 40)) == 40
    with pytest.raises(ValueError):
        log_grid(0.0, 1.0)
    with pytest.raises(ValueError):
        log_grid(1.0, 0.5)


def test_curve_validation():
    with pytest.raises(ValueError):
        DeviationCurve("X", 3, 1.0, 1.0, [1.0, 0.5], [1.0, 1.0])
    with pytest.raises(ValueError):
        DeviationCurve("X", 3, 1.0, 1.0, [0.1, 0.5], [-1.0, 1.0])
    with pytest.raises(ValueError):
        DeviationCurve("X", 3, 1.0, 1.0, [0.1, 0.5], [1.0])


def test_slope_exact_power_law():
    _, s = local_slope(synth(lambda J: 3 * J**2))
    assert np.allclose(s, 2.0, atol=1e-10)


def test_slope_asymptotic():
    _, s = local_slope(synth(lambda J: J + J**3, lo=1e-5, hi=1e-3))
    assert abs(s[0] - 1.0) < 1e-8


def test_slope_preconditions():
    with pytest.raises(ValueError):
        local_slope(synth(lambda J: J, lo=0.1, hi=0.2, per_decade=2))
    c = synth(lambda J: J**2)
    c.d[3] = 0.0
    with pytest.raises(ValueError):
        local_slope(c)


@given(st.floats(0.01, 100.0), st.sampled_from([1.0, 2.0, 3.0]))
def test_fit_exact_power_law(a, p):
    f = fit_prefactor(synth(lambda J: a * J**p), p)
    assert f.prefactor == pytest.approx(a, rel=1e-10)
    assert f.error <= 1e-10 * a
    assert f.n_points == 61


def test_fit_picks_quadratic_window():
    c = synth(lambda J: 3 * J**2 + 30 * J**3, lo=1e-5, hi=1.0)
    f = fit_prefactor(c)
    assert f.indices[0] == 0
    # local slope 2 + 10J / (1 + 10J) leaves the band at J = 0.15 / 8.5
    assert 0.01 < f.window[1] <= 0.15 / 8.5
    assert f.prefactor == pytest.approx(3.0, rel=0.05)
    assert f.error > 0


def test_fit_deterministic():
    c = synth(lambda J: 3 * J**2 + 30 * J**3, lo=1e-5, hi=1.0)
    assert fit_prefactor(c) == fit_prefactor(c)


def test_fit_no_window():
    with pytest.raises(FitError):
        fit_prefactor(synth(lambda J: J), 2.0)


def test_slope_windows_min_points():
    c = synth(lambda J: J**2)
    assert slope_windows(c, 2.0) == [(0, len(c))]
    assert slope_windows(c, 3.0) == []


def test_crossover_analytic():
    a = synth(lambda J: J, lo=1e-2, hi=10.0)
    b = synth(lambda J: 2 * J**2, lo=1e-2, hi=10.0)
    assert crossover(a, b) == pytest.approx(0.5, rel=1e-12)
    assert crossover(a, a) is None


def test_crossover_grid_mismatch():
    a = synth(lambda J: J, lo=1e-2, hi=10.0)
    b = synth(lambda J: 2 * J**2, lo=1e-2, hi=1.0)
    with pytest.raises(ValueError):
        crossover(a, b)


def test_crossover_on_J_axis():
    J = log_grid(1e-2, 10.0)
    a = DeviationCurve("A", 3, 1.0, 2.0, J, J)
    b = DeviationCurve("B", 3, 1.0, 4.0, J, 2 * J**2)
    # shared J but distinct B_m: only the J axis is common
    assert crossover(a, b, axis="J") == pytest.approx(0.5)
    with pytest.raises(ValueError):
        crossover(a, b)


def test_crossover_touching_point():
    J = log_grid(0.1, 10.0, 5)
    a = DeviationCurve("A", 3, 1.0, 1.0, J, np.ones(5))
    b = DeviationCurve("B", 3, 1.0, 1.0, J, np.array([0.5, 1.0, 1.0, 2.0, 3.0]))
    assert crossover(a, b) == pytest.approx(J[1])


@given(st.lists(st.floats(1e-300, 1e300), min_size=2, max_size=30, unique=True), st.floats(0.0, 50.0))
def test_csv_roundtrip(vals, al):
    J = np.sort(np.array(vals))
    d = np.sqrt(J)
    c = DeviationCurve("UPi", 7, al, 3.5, J, d)
    text = write_csv([c])
    (back,) = read_csv(io.StringIO(text))
    assert np.array_equal(back.J, c.J)
    assert np.array_equal(back.d, c.d)
    assert back.alpha == c.alpha and back.N == c.N and back.pulse == c.pulse
    assert np.allclose(back.x, c.x, rtol=1e-12)


def test_csv_header_checked():
    with pytest.raises(ValueError):
        read_csv(io.StringIO("a,b\n1,2\n"))


def test_sweep_first_order_example():
    c = sweep(preset("SGLPi"), 2, 1.0, [1e-3])
    assert c.d[0] == pytest.approx(6.366e-4, rel=1e-3)


def test_sweep_rejects_bad_grid():
    with pytest.raises(ValueError):
        sweep(preset("SGLPi"), 2, 1.0, [0.0, 1e-3])
    with pytest.raises(ValueError):
        sweep(preset("SGLPi"), 2, 1.0, [1e-2, 1e-3])
    with pytest.raises(ValueError):
        sweep(preset("SGLPi"), 2, 1.0, [1e-3], expm="taylor")


def test_sweep_deterministic_and_thread_independent():
    p = preset("UPi")
    J = log_grid(1e-3, 1.0, 12)
    a = sweep(p, 5, 0.25, J, threads=1)
    b = sweep(p, 5, 0.25, J, threads=3)
    assert np.array_equal(a.d, b.d)


def test_sweep_monotone_small_J():
    p = preset("UPi")
    c = sweep(p, 7, 0.25, log_grid(1e-3, 1.0) * 7 * math.pi / 6)
    small = c.x <= 1e-2 * (1 + 1e-12)
    assert np.all(np.diff(c.d[small]) > 0)


def test_sweep_marks_failed_points(monkeypatch):
    orig = analysis._Chain.deviation

    def flaky(self, J, pulse, expm, svd):
        if abs(J - 0.01) < 1e-12:
            raise analysis.SimulationError("forced failure")
        return orig(self, J, pulse, expm, svd)

    monkeypatch.setattr(analysis._Chain, "deviation", flaky)
    c = sweep(preset("UPi"), 3, 1.0, [1e-3, 0.01, 0.1])
    assert len(c) == 2
    assert c.failed == [(0.01, "forced failure")]


def test_prefactor_vs_alpha_predictions():
    rows = prefactor_vs_alpha(preset("UPi"), 4, [0.0, 10.0], log_grid(1e-5, 1e-2, per_decade=8))
    assert rows[0].predicted == pytest.approx(0.12295, abs=1e-4)
    assert rows[1].predicted == pytest.approx(1.76469, abs=2e-4)
    for r in rows:
        assert r.fitted is not None
        assert r.relative_deviation < 0.35


def test_prefactor_vs_alpha_reports_failures():
    # first-order pulse: no quadratic window, reported inline
    rows = prefactor_vs_alpha(preset("SGLPi"), 3, [1.0], log_grid(1e-4, 1e-2, per_decade=8))
    assert rows[0].fitted is None and "no window" in rows[0].message
