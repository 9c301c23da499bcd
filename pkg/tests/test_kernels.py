import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given

from shapedpulse import _eta_py, _kernels
from shapedpulse.pulse import PRESET_NAMES, preset

from strategies import pulses

needs_ext = pytest.mark.skipif(_kernels.eta_compiled is None, reason="extension not built")


def test_backend_reported():
    assert _kernels.BACKEND in ("cython", "python")
    if _kernels.eta_compiled is not None:
        assert _kernels.eta_kernel is _kernels.eta_compiled


@needs_ext
@pytest.mark.parametrize("name", PRESET_NAMES)
def test_backends_agree_on_presets(name):
    p = preset(name)
    a = _kernels.eta_python(p.edges, p.amplitudes, p.tau_s)
    b = _kernels.eta_compiled(p.edges, p.amplitudes, p.tau_s)
    assert np.max(np.abs(np.subtract(a, b))) < 1e-14


@needs_ext
@given(pulses(max_segments=10, max_amp=20.0))
def test_backends_agree_random(p):
    a = _kernels.eta_python(p.edges, p.amplitudes, p.tau_s)
    b = _kernels.eta_compiled(p.edges, p.amplitudes, p.tau_s)
    scale = 1.0 + max(abs(v) for v in a)
    assert np.max(np.abs(np.subtract(a, b))) < 1e-13 * scale


def test_python_kernel_psi_edges():
    p = preset("A2NDPi2")
    ps = _eta_py.psi_edges(list(p.edges), list(p.amplitudes), p.tau_s)
    assert ps[-1] - ps[0] == pytest.approx(np.pi / 2, abs=1e-13)


def test_fallback_selected_by_environment():
    env = dict(os.environ, SHAPEDPULSE_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from shapedpulse import _kernels; print(_kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"
