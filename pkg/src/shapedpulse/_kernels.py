"""Select the compiled eta kernel if it was built, else the pure-Python one.

Set ``SHAPEDPULSE_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _eta_py

try:
    if os.environ.get("SHAPEDPULSE_PURE_PYTHON"):
        raise ImportError("pure-Python kernel requested")
    from ._eta_ext import eta_coefficients as _compiled
except ImportError:
    _compiled = None

BACKEND = "cython" if _compiled is not None else "python"


def eta_python(edges, amps, tau_s):
    return _eta_py.eta_coefficients(list(edges), list(amps), float(tau_s))


if _compiled is not None:

    def eta_compiled(edges, amps, tau_s):
        return _compiled(
            np.ascontiguousarray(edges, dtype=np.float64),
            np.ascontiguousarray(amps, dtype=np.float64),
            float(tau_s),
        )

    eta_kernel = eta_compiled
else:
    eta_compiled = None
    eta_kernel = eta_python
